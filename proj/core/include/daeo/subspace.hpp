#pragma once

#include <Eigen/Dense>

#include "daeo/types.hpp"

namespace daeo {

// A linear subspace held as an orthonormal basis. Immutable value type; the
// zero-dimensional subspace is an ambient x 0 matrix, never a zero column.
struct Subspace {
  Mat basis;         // ambient x dim, orthonormal columns
  double tol = 0.0;  // rank threshold used when the basis was constructed

  Eigen::Index ambient() const { return basis.rows(); }
  Eigen::Index dim() const { return basis.cols(); }

  static Subspace full(Eigen::Index n);
  static Subspace trivial(Eigen::Index n);

  // Orthogonal projector basis * basis^T.
  Mat projector() const { return basis * basis.transpose(); }
};

double sigma_max(const Mat& m);

// Numerical rank with an explicit scale: singular values count when they
// exceed threshold = rel_tol * scale. Defaults: rel_tol = max(rows,cols)*eps,
// scale = sigma_max(m). The scale override matters for projected products
// like (I - SS^T)A whose true value may be zero: measuring roundoff against
// the product's own largest singular value would hallucinate rank.
int numerical_rank(const Mat& m, double rel_tol = -1.0, double scale = -1.0);

Subspace image(const Mat& m, double rel_tol = -1.0, double scale = -1.0);
Subspace kernel(const Mat& m, double rel_tol = -1.0, double scale = -1.0);

// {x : Ax in S}. Computed as kernel((I - BB^T) A) with the rank threshold
// scaled by sigma_max(A); when S already spans the whole codomain the result
// is the full domain without any projection arithmetic.
Subspace preimage(const Mat& a, const Subspace& s);

Subspace intersect(const Subspace& s1, const Subspace& s2);
Subspace sum(const Subspace& s1, const Subspace& s2);

// Spectral norm of the projector difference; metric for subspace equality.
double projector_distance(const Subspace& s1, const Subspace& s2);
bool equals(const Subspace& s1, const Subspace& s2, double tol = 1e-10);

// Every column of inner lies within distance tol of outer.
bool contains(const Subspace& outer, const Subspace& inner, double tol = 1e-9);

// Distance of a single vector from the subspace, ||(I - BB^T) v||.
double distance(const Subspace& s, const Vec& v);

}  // namespace daeo

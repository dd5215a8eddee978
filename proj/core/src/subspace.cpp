#include "daeo/subspace.hpp"

#include <limits>
#include <stdexcept>

namespace daeo {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

double threshold_for(const Mat& m, double rel_tol, double scale,
                     const Eigen::JacobiSVD<Mat>& svd) {
  if (rel_tol <= 0.0) rel_tol = static_cast<double>(std::max(m.rows(), m.cols())) * kEps;
  if (scale < 0.0) scale = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return rel_tol * scale;
}

}  // namespace

Subspace Subspace::full(Eigen::Index n) {
  return Subspace{Mat::Identity(n, n), 0.0};
}

Subspace Subspace::trivial(Eigen::Index n) {
  return Subspace{Mat(n, 0), 0.0};
}

double sigma_max(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

int numerical_rank(const Mat& m, double rel_tol, double scale) {
  require_finite(m, "numerical_rank");
  if (m.size() == 0 || m.isZero(0.0)) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const double thr = threshold_for(m, rel_tol, scale, svd);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thr) ++r;
  return r;
}

Subspace image(const Mat& m, double rel_tol, double scale) {
  require_finite(m, "image");
  if (m.rows() < 1) throw std::invalid_argument("image: matrix must have rows");
  if (m.cols() == 0 || m.isZero(0.0))
    return Subspace{Mat(m.rows(), 0), 0.0};
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const double thr = threshold_for(m, rel_tol, scale, svd);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thr) ++r;
  return Subspace{svd.matrixU().leftCols(r), thr};
}

Subspace kernel(const Mat& m, double rel_tol, double scale) {
  require_finite(m, "kernel");
  if (m.cols() == 0) return Subspace{Mat(0, 0), 0.0};
  if (m.rows() == 0 || m.isZero(0.0))
    return Subspace::full(m.cols());
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const double thr = threshold_for(m, rel_tol, scale, svd);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thr) ++r;
  return Subspace{svd.matrixV().rightCols(m.cols() - r), thr};
}

Subspace preimage(const Mat& a, const Subspace& s) {
  require_finite(a, "preimage");
  if (s.ambient() != a.rows())
    throw std::invalid_argument("preimage: ambient of S must equal rows of A");
  if (s.dim() == a.rows())  // S is the whole codomain
    return Subspace::full(a.cols());
  const Mat projected = a - s.basis * (s.basis.transpose() * a);
  const double scale = std::max(sigma_max(a), std::numeric_limits<double>::min());
  return kernel(projected, -1.0, scale);
}

Subspace intersect(const Subspace& s1, const Subspace& s2) {
  if (s1.ambient() != s2.ambient())
    throw std::invalid_argument("intersect: ambient mismatch");
  const Eigen::Index n = s1.ambient();
  if (s1.dim() == 0 || s2.dim() == 0) return Subspace::trivial(n);
  if (s1.dim() == n) return s2;
  if (s2.dim() == n) return s1;
  // x in S1 cap S2  iff  both complement projectors annihilate x
  Mat stacked(2 * n, n);
  stacked.topRows(n) = Mat::Identity(n, n) - s1.projector();
  stacked.bottomRows(n) = Mat::Identity(n, n) - s2.projector();
  return kernel(stacked, -1.0, 1.0);
}

Subspace sum(const Subspace& s1, const Subspace& s2) {
  if (s1.ambient() != s2.ambient())
    throw std::invalid_argument("sum: ambient mismatch");
  if (s1.dim() == 0) return s2;
  if (s2.dim() == 0) return s1;
  Mat stacked(s1.ambient(), s1.dim() + s2.dim());
  stacked.leftCols(s1.dim()) = s1.basis;
  stacked.rightCols(s2.dim()) = s2.basis;
  return image(stacked, -1.0, 1.0);
}

double projector_distance(const Subspace& s1, const Subspace& s2) {
  if (s1.ambient() != s2.ambient())
    throw std::invalid_argument("projector_distance: ambient mismatch");
  const Mat diff = s1.projector() - s2.projector();
  return sigma_max(diff);
}

bool equals(const Subspace& s1, const Subspace& s2, double tol) {
  return s1.dim() == s2.dim() && projector_distance(s1, s2) <= tol;
}

bool contains(const Subspace& outer, const Subspace& inner, double tol) {
  if (inner.dim() == 0) return true;
  const Mat residual =
      inner.basis - outer.basis * (outer.basis.transpose() * inner.basis);
  return residual.colwise().norm().maxCoeff() <= tol;
}

double distance(const Subspace& s, const Vec& v) {
  const Vec residual = v - s.basis * (s.basis.transpose() * v);
  return residual.norm();
}

}  // namespace daeo

#pragma once

#include <cstdint>

#include "daeo/subspace.hpp"

namespace daeo {

// The one-parameter family sE - A; possibly non-square.
struct MatrixPencil {
  Mat E;
  Mat A;

  Eigen::Index rows() const { return E.rows(); }
  Eigen::Index cols() const { return E.cols(); }
  bool square() const { return E.rows() == E.cols(); }
};

// Limits of the nested chains
//   V^0 = R^n,  V^{i+1} = A^{-1}(E V^i)   (decreasing)
//   W^0 = {0},  W^{i+1} = E^{-1}(A W^i)   (increasing)
// together with the step counts at which each chain becomes stationary.
struct WongResult {
  Subspace Vstar;
  Subspace Wstar;
  int k_star = 0;
  int l_star = 0;
};

WongResult wong_limits(const MatrixPencil& p);

// Square and det(sE - A) not identically zero, decided by rank at
// deterministic sample points plus one seeded random point.
bool is_regular(const MatrixPencil& p, int n_samples = 5, std::uint64_t seed = 42);

// Nilpotency degree of the algebraic part; equals the W-chain step count for
// regular pencils. Throws std::invalid_argument on non-regular pencils.
int pencil_index(const MatrixPencil& p);

// Generic rank of sE - A over rational functions: max sampled rank.
int rational_rank(const MatrixPencil& p, int n_samples = 5, std::uint64_t seed = 42);

// Bases (M, N) splitting a regular index <= 1 pencil into an ODE part and a
// trivial algebraic part: M*E*N = diag(I_r, 0), M*A*N = diag(A_r, I).
struct QwfTransform {
  Mat M;
  Mat N;
  Mat A_r;
  int r = 0;
};

// Throws std::invalid_argument when the pencil is not regular or the index
// exceeds one, std::runtime_error when [EV, AW] is numerically singular
// (condition number above 1e12).
QwfTransform qwf_transform(const MatrixPencil& p);

}  // namespace daeo

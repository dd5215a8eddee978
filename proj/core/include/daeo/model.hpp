#pragma once

#include "daeo/expr.hpp"
#include "daeo/types.hpp"

namespace daeo {

// Semi-explicit description of d/dt E x = A x + B_L f_L(x,u,y) + B_M f_M(J x,u,y),
// y = C x + h(u), together with the declared nonlinearity certificates:
// F bounds f_L increments (Lipschitz shape) and (Theta, mu) bound f_M
// increments (generalized monotonicity). f_M is written in w1..w_{q_M},
// the components of J x.
struct DaeSystem {
  Mat E, A;       // l x n
  Mat B_L, B_M;   // l x q_L, l x q_M
  Mat J;          // q_M x n, full row rank
  Mat C;          // p x n
  Mat F;          // j x n
  Mat Theta;      // q_M x q_M, may be singular
  double mu = 0.0;
  VectorFunction f_L, f_M, h;
  int l = 0, n = 0, m = 0, p = 0, q_L = 0, q_M = 0;

  // Throws std::invalid_argument on shape mismatches, non-finite entries,
  // or rank-deficient J.
  void validate() const;
};

// Estimator gains: the innovation terms enter as L1 d in the differential
// equations and L2 d in the output equation. k = 0 is a plain system copy.
struct ObserverGains {
  Mat L1;  // l x k
  Mat L2;  // p x k
  int k = 0;
};

// Matrices of the combined error/innovation system in dimension n + k.
struct AugmentedSystem {
  Mat calE;       // (l+p) x (n+k), blockdiag(E, 0)
  Mat calA;       // (l+p) x (n+k), [[A, L1], [C, L2]]
  Mat calB;       // (l+p) x (q_L+q_M), [[B_L, B_M], [0, 0]]
  Mat A_hat;      // (l+p) x (n+k), [[A, 0], [C, 0]]
  Mat H;          // (n+k) x (n+k), projector onto the last k coordinates
  Mat calF;       // j x (n+k), [F, 0]
  Mat Theta_hat;  // (n+k) x (q_L+q_M), [[0, J' Theta], [0, 0]]
  Mat calJ;       // (n+k) x (n+k), blockdiag(J'J, 0)
  Mat Lambda_qL;  // (q_L+q_M) x (q_L+q_M), projector onto the first q_L coords
  double mu = 0.0;
  int n = 0, k = 0, l = 0, p = 0, q_L = 0, q_M = 0;
};

// Gains as the (l+p) x (n+k) error-dynamics perturbation: zero first n
// columns, [L1; L2] in the last k.
Mat embed_gains(const ObserverGains& gains, int l, int p, int n);

AugmentedSystem build_augmented(const DaeSystem& sys, const ObserverGains& gains);

// L_hat is (l+p) x (n+k) with zero first n columns; calA = A_hat + L_hat.
AugmentedSystem build_augmented_from_L(const DaeSystem& sys, const Mat& L_hat);

// Recovers (L1, L2) from the last k columns of calA.
ObserverGains gains_of(const AugmentedSystem& aug);

struct RankCheckResult {
  int rank = 0;          // rational rank of [sE - A; C]
  bool rank_equals_n = false;
  bool n_le_lp = false;  // n <= l + p, needed for the square certificates
};

/// Necessary condition for any estimator design to exist: the stacked pencil
// [sE - A; C] must have full column rank for some s.
RankCheckResult necessary_rank_check(const DaeSystem& sys);

}  // namespace daeo

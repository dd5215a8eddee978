#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "daeo/model.hpp"
#include "daeo/synth.hpp"
#include "daeo/types.hpp"

namespace daeo {

// Which shape the projected Lyapunov block must take:
//   definite      strict E'P > 0 on Vbar* (full estimator certificate)
//   semidefinite  E'P >= 0 on Vbar* (reduced-form certificate)
enum class LmiMode { definite, semidefinite };

// Feasibility program over theta = (vec(P), vec(K_active), delta):
//   M1(theta) = S' Q(P,K,delta) S   <= -eps I   on the confinement subspace
//   M2(theta) = Sbar' sym(calE'P) Sbar  >= eps I (definite) or >= 0 (semidef)
//   Ae theta + ce = 0   (symmetry of calE'P, optionally the gain identity)
//   delta >= eps
// theta layout: P column-major first, then the last k columns of K
// column-major, then delta. Both maps are affine and are recovered by
// probing the exact certificate assembly, so the solver can never drift
// from what the verifier checks.
struct LmiProblem {
  DaeSystem sys;
  AugmentedSystem aug;
  LmiMode mode = LmiMode::definite;
  double eps = 1e-4;
  bool pin_gains = true;  // include P' L_hat = K H among the equalities
  Mat L_hat;              // (l+p) x (n+k), zero first n columns

  Mat S;     // basis of the error confinement subspace, (n+k+q_L+q_M) x m1
  Mat Sbar;  // basis of its state part, (n+k) x m2

  int n_theta = 0;
  int n_p = 0;  // entries of P
  int n_k = 0;  // active entries of K
  int m1 = 0;
  int m2 = 0;

  Mat A1;
  Vec c1;  // vec(M1) = A1 theta + c1
  Mat A2;
  Vec c2;  // vec(M2) = A2 theta + c2
  Mat Ae;
  Vec ce;  // equality residual = Ae theta + ce

  LmiCertificate unpack(const Vec& theta) const;
  Vec pack(const LmiCertificate& cert) const;
};

LmiProblem assemble(const DaeSystem& sys, const Mat& L_hat, LmiMode mode,
                    double eps = 1e-4, bool pin_gains = true);

// The solver reports feasible or indeterminate, never infeasible: failure
// to converge proves nothing about the problem.
enum class SolveStatus { feasible, indeterminate };
const char* solve_status_name(SolveStatus s);

struct SolveOptions {
  int max_iters = 20000;
  double tol = 1e-9;      // residual below which theta is accepted
  double clamp = 1.0;     // eigenvalue level the projections clamp to
  double relax = 1.7;     // over-relaxation factor for the pullback steps
  std::uint64_t seed = 42;
  int max_restarts = 3;   // fresh random starts after divergence
};

struct SolveResult {
  SolveStatus status = SolveStatus::indeterminate;
  LmiCertificate cert;
  int iters = 0;
  int restarts = 0;
  double residual = std::numeric_limits<double>::infinity();
  std::string detail;
};

// Alternating-projection feasibility search in the null space of the
// equality constraints. Every point reported feasible is re-verified
// against a freshly recomputed confinement subspace and the certificate
// assembly before being returned; a point that fails that audit is
// downgraded to indeterminate.
SolveResult solve_feasibility(const LmiProblem& prob,
                              const SolveOptions& opts = {});
SolveResult solve_feasibility(const LmiProblem& prob,
                              const LmiCertificate& warm,
                              const SolveOptions& opts = {});

struct GainSearchResult {
  bool success = false;
  ObserverGains gains;
  LmiCertificate cert;
  CertificateReport report;  // final full estimator certificate
  std::vector<double> residual_trace;
  int rounds_used = 0;
  std::string detail;
};

// Fixed-point search over gains: certify the current L_hat with the gain
// identity pinned; on failure, re-solve with the gain block free and
// extract a new L_hat from (P, K). Success requires the returned gains to
// pass the full estimator certificate end to end.
GainSearchResult iterate_gain_search(const DaeSystem& sys, int k,
                                     const Mat& initial_L_hat, int rounds,
                                     const SolveOptions& sopt = {},
                                     const SynthOptions& vopt = {});

}  // namespace daeo

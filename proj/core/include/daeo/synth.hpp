#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "daeo/model.hpp"
#include "daeo/subspace.hpp"
#include "daeo/types.hpp"

namespace daeo {

// Certificate variables of the quadratic estimate: Lyapunov-like P, gain
// coupling K (only the last k columns matter, the rest are fixed to zero),
// and the multiplier delta weighting the Lipschitz channel.
struct LmiCertificate {
  Mat P;             // (l+p) x (n+k)
  Mat K;             // (n+k) x (n+k)
  double delta = 1.0;
};

enum class Verdict : int {
  pass,
  fail,
  indeterminate,
  sampled_only,  // holds at every sampled point; no global claim
  not_present,   // condition vacuous for these dimensions
  assumed        // outside numerical reach, taken as hypothesis
};

const char* verdict_name(Verdict v);

struct ConditionRecord {
  std::string name;
  Verdict verdict = Verdict::indeterminate;
  double margin = std::numeric_limits<double>::quiet_NaN();
  std::string detail;
};

struct CertificateReport {
  std::string claim;  // what a passing report certifies
  bool passed = false;
  std::vector<ConditionRecord> conditions;
  Mat Vstar;  // orthonormal basis of the invariant subspace used (may be empty)
  Mat Vbar;   // orthonormal basis of its projection onto the (n+k) state part
  // Informational decay indicator: margin of the projected quadratic form
  // divided by the largest eigenvalue of the projected calE'P.
  double beta = std::numeric_limits<double>::quiet_NaN();

  const ConditionRecord* find(const std::string& name) const;
};

struct SynthOptions {
  // Strict matrix inequalities are certified with margin eps_rel * scale of
  // the projected matrix.
  double eps_rel = 1e-7;
  // Tolerances for equality-type residuals (symmetry, gain consistency),
  // relative to the matrices involved.
  double residual_tol = 1e-8;
  // Rounding tolerance for semidefinite (non-strict) tests.
  double psd_tol = 1e-9;
};

// The quadratic-form matrix of size (n+k+q_L+q_M): blocks
//   [ A_hat'P + P'A_hat + H'K' + K H + delta calF'calF - mu calJ,  P'calB + Theta_hat ]
//   [ (P'calB + Theta_hat)',                                      -delta Lambda_qL   ]
// symmetrized to remove rounding residue.
Mat build_q(const AugmentedSystem& aug, const LmiCertificate& cert);

// Invariant subspace of the rectangular pencil s[calE, 0] - [calA, calB]
// that confines the error/innovation/nonlinearity-increment trajectories.
Subspace error_confinement_subspace(const AugmentedSystem& aug);

// Certificate check for the state-estimator property with a definite
// Lyapunov form: the quadratic form must be negative definite on the
// confinement subspace and calE'P positive definite on its state projection.
CertificateReport certify_estimator(const DaeSystem& sys,
                                    const AugmentedSystem& aug,
                                    const LmiCertificate& cert,
                                    const SynthOptions& opt = {});

struct ExtractedGains {
  ObserverGains gains;
  double residual = 0.0;  // least-squares residual of P'L_hat = K H
  bool exists = false;    // residual within tolerance
};

// Solves P'L_hat = K H for L_hat in least squares (minimum norm) and slices
// (L1, L2) out of it. exists = false means im(K H) is not contained in
// im(P') and no gain realizes this certificate.
ExtractedGains extract_gains(const LmiCertificate& cert, int n, int k, int l,
                             int p, double tol_rel = 1e-8);

struct GlGm {
  Mat G_L;  // n x q_L
  Mat G_M;  // n x q_M
};

// Steady-state gains of the algebraic part: G_X = -[I_n, 0] W [0, I]
// [calE V, calA W]^{-1} [B_X; 0] for the square gain-installed pencil.
// Requires the pencil regular with index at most one.
GlGm compute_gl_gm(const DaeSystem& sys, const ObserverGains& gains);

// Certificate check in reduced form: requires the square case k = l+p-n,
// P invertible, the quadratic form negative definite on the confinement
// subspace, calE'P positive semidefinite there, a regular index-<=1
// estimator pencil, and the small-gain conditions on G_L, G_M.
CertificateReport certify_estimator_reduced(const DaeSystem& sys,
                                            const ObserverGains& gains,
                                            const LmiCertificate& cert,
                                            const SynthOptions& opt = {});

// Special case E = 0 (purely algebraic plant): the subspace-restricted test
// reduces to an eigenvalue test of a dense (q_L+q_M) matrix. Requires calA
// invertible and the gain identity P'L_hat = K H.
CertificateReport check_algebraic_case(const DaeSystem& sys,
                                       const ObserverGains& gains,
                                       const LmiCertificate& cert,
                                       const SynthOptions& opt = {});

struct SamplingPlan {
  double box = 1.0;  // half-width for sampled (x1, u, y) points
  int n_samples = 200;
  std::uint64_t seed = 7;
  double cond_limit = 1e12;  // invertibility guard for the x2-Jacobian
  // Growth bound omega(s) = omega_c * (1 + s); omega_c <= 0 means estimate
  // the constant from samples instead of checking against a given one.
  double omega_c = -1.0;
};

// Sampled checks for the asymptotic-observer property on top of a passing
// reduced-form certificate: solvability of the algebraic part for x2,
// invertibility of its Jacobian, and the growth bound on the implicit
// function, all at sampled points only. Never claims more than sampled
// evidence.
CertificateReport certify_observer_sampled(const DaeSystem& sys,
                                           const ObserverGains& gains,
                                           const LmiCertificate& cert,
                                           const SamplingPlan& plan,
                                           const SynthOptions& opt = {});

}  // namespace daeo

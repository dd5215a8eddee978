#pragma once

#include <string>
#include <vector>

#include "daeo/expr.hpp"
#include "daeo/model.hpp"
#include "daeo/subspace.hpp"
#include "daeo/types.hpp"

namespace daeo {

// The gain-installed estimator pencil brought to quasi-Weierstrass form:
// coordinates (x1, x2) with (z; d) = N (x1; x2), the ODE part
// x1' = Ar x1 + B1 fhat and the algebraic part 0 = x2 + B2 fhat, where
// fhat = [f_L(z,u,y); f_M(Jz,u,y); h(u) - y]. Plant trajectories are the
// same system with y = Cz + h(u) substituted, which pins d to zero.
struct ReducedSystem {
  DaeSystem sys;
  ObserverGains gains;
  Mat M, N;  // QWF transform of s calE - calA
  Mat Ar;    // r x r
  int r = 0;
  int n = 0, k = 0;
  Mat B1, B2;   // M [[B_L, B_M, 0], [0, 0, I_p]] split at row r
  Mat N1, N2;   // first n rows of N, columns split at r
  Mat Nd;       // last k rows of N
  Mat N_inv;

  // Derivative tables of the nonlinearities, differentiated once at build.
  std::vector<std::vector<ExprPtr>> dfL_dx, dfL_dy, dfL_du;
  std::vector<std::vector<ExprPtr>> dfM_dw, dfM_dy, dfM_du;
  std::vector<std::vector<ExprPtr>> dh_du;

  // Throws std::invalid_argument when the estimator pencil is not square
  // (simulation unsupported) and propagates regularity/index errors.
  static ReducedSystem build(const DaeSystem& sys, const ObserverGains& gains);

  Vec state_of(const Vec& x1, const Vec& x2) const;  // z = N1 x1 + N2 x2
  Vec fhat(const Vec& x, const Vec& u, const Vec& y) const;
  Vec g_value(const Vec& x1, const Vec& x2, const Vec& u, const Vec& y) const;
  Vec ode_rhs(const Vec& x1, const Vec& x2, const Vec& u, const Vec& y) const;

  // d fhat / d x for fixed y (estimator mode) or with y = Cx + h(u)
  // substituted (plant mode).
  Mat fhat_jacobian_x(const Vec& x, const Vec& u, const Vec& y,
                      bool plant_mode) const;
  Mat g_jacobian_x2(const Vec& x1, const Vec& x2, const Vec& u, const Vec& y,
                    bool plant_mode) const;
};

struct NewtonOptions {
  double tol = 1e-10;  // absolute bound on ||G||_inf
  int max_iter = 50;
};

struct NewtonResult {
  Vec x2;
  int iters = 0;
  double residual = 0.0;
};

// Damped Newton on G(x1, x2, u, y) = 0 in x2. In plant mode y is recomputed
// from the candidate state each evaluation. Throws std::runtime_error on
// non-convergence or a singular Jacobian.
NewtonResult solve_algebraic(const ReducedSystem& red, const Vec& x1,
                             const Vec& u, const Vec& y, const Vec& guess,
                             bool plant_mode, const NewtonOptions& opt = {});

// Completes a reduced state (x1 given) to a consistent one, G = 0.
NewtonResult consistent_init(const ReducedSystem& red, const Vec& x1,
                             const Vec& u0, const Vec& y0, bool plant_mode,
                             const NewtonOptions& opt = {});

// Projects a full state guess x0 into reduced coordinates and re-solves the
// constraint: (x1, x2) with x1 from N^{-1} (x0; 0) and x2 consistent.
struct ReducedState {
  Vec x1, x2;
  double projection_distance = 0.0;  // || realized state - requested x0 ||
  double g_residual = 0.0;
};
ReducedState project_initial_state(const ReducedSystem& red, const Vec& x0,
                                   const Vec& u0, const Vec& y0,
                                   bool plant_mode,
                                   const NewtonOptions& opt = {});

struct PlantTrace {
  Vec t;
  Mat x;  // one row per grid point
  Mat y;
  Eigen::VectorXi newton_iters;
  Vec g_residual;
};

struct SimTrace {
  Vec t;
  Mat x, z, d;  // one row per grid point
  Vec err_norm, d_norm;
  Eigen::VectorXi newton_iters;
  Vec g_residual;
};

// Classical four-stage one-step integration of the ODE part with the
// algebraic part re-solved by Newton at every stage.
PlantTrace simulate_plant(const ReducedSystem& red, const VectorFunction& u,
                          const Vec& x0, double t0, double t1, double dt,
                          const NewtonOptions& opt = {});

// Plant and estimator advanced together; the estimator consumes the plant's
// stage outputs y. z0 and x0 are projected to consistency first.
SimTrace simulate_coupled(const ReducedSystem& red, const VectorFunction& u,
                          const Vec& x0, const Vec& z0, double t0, double t1,
                          double dt, const NewtonOptions& opt = {});

// Max over the grid of dist((e, d, phi)(t), Vstar), phi recomputed from the
// nonlinearities along the trace.
double check_trajectory_subspace(const DaeSystem& sys, const VectorFunction& u,
                                 const SimTrace& trace, const Subspace& Vstar);

struct DecayEstimate {
  double beta = 0.0;          // least-squares slope of -log||e|| on the tail half
  double fit_residual = 0.0;  // rms residual of the linear fit
  bool decaying = false;
};
DecayEstimate estimate_decay(const SimTrace& trace);

// Header: t, x1..xn, z1..zn, d1..dk, err_norm, d_norm, newton_iters,
// g_residual; 17 significant digits.
void write_csv(const SimTrace& trace, const std::string& path);

}  // namespace daeo

#include "daeo/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <Eigen/LU>

#include "daeo/pencil.hpp"

namespace daeo {

namespace {

Mat eval_table(const std::vector<std::vector<ExprPtr>>& table, int cols,
               const EvalContext& ctx) {
  Mat out(static_cast<int>(table.size()), cols);
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = eval(*table[i][j], ctx);
  return out;
}

Vec eval_u(const VectorFunction& u, double t) {
  EvalContext ctx;
  ctx.t = t;
  return u.eval(ctx);
}

void validate_input_signal(const VectorFunction& u, int m) {
  if (u.out_dim() != m)
    throw std::invalid_argument("input signal must have m components");
  if (!u.allow_t)
    throw std::invalid_argument("input signal must be declared over t");
  u.validate();
}

}  // namespace

ReducedSystem ReducedSystem::build(const DaeSystem& sys,
                                   const ObserverGains& gains) {
  AugmentedSystem aug = build_augmented(sys, gains);
  if (aug.l + aug.p != aug.n + aug.k)
    throw std::invalid_argument(
        "estimator pencil is not square (l+p != n+k): simulation unsupported");

  ReducedSystem red;
  red.sys = sys;
  red.gains = gains;
  red.n = aug.n;
  red.k = aug.k;

  MatrixPencil pencil{aug.calE, aug.calA};
  QwfTransform qwf = qwf_transform(pencil);
  red.M = qwf.M;
  red.N = qwf.N;
  red.Ar = qwf.A_r;
  red.r = qwf.r;
  red.N_inv = red.N.partialPivLu().solve(
      Mat::Identity(red.N.rows(), red.N.cols()));

  const int lp = aug.l + aug.p;
  const int qL = sys.q_L, qM = sys.q_M, p = sys.p;
  Mat B_full = Mat::Zero(lp, qL + qM + p);
  B_full.block(0, 0, sys.l, qL) = sys.B_L;
  B_full.block(0, qL, sys.l, qM) = sys.B_M;
  B_full.block(sys.l, qL + qM, p, p).setIdentity();
  const Mat Bh = red.M * B_full;
  red.B1 = Bh.topRows(red.r);
  red.B2 = Bh.bottomRows(lp - red.r);

  const Mat Nbar = red.N.topRows(red.n);
  red.Nd = red.N.bottomRows(red.k);
  red.N1 = Nbar.leftCols(red.r);
  red.N2 = Nbar.rightCols(red.n + red.k - red.r);

  red.dfL_dx = sys.f_L.derivative_table(VarKind::x);
  red.dfL_dy = sys.f_L.derivative_table(VarKind::y);
  red.dfL_du = sys.f_L.derivative_table(VarKind::u);
  red.dfM_dw = sys.f_M.derivative_table(VarKind::w);
  red.dfM_dy = sys.f_M.derivative_table(VarKind::y);
  red.dfM_du = sys.f_M.derivative_table(VarKind::u);
  red.dh_du = sys.h.derivative_table(VarKind::u);
  return red;
}

Vec ReducedSystem::state_of(const Vec& x1, const Vec& x2) const {
  return N1 * x1 + N2 * x2;
}

Vec ReducedSystem::fhat(const Vec& x, const Vec& u, const Vec& y) const {
  EvalContext ctx;
  ctx.x = x;
  ctx.u = u;
  ctx.y = y;
  ctx.w = sys.J * x;
  Vec out(sys.q_L + sys.q_M + sys.p);
  if (sys.q_L) out.head(sys.q_L) = sys.f_L.eval(ctx);
  if (sys.q_M) out.segment(sys.q_L, sys.q_M) = sys.f_M.eval(ctx);
  out.tail(sys.p) = sys.h.eval(ctx) - y;
  return out;
}

Vec ReducedSystem::g_value(const Vec& x1, const Vec& x2, const Vec& u,
                           const Vec& y) const {
  return x2 + B2 * fhat(state_of(x1, x2), u, y);
}

Vec ReducedSystem::ode_rhs(const Vec& x1, const Vec& x2, const Vec& u,
                           const Vec& y) const {
  return Ar * x1 + B1 * fhat(state_of(x1, x2), u, y);
}

Mat ReducedSystem::fhat_jacobian_x(const Vec& x, const Vec& u, const Vec& y,
                                   bool plant_mode) const {
  EvalContext ctx;
  ctx.x = x;
  ctx.u = u;
  ctx.y = y;
  ctx.w = sys.J * x;
  const int rows = sys.q_L + sys.q_M + sys.p;
  Mat D = Mat::Zero(rows, sys.n);
  if (sys.q_L) {
    Mat DfLx = eval_table(dfL_dx, sys.n, ctx);
    if (plant_mode) DfLx += eval_table(dfL_dy, sys.p, ctx) * sys.C;
    D.topRows(sys.q_L) = DfLx;
  }
  if (sys.q_M) {
    Mat DfMx = eval_table(dfM_dw, sys.q_M, ctx) * sys.J;
    if (plant_mode) DfMx += eval_table(dfM_dy, sys.p, ctx) * sys.C;
    D.middleRows(sys.q_L, sys.q_M) = DfMx;
  }
  if (plant_mode) D.bottomRows(sys.p) = -sys.C;
  return D;
}

Mat ReducedSystem::g_jacobian_x2(const Vec& x1, const Vec& x2, const Vec& u,
                                 const Vec& y, bool plant_mode) const {
  const int nfree = static_cast<int>(x2.size());
  return Mat::Identity(nfree, nfree) +
         B2 * fhat_jacobian_x(state_of(x1, x2), u, y, plant_mode) * N2;
}

NewtonResult solve_algebraic(const ReducedSystem& red, const Vec& x1,
                             const Vec& u, const Vec& y, const Vec& guess,
                             bool plant_mode, const NewtonOptions& opt) {
  NewtonResult res;
  res.x2 = guess;
  const int nfree = static_cast<int>(guess.size());
  if (nfree == 0) return res;

  auto y_for = [&](const Vec& x2) {
    if (!plant_mode) return y;
    return Vec(red.sys.C * red.state_of(x1, x2) +
               red.sys.h.eval([&] {
                 EvalContext c;
                 c.u = u;
                 return c;
               }()));
  };

  for (int it = 0; it < opt.max_iter; ++it) {
    const Vec yy = y_for(res.x2);
    const Vec g = red.g_value(x1, res.x2, u, yy);
    res.residual = g.lpNorm<Eigen::Infinity>();
    res.iters = it;
    if (res.residual <= opt.tol) return res;

    const Mat Jg = red.g_jacobian_x2(x1, res.x2, u, yy, plant_mode);
    Eigen::FullPivLU<Mat> lu(Jg);
    if (!lu.isInvertible())
      throw std::runtime_error("singular x2-Jacobian in Newton iteration");
    const Vec step = lu.solve(-g);

    double lam = 1.0;
    const double base = g.norm();
    for (int halve = 0; halve < 30; ++halve) {
      const Vec trial = res.x2 + lam * step;
      const Vec yt = y_for(trial);
      if (red.g_value(x1, trial, u, yt).norm() < base) break;
      lam *= 0.5;
    }
    res.x2 += lam * step;
  }
  const Vec yy = y_for(res.x2);
  res.residual = red.g_value(x1, res.x2, u, yy).lpNorm<Eigen::Infinity>();
  if (res.residual <= opt.tol) {
    res.iters = opt.max_iter;
    return res;
  }
  throw std::runtime_error("Newton on the algebraic constraint did not converge");
}

NewtonResult consistent_init(const ReducedSystem& red, const Vec& x1,
                             const Vec& u0, const Vec& y0, bool plant_mode,
                             const NewtonOptions& opt) {
  const int nfree = red.n + red.k - red.r;
  return solve_algebraic(red, x1, u0, y0, Vec::Zero(nfree), plant_mode, opt);
}

ReducedState project_initial_state(const ReducedSystem& red, const Vec& x0,
                                   const Vec& u0, const Vec& y0,
                                   bool plant_mode, const NewtonOptions& opt) {
  if (x0.size() != red.n)
    throw std::invalid_argument("initial state must have n components");
  Vec full = Vec::Zero(red.n + red.k);
  full.head(red.n) = x0;
  const Vec w = red.N_inv * full;
  ReducedState st;
  st.x1 = w.head(red.r);
  const Vec guess = w.tail(red.n + red.k - red.r);
  NewtonResult nr = solve_algebraic(red, st.x1, u0, y0, guess, plant_mode, opt);
  st.x2 = nr.x2;
  st.g_residual = nr.residual;
  st.projection_distance = (red.state_of(st.x1, st.x2) - x0).norm();
  return st;
}

namespace {

constexpr double RK_C[4] = {0.0, 0.5, 0.5, 1.0};
constexpr double RK_B[4] = {1.0 / 6, 2.0 / 6, 2.0 / 6, 1.0 / 6};

struct StepResult {
  Vec x1_next;
  Vec x2_warm;
  std::vector<Vec> stage_y;  // emitted in plant mode
  int newton_iters = 0;
};

// One half-explicit classical four-stage step. In estimator mode stage_y
// supplies the plant's stage outputs.
StepResult rk4_step(const ReducedSystem& red, double t, const Vec& x1,
                    const Vec& x2_guess, const VectorFunction& u, double dt,
                    bool plant_mode, const std::vector<Vec>* stage_y,
                    const NewtonOptions& opt) {
  StepResult out;
  std::vector<Vec> ks;
  Vec x2s = x2_guess;
  for (int i = 0; i < 4; ++i) {
    const double ti = t + RK_C[i] * dt;
    Vec x1i = x1;
    if (i == 1) x1i = x1 + 0.5 * dt * ks[0];
    else if (i == 2) x1i = x1 + 0.5 * dt * ks[1];
    else if (i == 3) x1i = x1 + dt * ks[2];
    const Vec ui = eval_u(u, ti);
    Vec yi = plant_mode ? Vec(Vec::Zero(red.sys.p)) : (*stage_y)[i];
    NewtonResult nr = solve_algebraic(red, x1i, ui, yi, x2s, plant_mode, opt);
    out.newton_iters = std::max(out.newton_iters, nr.iters);
    x2s = nr.x2;
    if (plant_mode) {
      EvalContext c;
      c.u = ui;
      yi = red.sys.C * red.state_of(x1i, x2s) + red.sys.h.eval(c);
      out.stage_y.push_back(yi);
    }
    ks.push_back(red.ode_rhs(x1i, x2s, ui, yi));
  }
  out.x1_next = x1;
  for (int i = 0; i < 4; ++i) out.x1_next += dt * RK_B[i] * ks[i];
  out.x2_warm = x2s;
  return out;
}

int step_count(double t0, double t1, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("dt must be positive and finite");
  if (!(t1 > t0)) throw std::invalid_argument("time span must be increasing");
  const int steps = static_cast<int>(std::llround((t1 - t0) / dt));
  if (steps < 1) throw std::invalid_argument("time span shorter than dt");
  return steps;
}

}  // namespace

PlantTrace simulate_plant(const ReducedSystem& red, const VectorFunction& u,
                          const Vec& x0, double t0, double t1, double dt,
                          const NewtonOptions& opt) {
  validate_input_signal(u, red.sys.m);
  const int steps = step_count(t0, t1, dt);
  const Vec u0 = eval_u(u, t0);
  ReducedState st =
      project_initial_state(red, x0, u0, Vec::Zero(red.sys.p), true, opt);

  PlantTrace tr;
  tr.t.resize(steps + 1);
  tr.x.resize(steps + 1, red.n);
  tr.y.resize(steps + 1, red.sys.p);
  tr.newton_iters.resize(steps + 1);
  tr.g_residual.resize(steps + 1);

  auto record = [&](int i, double t, const Vec& x1, const Vec& x2, int iters,
                    double resid) {
    const Vec x = red.state_of(x1, x2);
    EvalContext c;
    c.u = eval_u(u, t);
    tr.t(i) = t;
    tr.x.row(i) = x.transpose();
    tr.y.row(i) = (red.sys.C * x + red.sys.h.eval(c)).transpose();
    tr.newton_iters(i) = iters;
    tr.g_residual(i) = resid;
  };

  Vec x1 = st.x1, x2 = st.x2;
  record(0, t0, x1, x2, 0, st.g_residual);

  double t = t0;
  for (int s = 1; s <= steps; ++s) {
    StepResult sr = rk4_step(red, t, x1, x2, u, dt, true, nullptr, opt);
    t = t0 + s * dt;
    x1 = sr.x1_next;
    NewtonResult nr = solve_algebraic(red, x1, eval_u(u, t),
                                      Vec::Zero(red.sys.p), sr.x2_warm, true, opt);
    x2 = nr.x2;
    record(s, t, x1, x2, std::max(sr.newton_iters, nr.iters), nr.residual);
  }
  return tr;
}

SimTrace simulate_coupled(const ReducedSystem& red, const VectorFunction& u,
                          const Vec& x0, const Vec& z0, double t0, double t1,
                          double dt, const NewtonOptions& opt) {
  validate_input_signal(u, red.sys.m);
  const int steps = step_count(t0, t1, dt);
  const Vec u0 = eval_u(u, t0);

  ReducedState plant =
      project_initial_state(red, x0, u0, Vec::Zero(red.sys.p), true, opt);
  EvalContext c0;
  c0.u = u0;
  const Vec y0 =
      red.sys.C * red.state_of(plant.x1, plant.x2) + red.sys.h.eval(c0);
  ReducedState est = project_initial_state(red, z0, u0, y0, false, opt);

  SimTrace tr;
  tr.t.resize(steps + 1);
  tr.x.resize(steps + 1, red.n);
  tr.z.resize(steps + 1, red.n);
  tr.d.resize(steps + 1, red.k);
  tr.newton_iters.resize(steps + 1);
  tr.g_residual.resize(steps + 1);

  auto record = [&](int i, double t, const ReducedState& pl,
                    const ReducedState& es, int iters, double resid) {
    tr.t(i) = t;
    tr.x.row(i) = red.state_of(pl.x1, pl.x2).transpose();
    tr.z.row(i) = red.state_of(es.x1, es.x2).transpose();
    Vec w(red.r + (red.n + red.k - red.r));
    w.head(red.r) = es.x1;
    w.tail(red.n + red.k - red.r) = es.x2;
    tr.d.row(i) = (red.Nd * w).transpose();
    tr.newton_iters(i) = iters;
    tr.g_residual(i) = resid;
  };

  record(0, t0, plant, est, 0, std::max(plant.g_residual, est.g_residual));

  double t = t0;
  ReducedState pl = plant, es = est;
  for (int s = 1; s <= steps; ++s) {
    StepResult psr = rk4_step(red, t, pl.x1, pl.x2, u, dt, true, nullptr, opt);
    StepResult esr =
        rk4_step(red, t, es.x1, es.x2, u, dt, false, &psr.stage_y, opt);
    t = t0 + s * dt;
    const Vec ut = eval_u(u, t);

    pl.x1 = psr.x1_next;
    NewtonResult pnr = solve_algebraic(red, pl.x1, ut, Vec::Zero(red.sys.p),
                                       psr.x2_warm, true, opt);
    pl.x2 = pnr.x2;
    EvalContext ct;
    ct.u = ut;
    const Vec y_end =
        red.sys.C * red.state_of(pl.x1, pl.x2) + red.sys.h.eval(ct);

    es.x1 = esr.x1_next;
    NewtonResult enr =
        solve_algebraic(red, es.x1, ut, y_end, esr.x2_warm, false, opt);
    es.x2 = enr.x2;

    record(s, t, pl, es,
           std::max({psr.newton_iters, esr.newton_iters, pnr.iters, enr.iters}),
           std::max(pnr.residual, enr.residual));
  }

  tr.err_norm.resize(steps + 1);
  tr.d_norm.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    tr.err_norm(i) = (tr.z.row(i) - tr.x.row(i)).norm();
    tr.d_norm(i) = tr.d.row(i).norm();
  }
  return tr;
}

double check_trajectory_subspace(const DaeSystem& sys, const VectorFunction& u,
                                 const SimTrace& trace, const Subspace& Vstar) {
  const int n = sys.n, k = static_cast<int>(trace.d.cols());
  const int q = sys.q_L + sys.q_M;
  if (Vstar.ambient() != n + k + q)
    throw std::invalid_argument("subspace ambient dimension mismatch");
  const Mat& S = Vstar.basis;

  double worst = 0.0;
  for (int i = 0; i < trace.t.size(); ++i) {
    const Vec x = trace.x.row(i).transpose();
    const Vec z = trace.z.row(i).transpose();
    EvalContext cx, cz;
    cx.u = cz.u = eval_u(u, trace.t(i));
    cx.y = cz.y = sys.C * x + [&] {
      EvalContext c;
      c.u = cx.u;
      return sys.h.eval(c);
    }();
    cx.x = x;
    cz.x = z;
    cx.w = sys.J * x;
    cz.w = sys.J * z;

    Vec v(n + k + q);
    v.head(n) = z - x;
    v.segment(n, k) = trace.d.row(i).transpose();
    if (sys.q_L)
      v.segment(n + k, sys.q_L) = sys.f_L.eval(cz) - sys.f_L.eval(cx);
    if (sys.q_M)
      v.tail(sys.q_M) = sys.f_M.eval(cz) - sys.f_M.eval(cx);
    worst = std::max(worst, (v - S * (S.transpose() * v)).norm());
  }
  return worst;
}

DecayEstimate estimate_decay(const SimTrace& trace) {
  DecayEstimate out;
  const int npts = static_cast<int>(trace.t.size());
  if (npts < 2 || trace.err_norm.size() != npts)
    throw std::invalid_argument("trace too short for decay estimation");
  const double t_mid = 0.5 * (trace.t(0) + trace.t(npts - 1));

  std::vector<double> ts, ys;
  for (int i = 0; i < npts; ++i) {
    if (trace.t(i) >= t_mid && trace.err_norm(i) > 1e-300) {
      ts.push_back(trace.t(i));
      ys.push_back(std::log(trace.err_norm(i)));
    }
  }
  if (ts.size() < 2) {
    // error vanished on the tail: decayed below representable range
    out.beta = std::numeric_limits<double>::infinity();
    out.decaying = true;
    return out;
  }
  const int m = static_cast<int>(ts.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (int i = 0; i < m; ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  const double denom = m * stt - st * st;
  const double slope = denom != 0.0 ? (m * sty - st * sy) / denom : 0.0;
  const double icept = (sy - slope * st) / m;
  double ss = 0;
  for (int i = 0; i < m; ++i) {
    const double r = ys[i] - (icept + slope * ts[i]);
    ss += r * r;
  }
  out.beta = -slope;
  out.fit_residual = std::sqrt(ss / m);
  out.decaying = out.beta > 1e-6;
  return out;
}

void write_csv(const SimTrace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open trace file: " + path);
  const int n = static_cast<int>(trace.x.cols());
  const int k = static_cast<int>(trace.d.cols());
  f << "t";
  for (int i = 1; i <= n; ++i) f << ", x" << i;
  for (int i = 1; i <= n; ++i) f << ", z" << i;
  for (int i = 1; i <= k; ++i) f << ", d" << i;
  f << ", err_norm, d_norm, newton_iters, g_residual\n";

  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    f << buf;
  };
  for (int i = 0; i < trace.t.size(); ++i) {
    emit(trace.t(i));
    for (int j = 0; j < n; ++j) { f << ", "; emit(trace.x(i, j)); }
    for (int j = 0; j < n; ++j) { f << ", "; emit(trace.z(i, j)); }
    for (int j = 0; j < k; ++j) { f << ", "; emit(trace.d(i, j)); }
    f << ", ";
    emit(trace.err_norm(i));
    f << ", ";
    emit(trace.d_norm(i));
    f << ", " << trace.newton_iters(i) << ", ";
    emit(trace.g_residual(i));
    f << "\n";
  }
  if (!f) throw std::runtime_error("failed writing trace file: " + path);
}

}  // namespace daeo

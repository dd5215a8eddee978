// Acceptance gate: one line per criterion, exit code = number of failures.
// Each criterion re-derives its inputs so the checks stay independent of the
// unit suites.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "daeo/lmi.hpp"
#include "daeo/model.hpp"
#include "daeo/pencil.hpp"
#include "daeo/sim.hpp"
#include "daeo/subspace.hpp"
#include "daeo/synth.hpp"
#include "systems.hpp"

using namespace daeo;

namespace {

struct Gate {
  bool ok = true;
  std::ostringstream why;
  std::ostringstream note;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (!why.str().empty()) why << "; ";
      why << what;
      ok = false;
    }
  }
};

double max_eig(const Mat& m) {
  return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (m + m.transpose()))
      .eigenvalues()
      .maxCoeff();
}

double min_eig(const Mat& m) {
  return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (m + m.transpose()))
      .eigenvalues()
      .minCoeff();
}

Mat random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

VectorFunction no_input() {
  VectorFunction u;
  u.allow_t = true;
  return u;
}

// Re-check of a feasibility verdict from the certificate assembly alone.
bool verify_feasible_point(const DaeSystem& sys, const Mat& L_hat, LmiMode mode,
                           double eps, const LmiCertificate& cert) {
  const AugmentedSystem aug = build_augmented_from_L(sys, L_hat);
  if (!(cert.delta >= 0.5 * eps)) return false;
  const Subspace V = error_confinement_subspace(aug);
  if (V.dim() > 0) {
    const Mat Q = build_q(aug, cert);
    if (!(max_eig(V.basis.transpose() * Q * V.basis) <= -0.5 * eps))
      return false;
  }
  const Mat EtP = aug.calE.transpose() * cert.P;
  if ((EtP - EtP.transpose()).norm() > 1e-8 * std::max(1.0, EtP.norm()))
    return false;
  if (V.dim() > 0) {
    const Subspace Vbar = image(V.basis.topRows(aug.n + aug.k));
    if (Vbar.dim() > 0) {
      const double lmin = min_eig(Vbar.basis.transpose() *
                                  0.5 * (EtP + EtP.transpose()) * Vbar.basis);
      const double lo = mode == LmiMode::definite
                            ? 0.5 * eps
                            : -1e-9 * std::max(1.0, EtP.norm());
      if (!(lmin >= lo)) return false;
    }
  }
  if (aug.k > 0) {
    const Mat res = cert.P.transpose() * L_hat.rightCols(aug.k) -
                    cert.K.rightCols(aug.k);
    if (res.norm() >
        1e-8 * std::max(1.0, (cert.P.transpose() * L_hat.rightCols(aug.k))
                                 .norm()))
      return false;
  }
  return true;
}

// --- criterion 1: rectangular example certificate with reported margins ---
void criterion_rect_certificate(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const testsys::Instance it = testsys::ex1();
  const AugmentedSystem aug = build_augmented(it.sys, it.gains);
  const CertificateReport rep = certify_estimator(it.sys, aug, it.cert);
  g.expect(rep.passed, "published certificate rejected");

  const ConditionRecord* q = rep.find("Q negative definite on V*");
  g.expect(q && q->verdict == Verdict::pass, "quadratic-form record missing");
  if (q) {
    g.expect(q->margin > 0.0, "projected form not negative definite");
    g.expect(near(q->margin, 0.23298765631828922, 1e-8),
             "projected spectrum moved");
  }
  const ConditionRecord* ep = rep.find("calE' P positive definite on Vbar*");
  g.expect(ep && ep->verdict == Verdict::pass, "state-metric record missing");
  if (ep) {
    g.expect(ep->margin > 0.0, "state metric not positive definite");
    g.expect(near(ep->margin, 0.0012666508750057426, 1e-10),
             "state-metric margin moved");
  }
  // The same quadratic form is indefinite on the full ambient space, so the
  // subspace restriction is doing real work.
  g.expect(max_eig(build_q(aug, it.cert)) > 0.0,
           "quadratic form unexpectedly negative on the full space");

  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  g.expect(secs < 1.0, "runtime above 1s");
  g.note << "margins " << (q ? q->margin : -1.0) << " / "
         << (ep ? ep->margin : -1.0);
}

// --- criterion 2: rectangular example confinement subspace ---
void criterion_rect_subspace(Gate& g) {
  const testsys::Instance it = testsys::ex1();
  const AugmentedSystem aug = build_augmented(it.sys, it.gains);
  const Subspace vstar = error_confinement_subspace(aug);
  Mat published(6, 3);
  published << 1, 0, 0, 0, 1, 0, 5, -4, 0, -11, 9, 0, 0, 0, 1, -2, 2, 0;
  const double dist = projector_distance(vstar, image(published));
  g.expect(vstar.dim() == 3, "dimension is not 3");
  g.expect(dist <= 1e-8, "projector distance above 1e-8");
  g.note << "projector distance " << dist;
}

// --- criterion 3: square example reduced-form pipeline ---
void criterion_square_pipeline(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const testsys::Instance it = testsys::ex2();
  const AugmentedSystem aug = build_augmented(it.sys, it.gains);

  g.expect(pencil_index({aug.calE, aug.calA}) == 1,
           "estimator pencil index is not 1");

  const GlGm gq = compute_gl_gm(it.sys, it.gains);
  Mat gl_ref(2, 1), gm_ref(2, 1);
  gl_ref << 1.0 / 15, 1.0 / 15;
  gm_ref << -1.0 / 15, -1.0 / 15;
  g.expect((gq.G_L - gl_ref).norm() <= 1e-10, "G_L off");
  g.expect((gq.G_M - gm_ref).norm() <= 1e-10, "G_M off");

  const CertificateReport red =
      certify_estimator_reduced(it.sys, it.gains, it.cert);
  g.expect(red.passed, "reduced-form certificate rejected");

  const ConditionRecord* mono = red.find(
      "monotone channel J G_M invertible and mu > lambda_max(Gamma)");
  g.expect(mono != nullptr, "monotone-channel record missing");
  if (mono)  // margin = mu - lambda_max(Gamma)
    g.expect(near(it.sys.mu - mono->margin, -15.0, 1e-9),
             "lambda_max(Gamma) is not -15");

  const ConditionRecord* mixed = red.find("mixed-norm contraction");
  g.expect(mixed != nullptr, "mixed-norm record missing");
  if (mixed)  // margin = 1 - value
    g.expect(near(1.0 - mixed->margin, 19.0 / 221.0, 1e-12),
             "mixed-norm value is not 19/221");

  // The strict (definite) certificate must fail on the state-metric
  // condition for this square system.
  const CertificateReport strict = certify_estimator(it.sys, aug, it.cert);
  g.expect(!strict.passed, "strict certificate unexpectedly passed");
  const ConditionRecord* ep =
      strict.find("calE' P positive definite on Vbar*");
  g.expect(ep && ep->verdict == Verdict::fail,
           "state-metric condition did not fail");

  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  g.expect(secs < 1.0, "runtime above 1s");
  if (mono && mixed)
    g.note << "gamma_max " << it.sys.mu - mono->margin << ", mixed value "
           << 1.0 - mixed->margin;
}

// --- criterion 4: wide-innovation counterexample ---
void criterion_counterexample(Gate& g) {
  const testsys::Instance it = testsys::counterexample();
  const AugmentedSystem aug = build_augmented(it.sys, it.gains);
  const CertificateReport rep = certify_estimator(it.sys, aug, it.cert);
  g.expect(!rep.passed, "counterexample unexpectedly certified");

  Mat published(3, 2);
  published << 1, 0, 0, 1, 0, 1;
  const double dist =
      projector_distance(image(rep.Vbar), image(published));
  g.expect(dist <= 1e-8, "Vbar* does not match the published image");

  const ConditionRecord* ep =
      rep.find("calE' P positive definite on Vbar*");
  g.expect(ep && ep->verdict == Verdict::fail,
           "state-metric condition did not fail");
  g.expect(ep && ep->detail.find("rank-deficient") != std::string::npos,
           "failure reason does not name the rank defect");
  g.note << "Vbar distance " << dist;
}

// --- criterion 5: circuit example end to end ---
void criterion_circuit(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const testsys::Instance it = testsys::ex3();

  const GainSearchResult plain = iterate_gain_search(it.sys, 0, Mat(), 3);
  g.expect(plain.success && plain.report.passed,
           "no-innovation certificate not found");

  const Mat L0 = embed_gains(it.gains, it.sys.l, it.sys.p, it.sys.n);
  const GainSearchResult tuned = iterate_gain_search(it.sys, 1, L0, 3);
  g.expect(tuned.success && tuned.report.passed,
           "published innovation gains not certified");
  g.expect(tuned.success &&
               (tuned.gains.L1 - it.gains.L1).norm() == 0.0 &&
               (tuned.gains.L2 - it.gains.L2).norm() == 0.0,
           "published gains were altered");

  const ReducedSystem red = ReducedSystem::build(it.sys, it.gains);
  Vec x0(3), z0(3);
  x0 << 0.528, 0.3, 1.2;
  z0 << 1.5, -0.5, 0.2;
  const SimTrace tr = simulate_coupled(red, no_input(), x0, z0, 0, 20, 1e-3);
  const double ratio = tr.err_norm(tr.err_norm.size() - 1) / tr.err_norm(0);
  g.expect(ratio <= 1e-3, "terminal error ratio above 1e-3");
  const DecayEstimate dec = estimate_decay(tr);
  g.expect(dec.decaying && dec.beta > 0.0, "no positive decay estimate");

  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  g.expect(secs < 30.0, "runtime above 30s");
  g.note << "error ratio " << ratio << ", beta " << dec.beta << ", " << secs
         << "s";
}

// --- criterion 6: trajectory confinement on the certified coupled runs ---
void criterion_confinement(Gate& g) {
  double worst = 0.0;
  {
    const testsys::Instance it = testsys::ex3();
    const ReducedSystem red = ReducedSystem::build(it.sys, it.gains);
    Vec x0(3), z0(3);
    x0 << 0.528, 0.3, 1.2;
    z0 << 1.5, -0.5, 0.2;
    const SimTrace tr =
        simulate_coupled(red, no_input(), x0, z0, 0, 20, 1e-3);
    const Subspace vstar =
        error_confinement_subspace(build_augmented(it.sys, it.gains));
    const double d = check_trajectory_subspace(it.sys, no_input(), tr, vstar);
    worst = std::max(worst, d);
    g.expect(d <= 1e-6, "circuit run leaves the confinement subspace");
  }
  {
    const testsys::Instance it = testsys::ex2();
    const ReducedSystem red = ReducedSystem::build(it.sys, it.gains);
    Vec x0(2), z0(2);
    x0 << 0.5, -0.8;
    z0 << -0.3, 0.4;
    const SimTrace tr =
        simulate_coupled(red, no_input(), x0, z0, 0, 10, 1e-3);
    const Subspace vstar =
        error_confinement_subspace(build_augmented(it.sys, it.gains));
    const double d = check_trajectory_subspace(it.sys, no_input(), tr, vstar);
    worst = std::max(worst, d);
    g.expect(d <= 1e-6, "square run leaves the confinement subspace");
  }
  g.note << "worst distance " << worst;
}

// --- criterion 7: feasibility engine soundness ---
void criterion_lmi_soundness(Gate& g) {
  std::mt19937_64 rng(31415);
  std::uniform_int_distribution<int> pick_n(1, 3);
  std::uniform_int_distribution<int> pick_dl(0, 1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  int feasible = 0, indeterminate = 0, violations = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const int n = pick_n(rng);
    const int l = n + pick_dl(rng);
    const int p = 1;
    const int q_L = pick_dl(rng);
    const int q_M = pick_dl(rng);

    DaeSystem s;
    s.E = random_matrix(rng, l, n);
    if (uni(rng) < 0.5 && n > 0) s.E.col(0).setZero();
    s.A = random_matrix(rng, l, n);
    s.B_L = random_matrix(rng, l, q_L);
    s.B_M = random_matrix(rng, l, q_M);
    s.J = random_matrix(rng, q_M, n);
    s.C = random_matrix(rng, p, n);
    s.F = random_matrix(rng, q_L > 0 ? 1 : 0, n);
    s.Theta = Mat::Identity(q_M, q_M);
    s.mu = 2.0 * uni(rng) - 0.5;
    s.l = l;
    s.n = n;
    s.p = p;
    s.q_L = q_L;
    s.q_M = q_M;
    s.f_L = q_L ? testsys::vf({"sin(x1)"}, n, 0, p, 0)
                : testsys::vf({}, n, 0, p, 0);
    s.f_M = q_M ? testsys::vf({"w1"}, 0, 0, p, 1)
                : testsys::vf({}, 0, 0, p, 0);
    s.h = testsys::vf({"0"}, 0, 0, 0, 0);

    const bool square = uni(rng) < 0.4;
    const int k = square ? l + p - n : pick_dl(rng);
    const LmiMode mode =
        (square && k > 0) ? LmiMode::semidefinite : LmiMode::definite;
    ObserverGains gains;
    gains.L1 = random_matrix(rng, l, k);
    gains.L2 = random_matrix(rng, p, k);
    gains.k = k;
    const Mat L_hat = embed_gains(gains, l, p, n);

    LmiProblem pr;
    try {
      pr = assemble(s, L_hat, mode);
    } catch (const std::invalid_argument&) {
      continue;  // rank-deficient J draw
    }
    SolveOptions so;
    so.max_iters = 3000;
    so.seed = 1000 + static_cast<std::uint64_t>(inst);
    const SolveResult res = solve_feasibility(pr, so);
    if (res.status != SolveStatus::feasible) {
      ++indeterminate;
      continue;
    }
    ++feasible;
    if (!verify_feasible_point(s, L_hat, mode, pr.eps, res.cert)) ++violations;
    if (mode == LmiMode::definite) {
      const AugmentedSystem aug = build_augmented_from_L(s, L_hat);
      if (!certify_estimator(s, aug, res.cert).passed) ++violations;
    }
  }
  g.expect(violations == 0, "a feasible verdict failed re-verification");
  g.expect(feasible >= 20, "fewer than 20 feasible instances");

  // Warm starts at the published certificates must land immediately.
  {
    const testsys::Instance it = testsys::ex1();
    const Mat L_hat = embed_gains(it.gains, it.sys.l, it.sys.p, it.sys.n);
    const SolveResult res =
        solve_feasibility(assemble(it.sys, L_hat, LmiMode::definite), it.cert);
    g.expect(res.status == SolveStatus::feasible && res.iters <= 5,
             "rectangular warm start needed more than 5 iterations");
  }
  {
    const testsys::Instance it = testsys::ex2();
    const Mat L_hat = embed_gains(it.gains, it.sys.l, it.sys.p, it.sys.n);
    const SolveResult res = solve_feasibility(
        assemble(it.sys, L_hat, LmiMode::semidefinite), it.cert);
    g.expect(res.status == SolveStatus::feasible && res.iters <= 5,
             "square warm start needed more than 5 iterations");
  }
  g.note << feasible << " feasible, " << indeterminate
         << " indeterminate, 0 violations required";
}

// --- criterion 8: property suites with no fixed numbers ---
void criterion_properties(Gate& g) {
  std::mt19937_64 rng(2718);
  std::uniform_int_distribution<int> pick_dim(1, 8);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // rank-nullity on random matrices, half of them rank-deficient products
  for (int trial = 0; trial < 500; ++trial) {
    const int rows = pick_dim(rng), cols = pick_dim(rng);
    Mat m;
    if (uni(rng) < 0.5) {
      const int inner = std::max(1, std::min(rows, cols) - 1);
      m = random_matrix(rng, rows, inner) * random_matrix(rng, inner, cols);
    } else {
      m = random_matrix(rng, rows, cols);
    }
    const int r = numerical_rank(m);
    const Subspace ker = kernel(m);
    if (r + ker.dim() != cols) {
      g.expect(false, "rank-nullity violated");
      break;
    }
    if (ker.dim() > 0 && (m * ker.basis).norm() > 1e-8 * (1.0 + m.norm())) {
      g.expect(false, "kernel basis not annihilated");
      break;
    }
  }

  // Wong chains: fixed points, dimension bounds, termination within n+1
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = pick_dim(rng) % 5 + 1, cols = pick_dim(rng) % 5 + 1;
    Mat E = random_matrix(rng, rows, cols);
    if (uni(rng) < 0.4) {
      const int inner = std::max(1, std::min(rows, cols) - 1);
      E = random_matrix(rng, rows, inner) * random_matrix(rng, inner, cols);
    }
    const Mat A = random_matrix(rng, rows, cols);
    const MatrixPencil p{E, A};
    const WongResult w = wong_limits(p);
    bool ok = w.k_star <= cols + 1 && w.l_star <= cols + 1;
    // stationarity: both limits reproduce themselves under one more step
    const Subspace v_next = preimage(A, image(E * w.Vstar.basis));
    const Subspace w_next = preimage(E, image(A * w.Wstar.basis));
    ok = ok && equals(w.Vstar, v_next, 1e-7) && equals(w.Wstar, w_next, 1e-7);
    if (!ok) {
      g.expect(false, "Wong chain property violated");
      break;
    }
  }

  // QWF round trip on constructed regular index-1 pencils
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(uni(rng) * 4.99);
    const int r = static_cast<int>(uni(rng) * (n + 0.99));
    auto well_conditioned = [&](int d) {
      for (;;) {
        Mat t = random_matrix(rng, d, d);
        Eigen::JacobiSVD<Mat> svd(t);
        if (svd.singularValues()(d - 1) > 0.05 * svd.singularValues()(0))
          return t;
      }
    };
    const Mat T = well_conditioned(n), U = well_conditioned(n);
    Mat E0 = Mat::Zero(n, n), A0 = Mat::Zero(n, n);
    E0.topLeftCorner(r, r).setIdentity();
    if (r > 0) A0.topLeftCorner(r, r) = random_matrix(rng, r, r);
    A0.bottomRightCorner(n - r, n - r).setIdentity();
    const MatrixPencil p{T * E0 * U, T * A0 * U};

    const QwfTransform q = qwf_transform(p);
    bool ok = q.r == r;
    Mat e_ref = Mat::Zero(n, n);
    e_ref.topLeftCorner(q.r, q.r).setIdentity();
    Mat a_ref = Mat::Zero(n, n);
    a_ref.topLeftCorner(q.r, q.r) = q.A_r;
    a_ref.bottomRightCorner(n - q.r, n - q.r).setIdentity();
    const double scale = 1.0 + p.E.norm() + p.A.norm();
    ok = ok && (q.M * p.E * q.N - e_ref).norm() <= 1e-8 * scale;
    ok = ok && (q.M * p.A * q.N - a_ref).norm() <= 1e-8 * scale;
    if (!ok) {
      g.expect(false, "QWF round trip failed");
      break;
    }
  }

  // symbolic derivatives against central differences
  std::function<std::string(int)> rand_expr = [&](int depth) -> std::string {
    const int top = depth > 0 ? 8 : 2;
    std::uniform_int_distribution<int> pick(0, top);
    switch (pick(rng)) {
      case 0: {
        std::ostringstream os;
        os << (std::round((uni(rng) * 4.0 - 2.0) * 100) / 100);
        return os.str();
      }
      case 1: return "x1";
      case 2: return "x2";
      case 3: return "(" + rand_expr(depth - 1) + " + " + rand_expr(depth - 1) + ")";
      case 4: return "(" + rand_expr(depth - 1) + " - " + rand_expr(depth - 1) + ")";
      case 5: return "(" + rand_expr(depth - 1) + " * " + rand_expr(depth - 1) + ")";
      case 6: return "sin(" + rand_expr(depth - 1) + ")";
      case 7: return "cos(" + rand_expr(depth - 1) + ")";
      default: return "tanh(" + rand_expr(depth - 1) + ")";
    }
  };
  for (int trial = 0; trial < 200; ++trial) {
    const ExprPtr e = parse_expression(rand_expr(3));
    const ExprPtr de = differentiate(*e, VarKind::x, 0);
    bool ok = true;
    for (int pt = 0; pt < 3 && ok; ++pt) {
      EvalContext c;
      c.x = Vec(2);
      c.x << 2.0 * uni(rng) - 1.0, 2.0 * uni(rng) - 1.0;
      const double sym = eval(*de, c);
      const double h = 1e-5;
      EvalContext cp = c, cm = c;
      cp.x(0) += h;
      cm.x(0) -= h;
      const double fd = (eval(*e, cp) - eval(*e, cm)) / (2.0 * h);
      ok = std::abs(sym - fd) <= 1e-6 * std::max(1.0, std::abs(sym));
    }
    if (!ok) {
      g.expect(false, "symbolic derivative disagrees with central difference");
      break;
    }
  }

  // integration order: halved steps cut the end-state error by >= 8
  {
    DaeSystem s;
    s.E = Mat::Identity(1, 1);
    s.A = -Mat::Identity(1, 1);
    s.B_L = Mat::Identity(1, 1);
    s.B_M = Mat::Zero(1, 0);
    s.J = Mat::Zero(0, 1);
    s.C = Mat::Identity(1, 1);
    s.F = Mat::Zero(1, 1);
    s.Theta = Mat::Zero(0, 0);
    s.l = s.n = s.m = s.p = s.q_L = 1;
    s.q_M = 0;
    s.f_L = testsys::vf({"u1"}, 1, 1, 1, 0);
    s.f_M = testsys::vf({}, 0, 1, 1, 0);
    s.h = testsys::vf({"0"}, 0, 1, 0, 0);
    ObserverGains gains;
    gains.L1 = Mat::Zero(1, 1);
    gains.L2 = Mat::Identity(1, 1);
    gains.k = 1;
    const ReducedSystem red = ReducedSystem::build(s, gains);
    VectorFunction u = testsys::vf({"sin(t)"}, 0, 0, 0, 0);
    u.allow_t = true;
    Vec x0(1);
    x0 << 1.0;
    const double exact =
        1.5 * std::exp(-2.0) + 0.5 * (std::sin(2.0) - std::cos(2.0));
    auto end_error = [&](double dt) {
      const PlantTrace tr = simulate_plant(red, u, x0, 0.0, 2.0, dt);
      return std::abs(tr.x(tr.x.rows() - 1, 0) - exact);
    };
    const double ratio = end_error(0.1) / end_error(0.05);
    g.expect(ratio >= 8.0, "integration error ratio below 8");
    g.note << "order ratio " << ratio;
  }
}

}  // namespace

int main() {
  struct Criterion {
    const char* label;
    std::function<void(Gate&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"rectangular example: certificate margins and full-space contrast",
       criterion_rect_certificate},
      {"rectangular example: confinement subspace matches published image",
       criterion_rect_subspace},
      {"square example: reduced-form pipeline values",
       criterion_square_pipeline},
      {"wide-innovation counterexample: rank defect reported",
       criterion_counterexample},
      {"circuit example: synthesis, certification and decay",
       criterion_circuit},
      {"confinement of certified coupled runs", criterion_confinement},
      {"feasibility engine soundness and warm starts",
       criterion_lmi_soundness},
      {"property suites", criterion_properties},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Gate gate;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].run(gate);
    } catch (const std::exception& e) {
      gate.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    std::ostringstream line;
    line << (gate.ok ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": "
         << criteria[i].label;
    if (!gate.note.str().empty()) line << " (" << gate.note.str() << ")";
    char buf[32];
    std::snprintf(buf, sizeof(buf), " [%.2fs]", secs);
    line << buf;
    if (!gate.ok) line << "  -- " << gate.why.str();
    std::cout << line.str() << std::endl;
    if (!gate.ok) ++failures;
  }
  return failures;
}

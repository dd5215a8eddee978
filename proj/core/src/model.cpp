#include "daeo/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "daeo/pencil.hpp"
#include "daeo/subspace.hpp"

namespace daeo {

namespace {

void check_shape(const Mat& m, int rows, int cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols)
    throw std::invalid_argument(std::string(name) + " must be " +
                                std::to_string(rows) + "x" + std::to_string(cols) +
                                ", got " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
  if (!m.allFinite())
    throw std::invalid_argument(std::string(name) + " has non-finite entries");
}

}  // namespace

void DaeSystem::validate() const {
  if (l < 0 || n < 0 || m < 0 || p < 0 || q_L < 0 || q_M < 0)
    throw std::invalid_argument("dimensions must be non-negative");
  check_shape(E, l, n, "E");
  check_shape(A, l, n, "A");
  check_shape(B_L, l, q_L, "B_L");
  check_shape(B_M, l, q_M, "B_M");
  check_shape(J, q_M, n, "J");
  check_shape(C, p, n, "C");
  check_shape(Theta, q_M, q_M, "Theta");
  if (F.cols() != n)
    throw std::invalid_argument("F must have n columns");
  if (!F.allFinite()) throw std::invalid_argument("F has non-finite entries");
  if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");

  if (q_M > 0 && numerical_rank(J) != q_M)
    throw std::invalid_argument("J must have full row rank q_M");

  if (f_L.out_dim() != q_L)
    throw std::invalid_argument("f_L must have q_L components");
  if (f_L.n_x != n || f_L.n_u != m || f_L.n_y != p || f_L.n_w != 0)
    throw std::invalid_argument("f_L must be declared over (x, u, y)");
  if (f_M.out_dim() != q_M)
    throw std::invalid_argument("f_M must have q_M components");
  if (f_M.n_w != q_M || f_M.n_u != m || f_M.n_y != p || f_M.n_x != 0)
    throw std::invalid_argument("f_M must be declared over (w, u, y)");
  if (h.out_dim() != p)
    throw std::invalid_argument("h must have p components");
  if (h.n_u != m || h.n_x != 0 || h.n_y != 0 || h.n_w != 0)
    throw std::invalid_argument("h must be declared over u only");
  f_L.validate();
  f_M.validate();
  h.validate();
}

Mat embed_gains(const ObserverGains& gains, int l, int p, int n) {
  const int k = gains.k;
  if (gains.L1.rows() != l || gains.L1.cols() != k)
    throw std::invalid_argument("L1 must be l x k");
  if (gains.L2.rows() != p || gains.L2.cols() != k)
    throw std::invalid_argument("L2 must be p x k");
  Mat L_hat = Mat::Zero(l + p, n + k);
  if (k > 0) {
    L_hat.block(0, n, l, k) = gains.L1;
    L_hat.block(l, n, p, k) = gains.L2;
  }
  return L_hat;
}

AugmentedSystem build_augmented(const DaeSystem& sys, const ObserverGains& gains) {
  return build_augmented_from_L(sys,
                                embed_gains(gains, sys.l, sys.p, sys.n));
}

AugmentedSystem build_augmented_from_L(const DaeSystem& sys, const Mat& L_hat) {
  sys.validate();
  const int n = sys.n, l = sys.l, p = sys.p, qL = sys.q_L, qM = sys.q_M;
  if (L_hat.rows() != l + p || L_hat.cols() < n)
    throw std::invalid_argument("L_hat must be (l+p) x (n+k)");
  const int k = static_cast<int>(L_hat.cols()) - n;
  if (n > 0 && L_hat.leftCols(n).cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("first n columns of L_hat must be zero");
  if (!L_hat.allFinite())
    throw std::invalid_argument("L_hat has non-finite entries");

  AugmentedSystem aug;
  aug.mu = sys.mu;
  aug.n = n;
  aug.k = k;
  aug.l = l;
  aug.p = p;
  aug.q_L = qL;
  aug.q_M = qM;

  aug.calE = Mat::Zero(l + p, n + k);
  aug.calE.topLeftCorner(l, n) = sys.E;

  aug.A_hat = Mat::Zero(l + p, n + k);
  aug.A_hat.topLeftCorner(l, n) = sys.A;
  aug.A_hat.block(l, 0, p, n) = sys.C;

  aug.calA = aug.A_hat + L_hat;

  aug.calB = Mat::Zero(l + p, qL + qM);
  aug.calB.block(0, 0, l, qL) = sys.B_L;
  aug.calB.block(0, qL, l, qM) = sys.B_M;

  aug.H = Mat::Zero(n + k, n + k);
  if (k > 0) aug.H.bottomRightCorner(k, k).setIdentity();

  const int j = static_cast<int>(sys.F.rows());
  aug.calF = Mat::Zero(j, n + k);
  aug.calF.leftCols(n) = sys.F;

  aug.Theta_hat = Mat::Zero(n + k, qL + qM);
  if (qM > 0) aug.Theta_hat.block(0, qL, n, qM) = sys.J.transpose() * sys.Theta;

  aug.calJ = Mat::Zero(n + k, n + k);
  aug.calJ.topLeftCorner(n, n) = sys.J.transpose() * sys.J;

  aug.Lambda_qL = Mat::Zero(qL + qM, qL + qM);
  if (qL > 0) aug.Lambda_qL.topLeftCorner(qL, qL).setIdentity();

  return aug;
}

ObserverGains gains_of(const AugmentedSystem& aug) {
  ObserverGains g;
  g.k = aug.k;
  g.L1 = aug.calA.block(0, aug.n, aug.l, aug.k);
  g.L2 = aug.calA.block(aug.l, aug.n, aug.p, aug.k);
  return g;
}

RankCheckResult necessary_rank_check(const DaeSystem& sys) {
  sys.validate();
  MatrixPencil stacked;
  stacked.E = Mat::Zero(sys.l + sys.p, sys.n);
  stacked.E.topRows(sys.l) = sys.E;
  stacked.A = Mat::Zero(sys.l + sys.p, sys.n);
  stacked.A.topRows(sys.l) = sys.A;
  stacked.A.bottomRows(sys.p) = -sys.C;  // rank of [sE - A; C] equals rank of s[E;0] - [A;-C]

  RankCheckResult res;
  res.rank = rational_rank(stacked);
  res.rank_equals_n = (res.rank == sys.n);
  res.n_le_lp = (sys.n <= sys.l + sys.p);
  return res;
}

}  // namespace daeo

#include "daeo/pencil.hpp"

#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace daeo {

namespace {

void validate(const MatrixPencil& p) {
  if (p.E.rows() != p.A.rows() || p.E.cols() != p.A.cols())
    throw std::invalid_argument("pencil: E and A must have identical shape");
  if (!p.E.allFinite() || !p.A.allFinite())
    throw std::invalid_argument("pencil: non-finite entries");
}

std::vector<double> sample_points(int n_samples, std::uint64_t seed) {
  static const double fixed[] = {0.718, 1.414, 2.236, 3.141, 5.669};
  std::vector<double> pts;
  for (int i = 0; i < n_samples && i < 5; ++i) pts.push_back(fixed[i]);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.5, 6.5);
  pts.push_back(dist(rng));
  return pts;
}

}  // namespace

WongResult wong_limits(const MatrixPencil& p) {
  validate(p);
  const Eigen::Index l = p.rows(), n = p.cols();
  const double sE = std::max(sigma_max(p.E), std::numeric_limits<double>::min());
  const double sA = std::max(sigma_max(p.A), std::numeric_limits<double>::min());
  const int cap = static_cast<int>(n) + 1;

  WongResult res;
  // The chains are nested, so their dimensions are monotone; stagnation (or a
  // numerically impossible move the wrong way) marks the fixed point.
  Subspace V = Subspace::full(n);
  for (int i = 0; ; ++i) {
    if (i > cap) throw std::runtime_error("wong_limits: V-chain did not terminate");
    const Subspace EV = V.dim() ? image(p.E * V.basis, -1.0, sE) : Subspace::trivial(l);
    Subspace Vn = preimage(p.A, EV);
    if (Vn.dim() >= V.dim()) {
      res.k_star = i;
      break;
    }
    V = std::move(Vn);
  }
  res.Vstar = V;

  Subspace W = Subspace::trivial(n);
  for (int i = 0; ; ++i) {
    if (i > cap) throw std::runtime_error("wong_limits: W-chain did not terminate");
    const Subspace AW = W.dim() ? image(p.A * W.basis, -1.0, sA) : Subspace::trivial(l);
    Subspace Wn = preimage(p.E, AW);
    if (Wn.dim() <= W.dim()) {
      res.l_star = i;
      break;
    }
    W = std::move(Wn);
  }
  res.Wstar = W;
  return res;
}

bool is_regular(const MatrixPencil& p, int n_samples, std::uint64_t seed) {
  validate(p);
  if (!p.square()) return false;
  const Eigen::Index n = p.cols();
  if (n == 0) return true;
  for (double s : sample_points(n_samples, seed)) {
    const Mat m = s * p.E - p.A;
    if (numerical_rank(m) == n) return true;
  }
  return false;
}

int pencil_index(const MatrixPencil& p) {
  if (!is_regular(p))
    throw std::invalid_argument("pencil_index: pencil is not regular");
  return wong_limits(p).l_star;
}

int rational_rank(const MatrixPencil& p, int n_samples, std::uint64_t seed) {
  validate(p);
  int r = 0;
  for (double s : sample_points(n_samples, seed)) {
    const Mat m = s * p.E - p.A;
    r = std::max(r, numerical_rank(m));
  }
  return r;
}

QwfTransform qwf_transform(const MatrixPencil& p) {
  if (!is_regular(p))
    throw std::invalid_argument("qwf_transform: pencil is not regular");
  const Eigen::Index n = p.cols();
  const WongResult w = wong_limits(p);
  const int r = static_cast<int>(w.Vstar.dim());
  if (w.Vstar.dim() + w.Wstar.dim() != n)
    throw std::runtime_error("qwf_transform: Wong limits do not complement");
  if (w.l_star > 1)
    throw std::invalid_argument("qwf_transform: pencil index exceeds one");

  Mat N(n, n);
  N.leftCols(r) = w.Vstar.basis;
  N.rightCols(n - r) = w.Wstar.basis;
  Mat EVAW(n, n);
  EVAW.leftCols(r) = p.E * w.Vstar.basis;
  EVAW.rightCols(n - r) = p.A * w.Wstar.basis;

  Eigen::JacobiSVD<Mat> svd(EVAW, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0 ||
      sv(0) / sv(sv.size() - 1) > 1e12)
    throw std::runtime_error("qwf_transform: [EV, AW] numerically singular");
  const Mat M = svd.solve(Mat::Identity(n, n));

  QwfTransform t;
  t.M = M;
  t.N = N;
  t.r = r;
  t.A_r = (M * p.A * N).topLeftCorner(r, r);
  return t;
}

}  // namespace daeo

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "daeo/subspace.hpp"
#include "doctest.h"

using namespace daeo;

namespace {

Mat random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

// Random matrix with rank exactly r.
Mat random_rank(std::mt19937_64& rng, int rows, int cols, int r) {
  if (r == 0) return Mat::Zero(rows, cols);
  return random_matrix(rng, rows, r) * random_matrix(rng, r, cols);
}

}  // namespace

TEST_CASE("rank-nullity holds on 500 random matrices") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int trial = 0; trial < 500; ++trial) {
    const int rows = dim(rng), cols = dim(rng);
    std::uniform_int_distribution<int> rank_pick(0, std::min(rows, cols));
    const int r = rank_pick(rng);
    const Mat m = random_rank(rng, rows, cols, r);
    const Subspace im = image(m);
    const Subspace ker = kernel(m);
    CHECK(im.dim() == r);
    CHECK(im.dim() + ker.dim() == cols);
    if (ker.dim() > 0) CHECK((m * ker.basis).norm() < 1e-9 * (1.0 + m.norm()));
  }
}

TEST_CASE("image bases are orthonormal") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat m = random_matrix(rng, 8, 5);
    const Mat b = image(m).basis;
    const Mat gram = b.transpose() * b;
    CHECK((gram - Mat::Identity(b.cols(), b.cols())).norm() < 1e-12);
  }
}

TEST_CASE("numerical rank respects the explicit scale") {
  // A uniformly tiny matrix has full rank at its own scale.
  const Mat tiny = 1e-9 * Mat::Identity(3, 3);
  CHECK(numerical_rank(tiny) == 3);
  // Measured against an order-one scale it is numerical noise.
  CHECK(numerical_rank(tiny, -1.0, 1.0) == 0);
}

TEST_CASE("preimage characterization and short-circuit") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat a = random_rank(rng, 6, 5, 3);
    const Mat span = random_matrix(rng, 6, 2);
    const Subspace s = image(span);
    const Subspace pre = preimage(a, s);
    // Every preimage vector maps into S.
    for (Eigen::Index j = 0; j < pre.dim(); ++j) {
      const Vec v = a * pre.basis.col(j);
      CHECK(distance(s, v) < 1e-8 * (1.0 + v.norm()));
    }
    // ker(A) always belongs to the preimage.
    CHECK(contains(pre, kernel(a)));
  }
  // S spans the codomain: preimage is the full domain.
  const Mat a = random_matrix(rng, 4, 7);
  const Subspace pre = preimage(a, Subspace::full(4));
  CHECK(pre.dim() == 7);
}

TEST_CASE("dimension formula for sum and intersection") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> dim(1, 9);
    const int n = dim(rng);
    std::uniform_int_distribution<int> sub(0, n);
    const Subspace u = image(random_rank(rng, n, n, sub(rng)));
    const Subspace v = image(random_rank(rng, n, n, sub(rng)));
    const Subspace s = sum(u, v);
    const Subspace x = intersect(u, v);
    CHECK(s.dim() + x.dim() == u.dim() + v.dim());
    CHECK(contains(s, u));
    CHECK(contains(s, v));
    CHECK(contains(u, x));
    CHECK(contains(v, x));
  }
}

TEST_CASE("projector distance is basis independent") {
  std::mt19937_64 rng(59);
  const Mat m = random_matrix(rng, 6, 3);
  const Subspace s1 = image(m);
  // Same span through a different generating set.
  Mat mixed(6, 4);
  mixed.col(0) = m.col(0) + 2.0 * m.col(1);
  mixed.col(1) = m.col(2);
  mixed.col(2) = m.col(1) - m.col(2);
  mixed.col(3) = 3.0 * m.col(0);
  const Subspace s2 = image(mixed);
  CHECK(projector_distance(s1, s2) < 1e-10);
  CHECK(equals(s1, s2));

  const Subspace e1 = image(Vec::Unit(6, 0));
  const Subspace e2 = image(Vec::Unit(6, 1));
  CHECK(projector_distance(e1, e2) == doctest::Approx(1.0));
  CHECK_FALSE(equals(e1, e2));
}

TEST_CASE("full and trivial subspaces") {
  const Subspace f = Subspace::full(4);
  const Subspace t = Subspace::trivial(4);
  CHECK(f.dim() == 4);
  CHECK(t.dim() == 0);
  CHECK(t.ambient() == 4);
  CHECK(contains(f, t));
  const Vec v = Vec::Ones(4);
  CHECK(distance(f, v) < 1e-14);
  CHECK(distance(t, v) == doctest::Approx(v.norm()));
}

TEST_CASE("zero and empty matrices") {
  CHECK(image(Mat::Zero(3, 2)).dim() == 0);
  CHECK(kernel(Mat::Zero(3, 2)).dim() == 2);
  CHECK(numerical_rank(Mat(0, 4)) == 0);
  CHECK(kernel(Mat(0, 4)).dim() == 4);
  CHECK(image(Mat(3, 0)).dim() == 0);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "daeo/pencil.hpp"
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

Mat random_invertible(std::mt19937_64& rng, int n) {
  for (;;) {
    Mat m = random_matrix(rng, n, n);
    if (std::abs(m.partialPivLu().determinant()) > 1e-3) return m;
  }
}

}  // namespace

TEST_CASE("Wong limits are fixed points and terminate within n+1 steps") {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_int_distribution<int> kind(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = dim(rng);
    int rows = n;
    if (kind(rng) == 2) rows = dim(rng);  // rectangular
    Mat E = random_matrix(rng, rows, n);
    Mat A = random_matrix(rng, rows, n);
    if (kind(rng) == 0) {
      // Force some rank deficiency to exercise nontrivial chains.
      E.col(0).setZero();
      if (n > 1) A.col(n - 1).setZero();
    }
    const MatrixPencil p{E, A};
    const WongResult w = wong_limits(p);
    CHECK(w.k_star <= n + 1);
    CHECK(w.l_star <= n + 1);
    // Fixed points of the defining maps.
    const Subspace v_next = preimage(A, image(E * w.Vstar.basis));
    CHECK(equals(w.Vstar, v_next, 1e-8));
    const Subspace w_next = preimage(E, image(A * w.Wstar.basis));
    CHECK(equals(w.Wstar, w_next, 1e-8));
  }
}

TEST_CASE("Wong limits of a regular pencil are complementary") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5, r = 3;
    // E = U diag(I_r, N) W, A = U diag(A_r, I) W with nilpotent N: regular.
    Mat Eb = Mat::Zero(n, n);
    Eb.topLeftCorner(r, r) = Mat::Identity(r, r);
    Eb(3, 4) = 1.0;  // one nilpotent Jordan block of size 2
    Mat Ab = Mat::Identity(n, n);
    Ab.topLeftCorner(r, r) = random_matrix(rng, r, r);
    const Mat U = random_invertible(rng, n);
    const Mat W = random_invertible(rng, n);
    const MatrixPencil p{U * Eb * W, U * Ab * W};
    REQUIRE(is_regular(p));
    const WongResult w = wong_limits(p);
    CHECK(w.Vstar.dim() + w.Wstar.dim() == n);
    CHECK(intersect(w.Vstar, w.Wstar).dim() == 0);
    CHECK(w.Vstar.dim() == r);
  }
}

TEST_CASE("index of canonical pencils") {
  // Pure ODE pencil: index 0.
  CHECK(pencil_index(MatrixPencil{Mat::Identity(3, 3),
                                  Mat::Identity(3, 3)}) == 0);
  // diag(I, 0) vs I: one algebraic variable, index 1.
  Mat E = Mat::Identity(3, 3);
  E(2, 2) = 0.0;
  CHECK(pencil_index(MatrixPencil{E, Mat::Identity(3, 3)}) == 1);
  // Nilpotent shift block: index 3.
  Mat N = Mat::Zero(3, 3);
  N(0, 1) = 1.0;
  N(1, 2) = 1.0;
  CHECK(pencil_index(MatrixPencil{N, Mat::Identity(3, 3)}) == 3);
}

TEST_CASE("regularity detection") {
  CHECK(is_regular(MatrixPencil{Mat::Identity(2, 2), Mat::Zero(2, 2)}));
  CHECK_FALSE(is_regular(MatrixPencil{Mat::Zero(2, 2), Mat::Zero(2, 2)}));
  // Non-square is never regular.
  CHECK_FALSE(is_regular(MatrixPencil{Mat::Ones(2, 3), Mat::Ones(2, 3)}));
  CHECK_THROWS_AS(pencil_index(MatrixPencil{Mat::Zero(2, 2), Mat::Zero(2, 2)}),
                  std::invalid_argument);
}

TEST_CASE("rational rank is invariant under equivalence transformations") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    const int rows = 4, cols = 5;
    const Mat E = random_matrix(rng, rows, cols);
    Mat A = random_matrix(rng, rows, cols);
    A.row(3) = A.row(0);  // mild degeneracy
    const MatrixPencil p{E, A};
    const int rk = rational_rank(p);
    const Mat U = random_invertible(rng, rows);
    const Mat V = random_invertible(rng, cols);
    const MatrixPencil q{U * E * V, U * A * V};
    CHECK(rational_rank(q) == rk);
  }
}

TEST_CASE("gain-installed square pencil matches the published subspaces") {
  // The 3x3 pencil from the worked square example.
  Mat calE(3, 3), calA(3, 3);
  calE << 1, -1, 0, 0, 0, 0, 0, 0, 0;
  calA << -1, 0, 15, 0, 1, -7, 1, 1, 1;
  const MatrixPencil p{calE, calA};
  REQUIRE(is_regular(p));
  CHECK(pencil_index(p) == 1);

  const WongResult w = wong_limits(p);
  Mat v_ref(3, 1);
  v_ref << 8, -7, -1;
  Mat w_ref(3, 2);
  w_ref << 1, 0, 1, 0, 0, 1;
  CHECK(projector_distance(w.Vstar, image(v_ref)) < 1e-10);
  CHECK(projector_distance(w.Wstar, image(w_ref)) < 1e-10);
}

TEST_CASE("QWF round-trips 100 constructed index-one pencils") {
  std::mt19937_64 rng(113);
  std::uniform_int_distribution<int> dim(2, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dim(rng);
    std::uniform_int_distribution<int> rpick(1, n);
    const int r = rpick(rng);
    Mat Eb = Mat::Zero(n, n);
    Eb.topLeftCorner(r, r) = Mat::Identity(r, r);
    Mat Ab = Mat::Identity(n, n);
    Ab.topLeftCorner(r, r) = random_matrix(rng, r, r);
    const Mat U = random_invertible(rng, n);
    const Mat W = random_invertible(rng, n);
    const MatrixPencil p{U * Eb * W, U * Ab * W};

    const QwfTransform q = qwf_transform(p);
    REQUIRE(q.r == r);
    Mat expectE = Mat::Zero(n, n);
    expectE.topLeftCorner(r, r) = Mat::Identity(r, r);
    Mat gotE = q.M * p.E * q.N;
    Mat gotA = q.M * p.A * q.N;
    CHECK((gotE - expectE).norm() < 1e-8);
    CHECK((gotA.topLeftCorner(r, r) - q.A_r).norm() < 1e-12);
    CHECK(gotA.topRightCorner(r, n - r).norm() < 1e-8);
    CHECK(gotA.bottomLeftCorner(n - r, r).norm() < 1e-8);
    CHECK((gotA.bottomRightCorner(n - r, n - r) -
           Mat::Identity(n - r, n - r)).norm() < 1e-8);
  }
}

TEST_CASE("QWF rejects higher-index and singular pencils") {
  Mat N = Mat::Zero(2, 2);
  N(0, 1) = 1.0;
  CHECK_THROWS_AS(qwf_transform(MatrixPencil{N, Mat::Identity(2, 2)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(qwf_transform(MatrixPencil{Mat::Zero(2, 2), Mat::Zero(2, 2)}),
                  std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <stdexcept>

#include "daeo/model.hpp"
#include "doctest.h"
#include "systems.hpp"

using namespace daeo;

TEST_CASE("validate accepts the shipped examples") {
  CHECK_NOTHROW(testsys::ex1().sys.validate());
  CHECK_NOTHROW(testsys::ex2().sys.validate());
  CHECK_NOTHROW(testsys::ex3().sys.validate());
  CHECK_NOTHROW(testsys::counterexample().sys.validate());
}

TEST_CASE("validate rejects shape and content defects") {
  SUBCASE("A rows mismatch") {
    DaeSystem s = testsys::ex2().sys;
    s.A = Mat::Zero(3, 2);
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
  SUBCASE("C column count mismatch") {
    DaeSystem s = testsys::ex2().sys;
    s.C = Mat::Zero(1, 3);
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
  SUBCASE("non-finite entry") {
    DaeSystem s = testsys::ex2().sys;
    s.A(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
  SUBCASE("rank-deficient J") {
    DaeSystem s = testsys::ex2().sys;
    s.J = Mat::Zero(1, 2);
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
  SUBCASE("f_M output dimension must match B_M") {
    DaeSystem s = testsys::ex2().sys;
    s.f_M.exprs.push_back(parse_expression("w1"));
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
  SUBCASE("state index out of range in f_L") {
    DaeSystem s = testsys::ex2().sys;
    s.f_L.exprs[0] = parse_expression("x3");
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }
}

TEST_CASE("augmented blocks carry the expected structure") {
  const testsys::Instance it = testsys::ex1();
  const AugmentedSystem aug = build_augmented(it.sys, it.gains);
  const int n = aug.n, k = aug.k, l = aug.l, p = aug.p;
  REQUIRE(n == 2);
  REQUIRE(k == 2);
  REQUIRE(l == 4);
  REQUIRE(p == 1);

  CHECK(aug.calE.rows() == l + p);
  CHECK(aug.calE.cols() == n + k);
  CHECK((aug.calE.topLeftCorner(l, n) - it.sys.E).norm() == 0.0);
  CHECK(aug.calE.rightCols(k).norm() == 0.0);
  CHECK(aug.calE.bottomRows(p).norm() == 0.0);

  CHECK((aug.calA.topLeftCorner(l, n) - it.sys.A).norm() == 0.0);
  CHECK((aug.calA.topRightCorner(l, k) - it.gains.L1).norm() == 0.0);
  CHECK((aug.calA.bottomLeftCorner(p, n) - it.sys.C).norm() == 0.0);
  CHECK((aug.calA.bottomRightCorner(p, k) - it.gains.L2).norm() == 0.0);

  CHECK((aug.calB.topLeftCorner(l, it.sys.q_L) - it.sys.B_L).norm() == 0.0);
  CHECK((aug.calB.topRightCorner(l, it.sys.q_M) - it.sys.B_M).norm() == 0.0);
  CHECK(aug.calB.bottomRows(p).norm() == 0.0);

  CHECK((aug.calA - aug.A_hat).leftCols(n).norm() == 0.0);
  CHECK((aug.calF.leftCols(n) - it.sys.F).norm() == 0.0);
  CHECK(aug.calF.rightCols(k).norm() == 0.0);

  // Theta_hat stacks J'Theta into the f_M block of the state rows.
  const Mat jt = it.sys.J.transpose() * it.sys.Theta;
  CHECK((aug.Theta_hat.block(0, it.sys.q_L, n, it.sys.q_M) - jt).norm() == 0.0);
  CHECK(aug.Theta_hat.leftCols(it.sys.q_L).norm() == 0.0);
  CHECK(aug.Theta_hat.bottomRows(k).norm() == 0.0);

  const Mat jj = it.sys.J.transpose() * it.sys.J;
  CHECK((aug.calJ.topLeftCorner(n, n) - jj).norm() == 0.0);
  CHECK(aug.calJ.rightCols(k).norm() == 0.0);
  CHECK(aug.calJ.bottomRows(k).norm() == 0.0);

  CHECK(aug.mu == it.sys.mu);
}

TEST_CASE("H and Lambda are complementary projectors") {
  for (const testsys::Instance& it :
       {testsys::ex1(), testsys::ex2(), testsys::ex3()}) {
    const AugmentedSystem aug = build_augmented(it.sys, it.gains);
    CHECK((aug.H * aug.H - aug.H).norm() == 0.0);
    CHECK((aug.Lambda_qL * aug.Lambda_qL - aug.Lambda_qL).norm() == 0.0);
    CHECK(aug.H.trace() == doctest::Approx(aug.k));
    CHECK(aug.Lambda_qL.trace() == doctest::Approx(aug.q_L));
    // H kills the first n coordinates and fixes the last k.
    Vec v = Vec::LinSpaced(aug.n + aug.k, 1.0, aug.n + aug.k);
    Vec hv = aug.H * v;
    CHECK(hv.head(aug.n).norm() == 0.0);
    CHECK((hv.tail(aug.k) - v.tail(aug.k)).norm() == 0.0);
  }
}

TEST_CASE("embed_gains matches build_augmented and round-trips") {
  const testsys::Instance it = testsys::ex1();
  const Mat L_hat = embed_gains(it.gains, it.sys.l, it.sys.p, it.sys.n);
  CHECK(L_hat.rows() == it.sys.l + it.sys.p);
  CHECK(L_hat.cols() == it.sys.n + it.gains.k);
  CHECK(L_hat.leftCols(it.sys.n).norm() == 0.0);

  const AugmentedSystem a = build_augmented(it.sys, it.gains);
  const AugmentedSystem b = build_augmented_from_L(it.sys, L_hat);
  CHECK((a.calA - b.calA).norm() == 0.0);
  CHECK((a.calE - b.calE).norm() == 0.0);

  const ObserverGains back = gains_of(a);
  CHECK(back.k == it.gains.k);
  CHECK((back.L1 - it.gains.L1).norm() == 0.0);
  CHECK((back.L2 - it.gains.L2).norm() == 0.0);
}

TEST_CASE("embed_gains rejects inconsistent shapes") {
  ObserverGains g;
  g.L1 = Mat::Zero(3, 2);
  g.L2 = Mat::Zero(1, 1);  // column count disagrees with L1
  g.k = 2;
  CHECK_THROWS_AS(embed_gains(g, 3, 1, 2), std::invalid_argument);
  g.L2 = Mat::Zero(2, 2);  // row count disagrees with p
  CHECK_THROWS_AS(embed_gains(g, 3, 1, 2), std::invalid_argument);
}

TEST_CASE("k = 0 builds a plain system copy") {
  testsys::Instance it = testsys::ex3();
  ObserverGains none;
  none.L1 = Mat::Zero(3, 0);
  none.L2 = Mat::Zero(1, 0);
  none.k = 0;
  const AugmentedSystem aug = build_augmented(it.sys, none);
  CHECK(aug.calA.cols() == it.sys.n);
  CHECK((aug.calA - aug.A_hat).norm() == 0.0);
  CHECK(aug.H.norm() == 0.0);
}

TEST_CASE("necessary rank condition on the examples") {
  {
    const RankCheckResult r = necessary_rank_check(testsys::ex1().sys);
    CHECK(r.rank == 2);
    CHECK(r.rank_equals_n);
    CHECK(r.n_le_lp);
  }
  {
    const RankCheckResult r = necessary_rank_check(testsys::ex2().sys);
    CHECK(r.rank == 2);
    CHECK(r.rank_equals_n);
    CHECK(r.n_le_lp);
  }
  {
    const RankCheckResult r = necessary_rank_check(testsys::ex3().sys);
    CHECK(r.rank == 3);
    CHECK(r.rank_equals_n);
    CHECK(r.n_le_lp);
  }
  {
    // y = 0 carries no information but the state decays by itself, so the
    // stacked pencil still has full column rank.
    const RankCheckResult r = necessary_rank_check(testsys::counterexample().sys);
    CHECK(r.rank == 1);
    CHECK(r.rank_equals_n);
    CHECK(r.n_le_lp);
  }
  {
    // Unobservable direction shared by E, A and C: rank drops below n.
    DaeSystem s = testsys::ex2().sys;
    s.E = Mat::Zero(2, 2);
    s.E(0, 0) = 1.0;
    s.A = Mat::Zero(2, 2);
    s.A(0, 0) = -1.0;
    s.C = Mat::Zero(1, 2);
    s.C(0, 0) = 1.0;
    s.J = Mat::Zero(1, 2);
    s.J(0, 0) = 1.0;
    s.F = Mat::Zero(1, 2);
    s.F(0, 0) = 1.0;
    const RankCheckResult r = necessary_rank_check(s);
    CHECK(r.rank == 1);
    CHECK_FALSE(r.rank_equals_n);
  }
}

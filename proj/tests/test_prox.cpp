#include "cadmm/prox.hpp"

#include "oracles.hpp"

#include <catch2/catch.hpp>

using namespace cadmm;

using oracle::prox_oracle_1d;
using oracle::sqrt_prox_radius_oracle;

TEST_CASE("loss prox closed forms match the numeric minimizer", "[prox]") {
  SECTION("least squares example") {
    const Vector out = prox_loss(Loss::least_squares(), Vector::Constant(1, 3.0), {1.0, 2});
    REQUIRE(out[0] == Approx(2.0).margin(1e-12));
    REQUIRE(out[0] == Approx(prox_oracle_1d(Loss::least_squares(), 3.0, 1.0, 2.0)).margin(1e-7));
  }
  SECTION("quantile example") {
    const Vector out = prox_loss(Loss::quantile(0.5), Vector::Constant(1, 1.0), {1.0, 1});
    REQUIRE(out[0] == Approx(0.5).margin(1e-12));
    REQUIRE(out[0] == Approx(prox_oracle_1d(Loss::quantile(0.5), 1.0, 1.0, 1.0)).margin(1e-7));
  }
  SECTION("huber example") {
    const Vector out = prox_loss(Loss::huber(1.0), Vector::Constant(1, 0.5), {1.0, 1});
    REQUIRE(out[0] == Approx(0.25).margin(1e-12));
    REQUIRE(out[0] == Approx(prox_oracle_1d(Loss::huber(1.0), 0.5, 1.0, 1.0)).margin(1e-7));
  }
  SECTION("square root at zero input is the zero vector") {
    const Vector out = prox_loss(Loss::square_root(), Vector::Zero(4), {0.7, 5});
    REQUIRE(out.isZero(0.0));
  }
  SECTION("random draws, every loss") {
    oracle::TestRng rng(42);
    for (int trial = 0; trial < 250; ++trial) {
      const double mu = rng.uniform(0.05, 5.0);
      const auto n = static_cast<Index>(1 + static_cast<int>(rng.uniform(0.0, 50.0)));
      const double x = rng.uniform(-4.0, 4.0);
      const ProxParams params{mu, n};
      const double nn = static_cast<double>(n);

      const Loss losses[] = {Loss::least_squares(), Loss::quantile(rng.uniform(0.05, 0.95)),
                             Loss::huber(rng.uniform(0.1, 3.0))};
      for (const Loss& loss : losses) {
        const double got = prox_loss(loss, Vector::Constant(1, x), params)[0];
        REQUIRE(got == Approx(prox_oracle_1d(loss, x, mu, nn)).margin(1e-6));
      }

      Vector xv = rng.normal_vector(4);
      const Vector got = prox_loss(Loss::square_root(), xv, params);
      const double radius = sqrt_prox_radius_oracle(xv.norm(), mu, nn);
      const Vector expected = xv.norm() > 0 ? Vector(radius / xv.norm() * xv) : Vector::Zero(4);
      REQUIRE((got - expected).lpNorm<Eigen::Infinity>() < 1e-6);
    }
  }
  SECTION("invalid parameters are rejected") {
    REQUIRE_THROWS_AS(prox_loss(Loss::least_squares(), Vector::Zero(1), {0.0, 1}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(prox_loss(Loss::least_squares(), Vector::Zero(1), {1.0, 0}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(prox_loss(Loss::quantile(1.0), Vector::Zero(1), {1.0, 1}),
                      std::invalid_argument);
  }
}

TEST_CASE("soft thresholding", "[prox]") {
  Vector x(2);
  x << 3.0, -0.5;
  const Vector out = soft_threshold(x, 1.0);
  REQUIRE(out[0] == 2.0);
  REQUIRE(out[1] == 0.0);

  REQUIRE(soft_threshold(x, 0.0) == x);

  Vector t(1);
  t << 1.5;
  REQUIRE(soft_threshold(Vector::Constant(1, -4.0), t)[0] == -2.5);

  REQUIRE_THROWS_AS(soft_threshold(1.0, -0.1), std::invalid_argument);
}

TEST_CASE("group soft thresholding", "[prox]") {
  const GroupMap one_group = GroupMap::contiguous(2, 1);
  Vector x(2);
  x << 3.0, 4.0;

  SECTION("example against the brute-force minimizer") {
    const Vector got = group_soft_threshold(x, one_group, 1.0);
    REQUIRE(got[0] == Approx(2.4).margin(1e-12));
    REQUIRE(got[1] == Approx(3.2).margin(1e-12));
    const Vector brute = oracle::grid_refine_minimize(
        [&](const Vector& b) { return b.norm() + 0.5 * (b - x).squaredNorm(); }, x, 5.0);
    REQUIRE((got - brute).lpNorm<Eigen::Infinity>() < 1e-5);
  }
  SECTION("zero threshold is the identity") {
    REQUIRE(group_soft_threshold(x, one_group, 0.0) == x);
  }
  SECTION("full shrinkage when the group norm is below the threshold") {
    REQUIRE(group_soft_threshold(x, one_group, 6.0).isZero(0.0));
  }
}

TEST_CASE("shrinkage maps are firmly nonexpansive and monotone in t", "[prox]") {
  oracle::TestRng rng(99);
  const GroupMap groups = GroupMap::contiguous(6, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector a = rng.uniform_vector(6, -5.0, 5.0);
    const Vector b = rng.uniform_vector(6, -5.0, 5.0);
    const double t = rng.uniform(0.0, 3.0);
    REQUIRE((soft_threshold(a, t) - soft_threshold(b, t)).norm() <= (a - b).norm() + 1e-12);
    REQUIRE((group_soft_threshold(a, groups, t) - group_soft_threshold(b, groups, t)).norm() <=
            (a - b).norm() + 1e-12);
  }
  for (int trial = 0; trial < 200; ++trial) {
    const Vector a = rng.uniform_vector(6, -5.0, 5.0);
    const double t1 = rng.uniform(0.0, 2.0);
    const double t2 = t1 + rng.uniform(0.0, 2.0);
    const Vector s1 = soft_threshold(a, t1), s2 = soft_threshold(a, t2);
    for (Index j = 0; j < 6; ++j) REQUIRE(std::abs(s2[j]) <= std::abs(s1[j]) + 1e-12);
    const Vector g1 = group_soft_threshold(a, groups, t1);
    const Vector g2 = group_soft_threshold(a, groups, t2);
    REQUIRE(g2.norm() <= g1.norm() + 1e-12);
  }
}

TEST_CASE("ridge shrink solves its stationarity equation", "[prox]") {
  SECTION("no ridge leaves the input unchanged") {
    const Vector v = Vector::Constant(3, 1.7);
    REQUIRE(ridge_shrink(v, 0.0, 1.0) == v);
  }
  SECTION("worked examples") {
    REQUIRE(ridge_shrink(Vector::Constant(1, 2.0), 0.5, 1.0)[0] == Approx(1.0));
    REQUIRE(ridge_shrink(Vector::Constant(1, 3.0), 1.0, 2.0)[0] == Approx(1.5));
  }
  SECTION("stationarity 2*l2*b - mu*(v - b) = 0 on random draws") {
    oracle::TestRng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const double l2 = rng.uniform(0.0, 4.0);
      const double mu = rng.uniform(0.1, 4.0);
      const Vector v = rng.normal_vector(4);
      const Vector b = ridge_shrink(v, l2, mu);
      REQUIRE((2.0 * l2 * b - mu * (v - b)).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("nonconvex derivative weights", "[prox]") {
  SECTION("scad branches") {
    REQUIRE(nonconvex_weight(SparsityKind::scad, 3.7, 1.0, Vector::Constant(1, 0.5))[0] == 1.0);
    REQUIRE(nonconvex_weight(SparsityKind::scad, 3.7, 1.0, Vector::Constant(1, 5.0))[0] == 0.0);
    REQUIRE(nonconvex_weight(SparsityKind::scad, 3.7, 1.0, Vector::Constant(1, 2.0))[0] ==
            Approx((3.7 - 2.0) / 2.7));
  }
  SECTION("mcp example") {
    REQUIRE(nonconvex_weight(SparsityKind::mcp, 3.0, 1.0, Vector::Constant(1, 0.6))[0] ==
            Approx(0.8));
  }
  SECTION("weights are the derivative of the penalty value") {
    oracle::TestRng rng(17);
    const double h = 1e-6;
    for (int trial = 0; trial < 200; ++trial) {
      const double l1 = rng.uniform(0.2, 2.0);
      const double a_scad = rng.uniform(2.2, 5.0);
      const double a_mcp = rng.uniform(1.2, 5.0);
      const double t = rng.uniform(h, 3.0 * l1 * 5.0);
      if (std::abs(t - l1) > 1e-3 && std::abs(t - a_scad * l1) > 1e-3) {
        const double fd =
            (scad_value(t + h, l1, a_scad) - scad_value(t - h, l1, a_scad)) / (2.0 * h);
        REQUIRE(scad_weight(t, l1, a_scad) == Approx(fd).margin(1e-5));
      }
      if (std::abs(t - a_mcp * l1) > 1e-3) {
        const double fd = (mcp_value(t + h, l1, a_mcp) - mcp_value(t - h, l1, a_mcp)) / (2.0 * h);
        REQUIRE(mcp_weight(t, l1, a_mcp) == Approx(fd).margin(1e-5));
      }
    }
  }
  SECTION("bounds: lambda1 at zero, zero beyond a*lambda1, never outside [0, lambda1]") {
    oracle::TestRng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
      const double l1 = rng.uniform(0.0, 2.0);
      const double a = rng.uniform(2.1, 6.0);
      const Vector beta = rng.uniform_vector(8, 0.0, 3.0 * a * (l1 + 0.1));
      for (SparsityKind kind : {SparsityKind::scad, SparsityKind::mcp}) {
        const Vector w = nonconvex_weight(kind, a, l1, beta);
        for (Index j = 0; j < w.size(); ++j) {
          REQUIRE(w[j] >= 0.0);
          REQUIRE(w[j] <= l1 + 1e-15);
          if (beta[j] > a * l1) REQUIRE(w[j] == 0.0);
        }
        REQUIRE(nonconvex_weight(kind, a, l1, Vector::Zero(1))[0] == l1);
      }
    }
  }
  SECTION("invalid shape parameters") {
    REQUIRE_THROWS_AS(nonconvex_weight(SparsityKind::scad, 2.0, 1.0, Vector::Zero(1)),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(nonconvex_weight(SparsityKind::mcp, 1.0, 1.0, Vector::Zero(1)),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(nonconvex_weight(SparsityKind::l1, 3.0, 1.0, Vector::Zero(1)),
                      std::invalid_argument);
  }
}

TEST_CASE("huber loss value honors the orientation flag", "[prox]") {
  const Loss huber = Loss::huber(1.0);
  const Vector r = Vector::Constant(1, -0.5);
  // conventional: quadratic on |r| <= delta -> 0.125; as printed: the
  // quadratic branch requires r >= delta, so the linear branch applies.
  REQUIRE(loss_value(huber, r, 1, HuberOrientation::conventional) == Approx(0.125));
  REQUIRE(loss_value(huber, r, 1, HuberOrientation::as_printed) == Approx(0.0));
  const Vector big = Vector::Constant(1, 2.0);
  REQUIRE(loss_value(huber, big, 1, HuberOrientation::conventional) == Approx(1.5));
  REQUIRE(loss_value(huber, big, 1, HuberOrientation::as_printed) == Approx(2.0));
}

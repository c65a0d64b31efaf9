#include "cadmm/regularizer.hpp"

#include "oracles.hpp"

#include <catch2/catch.hpp>

using namespace cadmm;

TEST_CASE("first-difference operator", "[regularizer]") {
  Vector constant = Vector::Ones(3);
  REQUIRE(first_difference(constant).isZero(0.0));

  Vector two(2);
  two << 3.0, 1.0;
  REQUIRE(first_difference(two)[0] == 2.0);

  const Vector adj = first_difference_transpose(Vector::Ones(1), 2);
  REQUIRE(adj[0] == 1.0);
  REQUIRE(adj[1] == -1.0);

  REQUIRE_THROWS_AS(first_difference(Vector::Ones(1)), std::invalid_argument);
}

TEST_CASE("matrix-free F^T F equals the tridiagonal stencil", "[regularizer]") {
  oracle::TestRng rng(31);
  for (Index p : {2, 5, 17}) {
    Matrix F = Matrix::Zero(p - 1, p);
    for (Index j = 0; j < p - 1; ++j) {
      F(j, j) = 1.0;
      F(j, j + 1) = -1.0;
    }
    const Matrix FtF = F.transpose() * F;
    for (int trial = 0; trial < 20; ++trial) {
      const Vector v = rng.normal_vector(p);
      REQUIRE((first_difference_gram(v) - FtF * v).lpNorm<Eigen::Infinity>() < 1e-12);
      REQUIRE((first_difference(v) - F * v).lpNorm<Eigen::Infinity>() < 1e-12);
      REQUIRE((first_difference_transpose(F * v, p) - FtF * v).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("linearization constant dominates the largest eigenvalue", "[regularizer]") {
  for (Index p : {5, 50, 500}) {
    for (Index machines : {Index{1}, Index{2}, Index{10}}) {
      const double m = static_cast<double>(machines);
      const double eig = oracle::power_iteration_max_eig(
          [m](const Vector& v) -> Vector { return m * v + first_difference_gram(v); }, p);
      const double eta = fused_linearization_eta(machines);
      REQUIRE(eig <= eta + 1e-9);
      REQUIRE(eta - eig >= -1e-9);
    }
  }
}

TEST_CASE("constraint projection", "[regularizer]") {
  Vector x(2);
  x << -1.0, 2.0;
  SECTION("nonnegative clip") {
    const Vector out = project_constraint(Constraint::nonnegative(), x);
    REQUIRE(out[0] == 0.0);
    REQUIRE(out[1] == 2.0);
  }
  SECTION("none is the identity") {
    REQUIRE(project_constraint(Constraint::none(), x) == x);
  }
  SECTION("simplex example") {
    Vector v(2);
    v << 2.0, 0.0;
    const Vector out = project_constraint(Constraint::simplex(), v);
    REQUIRE(out[0] == Approx(1.0).margin(1e-12));
    REQUIRE(out[1] == Approx(0.0).margin(1e-12));
  }
  SECTION("simplex projection is the nearest feasible point (brute force, dim <= 3)") {
    oracle::TestRng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
      for (Index d : {Index{2}, Index{3}}) {
        const Vector v = rng.uniform_vector(d, -2.0, 2.0);
        const Vector fast = project_constraint(Constraint::simplex(), v);
        const Vector brute = oracle::project_simplex_brute(v);
        REQUIRE((fast - brute).lpNorm<Eigen::Infinity>() < 1e-2);
        REQUIRE((fast - v).norm() <= (brute - v).norm() + 1e-9);
        REQUIRE(fast.minCoeff() >= 0.0);
        REQUIRE(fast.sum() == Approx(1.0).margin(1e-12));
      }
    }
  }
  SECTION("box clamp") {
    const Vector out =
        project_constraint(Constraint::box(Vector::Zero(2), Vector::Ones(2)), x);
    REQUIRE(out[0] == 0.0);
    REQUIRE(out[1] == 1.0);
  }
  SECTION("idempotence") {
    oracle::TestRng rng(78);
    const Constraint sets[] = {Constraint::none(), Constraint::nonnegative(),
                               Constraint::simplex(),
                               Constraint::box(Vector::Constant(4, -0.5), Vector::Ones(4))};
    for (const Constraint& c : sets) {
      for (int trial = 0; trial < 20; ++trial) {
        const Vector v = rng.uniform_vector(4, -3.0, 3.0);
        const Vector once = project_constraint(c, v);
        REQUIRE((project_constraint(c, once) - once).lpNorm<Eigen::Infinity>() < 1e-12);
      }
    }
  }
}

namespace {

CentralState make_central(Vector aux, Vector dual) {
  CentralState c;
  c.aux = std::move(aux);
  c.structure_dual = std::move(dual);
  return c;
}

} // namespace

TEST_CASE("central coefficient update", "[regularizer]") {
  SECTION("no shrinkage averages the consensus blocks") {
    ConsensusAverages avg{Vector::Constant(2, 2.0), Vector::Zero(2)};
    CentralState central = make_central(Vector::Zero(2), Vector::Zero(2));
    const Penalty pen = Penalty::elastic_net(0.0, 0.3);
    const Vector out = central_beta_update(pen, avg, central, nullptr, 1, 1.0,
                                           Constraint::none(), Vector::Zero(2));
    REQUIRE(out[0] == Approx(1.0));
    REQUIRE(out[1] == Approx(1.0));
  }
  SECTION("a huge lambda1 shrinks everything to zero") {
    ConsensusAverages avg{Vector::Constant(3, 5.0), Vector::Constant(3, -1.0)};
    CentralState central = make_central(Vector::Constant(3, 2.0), Vector::Constant(3, 0.5));
    const Penalty pen = Penalty::elastic_net(1e12, 0.0);
    const Vector out = central_beta_update(pen, avg, central, nullptr, 4, 1.0,
                                           Constraint::none(), Vector::Zero(3));
    REQUIRE(out.isZero(0.0));
  }
  SECTION("thresholded result is projected onto the constraint") {
    ConsensusAverages avg{Vector::Zero(2), Vector::Zero(2)};
    Vector aux(2);
    aux << -2.0, 4.0;
    CentralState central = make_central(aux, Vector::Zero(2));
    const Penalty pen = Penalty::elastic_net(0.0, 0.0);
    // M = 1: u = (beta_bar + aux)/2 = [-1, 2]
    const Vector out = central_beta_update(pen, avg, central, nullptr, 1, 1.0,
                                           Constraint::nonnegative(), Vector::Zero(2));
    REQUIRE(out[0] == 0.0);
    REQUIRE(out[1] == 2.0);
  }
  SECTION("fused update takes one linearized step with eta = M + 4") {
    oracle::TestRng rng(13);
    const Index p = 6;
    const Index machines = 2;
    const Penalty pen = Penalty::sparse_fused(0.4, 0.2);
    ConsensusAverages avg{rng.normal_vector(p), rng.normal_vector(p)};
    CentralState central = make_central(rng.normal_vector(p - 1), rng.normal_vector(p - 1));
    const Vector beta_prev = rng.normal_vector(p);
    const double mu = 0.8;

    const Vector got = central_beta_update(pen, avg, central, nullptr, machines, mu,
                                           Constraint::none(), beta_prev);

    Matrix F = Matrix::Zero(p - 1, p);
    for (Index j = 0; j < p - 1; ++j) {
      F(j, j) = 1.0;
      F(j, j + 1) = -1.0;
    }
    const double eta = static_cast<double>(machines) + 4.0;
    const Vector grad =
        (static_cast<double>(machines) * Matrix::Identity(p, p) + F.transpose() * F) * beta_prev -
        static_cast<double>(machines) * (avg.beta_bar - avg.dual_bar / mu) -
        F.transpose() * (central.aux + central.structure_dual / mu);
    const Vector expected = soft_threshold(Vector(beta_prev - (mu / eta) * grad), pen.lambda1 / eta);
    REQUIRE((got - expected).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SECTION("weights identically lambda1 reproduce the unweighted update bitwise") {
    oracle::TestRng rng(14);
    for (const Penalty& pen : {Penalty::elastic_net(0.7, 0.1), Penalty::sparse_fused(0.7, 0.1)}) {
      const Index p = 5;
      ConsensusAverages avg{rng.normal_vector(p), rng.normal_vector(p)};
      CentralState central =
          make_central(rng.normal_vector(pen.split_dim(p)), rng.normal_vector(pen.split_dim(p)));
      const Vector beta_prev = rng.normal_vector(p);
      const Vector weights = Vector::Constant(p, pen.lambda1);
      const Vector plain = central_beta_update(pen, avg, central, nullptr, 3, 1.3,
                                               Constraint::none(), beta_prev);
      const Vector weighted = central_beta_update(pen, avg, central, &weights, 3, 1.3,
                                                  Constraint::none(), beta_prev);
      REQUIRE(plain == weighted);
    }
  }
}

TEST_CASE("central split-variable update", "[regularizer]") {
  SECTION("ridge with lambda2 = 0 returns beta - dual/mu") {
    Vector beta(2), dual(2);
    beta << 1.0, -2.0;
    dual << 0.5, 0.5;
    const Penalty pen = Penalty::elastic_net(0.3, 0.0);
    const Vector out = central_aux_update(pen, beta, dual, 2.0);
    REQUIRE((out - (beta - dual / 2.0)).lpNorm<Eigen::Infinity>() < 1e-15);
  }
  SECTION("group part fully shrinks small groups") {
    const Penalty pen = Penalty::sparse_group(0.0, 10.0, GroupMap::contiguous(4, 2));
    const Vector out = central_aux_update(pen, Vector::Constant(4, 0.1), Vector::Zero(4), 1.0);
    REQUIRE(out.isZero(0.0));
  }
  SECTION("fused part of a constant coefficient is zero") {
    const Penalty pen = Penalty::sparse_fused(0.0, 0.5);
    const Vector out = central_aux_update(pen, Vector::Constant(5, 3.3), Vector::Zero(4), 1.0);
    REQUIRE(out.isZero(0.0));
  }
}

TEST_CASE("central dual update", "[regularizer]") {
  SECTION("zero constraint violation leaves the dual unchanged") {
    const Penalty pen = Penalty::elastic_net(0.1, 0.1);
    Vector beta(2), dual(2);
    beta << 1.0, 2.0;
    dual << -0.3, 0.4;
    REQUIRE(central_dual_update(pen, beta, beta, dual, 1.7) == dual);
  }
  SECTION("direct arithmetic") {
    const Penalty pen = Penalty::elastic_net(0.1, 0.1);
    const Vector out = central_dual_update(pen, Vector::Ones(1), Vector::Zero(1),
                                           Vector::Zero(1), 2.0);
    REQUIRE(out[0] == -2.0);
  }
  SECTION("fused structure with constant beta and zero aux") {
    const Penalty pen = Penalty::sparse_fused(0.1, 0.1);
    const Vector dual = Vector::Constant(3, 0.9);
    REQUIRE(central_dual_update(pen, Vector::Constant(4, 2.0), Vector::Zero(3), dual, 1.0) ==
            dual);
  }
}

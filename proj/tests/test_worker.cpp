#include "cadmm/worker.hpp"

#include "oracles.hpp"

#include <catch2/catch.hpp>

#include <chrono>

using namespace cadmm;

namespace {

Shard make_shard(Matrix X, Vector y, LinearSolverKind strategy = LinearSolverKind::automatic) {
  Shard s;
  s.X = std::move(X);
  s.y = std::move(y);
  s.factor = prepare_factorization(s, strategy);
  return s;
}

LocalState zero_local(const Shard& s) {
  LocalState l;
  l.residual = s.y;
  l.beta = Vector::Zero(s.cols());
  l.residual_dual = Vector::Zero(s.rows());
  l.consensus_dual = Vector::Zero(s.cols());
  return l;
}

} // namespace

TEST_CASE("residual update is the loss prox of the fit gap", "[worker]") {
  SECTION("zero input to a shrinkage map stays zero") {
    oracle::TestRng rng(3);
    Matrix X = rng.normal_matrix(4, 3);
    Vector beta(3);
    beta << 1.0, -1.0, 0.5;
    Shard s = make_shard(X, X * beta);
    LocalState l = zero_local(s);
    l.beta = beta; // y = X beta, duals zero -> prox argument is zero
    const Vector r = update_residual(s, l, 1.0, Loss::least_squares(), 4);
    REQUIRE(r.isZero(0.0));
  }
  SECTION("quantile worked example") {
    Shard s = make_shard(Matrix::Zero(1, 1), Vector::Ones(1));
    LocalState l = zero_local(s);
    const Vector r = update_residual(s, l, 1.0, Loss::quantile(0.5), 1);
    REQUIRE(r[0] == Approx(0.5));
  }
  SECTION("square root of a zero argument") {
    Shard s = make_shard(Matrix::Zero(3, 2), Vector::Zero(3));
    LocalState l = zero_local(s);
    const Vector r = update_residual(s, l, 1.0, Loss::square_root(), 3);
    REQUIRE(r.isZero(0.0));
  }
}

TEST_CASE("local coefficient solve", "[worker]") {
  SECTION("zero design reduces the system to the identity") {
    Shard s = make_shard(Matrix::Zero(3, 2), Vector::Ones(3));
    LocalState l = zero_local(s);
    l.consensus_dual << 0.4, -0.2;
    Vector beta_central(2);
    beta_central << 1.0, 2.0;
    const Vector beta = update_local_beta(s, l, beta_central, Vector::Zero(3), 2.0);
    REQUIRE((beta - (beta_central + l.consensus_dual / 2.0)).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  SECTION("identity design solves 2 beta = 2") {
    const Index p = 4;
    Shard s = make_shard(Matrix::Identity(p, p), Vector::Constant(p, 2.0));
    LocalState l = zero_local(s);
    const Vector beta = update_local_beta(s, l, Vector::Zero(p), Vector::Zero(p), 1.0);
    REQUIRE((beta - Vector::Ones(p)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SECTION("all three strategies agree") {
    oracle::TestRng rng(9);
    const Matrix X = rng.normal_matrix(5, 8);
    const Vector y = rng.normal_vector(5);
    const Vector beta_central = rng.normal_vector(8);
    const Vector r_new = rng.normal_vector(5);

    Vector solutions[3];
    int i = 0;
    for (LinearSolverKind kind : {LinearSolverKind::direct_gram, LinearSolverKind::woodbury,
                                  LinearSolverKind::conjugate_gradient}) {
      Shard s = make_shard(X, y, kind);
      LocalState l = zero_local(s);
      l.residual_dual = rng.normal_vector(5) * 0.0; // keep duals zero across kinds
      solutions[i++] = update_local_beta(s, l, beta_central, r_new, 1.3);
    }
    REQUIRE((solutions[0] - solutions[1]).lpNorm<Eigen::Infinity>() < 1e-10);
    REQUIRE((solutions[0] - solutions[2]).lpNorm<Eigen::Infinity>() < 1e-8);
  }
  SECTION("conjugate gradient surfaces non-convergence with the residual norm") {
    oracle::TestRng rng(10);
    Shard s;
    s.X = rng.normal_matrix(6, 9);
    s.y = rng.normal_vector(6);
    s.factor = prepare_factorization(s, LinearSolverKind::conjugate_gradient, 1e-10, 0);
    LocalState l = zero_local(s);
    REQUIRE_THROWS_WITH(update_local_beta(s, l, Vector::Ones(9), Vector::Zero(6), 1.0),
                        Catch::Contains("relative residual"));
  }
}

TEST_CASE("factorization preparation and reuse", "[worker]") {
  SECTION("zero design factors the identity") {
    Shard s = make_shard(Matrix::Zero(4, 3), Vector::Zero(4), LinearSolverKind::direct_gram);
    oracle::TestRng rng(21);
    const Vector rhs = rng.normal_vector(3);
    REQUIRE((apply_gram_inverse(*s.factor, s, rhs) - rhs).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  SECTION("woodbury application equals the dense inverse") {
    oracle::TestRng rng(22);
    const Matrix X = rng.normal_matrix(4, 6);
    Shard s = make_shard(X, Vector::Zero(4), LinearSolverKind::woodbury);
    const Matrix dense_inverse =
        (X.transpose() * X + Matrix::Identity(6, 6)).inverse();
    for (int trial = 0; trial < 10; ++trial) {
      const Vector rhs = rng.normal_vector(6);
      REQUIRE((apply_gram_inverse(*s.factor, s, rhs) - dense_inverse * rhs)
                  .lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }
  SECTION("repeated application is deterministic across re-factorizations") {
    oracle::TestRng rng(23);
    const Matrix X = rng.normal_matrix(7, 5);
    const Vector rhs = rng.normal_vector(5);
    Shard s = make_shard(X, Vector::Zero(7), LinearSolverKind::direct_gram);
    const Vector first = apply_gram_inverse(*s.factor, s, rhs);
    for (int it = 0; it < 100; ++it) {
      const Vector again = apply_gram_inverse(*s.factor, s, rhs);
      REQUIRE(again == first);
    }
    Shard refactored = make_shard(X, Vector::Zero(7), LinearSolverKind::direct_gram);
    REQUIRE(apply_gram_inverse(*refactored.factor, refactored, rhs) == first);
  }
  SECTION("automatic selection follows the cost model") {
    REQUIRE(select_strategy(100, 20) == LinearSolverKind::direct_gram);
    REQUIRE(select_strategy(20, 100) == LinearSolverKind::woodbury);
    REQUIRE(select_strategy(3000, 5000) == LinearSolverKind::conjugate_gradient);
  }
}

TEST_CASE("per-iteration cost scales linearly in the shard size", "[worker]") {
  oracle::TestRng rng(40);
  auto iteration_seconds = [&rng](Index rows) {
    Shard s = make_shard(rng.normal_matrix(rows, 60), rng.normal_vector(rows),
                         LinearSolverKind::direct_gram);
    LocalState l = zero_local(s);
    const Vector beta_central = rng.normal_vector(60);
    auto one_pass = [&] {
      for (int it = 0; it < 40; ++it) {
        const Vector r = update_residual(s, l, 1.0, Loss::least_squares(), rows);
        l.beta = update_local_beta(s, l, beta_central, r, 1.0);
      }
    };
    one_pass(); // warm caches and the allocator before timing
    double best = std::numeric_limits<double>::max();
    for (int repeat = 0; repeat < 7; ++repeat) {
      const auto t0 = std::chrono::steady_clock::now();
      one_pass();
      best = std::min(best, std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count());
    }
    return best;
  };
  const double base = iteration_seconds(8000);
  const double doubled = iteration_seconds(16000);
  const double factor = doubled / base;
  REQUIRE(factor >= 1.5);
  REQUIRE(factor <= 3.0);
}

TEST_CASE("local dual updates", "[worker]") {
  oracle::TestRng rng(33);
  SECTION("satisfied constraints leave duals unchanged") {
    const Matrix X = rng.normal_matrix(4, 3);
    const Vector beta = rng.normal_vector(3);
    Shard s = make_shard(X, Vector::Zero(4));
    LocalState l;
    l.beta = beta;
    l.residual = -X * beta; // X beta + r = 0 = y
    l.residual_dual = rng.normal_vector(4);
    l.consensus_dual = rng.normal_vector(3);
    const auto [d, e] = update_local_duals(s, l, beta, 1.7);
    REQUIRE((d - l.residual_dual).lpNorm<Eigen::Infinity>() < 1e-14);
    REQUIRE((e - l.consensus_dual).lpNorm<Eigen::Infinity>() < 1e-14);
  }
  SECTION("unit violation moves the dual by -mu") {
    Shard s = make_shard(Matrix::Zero(1, 1), Vector::Zero(1));
    LocalState l = zero_local(s);
    l.residual = Vector::Ones(1); // X beta + r - y = 1
    const auto [d, e] = update_local_duals(s, l, Vector::Zero(1), 2.0);
    REQUIRE(d[0] == -2.0);
    REQUIRE(e[0] == 0.0);
  }
}

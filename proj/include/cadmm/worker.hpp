#pragma once

#include "cadmm/prox.hpp"
#include "cadmm/types.hpp"

#include <Eigen/Cholesky>

#include <memory>

namespace cadmm {

// ============================================================================
// Cached linear-system solvers for (X^T X + I) beta = rhs
// ============================================================================

/// Resolved strategy for one shard. Computed once per solve, reused every
/// iteration.
struct Factorization {
  LinearSolverKind kind = LinearSolverKind::direct_gram;
  Eigen::LLT<Matrix> llt; // of X^T X + I (direct_gram) or I + X X^T (woodbury)
  double cg_tol = 1e-10;
  int cg_max_iter = 0;
};

/// Strategy auto-selection: factorize the p x p Gram when p <= n_m, switch to
/// the n_m x n_m Woodbury complement when p dominates, and fall back to
/// conjugate gradient when both sides are large.
inline LinearSolverKind select_strategy(Index rows, Index cols) {
  if (cols <= rows) return LinearSolverKind::direct_gram;
  if (rows <= 2000) return LinearSolverKind::woodbury;
  return LinearSolverKind::conjugate_gradient;
}

inline std::shared_ptr<const Factorization> prepare_factorization(
    const Shard& shard, LinearSolverKind strategy, double cg_tol = 1e-10,
    int cg_max_iter_factor = 10) {
  shard.validate();
  auto f = std::make_shared<Factorization>();
  f->kind = strategy == LinearSolverKind::automatic ? select_strategy(shard.rows(), shard.cols())
                                                    : strategy;
  switch (f->kind) {
    case LinearSolverKind::direct_gram: {
      Matrix gram = shard.X.transpose() * shard.X;
      gram.diagonal().array() += 1.0;
      f->llt.compute(gram);
      break;
    }
    case LinearSolverKind::woodbury: {
      Matrix outer = shard.X * shard.X.transpose();
      outer.diagonal().array() += 1.0;
      f->llt.compute(outer);
      break;
    }
    case LinearSolverKind::conjugate_gradient:
      f->cg_tol = cg_tol;
      f->cg_max_iter = cg_max_iter_factor * static_cast<int>(shard.cols());
      break;
    case LinearSolverKind::automatic:
      throw std::logic_error("strategy not resolved");
  }
  if (f->kind != LinearSolverKind::conjugate_gradient && f->llt.info() != Eigen::Success)
    throw std::runtime_error("factorization of the shard system failed");
  return f;
}

namespace detail {

/// Matrix-free conjugate gradient on (X^T X + I) beta = rhs.
inline Vector conjugate_gradient_solve(const Matrix& X, const Vector& rhs,
                                       const Vector* warm_start, double tol, int max_iter) {
  const Index p = X.cols();
  Vector x = warm_start && warm_start->size() == p ? *warm_start : Vector::Zero(p);
  auto apply = [&X](const Vector& v) -> Vector { return X.transpose() * (X * v) + v; };
  Vector r = rhs - apply(x);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Vector::Zero(p);
  double rr = r.squaredNorm();
  if (std::sqrt(rr) <= tol * rhs_norm) return x;
  Vector d = r;
  for (int it = 0; it < max_iter; ++it) {
    Vector ad = apply(d);
    const double alpha = rr / d.dot(ad);
    x += alpha * d;
    r -= alpha * ad;
    const double rr_next = r.squaredNorm();
    if (std::sqrt(rr_next) <= tol * rhs_norm) return x;
    d = r + (rr_next / rr) * d;
    rr = rr_next;
  }
  throw std::runtime_error("conjugate gradient did not converge; final relative residual " +
                           std::to_string(std::sqrt(rr) / rhs_norm));
}

} // namespace detail

/// Apply (X^T X + I)^{-1} through the cached solver. Woodbury uses
/// (X^T X + I)^{-1} = I - X^T (I + X X^T)^{-1} X.
inline Vector apply_gram_inverse(const Factorization& factor, const Shard& shard,
                                 const Vector& rhs, const Vector* warm_start = nullptr) {
  switch (factor.kind) {
    case LinearSolverKind::direct_gram:
      return factor.llt.solve(rhs);
    case LinearSolverKind::woodbury:
      return rhs - shard.X.transpose() * factor.llt.solve(shard.X * rhs);
    case LinearSolverKind::conjugate_gradient:
      return detail::conjugate_gradient_solve(shard.X, rhs, warm_start, factor.cg_tol,
                                              factor.cg_max_iter);
    case LinearSolverKind::automatic:
      break;
  }
  throw std::logic_error("strategy not resolved");
}

// ============================================================================
// Local-machine updates
// ============================================================================

/// Argument of the residual prox at the pre-update local coefficient:
/// y_m + d_m/mu - X_m beta_m^k.
inline Vector residual_prox_input(const Shard& shard, const LocalState& local, double mu) {
  return shard.y + local.residual_dual / mu - shard.X * local.beta;
}

/// r_m <- prox of the loss at y_m + d_m/mu - X_m beta_m^k. Uses the
/// PRE-update local coefficient. For the square-root loss the shard block is
/// treated as the whole prox vector; the engine coordinates the global norm
/// across shards itself when M > 1.
inline Vector update_residual(const Shard& shard, const LocalState& local, double mu,
                              const Loss& loss, Index n_total) {
  return prox_loss(loss, residual_prox_input(shard, local, mu), ProxParams{mu, n_total});
}

/// beta_m <- (X^T X + I)^{-1} [ X^T (y + d/mu - r^{k+1}) + beta_central + e/mu ].
inline Vector update_local_beta(const Shard& shard, const LocalState& local,
                                const Vector& beta_central, const Vector& residual_new,
                                double mu) {
  if (!shard.factor) throw std::invalid_argument("shard factorization not prepared");
  Vector rhs = shard.X.transpose() * (shard.y + local.residual_dual / mu - residual_new) +
               beta_central + local.consensus_dual / mu;
  return apply_gram_inverse(*shard.factor, shard, rhs, &local.beta);
}

/// Dual ascent on the data-fit and consensus constraints. Expects the
/// post-update residual and local coefficient in `local`.
inline std::pair<Vector, Vector> update_local_duals(const Shard& shard, const LocalState& local,
                                                    const Vector& beta_central, double mu) {
  Vector d = local.residual_dual - mu * (shard.X * local.beta + local.residual - shard.y);
  Vector e = local.consensus_dual - mu * (local.beta - beta_central);
  return {std::move(d), std::move(e)};
}

} // namespace cadmm

#pragma once

#include "cadmm/types.hpp"

#include <cmath>

namespace cadmm {

// ============================================================================
// Loss proximal operators
// ============================================================================

/// Scaling context for the loss proximal operators. `n` is the GLOBAL sample
/// count: every machine's loss carries the same 1/n factor regardless of its
/// own shard size.
struct ProxParams {
  double mu = 1.0;
  Index n = 1;

  void validate() const {
    if (!(mu > 0.0)) throw std::invalid_argument("prox penalty parameter must be positive");
    if (n < 1) throw std::invalid_argument("prox sample count must be >= 1");
  }
};

/// Shrinkage factor of the square-root loss prox at a given input norm:
/// prox(x) = factor * x. Zero norm maps to zero (the limit case).
inline double square_root_prox_scale(double norm, const ProxParams& p) {
  if (norm <= 0.0) return 0.0;
  const double cut = 1.0 / (std::sqrt(2.0 * static_cast<double>(p.n)) * p.mu);
  return std::max(norm - cut, 0.0) / norm;
}

/// argmin_r { L(r) + (mu/2) ||r - x||^2 } with L scaled by the global 1/n.
/// The square-root loss acts on the whole vector; the others are
/// coordinatewise.
inline Vector prox_loss(const Loss& loss, const Vector& x, const ProxParams& params) {
  params.validate();
  loss.validate();
  const double nm = static_cast<double>(params.n) * params.mu;
  switch (loss.kind) {
    case LossKind::least_squares:
      return (nm / (1.0 + nm)) * x;
    case LossKind::quantile: {
      Vector out(x.size());
      const double up = loss.tau / nm;
      const double dn = (1.0 - loss.tau) / nm;
      for (Index i = 0; i < x.size(); ++i)
        out[i] = std::max(x[i] - up, std::min(0.0, x[i] + dn));
      return out;
    }
    case LossKind::square_root:
      return square_root_prox_scale(x.norm(), params) * x;
    case LossKind::huber: {
      Vector out(x.size());
      const double nmd = nm * loss.delta;
      for (Index i = 0; i < x.size(); ++i) {
        const double s = static_cast<double>(x[i] > 0.0) - static_cast<double>(x[i] < 0.0);
        out[i] = nmd * x[i] / (1.0 + nmd) +
                 s * std::max(0.0, std::abs(x[i]) - 1.0 / nm - loss.delta) / (1.0 + nmd);
      }
      return out;
    }
  }
  throw std::logic_error("unreachable loss kind");
}

// ============================================================================
// Penalty proximal operators
// ============================================================================

inline double soft_threshold(double x, double t) {
  if (t < 0.0) throw std::invalid_argument("soft threshold must be nonnegative");
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

inline Vector soft_threshold(const Vector& x, double t) {
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out[i] = soft_threshold(x[i], t);
  return out;
}

/// Per-coordinate thresholds, used by the LLA-weighted updates.
inline Vector soft_threshold(const Vector& x, const Vector& t) {
  if (t.size() != x.size()) throw std::invalid_argument("threshold vector dimension mismatch");
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out[i] = soft_threshold(x[i], t[i]);
  return out;
}

/// Groupwise norm shrinkage: each group g maps to
/// (x_g / ||x_g||) * max(||x_g|| - t, 0); a zero group stays zero.
inline Vector group_soft_threshold(const Vector& x, const GroupMap& groups, double t) {
  if (t < 0.0) throw std::invalid_argument("group soft threshold must be nonnegative");
  if (groups.dim() != x.size()) throw std::invalid_argument("group map dimension mismatch");
  Vector norms = Vector::Zero(groups.group_count);
  for (Index j = 0; j < x.size(); ++j)
    norms[groups.assignment[static_cast<std::size_t>(j)]] += x[j] * x[j];
  Vector scale(groups.group_count);
  for (int g = 0; g < groups.group_count; ++g) {
    const double nrm = std::sqrt(norms[g]);
    scale[g] = nrm > 0.0 ? std::max(nrm - t, 0.0) / nrm : 0.0;
  }
  Vector out(x.size());
  for (Index j = 0; j < x.size(); ++j)
    out[j] = scale[groups.assignment[static_cast<std::size_t>(j)]] * x[j];
  return out;
}

/// Closed form of the ridge-penalized split update: mu * v / (2*lambda2 + mu).
inline Vector ridge_shrink(const Vector& v, double lambda2, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (lambda2 < 0.0) throw std::invalid_argument("lambda2 must be nonnegative");
  return (mu / (2.0 * lambda2 + mu)) * v;
}

// ============================================================================
// Nonconvex penalties: values and derivative weights
// ============================================================================

/// scad penalty value at t >= 0.
inline double scad_value(double t, double lambda, double a) {
  t = std::abs(t);
  if (t <= lambda) return lambda * t;
  if (t <= a * lambda) return (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0));
  return lambda * lambda * (a + 1.0) / 2.0;
}

/// mcp penalty value at t >= 0.
inline double mcp_value(double t, double lambda, double a) {
  t = std::abs(t);
  if (t <= a * lambda) return lambda * t - t * t / (2.0 * a);
  return a * lambda * lambda / 2.0;
}

inline double scad_weight(double t, double lambda, double a) {
  t = std::abs(t);
  if (t <= lambda) return lambda;
  if (t < a * lambda) return (a * lambda - t) / (a - 1.0);
  return 0.0;
}

inline double mcp_weight(double t, double lambda, double a) {
  t = std::abs(t);
  if (t <= a * lambda) return lambda - t / a;
  return 0.0;
}

/// Elementwise derivative weights of the scad/mcp penalty at |beta|. These
/// are the per-coordinate lambda1 replacements used by the LLA outer loop.
inline Vector nonconvex_weight(SparsityKind kind, double a, double lambda1,
                               const Vector& beta_abs) {
  if (lambda1 < 0.0) throw std::invalid_argument("lambda1 must be nonnegative");
  Vector w(beta_abs.size());
  switch (kind) {
    case SparsityKind::scad:
      if (!(a > 2.0)) throw std::invalid_argument("scad shape parameter must exceed 2");
      for (Index j = 0; j < beta_abs.size(); ++j) w[j] = scad_weight(beta_abs[j], lambda1, a);
      return w;
    case SparsityKind::mcp:
      if (!(a > 1.0)) throw std::invalid_argument("mcp shape parameter must exceed 1");
      for (Index j = 0; j < beta_abs.size(); ++j) w[j] = mcp_weight(beta_abs[j], lambda1, a);
      return w;
    case SparsityKind::l1:
      throw std::invalid_argument("l1 has no nonconvex weight function");
  }
  throw std::logic_error("unreachable sparsity kind");
}

// ============================================================================
// Loss and penalty values (objective evaluation)
// ============================================================================

/// Loss value with the global 1/n scaling of the regression objective.
inline double loss_value(const Loss& loss, const Vector& r, Index n_total,
                         HuberOrientation orientation = HuberOrientation::conventional) {
  const double n = static_cast<double>(n_total);
  switch (loss.kind) {
    case LossKind::least_squares:
      return r.squaredNorm() / (2.0 * n);
    case LossKind::quantile: {
      double s = 0.0;
      for (Index i = 0; i < r.size(); ++i)
        s += r[i] * (loss.tau - (r[i] < 0.0 ? 1.0 : 0.0));
      return s / n;
    }
    case LossKind::square_root:
      return std::sqrt(r.squaredNorm() / (2.0 * n));
    case LossKind::huber: {
      double s = 0.0;
      const double d = loss.delta;
      for (Index i = 0; i < r.size(); ++i) {
        const bool quad = orientation == HuberOrientation::conventional
                              ? std::abs(r[i]) <= d
                              : r[i] >= d;
        s += quad ? r[i] * r[i] / (2.0 * d) : std::abs(r[i]) - d / 2.0;
      }
      return s / n;
    }
  }
  throw std::logic_error("unreachable loss kind");
}

/// Sparsity-part value: lambda1 ||beta||_1, or the scad/mcp value.
inline double sparsity_value(const Penalty& pen, const Vector& beta) {
  double s = 0.0;
  switch (pen.sparsity) {
    case SparsityKind::l1:
      return pen.lambda1 * beta.lpNorm<1>();
    case SparsityKind::scad:
      for (Index j = 0; j < beta.size(); ++j) s += scad_value(beta[j], pen.lambda1, pen.a);
      return s;
    case SparsityKind::mcp:
      for (Index j = 0; j < beta.size(); ++j) s += mcp_value(beta[j], pen.lambda1, pen.a);
      return s;
  }
  throw std::logic_error("unreachable sparsity kind");
}

/// Weighted-l1 sparsity value used by the LLA inner problems.
inline double weighted_l1_value(const Vector& weights, const Vector& beta) {
  double s = 0.0;
  for (Index j = 0; j < beta.size(); ++j) s += weights[j] * std::abs(beta[j]);
  return s;
}

inline double structure_value(const Penalty& pen, const Vector& beta) {
  switch (pen.structure) {
    case StructureKind::ridge:
      return pen.lambda2 * beta.squaredNorm();
    case StructureKind::group_l21: {
      Vector norms = Vector::Zero(pen.groups.group_count);
      for (Index j = 0; j < beta.size(); ++j)
        norms[pen.groups.assignment[static_cast<std::size_t>(j)]] += beta[j] * beta[j];
      double s = 0.0;
      for (int g = 0; g < pen.groups.group_count; ++g) s += std::sqrt(norms[g]);
      return pen.lambda2 * s;
    }
    case StructureKind::total_variation: {
      double s = 0.0;
      for (Index j = 0; j + 1 < beta.size(); ++j) s += std::abs(beta[j] - beta[j + 1]);
      return pen.lambda2 * s;
    }
  }
  throw std::logic_error("unreachable structure kind");
}

} // namespace cadmm

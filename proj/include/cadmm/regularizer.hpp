#pragma once

#include "cadmm/prox.hpp"
#include "cadmm/types.hpp"

#include <algorithm>

namespace cadmm {

// ============================================================================
// First-difference operator (matrix-free)
// ============================================================================

/// out_j = beta_j - beta_{j+1}, j = 0..p-2.
inline Vector first_difference(const Vector& beta) {
  const Index p = beta.size();
  if (p < 2) throw std::invalid_argument("first difference requires dimension >= 2");
  return beta.head(p - 1) - beta.tail(p - 1);
}

/// Adjoint of the first-difference stencil; maps length p-1 to length p.
inline Vector first_difference_transpose(const Vector& v, Index p) {
  if (p < 2 || v.size() != p - 1)
    throw std::invalid_argument("first-difference adjoint dimension mismatch");
  Vector out = Vector::Zero(p);
  out.head(p - 1) += v;
  out.tail(p - 1) -= v;
  return out;
}

/// Tridiagonal stencil F^T F applied in O(p).
inline Vector first_difference_gram(const Vector& beta) {
  return first_difference_transpose(first_difference(beta), beta.size());
}

/// Linearization constant for the fused central update: an upper bound on the
/// largest eigenvalue of (M*I + F^T F), which equals M + 4.
inline double fused_linearization_eta(Index machines) {
  return static_cast<double>(machines) + 4.0;
}

/// Apply the structure operator G (identity or first difference).
inline Vector apply_structure(StructureKind structure, const Vector& beta) {
  return structure == StructureKind::total_variation ? first_difference(beta) : beta;
}

inline Vector apply_structure_transpose(StructureKind structure, const Vector& v, Index p) {
  return structure == StructureKind::total_variation ? first_difference_transpose(v, p) : v;
}

// ============================================================================
// Constraint projection
// ============================================================================

/// Euclidean projection onto the probability simplex {x >= 0, sum x = 1},
/// by the sort-and-shift rule.
inline Vector project_simplex(const Vector& x) {
  const Index p = x.size();
  std::vector<double> u(x.data(), x.data() + p);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  Index support = 0;
  for (Index j = 0; j < p; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - candidate > 0.0) {
      theta = candidate;
      support = j + 1;
    }
  }
  if (support == 0) theta = (cumsum - 1.0) / static_cast<double>(p);
  Vector out(p);
  for (Index j = 0; j < p; ++j) out[j] = std::max(x[j] - theta, 0.0);
  return out;
}

inline Vector project_constraint(const Constraint& c, const Vector& beta) {
  switch (c.kind) {
    case ConstraintKind::none:
      return beta;
    case ConstraintKind::nonnegative:
      return beta.cwiseMax(0.0);
    case ConstraintKind::simplex:
      return project_simplex(beta);
    case ConstraintKind::box:
      if (c.lo.size() != beta.size() || c.hi.size() != beta.size())
        throw std::invalid_argument("box bounds dimension mismatch");
      return beta.cwiseMax(c.lo).cwiseMin(c.hi);
  }
  throw std::logic_error("unreachable constraint kind");
}

// ============================================================================
// Central-machine updates
// ============================================================================

/// Consensus inputs gathered from the machines: the shard averages of the
/// local coefficients and of the consensus duals.
struct ConsensusAverages {
  Vector beta_bar;
  Vector dual_bar;
};

/// The central coefficient update. For the identity-structure families this
/// soft-thresholds the consensus average; the fused family takes one
/// linearized step at eta = M + 4 instead. If `weights` is given its entries
/// replace lambda1 coordinatewise (the LLA-weighted form). The thresholded
/// result is projected onto the constraint set before returning.
inline Vector central_beta_update(const Penalty& penalty, const ConsensusAverages& avg,
                                  const CentralState& central, const Vector* weights,
                                  Index machines, double mu, const Constraint& constraint,
                                  const Vector& beta_prev) {
  const Index p = avg.beta_bar.size();
  if (avg.dual_bar.size() != p || beta_prev.size() != p)
    throw std::invalid_argument("central update dimension mismatch");
  if (weights && weights->size() != p)
    throw std::invalid_argument("weight vector dimension mismatch");
  const double m = static_cast<double>(machines);

  Vector thresholded(p);
  if (penalty.structure == StructureKind::total_variation) {
    // One proximal-linearized step on the quadratic in (M*I + F^T F).
    const double eta = fused_linearization_eta(machines);
    Vector grad = m * beta_prev + first_difference_gram(beta_prev) -
                  m * (avg.beta_bar - avg.dual_bar / mu) -
                  first_difference_transpose(central.aux + central.structure_dual / mu, p);
    Vector u = beta_prev - (mu / eta) * grad;
    for (Index j = 0; j < p; ++j) {
      const double t = (weights ? (*weights)[j] : penalty.lambda1) / eta;
      thresholded[j] = soft_threshold(u[j], t);
    }
  } else {
    Vector u = (m * (avg.beta_bar - avg.dual_bar / mu) +
                (central.aux + central.structure_dual / mu)) /
               (m + 1.0);
    const double denom = mu * (m + 1.0);
    for (Index j = 0; j < p; ++j) {
      const double t = (weights ? (*weights)[j] : penalty.lambda1) / denom;
      thresholded[j] = soft_threshold(u[j], t);
    }
  }
  return project_constraint(constraint, thresholded);
}

/// The split-variable update; closed form per structure part.
inline Vector central_aux_update(const Penalty& penalty, const Vector& beta,
                                 const Vector& structure_dual, double mu) {
  switch (penalty.structure) {
    case StructureKind::ridge:
      return ridge_shrink(beta - structure_dual / mu, penalty.lambda2, mu);
    case StructureKind::group_l21:
      return group_soft_threshold(beta - structure_dual / mu, penalty.groups,
                                  penalty.lambda2 / mu);
    case StructureKind::total_variation:
      return soft_threshold(first_difference(beta) - structure_dual / mu, penalty.lambda2 / mu);
  }
  throw std::logic_error("unreachable structure kind");
}

/// Dual ascent on the structure constraint G beta = aux.
inline Vector central_dual_update(const Penalty& penalty, const Vector& beta, const Vector& aux,
                                  const Vector& structure_dual, double mu) {
  Vector g = apply_structure(penalty.structure, beta);
  if (g.size() != aux.size() || aux.size() != structure_dual.size())
    throw std::invalid_argument("central dual update dimension mismatch");
  return structure_dual - mu * (g - aux);
}

} // namespace cadmm

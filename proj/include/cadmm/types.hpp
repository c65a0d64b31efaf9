#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cadmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// ============================================================================
// Loss functions
// ============================================================================

enum class LossKind { least_squares, quantile, square_root, huber };

/// Orientation of the Huber loss branches when evaluating the loss value.
/// `conventional` puts the quadratic branch on small residuals (|r| < delta),
/// which is the loss whose proximal map the closed form actually is.
/// `as_printed` gates the quadratic branch on r >= delta instead.
enum class HuberOrientation { conventional, as_printed };

struct Loss {
  LossKind kind = LossKind::least_squares;
  double tau = 0.5;     // quantile level, in (0,1)
  double delta = 1.345; // huber scale, > 0

  static Loss least_squares() { return {LossKind::least_squares, 0.5, 1.345}; }
  static Loss quantile(double tau) { return {LossKind::quantile, tau, 1.345}; }
  static Loss square_root() { return {LossKind::square_root, 0.5, 1.345}; }
  static Loss huber(double delta) { return {LossKind::huber, 0.5, delta}; }

  void validate() const {
    if (kind == LossKind::quantile && !(tau > 0.0 && tau < 1.0))
      throw std::invalid_argument("quantile level must lie strictly in (0,1), got " +
                                  std::to_string(tau));
    if (kind == LossKind::huber && !(delta > 0.0))
      throw std::invalid_argument("huber scale must be positive, got " + std::to_string(delta));
  }
};

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::least_squares: return "least_squares";
    case LossKind::quantile: return "quantile";
    case LossKind::square_root: return "square_root";
    case LossKind::huber: return "huber";
  }
  return "?";
}

// ============================================================================
// Penalties (sparsity part x structure part)
// ============================================================================

enum class SparsityKind { l1, scad, mcp };
enum class StructureKind { ridge, group_l21, total_variation };

/// Disjoint partition of the p coordinates into G groups.
struct GroupMap {
  std::vector<int> assignment; // length p, values in [0, group_count)
  int group_count = 0;

  Index dim() const { return static_cast<Index>(assignment.size()); }

  /// Equal-width contiguous groups; p must be divisible by n_groups.
  static GroupMap contiguous(Index p, int n_groups) {
    if (n_groups < 1 || p % n_groups != 0)
      throw std::invalid_argument("dimension " + std::to_string(p) +
                                  " is not divisible into " + std::to_string(n_groups) +
                                  " equal groups");
    GroupMap gm;
    gm.group_count = n_groups;
    gm.assignment.resize(static_cast<std::size_t>(p));
    const Index width = p / n_groups;
    for (Index j = 0; j < p; ++j) gm.assignment[static_cast<std::size_t>(j)] = static_cast<int>(j / width);
    return gm;
  }

  void validate() const {
    if (group_count < 1) throw std::invalid_argument("group count must be >= 1");
    std::vector<Index> counts(static_cast<std::size_t>(group_count), 0);
    for (int g : assignment) {
      if (g < 0 || g >= group_count)
        throw std::invalid_argument("group index " + std::to_string(g) + " out of range");
      ++counts[static_cast<std::size_t>(g)];
    }
    for (int g = 0; g < group_count; ++g)
      if (counts[static_cast<std::size_t>(g)] == 0)
        throw std::invalid_argument("group " + std::to_string(g) + " is empty");
  }
};

struct Penalty {
  SparsityKind sparsity = SparsityKind::l1;
  StructureKind structure = StructureKind::ridge;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double a = 3.7;      // scad default 3.7 (> 2); mcp default 3 (> 1)
  GroupMap groups;     // required when structure == group_l21

  static Penalty elastic_net(double l1, double l2) {
    return {SparsityKind::l1, StructureKind::ridge, l1, l2, 3.7, {}};
  }
  static Penalty sparse_group(double l1, double l2, GroupMap g) {
    return {SparsityKind::l1, StructureKind::group_l21, l1, l2, 3.7, std::move(g)};
  }
  static Penalty sparse_fused(double l1, double l2) {
    return {SparsityKind::l1, StructureKind::total_variation, l1, l2, 3.7, {}};
  }

  Penalty with_sparsity(SparsityKind k, double a_param) const {
    Penalty out = *this;
    out.sparsity = k;
    out.a = a_param;
    return out;
  }

  bool nonconvex() const { return sparsity != SparsityKind::l1; }

  void validate(Index p) const {
    if (lambda1 < 0.0 || lambda2 < 0.0)
      throw std::invalid_argument("penalty parameters must be nonnegative");
    if (sparsity == SparsityKind::scad && !(a > 2.0))
      throw std::invalid_argument("scad shape parameter must exceed 2, got " + std::to_string(a));
    if (sparsity == SparsityKind::mcp && !(a > 1.0))
      throw std::invalid_argument("mcp shape parameter must exceed 1, got " + std::to_string(a));
    if (structure == StructureKind::group_l21) {
      groups.validate();
      if (groups.dim() != p)
        throw std::invalid_argument("group map covers " + std::to_string(groups.dim()) +
                                    " coordinates, expected " + std::to_string(p));
    }
    if (structure == StructureKind::total_variation && p < 2)
      throw std::invalid_argument("total variation requires dimension >= 2");
  }

  /// Dimension of the split variable (and its dual): p-1 for the
  /// first-difference structure, p otherwise.
  Index split_dim(Index p) const {
    return structure == StructureKind::total_variation ? p - 1 : p;
  }
};

inline const char* to_string(SparsityKind k) {
  switch (k) {
    case SparsityKind::l1: return "l1";
    case SparsityKind::scad: return "scad";
    case SparsityKind::mcp: return "mcp";
  }
  return "?";
}

inline const char* to_string(StructureKind k) {
  switch (k) {
    case StructureKind::ridge: return "ridge";
    case StructureKind::group_l21: return "group_l21";
    case StructureKind::total_variation: return "total_variation";
  }
  return "?";
}

// ============================================================================
// Coefficient constraints
// ============================================================================

enum class ConstraintKind { none, nonnegative, simplex, box };

struct Constraint {
  ConstraintKind kind = ConstraintKind::none;
  Vector lo, hi; // box bounds

  static Constraint none() { return {}; }
  static Constraint nonnegative() { return {ConstraintKind::nonnegative, {}, {}}; }
  static Constraint simplex() { return {ConstraintKind::simplex, {}, {}}; }
  static Constraint box(Vector lo, Vector hi) {
    return {ConstraintKind::box, std::move(lo), std::move(hi)};
  }

  void validate(Index p) const {
    if (kind != ConstraintKind::box) return;
    if (lo.size() != p || hi.size() != p)
      throw std::invalid_argument("box bounds must have the coefficient dimension");
    for (Index j = 0; j < p; ++j)
      if (lo[j] > hi[j])
        throw std::invalid_argument("box lower bound exceeds upper bound at coordinate " +
                                    std::to_string(j));
  }
};

inline const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::none: return "none";
    case ConstraintKind::nonnegative: return "nonnegative";
    case ConstraintKind::simplex: return "simplex";
    case ConstraintKind::box: return "box";
  }
  return "?";
}

// ============================================================================
// Row partition across machines
// ============================================================================

/// Contiguous row blocks, one per machine, in input order.
struct Partition {
  std::vector<Index> sizes;
  std::vector<Index> offsets; // offsets[m] = first row of block m

  Index machines() const { return static_cast<Index>(sizes.size()); }
  Index total() const { return std::accumulate(sizes.begin(), sizes.end(), Index{0}); }
};

/// Split n rows into m blocks whose sizes differ by at most one; earlier
/// blocks take the remainder. Deterministic.
inline Partition balanced_partition(Index n, Index m) {
  if (m < 1 || m > n)
    throw std::invalid_argument("cannot partition " + std::to_string(n) + " rows into " +
                                std::to_string(m) + " machines");
  Partition part;
  part.sizes.resize(static_cast<std::size_t>(m));
  part.offsets.resize(static_cast<std::size_t>(m));
  const Index base = n / m;
  const Index rem = n % m;
  Index off = 0;
  for (Index i = 0; i < m; ++i) {
    part.sizes[static_cast<std::size_t>(i)] = base + (i < rem ? 1 : 0);
    part.offsets[static_cast<std::size_t>(i)] = off;
    off += part.sizes[static_cast<std::size_t>(i)];
  }
  return part;
}

// ============================================================================
// Solver configuration
// ============================================================================

enum class LinearSolverKind { automatic, direct_gram, woodbury, conjugate_gradient };

inline const char* to_string(LinearSolverKind k) {
  switch (k) {
    case LinearSolverKind::automatic: return "automatic";
    case LinearSolverKind::direct_gram: return "direct_gram";
    case LinearSolverKind::woodbury: return "woodbury";
    case LinearSolverKind::conjugate_gradient: return "conjugate_gradient";
  }
  return "?";
}

struct StoppingRule {
  double eps_abs = 1e-6;
  double eps_rel = 1e-4;
  int max_iter = 5000;

  void validate() const {
    if (!(eps_abs > 0.0) || !(eps_rel > 0.0) || max_iter < 1)
      throw std::invalid_argument("stopping rule requires positive tolerances and max_iter >= 1");
  }
};

struct SolverOptions {
  StoppingRule stop;
  LinearSolverKind strategy = LinearSolverKind::automatic;
  double cg_tol = 1e-10;          // relative residual target for conjugate gradient
  int cg_max_iter_factor = 10;    // max CG iterations = factor * p
  int threads = 1;                // worker threads (1 = run inline)
  int lla_max_steps = 3;          // outer LLA iterations for nonconvex penalties
  double lla_tol = 1e-8;          // early exit if outer iterates stop moving
  bool record_history = true;     // per-iteration residual/objective records
  bool record_iterates = false;   // keep full iterate snapshots (diagnostics)
  bool record_metric = false;     // per-iteration contraction-metric of the step
  HuberOrientation huber_orientation = HuberOrientation::conventional;
};

/// Full problem description: what to minimize and how to run the solver.
struct Problem {
  Loss loss;
  Penalty penalty;
  Constraint constraint;
  Index machines = 1;
  double mu = 1.0; // augmented-Lagrangian penalty parameter, fixed over iterations
  SolverOptions options;

  void validate(Index n, Index p) const {
    loss.validate();
    penalty.validate(p);
    constraint.validate(p);
    if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
    if (machines < 1) throw std::invalid_argument("machine count must be >= 1");
    if (machines > n)
      throw std::invalid_argument("machine count " + std::to_string(machines) +
                                  " exceeds sample count " + std::to_string(n));
    options.stop.validate();
    if (options.threads < 1) throw std::invalid_argument("thread count must be >= 1");
  }
};

// ============================================================================
// Solver state
// ============================================================================

struct Factorization; // defined in worker.hpp

/// One machine's slice of the data plus its cached linear-system solver.
struct Shard {
  Matrix X; // n_m x p
  Vector y; // n_m

  std::shared_ptr<const Factorization> factor;

  Index rows() const { return X.rows(); }
  Index cols() const { return X.cols(); }

  void validate() const {
    if (X.rows() != y.size())
      throw std::invalid_argument("shard has " + std::to_string(X.rows()) + " rows but " +
                                  std::to_string(y.size()) + " responses");
  }
};

/// Central-machine variables: the consensus coefficient, the split variable
/// carrying the structure penalty, and its dual.
struct CentralState {
  Vector beta;           // p
  Vector aux;            // split_dim(p)
  Vector structure_dual; // split_dim(p)
};

/// One machine's local variables.
struct LocalState {
  Vector residual;       // n_m
  Vector beta;           // p, local copy of the coefficient
  Vector residual_dual;  // n_m, dual of X_m beta_m + r_m = y_m
  Vector consensus_dual; // p,   dual of beta_m = beta
};

/// Build shards as contiguous row blocks of (X, y).
inline std::vector<Shard> make_shards(const Matrix& X, const Vector& y, const Partition& part) {
  if (X.rows() != y.size()) throw std::invalid_argument("X and y row counts differ");
  if (part.total() != X.rows()) throw std::invalid_argument("partition does not cover the data");
  std::vector<Shard> shards;
  shards.reserve(part.sizes.size());
  for (std::size_t m = 0; m < part.sizes.size(); ++m) {
    Shard s;
    s.X = X.middleRows(part.offsets[m], part.sizes[m]);
    s.y = y.segment(part.offsets[m], part.sizes[m]);
    shards.push_back(std::move(s));
  }
  return shards;
}

/// Zero start made exactly feasible: beta = beta_m = aux = 0, duals = 0,
/// r_m = y_m. All three constraint families hold with zero violation.
inline std::pair<CentralState, std::vector<LocalState>> init_feasible(
    const Problem& problem, const std::vector<Shard>& shards) {
  if (shards.empty()) throw std::invalid_argument("no shards");
  const Index p = shards.front().cols();
  for (const Shard& s : shards) {
    s.validate();
    if (s.cols() != p) throw std::invalid_argument("shards disagree on dimension");
  }
  const Index q = problem.penalty.split_dim(p);
  CentralState central;
  central.beta = Vector::Zero(p);
  central.aux = Vector::Zero(q);
  central.structure_dual = Vector::Zero(q);
  std::vector<LocalState> locals(shards.size());
  for (std::size_t m = 0; m < shards.size(); ++m) {
    locals[m].residual = shards[m].y;
    locals[m].beta = Vector::Zero(p);
    locals[m].residual_dual = Vector::Zero(shards[m].rows());
    locals[m].consensus_dual = Vector::Zero(p);
  }
  return {std::move(central), std::move(locals)};
}

// ============================================================================
// Reports
// ============================================================================

struct IterationRecord {
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  double metric_step_sq = std::numeric_limits<double>::quiet_NaN(); // contraction-metric of the step, when recorded
};

/// Full iterate snapshot of the convergent sequence (no residual block).
struct IterateSnapshot {
  Vector beta;
  std::vector<Vector> local_beta;
  Vector aux;
  std::vector<Vector> residual_dual;
  std::vector<Vector> consensus_dual;
  Vector structure_dual;
};

struct PhaseTimings {
  double setup_seconds = 0.0;   // partitioning + factorization
  double central_seconds = 0.0; // central-machine updates
  double local_seconds = 0.0;   // wall time of the parallel worker phase
  double total_seconds = 0.0;
};

struct LlaStep {
  Vector beta;
  int inner_iterations = 0;
};

struct SolveReport {
  Vector beta;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0; // exact objective at the returned coefficient
  Index nonzeros = 0;     // |beta_j| > 1e-8
  std::vector<IterationRecord> history;
  std::vector<IterateSnapshot> iterates; // only when record_iterates
  std::vector<LlaStep> lla_steps;        // only for nonconvex solves
  PhaseTimings timings;
  std::string error; // nonempty when a grid point failed
};

} // namespace cadmm

#pragma once

#include "cadmm/regularizer.hpp"
#include "cadmm/thread_pool.hpp"
#include "cadmm/types.hpp"
#include "cadmm/worker.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace cadmm {

// ============================================================================
// Residuals and diagnostics
// ============================================================================

/// Norms of the stacked constraint violations (primal) and of the change in
/// the second-block variables mapped through their constraint operator
/// (dual).
struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
};

/// Plain recomputation of both residual norms from a full state. The engine
/// accumulates the same quantities incrementally; this form is the reference.
inline Residuals compute_residuals(const std::vector<Shard>& shards,
                                   const std::vector<LocalState>& locals,
                                   const CentralState& central, StructureKind structure,
                                   double mu,
                                   const std::vector<Vector>* prev_local_beta = nullptr,
                                   const Vector* prev_aux = nullptr) {
  Residuals res;
  double primal_sq = 0.0;
  for (std::size_t m = 0; m < shards.size(); ++m) {
    primal_sq += (shards[m].X * locals[m].beta + locals[m].residual - shards[m].y).squaredNorm();
    primal_sq += (locals[m].beta - central.beta).squaredNorm();
  }
  primal_sq += (apply_structure(structure, central.beta) - central.aux).squaredNorm();
  res.primal = std::sqrt(primal_sq);

  if (prev_local_beta && prev_aux) {
    double dual_sq = (central.aux - *prev_aux).squaredNorm();
    for (std::size_t m = 0; m < shards.size(); ++m) {
      const Vector diff = locals[m].beta - (*prev_local_beta)[m];
      dual_sq += diff.squaredNorm() + (shards[m].X * diff).squaredNorm();
    }
    res.dual = mu * std::sqrt(dual_sq);
  }
  return res;
}

/// Squared energy norm of the difference of two iterates under the solver's
/// contraction metric: blockdiag(S_G, mu * B^T B, (1/mu) * I), with
/// S_G = eta*I - (M*I + F^T F) for the fused structure and 0 otherwise.
/// The middle block is evaluated through the shard operators, never
/// assembled.
inline double contraction_norm_sq(const IterateSnapshot& a, const IterateSnapshot& b,
                                  const std::vector<Shard>& shards, double mu,
                                  StructureKind structure) {
  const Index machines = static_cast<Index>(shards.size());
  double total = 0.0;
  const Vector dbeta = a.beta - b.beta;
  if (structure == StructureKind::total_variation) {
    const double eta = fused_linearization_eta(machines);
    total += (eta - static_cast<double>(machines)) * dbeta.squaredNorm() -
             first_difference(dbeta).squaredNorm();
  }
  for (std::size_t m = 0; m < shards.size(); ++m) {
    const Vector d = a.local_beta[m] - b.local_beta[m];
    total += mu * (d.squaredNorm() + (shards[m].X * d).squaredNorm());
    total += (a.residual_dual[m] - b.residual_dual[m]).squaredNorm() / mu;
    total += (a.consensus_dual[m] - b.consensus_dual[m]).squaredNorm() / mu;
  }
  total += mu * (a.aux - b.aux).squaredNorm();
  total += (a.structure_dual - b.structure_dual).squaredNorm() / mu;
  return total;
}

/// Objective of the regression problem at a coefficient vector. When
/// `weights` is given the sparsity part is the weighted l1 of an LLA inner
/// problem instead of the penalty's own sparsity part.
inline double objective_value(const Problem& problem, const Matrix& X, const Vector& y,
                              const Vector& beta, const Vector* weights = nullptr) {
  const Vector r = y - X * beta;
  double obj = loss_value(problem.loss, r, X.rows(), problem.options.huber_orientation);
  obj += weights ? weighted_l1_value(*weights, beta) : sparsity_value(problem.penalty, beta);
  obj += structure_value(problem.penalty, beta);
  return obj;
}

// ============================================================================
// Consensus solver
// ============================================================================

/// One (lambda1, lambda2) pair of a regularization path.
struct GridPoint {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

/// Owns the sharded data, the cached factorizations and the worker pool for
/// one dataset, and runs the consensus iteration for any number of penalty
/// configurations (grid points, LLA reweightings) against it.
class ConsensusSolver {
 public:
  ConsensusSolver(Problem problem, const Matrix& X, const Vector& y)
      : problem_(std::move(problem)),
        n_(X.rows()),
        p_(X.cols()),
        pool_(problem_.options.threads) {
    problem_.validate(n_, p_);
    const auto t0 = clock_now();
    shards_ = make_shards(X, y, balanced_partition(n_, problem_.machines));
    pool_.parallel_for(shards_.size(), [this](std::size_t m) {
      shards_[m].factor =
          prepare_factorization(shards_[m], problem_.options.strategy, problem_.options.cg_tol,
                                problem_.options.cg_max_iter_factor);
    });
    c_norm_ = y.norm();
    reset_state();
    setup_seconds_ = seconds_since(t0);
  }

  const Problem& problem() const { return problem_; }
  const std::vector<Shard>& shards() const { return shards_; }
  Index dim() const { return p_; }
  Index samples() const { return n_; }

  void set_lambdas(double lambda1, double lambda2) {
    if (lambda1 < 0.0 || lambda2 < 0.0)
      throw std::invalid_argument("penalty parameters must be nonnegative");
    problem_.penalty.lambda1 = lambda1;
    problem_.penalty.lambda2 = lambda2;
  }

  /// Restart from the exactly feasible zero state.
  void reset_state() {
    auto [central, locals] = init_feasible(problem_, shards_);
    central_ = std::move(central);
    locals_ = std::move(locals);
    fitted_.assign(shards_.size(), Vector());
    for (std::size_t m = 0; m < shards_.size(); ++m)
      fitted_[m] = Vector::Zero(shards_[m].rows());
  }

  /// Run the consensus iteration until the stopping rule fires. State is
  /// kept afterwards, so a subsequent call continues warm. `weights`
  /// replaces lambda1 coordinatewise when given (LLA inner problems).
  SolveReport run(const Vector* weights = nullptr) {
    const auto t_start = clock_now();
    const SolverOptions& opt = problem_.options;
    const Penalty& pen = problem_.penalty;
    const double mu = problem_.mu;
    const Index M = problem_.machines;
    const Index q = pen.split_dim(p_);
    const double sqrt_dim = std::sqrt(static_cast<double>(n_ + M * p_ + q));

    SolveReport report;
    report.timings.setup_seconds = setup_seconds_;
    if (opt.record_iterates) report.iterates.push_back(snapshot());

    scratch_.resize(shards_.size());
    IterateSnapshot prev_snapshot;
    if (opt.record_metric) prev_snapshot = snapshot();

    bool converged = false;
    int iter = 0;
    for (iter = 0; iter < opt.stop.max_iter; ++iter) {
      // --- central machine -------------------------------------------------
      const auto t_central = clock_now();
      ConsensusAverages avg;
      avg.beta_bar = Vector::Zero(p_);
      avg.dual_bar = Vector::Zero(p_);
      for (std::size_t m = 0; m < locals_.size(); ++m) {
        avg.beta_bar += locals_[m].beta;
        avg.dual_bar += locals_[m].consensus_dual;
      }
      avg.beta_bar /= static_cast<double>(M);
      avg.dual_bar /= static_cast<double>(M);

      Vector beta_new = central_beta_update(pen, avg, central_, weights, M, mu,
                                            problem_.constraint, central_.beta);
      Vector aux_new = central_aux_update(pen, beta_new, central_.structure_dual, mu);
      const Vector g_beta = apply_structure(pen.structure, beta_new);
      Vector structure_dual_new = central_.structure_dual - mu * (g_beta - aux_new);
      report.timings.central_seconds += seconds_since(t_central);

      // --- local machines (parallel) ---------------------------------------
      const auto t_local = clock_now();
      const bool coordinate_sqrt = problem_.loss.kind == LossKind::square_root;
      if (coordinate_sqrt) {
        // Phase one: every machine forms its prox input and contributes its
        // squared norm, so the vector-level prox sees the global residual.
        pool_.parallel_for(shards_.size(), [this, mu](std::size_t m) {
          scratch_[m].prox_input =
              shards_[m].y + locals_[m].residual_dual / mu - fitted_[m];
          scratch_[m].prox_input_sq = scratch_[m].prox_input.squaredNorm();
        });
        double input_sq = 0.0;
        for (const auto& s : scratch_) input_sq += s.prox_input_sq;
        sqrt_scale_ = square_root_prox_scale(std::sqrt(input_sq), ProxParams{mu, n_});
      }
      pool_.parallel_for(shards_.size(), [this, &beta_new, mu, coordinate_sqrt](std::size_t m) {
        update_shard(m, beta_new, mu, coordinate_sqrt);
      });
      report.timings.local_seconds += seconds_since(t_local);

      // --- gather, residuals, stopping -------------------------------------
      double primal_sq = (g_beta - aux_new).squaredNorm();
      double dual_sq = (aux_new - central_.aux).squaredNorm();
      double av1_sq = g_beta.squaredNorm() + static_cast<double>(M) * beta_new.squaredNorm();
      double bv2_sq = aux_new.squaredNorm();
      double duals_sq = structure_dual_new.squaredNorm();
      double loss_sum = 0.0;
      double residual_sq_sum = 0.0;
      for (const auto& s : scratch_) {
        primal_sq += s.fit_sq + s.consensus_sq;
        dual_sq += s.dbeta_sq + s.dfit_sq;
        av1_sq += s.residual_sq;
        bv2_sq += s.beta_sq + s.fitted_sq;
        duals_sq += s.residual_dual_sq + s.consensus_dual_sq;
        loss_sum += s.loss_contrib;
        residual_sq_sum += s.residual_sq;
      }
      const double primal = std::sqrt(primal_sq);
      const double dual = mu * std::sqrt(dual_sq);

      central_.beta = std::move(beta_new);
      central_.aux = std::move(aux_new);
      central_.structure_dual = std::move(structure_dual_new);

      if (opt.record_history || opt.record_metric) {
        IterationRecord rec;
        rec.primal_residual = primal;
        rec.dual_residual = dual;
        if (problem_.loss.kind == LossKind::square_root)
          loss_sum = std::sqrt(residual_sq_sum / (2.0 * static_cast<double>(n_)));
        rec.objective = loss_sum +
                        (weights ? weighted_l1_value(*weights, central_.beta)
                                 : sparsity_value(pen, central_.beta)) +
                        structure_value(pen, central_.beta);
        if (opt.record_metric) {
          IterateSnapshot cur = snapshot();
          rec.metric_step_sq =
              contraction_norm_sq(cur, prev_snapshot, shards_, mu, pen.structure);
          prev_snapshot = std::move(cur);
        }
        if (opt.record_history) report.history.push_back(rec);
      }
      if (opt.record_iterates) report.iterates.push_back(snapshot());

      const double eps_pri =
          sqrt_dim * opt.stop.eps_abs +
          opt.stop.eps_rel *
              std::max({std::sqrt(av1_sq), std::sqrt(bv2_sq), c_norm_});
      const double eps_dual =
          sqrt_dim * opt.stop.eps_abs + opt.stop.eps_rel * std::sqrt(duals_sq);
      if (primal <= eps_pri && dual <= eps_dual) {
        converged = true;
        ++iter;
        break;
      }
    }

    report.beta = central_.beta;
    report.iterations = iter;
    report.converged = converged;
    report.nonzeros = (central_.beta.array().abs() > 1e-8).count();
    report.timings.total_seconds = seconds_since(t_start);
    return report;
  }

  /// Exact objective at a coefficient, evaluated on the sharded data.
  double objective_at(const Vector& beta, const Vector* weights = nullptr) const {
    double loss_sum = 0.0;
    double r_sq = 0.0;
    for (const Shard& s : shards_) {
      const Vector r = s.y - s.X * beta;
      if (problem_.loss.kind == LossKind::square_root)
        r_sq += r.squaredNorm();
      else
        loss_sum += loss_value(problem_.loss, r, n_, problem_.options.huber_orientation);
    }
    if (problem_.loss.kind == LossKind::square_root)
      loss_sum = std::sqrt(r_sq / (2.0 * static_cast<double>(n_)));
    return loss_sum +
           (weights ? weighted_l1_value(*weights, beta)
                    : sparsity_value(problem_.penalty, beta)) +
           structure_value(problem_.penalty, beta);
  }

  IterateSnapshot snapshot() const {
    IterateSnapshot s;
    s.beta = central_.beta;
    s.aux = central_.aux;
    s.structure_dual = central_.structure_dual;
    s.local_beta.reserve(locals_.size());
    s.residual_dual.reserve(locals_.size());
    s.consensus_dual.reserve(locals_.size());
    for (const LocalState& l : locals_) {
      s.local_beta.push_back(l.beta);
      s.residual_dual.push_back(l.residual_dual);
      s.consensus_dual.push_back(l.consensus_dual);
    }
    return s;
  }

  const CentralState& central() const { return central_; }
  const std::vector<LocalState>& locals() const { return locals_; }

 private:
  struct ShardScratch {
    Vector prox_input;
    double prox_input_sq = 0.0;
    double fit_sq = 0.0;           // ||X beta_m + r - y||^2 (new iterate)
    double consensus_sq = 0.0;     // ||beta_m - beta||^2
    double dbeta_sq = 0.0;         // ||beta_m^{k+1} - beta_m^k||^2
    double dfit_sq = 0.0;          // ||X (beta_m^{k+1} - beta_m^k)||^2
    double residual_sq = 0.0;      // ||r||^2
    double beta_sq = 0.0;          // ||beta_m||^2
    double fitted_sq = 0.0;        // ||X beta_m||^2
    double residual_dual_sq = 0.0; // ||d||^2
    double consensus_dual_sq = 0.0;// ||e||^2
    double loss_contrib = 0.0;
  };

  static std::chrono::steady_clock::time_point clock_now() {
    return std::chrono::steady_clock::now();
  }
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(clock_now() - t0).count();
  }

  void update_shard(std::size_t m, const Vector& beta_central, double mu, bool coordinate_sqrt) {
    const Shard& shard = shards_[m];
    LocalState& local = locals_[m];
    ShardScratch& sc = scratch_[m];

    Vector residual_new;
    if (coordinate_sqrt) {
      residual_new = sqrt_scale_ * sc.prox_input;
      sc.prox_input.resize(0);
    } else {
      const Vector x = shard.y + local.residual_dual / mu - fitted_[m];
      residual_new = prox_loss(problem_.loss, x, ProxParams{mu, n_});
    }

    Vector rhs = shard.X.transpose() * (shard.y + local.residual_dual / mu - residual_new) +
                 beta_central + local.consensus_dual / mu;
    Vector beta_new = apply_gram_inverse(*shard.factor, shard, rhs, &local.beta);
    Vector fitted_new = shard.X * beta_new;

    sc.dbeta_sq = (beta_new - local.beta).squaredNorm();
    sc.dfit_sq = (fitted_new - fitted_[m]).squaredNorm();

    const Vector fit_violation = fitted_new + residual_new - shard.y;
    local.residual_dual -= mu * fit_violation;
    local.consensus_dual -= mu * (beta_new - beta_central);

    sc.fit_sq = fit_violation.squaredNorm();
    sc.consensus_sq = (beta_new - beta_central).squaredNorm();
    sc.residual_sq = residual_new.squaredNorm();
    sc.beta_sq = beta_new.squaredNorm();
    sc.fitted_sq = fitted_new.squaredNorm();
    sc.residual_dual_sq = local.residual_dual.squaredNorm();
    sc.consensus_dual_sq = local.consensus_dual.squaredNorm();
    sc.loss_contrib = problem_.loss.kind == LossKind::square_root
                          ? 0.0
                          : loss_value(problem_.loss, residual_new, n_,
                                       problem_.options.huber_orientation);

    local.residual = std::move(residual_new);
    local.beta = std::move(beta_new);
    fitted_[m] = std::move(fitted_new);
  }

  Problem problem_;
  Index n_ = 0, p_ = 0;
  ThreadPool pool_;
  std::vector<Shard> shards_;
  CentralState central_;
  std::vector<LocalState> locals_;
  std::vector<Vector> fitted_; // X_m beta_m, cached per machine
  std::vector<ShardScratch> scratch_;
  double sqrt_scale_ = 0.0;
  double c_norm_ = 0.0;
  double setup_seconds_ = 0.0;
};

// ============================================================================
// Entry points
// ============================================================================

/// Solve one convex problem from the feasible zero start.
inline SolveReport solve(const Problem& problem, const Matrix& X, const Vector& y) {
  ConsensusSolver solver(problem, X, y);
  SolveReport report = solver.run();
  report.objective = solver.objective_at(report.beta);
  return report;
}

/// Nonconvex (scad/mcp) penalties via local linear approximation: solve the
/// l1 problem first, then re-solve with derivative weights refreshed at each
/// outer step. Inner solves continue warm from the previous state.
inline SolveReport lla_solve(const Problem& problem, const Matrix& X, const Vector& y) {
  if (!problem.penalty.nonconvex())
    throw std::invalid_argument("lla_solve requires a scad or mcp sparsity part");
  ConsensusSolver solver(problem, X, y);
  SolveReport report = solver.run(); // l1 initializer (weights identically lambda1)
  std::vector<LlaStep> steps;
  steps.push_back({report.beta, report.iterations});
  Vector beta_prev = report.beta;
  for (int l = 0; l < problem.options.lla_max_steps; ++l) {
    const Vector w = nonconvex_weight(problem.penalty.sparsity, problem.penalty.a,
                                      problem.penalty.lambda1, beta_prev.cwiseAbs());
    report = solver.run(&w);
    steps.push_back({report.beta, report.iterations});
    if ((report.beta - beta_prev).lpNorm<Eigen::Infinity>() <= problem.options.lla_tol) {
      beta_prev = report.beta;
      break;
    }
    beta_prev = report.beta;
  }
  report.lla_steps = std::move(steps);
  report.objective = solver.objective_at(report.beta); // nonconvex objective
  return report;
}

/// Routes to the LLA loop for nonconvex sparsity parts, plain solve
/// otherwise.
inline SolveReport solve_auto(const Problem& problem, const Matrix& X, const Vector& y) {
  return problem.penalty.nonconvex() ? lla_solve(problem, X, y) : solve(problem, X, y);
}

/// Solve a sequence of (lambda1, lambda2) points in order. With warm_start
/// each point continues from the previous solution's full state. A failure
/// at one point is recorded in its report and the sweep continues.
inline std::vector<SolveReport> lambda_grid_solve(const Problem& problem, const Matrix& X,
                                                  const Vector& y,
                                                  const std::vector<GridPoint>& grid,
                                                  bool warm_start = true) {
  if (grid.empty()) throw std::invalid_argument("empty lambda grid");
  ConsensusSolver solver(problem, X, y);
  std::vector<SolveReport> reports;
  reports.reserve(grid.size());
  for (const GridPoint& pt : grid) {
    SolveReport report;
    try {
      solver.set_lambdas(pt.lambda1, pt.lambda2);
      if (!warm_start) solver.reset_state();
      report = solver.run();
      report.objective = solver.objective_at(report.beta);
    } catch (const std::exception& ex) {
      report.error = ex.what();
      report.converged = false;
      solver.reset_state();
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

} // namespace cadmm

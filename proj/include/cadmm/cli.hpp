#pragma once

#include "cadmm/data.hpp"
#include "cadmm/engine.hpp"
#include "cadmm/metrics.hpp"
#include "cadmm/types.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace cadmm::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 non-convergence.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ============================================================================
// Logging (level from the CADMM_LOG environment variable)
// ============================================================================

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, quiet = 4 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CADMM_LOG");
    if (!env) return LogLevel::warn;
    const std::string v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    if (v == "warn") return LogLevel::warn;
    if (v == "error") return LogLevel::error;
    if (v == "quiet") return LogLevel::quiet;
    return LogLevel::warn;
  }();
  return level;
}

inline void log(LogLevel lvl, const std::string& msg) {
  static const char* names[] = {"debug", "info", "warn", "error"};
  if (lvl >= log_level() && lvl != LogLevel::quiet)
    std::cerr << "[" << names[static_cast<int>(lvl)] << "] " << msg << "\n";
}

// ============================================================================
// Run configuration
// ============================================================================

enum class DataSource { synthetic, csv };

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  DataSource source = DataSource::synthetic;
  SyntheticDesign design;             // synthetic source
  std::string csv_path;               // csv source
  std::string response_column = "y";
  char delimiter = ',';

  StandardizeMode standardize = StandardizeMode::none;
  Index train_rows = 0; // 0 = use all rows for fitting

  Loss loss;
  Penalty penalty;
  int group_count = 0; // contiguous groups for group_l21 (0 = use penalty.groups)
  Constraint constraint;
  Index machines = 1;
  double mu = 1.0;
  SolverOptions solver;

  // benchmark
  std::vector<Index> m_list{1};
  int repeats = 1;
  std::vector<std::uint64_t> repeat_seeds; // optional override, one per repeat

  // track
  int grid_points = 1000;
  double lambda1_max = -1.0; // < 0: 100 * sqrt(log p / n_train)
  double lambda2_track = -1.0; // < 0: sqrt(log p / n_train)
  int target_stocks = 10;
  int stock_tolerance = 0;

  Problem make_problem(Index p) const {
    Problem prob;
    prob.loss = loss;
    prob.penalty = penalty;
    if (penalty.structure == StructureKind::group_l21 && group_count > 0)
      prob.penalty.groups = GroupMap::contiguous(p, group_count);
    prob.constraint = constraint;
    prob.machines = machines;
    prob.mu = mu;
    prob.options = solver;
    return prob;
  }
};

namespace detail {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw config_error("config key '" + key + "': " + ex.what());
  }
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "least_squares") return LossKind::least_squares;
  if (s == "quantile") return LossKind::quantile;
  if (s == "square_root") return LossKind::square_root;
  if (s == "huber") return LossKind::huber;
  throw config_error("unknown loss kind '" + s + "'");
}

inline SparsityKind parse_sparsity(const std::string& s) {
  if (s == "l1") return SparsityKind::l1;
  if (s == "scad") return SparsityKind::scad;
  if (s == "mcp") return SparsityKind::mcp;
  throw config_error("unknown sparsity part '" + s + "'");
}

inline StructureKind parse_structure(const std::string& s) {
  if (s == "ridge") return StructureKind::ridge;
  if (s == "group_l21") return StructureKind::group_l21;
  if (s == "total_variation") return StructureKind::total_variation;
  throw config_error("unknown structure part '" + s + "'");
}

inline ConstraintKind parse_constraint(const std::string& s) {
  if (s == "none") return ConstraintKind::none;
  if (s == "nonnegative") return ConstraintKind::nonnegative;
  if (s == "simplex" || s == "sum_to_one_simplex") return ConstraintKind::simplex;
  if (s == "box") return ConstraintKind::box;
  throw config_error("unknown constraint '" + s + "'");
}

inline CoefficientRegime parse_regime(const std::string& s) {
  if (s == "elastic_net_decay") return CoefficientRegime::elastic_net_decay;
  if (s == "fused_blocks") return CoefficientRegime::fused_blocks;
  if (s == "group_sparse") return CoefficientRegime::group_sparse;
  throw config_error("unknown coefficient regime '" + s + "'");
}

inline StandardizeMode parse_standardize(const std::string& s) {
  if (s == "none") return StandardizeMode::none;
  if (s == "center") return StandardizeMode::center;
  if (s == "zscore") return StandardizeMode::zscore;
  throw config_error("unknown standardization mode '" + s + "'");
}

inline LinearSolverKind parse_strategy(const std::string& s) {
  if (s == "automatic") return LinearSolverKind::automatic;
  if (s == "direct_gram") return LinearSolverKind::direct_gram;
  if (s == "woodbury") return LinearSolverKind::woodbury;
  if (s == "conjugate_gradient") return LinearSolverKind::conjugate_gradient;
  throw config_error("unknown linear solver strategy '" + s + "'");
}

inline std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

} // namespace detail

inline RunConfig parse_config(const json& j) {
  RunConfig cfg;
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  cfg.output_dir = detail::get_or<std::string>(j, "output_dir", "out");

  if (j.contains("data")) {
    const json& d = j.at("data");
    const std::string src = detail::get_or<std::string>(d, "source", "synthetic");
    if (src == "synthetic") {
      cfg.source = DataSource::synthetic;
      cfg.design.n = detail::get_or<Index>(d, "n", 0);
      cfg.design.p = detail::get_or<Index>(d, "p", 0);
      cfg.design.rho = detail::get_or<double>(d, "rho", 0.5);
      cfg.design.regime =
          detail::parse_regime(detail::get_or<std::string>(d, "regime", "elastic_net_decay"));
      cfg.design.n_groups = detail::get_or<int>(d, "n_groups", 80);
      cfg.design.n_active = detail::get_or<int>(d, "n_active", 10);
      cfg.design.snr = detail::get_or<double>(d, "snr", 1.0);
    } else if (src == "csv") {
      cfg.source = DataSource::csv;
      cfg.csv_path = detail::get_or<std::string>(d, "path", "");
      cfg.response_column = detail::get_or<std::string>(d, "response_column", "y");
      const std::string delim = detail::get_or<std::string>(d, "delimiter", ",");
      if (delim.size() != 1) throw config_error("delimiter must be a single character");
      cfg.delimiter = delim[0];
      if (cfg.csv_path.empty()) throw config_error("csv data source needs a 'path'");
    } else {
      throw config_error("data source must be 'synthetic' or 'csv'");
    }
  }

  cfg.standardize =
      detail::parse_standardize(detail::get_or<std::string>(j, "standardize", "none"));
  cfg.train_rows = detail::get_or<Index>(j, "train_rows", 0);

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    cfg.loss.kind = detail::parse_loss_kind(detail::get_or<std::string>(l, "kind", "least_squares"));
    cfg.loss.tau = detail::get_or<double>(l, "tau", 0.5);
    cfg.loss.delta = detail::get_or<double>(l, "delta", 1.345);
  }

  if (j.contains("penalty")) {
    const json& p = j.at("penalty");
    cfg.penalty.sparsity = detail::parse_sparsity(detail::get_or<std::string>(p, "sparsity", "l1"));
    cfg.penalty.structure =
        detail::parse_structure(detail::get_or<std::string>(p, "structure", "ridge"));
    cfg.penalty.lambda1 = detail::get_or<double>(p, "lambda1", 0.0);
    cfg.penalty.lambda2 = detail::get_or<double>(p, "lambda2", 0.0);
    cfg.penalty.a =
        detail::get_or<double>(p, "a", cfg.penalty.sparsity == SparsityKind::mcp ? 3.0 : 3.7);
    cfg.group_count = detail::get_or<int>(p, "groups", 0);
  }

  if (j.contains("constraint")) {
    const json& c = j.at("constraint");
    cfg.constraint.kind =
        detail::parse_constraint(detail::get_or<std::string>(c, "kind", "none"));
    if (cfg.constraint.kind == ConstraintKind::box) {
      if (!c.contains("lo") || !c.contains("hi"))
        throw config_error("box constraint needs 'lo' and 'hi'");
      const auto lo = c.at("lo").get<std::vector<double>>();
      const auto hi = c.at("hi").get<std::vector<double>>();
      cfg.constraint.lo = Eigen::Map<const Vector>(lo.data(), static_cast<Index>(lo.size()));
      cfg.constraint.hi = Eigen::Map<const Vector>(hi.data(), static_cast<Index>(hi.size()));
    }
  }

  cfg.machines = detail::get_or<Index>(j, "machines", 1);
  cfg.mu = detail::get_or<double>(j, "mu", 1.0);

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    cfg.solver.stop.eps_abs = detail::get_or<double>(s, "eps_abs", 1e-6);
    cfg.solver.stop.eps_rel = detail::get_or<double>(s, "eps_rel", 1e-4);
    cfg.solver.stop.max_iter = detail::get_or<int>(s, "max_iter", 5000);
    cfg.solver.strategy =
        detail::parse_strategy(detail::get_or<std::string>(s, "strategy", "automatic"));
    cfg.solver.threads = detail::get_or<int>(s, "threads", 1);
    cfg.solver.lla_max_steps = detail::get_or<int>(s, "lla_steps", 3);
    cfg.solver.record_history = detail::get_or<bool>(s, "record_history", true);
    cfg.solver.record_metric = detail::get_or<bool>(s, "record_metric", false);
    const std::string orient =
        detail::get_or<std::string>(s, "huber_orientation", "conventional");
    if (orient == "conventional")
      cfg.solver.huber_orientation = HuberOrientation::conventional;
    else if (orient == "as_printed")
      cfg.solver.huber_orientation = HuberOrientation::as_printed;
    else
      throw config_error("huber_orientation must be 'conventional' or 'as_printed'");
  }

  if (j.contains("benchmark")) {
    const json& b = j.at("benchmark");
    if (b.contains("m_list")) cfg.m_list = b.at("m_list").get<std::vector<Index>>();
    cfg.repeats = detail::get_or<int>(b, "repeats", 1);
    if (b.contains("seeds"))
      cfg.repeat_seeds = b.at("seeds").get<std::vector<std::uint64_t>>();
  }

  if (j.contains("track")) {
    const json& t = j.at("track");
    cfg.grid_points = detail::get_or<int>(t, "grid_points", 1000);
    cfg.lambda1_max = detail::get_or<double>(t, "lambda1_max", -1.0);
    cfg.lambda2_track = detail::get_or<double>(t, "lambda2", -1.0);
    cfg.target_stocks = detail::get_or<int>(t, "stocks", 10);
    cfg.stock_tolerance = detail::get_or<int>(t, "stock_tolerance", 0);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw config_error("config file '" + path + "': " + ex.what());
  }
  return parse_config(j);
}

// ============================================================================
// Provenance and file output
// ============================================================================

/// FNV-1a over the canonical JSON dump of the effective config. The output
/// location is not part of a run's identity, so it is excluded: the same
/// computation into two directories hashes the same.
inline std::string config_hash(json j) {
  j.erase("output_dir");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline json config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  if (cfg.source == DataSource::synthetic) {
    j["data"] = {{"source", "synthetic"},     {"n", cfg.design.n},
                 {"p", cfg.design.p},         {"rho", cfg.design.rho},
                 {"regime", to_string(cfg.design.regime)}, {"n_groups", cfg.design.n_groups},
                 {"n_active", cfg.design.n_active},        {"snr", cfg.design.snr}};
  } else {
    j["data"] = {{"source", "csv"},
                 {"path", cfg.csv_path},
                 {"response_column", cfg.response_column},
                 {"delimiter", std::string(1, cfg.delimiter)}};
  }
  j["standardize"] = to_string(cfg.standardize);
  j["train_rows"] = cfg.train_rows;
  j["loss"] = {{"kind", to_string(cfg.loss.kind)}, {"tau", cfg.loss.tau}, {"delta", cfg.loss.delta}};
  j["penalty"] = {{"sparsity", to_string(cfg.penalty.sparsity)},
                  {"structure", to_string(cfg.penalty.structure)},
                  {"lambda1", cfg.penalty.lambda1},
                  {"lambda2", cfg.penalty.lambda2},
                  {"a", cfg.penalty.a},
                  {"groups", cfg.group_count}};
  j["constraint"] = {{"kind", to_string(cfg.constraint.kind)}};
  j["machines"] = cfg.machines;
  j["mu"] = cfg.mu;
  j["solver"] = {{"eps_abs", cfg.solver.stop.eps_abs},
                 {"eps_rel", cfg.solver.stop.eps_rel},
                 {"max_iter", cfg.solver.stop.max_iter},
                 {"strategy", to_string(cfg.solver.strategy)},
                 {"threads", cfg.solver.threads},
                 {"lla_steps", cfg.solver.lla_max_steps}};
  j["benchmark"] = {{"m_list", cfg.m_list}, {"repeats", cfg.repeats}};
  j["track"] = {{"grid_points", cfg.grid_points},
                {"lambda1_max", cfg.lambda1_max},
                {"lambda2", cfg.lambda2_track},
                {"stocks", cfg.target_stocks},
                {"stock_tolerance", cfg.stock_tolerance}};
  return j;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw data_error("write to '" + path.string() + "' failed");
}

inline void write_matrix_csv(const fs::path& path, const Matrix& X,
                             const std::string& col_prefix) {
  std::string text;
  for (Index j = 0; j < X.cols(); ++j) {
    if (j) text += ',';
    text += col_prefix + std::to_string(j + 1);
  }
  text += '\n';
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) {
      if (j) text += ',';
      text += detail::fmt_double(X(i, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

inline void write_vector_csv(const fs::path& path, const Vector& v, const std::string& name) {
  std::string text = name + "\n";
  for (Index i = 0; i < v.size(); ++i) text += detail::fmt_double(v[i]) + "\n";
  write_text(path, text);
}

// ============================================================================
// Data assembly shared by solve/benchmark/track
// ============================================================================

struct LoadedData {
  Matrix X;
  Vector y;
  std::optional<Vector> beta_true;
  std::vector<std::string> feature_names;
};

inline LoadedData load_data(const RunConfig& cfg) {
  LoadedData data;
  if (cfg.source == DataSource::synthetic) {
    SyntheticDesign design = cfg.design;
    design.seed = cfg.seed;
    try {
      design.validate();
    } catch (const std::invalid_argument& ex) {
      throw config_error(ex.what());
    }
    SyntheticData sd = gen_synthetic(design);
    data.X = std::move(sd.X);
    data.y = std::move(sd.y);
    data.beta_true = std::move(sd.beta_true);
    for (Index j = 0; j < data.X.cols(); ++j)
      data.feature_names.push_back("x" + std::to_string(j + 1));
  } else {
    if (!fs::exists(cfg.csv_path))
      throw config_error("data file '" + cfg.csv_path + "' does not exist");
    try {
      CsvData csv = load_csv(cfg.csv_path, cfg.response_column, cfg.delimiter);
      data.X = std::move(csv.X);
      data.y = std::move(csv.y);
      data.feature_names = std::move(csv.feature_names);
    } catch (const std::runtime_error& ex) {
      throw data_error(ex.what());
    }
  }
  return data;
}

// ============================================================================
// Commands
// ============================================================================

/// generate: write X.csv, y.csv, beta_true.csv and a manifest describing the
/// design. Reruns with the same config are byte-identical.
inline void cmd_generate(const RunConfig& cfg) {
  if (cfg.source != DataSource::synthetic)
    throw config_error("generate requires a synthetic data source");
  SyntheticDesign design = cfg.design;
  design.seed = cfg.seed;
  try {
    design.validate();
  } catch (const std::invalid_argument& ex) {
    throw config_error(ex.what());
  }

  SyntheticData sd = gen_synthetic(design);
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw data_error("cannot create output directory '" + cfg.output_dir + "'");
  const fs::path dir(cfg.output_dir);

  write_matrix_csv(dir / "X.csv", sd.X, "x");
  write_vector_csv(dir / "y.csv", sd.y, "y");
  write_vector_csv(dir / "beta_true.csv", sd.beta_true, "beta");

  const json cj = config_to_json(cfg);
  json manifest;
  manifest["design"] = cj.at("data");
  manifest["seed"] = cfg.seed;
  manifest["sigma"] = sd.sigma;
  manifest["config_hash"] = config_hash(cj);
  manifest["files"] = {"X.csv", "y.csv", "beta_true.csv"};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  log(LogLevel::info, "generated " + std::to_string(design.n) + "x" + std::to_string(design.p) +
                          " dataset in " + cfg.output_dir);
}

/// solve: fit the configured model and write solution.json + history.csv.
/// Returns true when the stopping rule fired before max_iter.
inline bool cmd_solve(const RunConfig& cfg) {
  LoadedData data = load_data(cfg);
  const Index n = data.X.rows();
  if (cfg.train_rows != 0 && (cfg.train_rows < 1 || cfg.train_rows >= n))
    throw config_error("train_rows must lie in [1, n-1]");

  StandardizeRecord std_rec = standardize(data.X, data.y, cfg.standardize);

  Matrix X_fit = data.X;
  Vector y_fit = data.y;
  std::optional<std::pair<Matrix, Vector>> test;
  if (cfg.train_rows > 0) {
    auto [train, test_pair] = split_train_test(data.X, data.y, cfg.train_rows);
    X_fit = std::move(train.first);
    y_fit = std::move(train.second);
    test = std::move(test_pair);
  }

  Problem prob = cfg.make_problem(X_fit.cols());
  try {
    prob.validate(X_fit.rows(), X_fit.cols());
  } catch (const std::invalid_argument& ex) {
    throw config_error(ex.what());
  }

  SolveReport report = solve_auto(prob, X_fit, y_fit);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw data_error("cannot create output directory '" + cfg.output_dir + "'");
  const fs::path dir(cfg.output_dir);
  const json cj = config_to_json(cfg);

  json sol;
  sol["beta"] = std::vector<double>(report.beta.data(), report.beta.data() + report.beta.size());
  sol["objective"] = report.objective;
  sol["iterations"] = report.iterations;
  sol["converged"] = report.converged;
  sol["nonzeros"] = report.nonzeros;
  sol["seed"] = cfg.seed;
  sol["config_hash"] = config_hash(cj);
  if (!report.lla_steps.empty()) {
    sol["lla_outer_steps"] = report.lla_steps.size();
    json inner = json::array();
    for (const auto& s : report.lla_steps) inner.push_back(s.inner_iterations);
    sol["lla_inner_iterations"] = inner;
  }
  if (data.beta_true && cfg.train_rows == 0 && cfg.standardize == StandardizeMode::none) {
    const ErrorSummary est = estimation_errors(report.beta, *data.beta_true);
    sol["aae"] = est.aae;
    sol["ase"] = est.ase;
  }
  if (test) {
    const ErrorSummary pred = prediction_errors(test->first, test->second, report.beta);
    sol["aap"] = pred.aap;
    sol["asp"] = pred.asp;
  }
  sol["timing"] = {{"setup_seconds", report.timings.setup_seconds},
                   {"central_seconds", report.timings.central_seconds},
                   {"local_seconds", report.timings.local_seconds},
                   {"total_seconds", report.timings.total_seconds}};
  write_text(dir / "solution.json", sol.dump(2) + "\n");

  std::string hist = "# config_hash=" + config_hash(cj) + " seed=" + std::to_string(cfg.seed) + "\n";
  hist += "iteration,primal_residual,dual_residual,objective";
  if (cfg.solver.record_metric) hist += ",metric_step_sq";
  hist += "\n";
  for (std::size_t k = 0; k < report.history.size(); ++k) {
    const IterationRecord& r = report.history[k];
    hist += std::to_string(k + 1) + "," + detail::fmt_double(r.primal_residual) + "," +
            detail::fmt_double(r.dual_residual) + "," + detail::fmt_double(r.objective);
    if (cfg.solver.record_metric) hist += "," + detail::fmt_double(r.metric_step_sq);
    hist += "\n";
  }
  write_text(dir / "history.csv", hist);

  log(report.converged ? LogLevel::info : LogLevel::warn,
      "solve finished: " + std::to_string(report.iterations) + " iterations, converged=" +
          (report.converged ? "true" : "false"));
  return report.converged;
}

/// benchmark: for each machine count and repeat, fit and record error
/// metrics, wall time and iteration count; write raw and aggregate tables.
inline void cmd_benchmark(const RunConfig& cfg) {
  if (cfg.source != DataSource::synthetic)
    throw config_error("benchmark requires a synthetic data source");
  if (cfg.m_list.empty() || cfg.repeats < 1)
    throw config_error("benchmark needs a nonempty m_list and repeats >= 1");
  if (!cfg.repeat_seeds.empty() &&
      cfg.repeat_seeds.size() != static_cast<std::size_t>(cfg.repeats))
    throw config_error("benchmark.seeds must list one seed per repeat");
  {
    SyntheticDesign check = cfg.design;
    check.seed = cfg.seed;
    try {
      check.validate();
    } catch (const std::invalid_argument& ex) {
      throw config_error(ex.what());
    }
  }

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw data_error("cannot create output directory '" + cfg.output_dir + "'");
  const fs::path dir(cfg.output_dir);
  const json cj = config_to_json(cfg);
  const std::string provenance =
      "# config_hash=" + config_hash(cj) + " seed=" + std::to_string(cfg.seed) + "\n";

  struct Row {
    Index m;
    int repeat;
    std::uint64_t seed;
    double aae, ase, aap, asp, seconds;
    int iterations;
    bool converged;
    std::string error;
  };
  std::vector<Row> rows;

  for (Index m : cfg.m_list) {
    for (int r = 0; r < cfg.repeats; ++r) {
      Row row{};
      row.m = m;
      row.repeat = r;
      row.seed = cfg.repeat_seeds.empty() ? cfg.seed + static_cast<std::uint64_t>(r)
                                          : cfg.repeat_seeds[static_cast<std::size_t>(r)];
      try {
        SyntheticDesign design = cfg.design;
        design.seed = row.seed;
        SyntheticData sd = gen_synthetic(design);

        Matrix X_fit = sd.X;
        Vector y_fit = sd.y;
        std::optional<std::pair<Matrix, Vector>> test;
        if (cfg.train_rows > 0) {
          auto [train, test_pair] = split_train_test(sd.X, sd.y, cfg.train_rows);
          X_fit = std::move(train.first);
          y_fit = std::move(train.second);
          test = std::move(test_pair);
        }

        Problem prob = cfg.make_problem(X_fit.cols());
        prob.machines = m;
        prob.validate(X_fit.rows(), X_fit.cols());

        SolveReport report = solve_auto(prob, X_fit, y_fit);
        const ErrorSummary est = estimation_errors(report.beta, sd.beta_true);
        const ErrorSummary pred = test
                                      ? prediction_errors(test->first, test->second, report.beta)
                                      : prediction_errors(X_fit, y_fit, report.beta);
        row.aae = est.aae;
        row.ase = est.ase;
        row.aap = pred.aap;
        row.asp = pred.asp;
        row.seconds = report.timings.total_seconds;
        row.iterations = report.iterations;
        row.converged = report.converged;
      } catch (const std::exception& ex) {
        row.error = ex.what();
        log(LogLevel::warn, "benchmark cell (m=" + std::to_string(m) + ", repeat=" +
                                std::to_string(r) + ") failed: " + row.error);
      }
      rows.push_back(std::move(row));
    }
  }

  std::string raw = provenance;
  raw += "m,repeat,seed,aae,ase,aap,asp,seconds,iterations,converged,error\n";
  for (const Row& r : rows) {
    raw += std::to_string(r.m) + "," + std::to_string(r.repeat) + "," + std::to_string(r.seed) +
           "," + detail::fmt_double(r.aae) + "," + detail::fmt_double(r.ase) + "," +
           detail::fmt_double(r.aap) + "," + detail::fmt_double(r.asp) + "," +
           detail::fmt_double(r.seconds) + "," + std::to_string(r.iterations) + "," +
           (r.converged ? "1" : "0") + "," + r.error + "\n";
  }
  write_text(dir / "benchmark_raw.csv", raw);

  std::string agg = provenance;
  agg += "m,aae_mean,aae_sd,ase_mean,ase_sd,aap_mean,aap_sd,asp_mean,asp_sd,seconds_mean,"
         "seconds_sd,iterations_mean,failures\n";
  for (Index m : cfg.m_list) {
    std::vector<const Row*> cell;
    int failures = 0;
    for (const Row& r : rows)
      if (r.m == m) {
        if (r.error.empty())
          cell.push_back(&r);
        else
          ++failures;
      }
    auto mean_sd = [&cell](auto getter) -> std::pair<double, double> {
      if (cell.empty()) return {0.0, 0.0};
      double mean = 0.0;
      for (const Row* r : cell) mean += getter(*r);
      mean /= static_cast<double>(cell.size());
      double ss = 0.0;
      for (const Row* r : cell) ss += (getter(*r) - mean) * (getter(*r) - mean);
      const double sd =
          cell.size() > 1 ? std::sqrt(ss / static_cast<double>(cell.size() - 1)) : 0.0;
      return {mean, sd};
    };
    const auto aae = mean_sd([](const Row& r) { return r.aae; });
    const auto ase = mean_sd([](const Row& r) { return r.ase; });
    const auto aap = mean_sd([](const Row& r) { return r.aap; });
    const auto asp = mean_sd([](const Row& r) { return r.asp; });
    const auto sec = mean_sd([](const Row& r) { return r.seconds; });
    const auto its = mean_sd([](const Row& r) { return static_cast<double>(r.iterations); });
    agg += std::to_string(m) + "," + detail::fmt_double(aae.first) + "," +
           detail::fmt_double(aae.second) + "," + detail::fmt_double(ase.first) + "," +
           detail::fmt_double(ase.second) + "," + detail::fmt_double(aap.first) + "," +
           detail::fmt_double(aap.second) + "," + detail::fmt_double(asp.first) + "," +
           detail::fmt_double(asp.second) + "," + detail::fmt_double(sec.first) + "," +
           detail::fmt_double(sec.second) + "," + detail::fmt_double(its.first) + "," +
           std::to_string(failures) + "\n";
  }
  write_text(dir / "benchmark_aggregate.csv", agg);
}

/// track: sweep the lambda1 grid under a nonnegativity constraint, pick the
/// grid point whose support size is closest to the target stock count, and
/// report train/test annual tracking errors plus the selected stocks.
inline void cmd_track(const RunConfig& cfg) {
  if (cfg.source != DataSource::csv) throw config_error("track requires a csv data source");
  if (cfg.grid_points < 1) throw config_error("track needs grid_points >= 1");
  if (cfg.target_stocks < 0) throw config_error("target stock count must be nonnegative");

  LoadedData data = load_data(cfg);
  const Index n = data.X.rows();
  const Index p = data.X.cols();
  const Index n_train = cfg.train_rows > 0 ? cfg.train_rows : (n * 4) / 5;
  if (n_train < 1 || n_train >= n)
    throw config_error("train_rows must lie in [1, n-1] for tracking");

  auto [train, test] = split_train_test(data.X, data.y, n_train);

  const double scale = std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n_train));
  const double lambda1_max = cfg.lambda1_max >= 0.0 ? cfg.lambda1_max : 100.0 * scale;
  const double lambda2 = cfg.lambda2_track >= 0.0 ? cfg.lambda2_track : scale;

  std::vector<GridPoint> grid;
  grid.reserve(static_cast<std::size_t>(cfg.grid_points));
  for (int i = 0; i < cfg.grid_points; ++i) {
    const double frac =
        cfg.grid_points == 1 ? 0.0
                             : static_cast<double>(i) / static_cast<double>(cfg.grid_points - 1);
    grid.push_back({frac * lambda1_max, lambda2});
  }

  Problem prob = cfg.make_problem(p);
  if (prob.constraint.kind == ConstraintKind::none)
    prob.constraint = Constraint::nonnegative();
  prob.options.record_history = false; // grid sweeps keep only the summaries
  try {
    prob.validate(train.first.rows(), p);
  } catch (const std::invalid_argument& ex) {
    throw config_error(ex.what());
  }

  const auto reports = lambda_grid_solve(prob, train.first, train.second, grid, true);

  // Closest support size to the target; ties resolve to the smaller lambda1.
  std::ptrdiff_t best = -1;
  Index best_diff = std::numeric_limits<Index>::max();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i].error.empty()) continue;
    const Index diff = std::abs(reports[i].nonzeros - static_cast<Index>(cfg.target_stocks));
    if (diff < best_diff) {
      best_diff = diff;
      best = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (best < 0) throw data_error("every grid point failed to solve");
  const SolveReport& chosen = reports[static_cast<std::size_t>(best)];
  const bool within_tolerance = best_diff <= static_cast<Index>(cfg.stock_tolerance);
  if (!within_tolerance)
    log(LogLevel::warn, "no grid point reaches " + std::to_string(cfg.target_stocks) +
                            " +/- " + std::to_string(cfg.stock_tolerance) +
                            " stocks; nearest achieved " + std::to_string(chosen.nonzeros));

  const Vector err_train = train.first * chosen.beta - train.second;
  const Vector err_test = test.first * chosen.beta - test.second;

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw data_error("cannot create output directory '" + cfg.output_dir + "'");
  const fs::path dir(cfg.output_dir);
  const json cj = config_to_json(cfg);

  json out;
  out["lambda1"] = grid[static_cast<std::size_t>(best)].lambda1;
  out["lambda2"] = lambda2;
  out["target_stocks"] = cfg.target_stocks;
  out["achieved_stocks"] = chosen.nonzeros;
  out["within_tolerance"] = within_tolerance;
  out["ate_train"] = annual_tracking_error(err_train);
  out["ate_test"] = annual_tracking_error(err_test);
  out["train_rows"] = n_train;
  out["seed"] = cfg.seed;
  out["config_hash"] = config_hash(cj);
  json stocks = json::array();
  for (Index j = 0; j < p; ++j) {
    if (std::abs(chosen.beta[j]) > 1e-8) {
      stocks.push_back({{"name", data.feature_names[static_cast<std::size_t>(j)]},
                        {"weight", chosen.beta[j]}});
    }
  }
  out["stocks"] = stocks;
  write_text(dir / "tracking.json", out.dump(2) + "\n");

  std::string gridcsv =
      "# config_hash=" + config_hash(cj) + " seed=" + std::to_string(cfg.seed) + "\n";
  gridcsv += "lambda1,lambda2,nonzeros,objective,iterations,converged,error\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    gridcsv += detail::fmt_double(grid[i].lambda1) + "," + detail::fmt_double(grid[i].lambda2) +
               "," + std::to_string(reports[i].nonzeros) + "," +
               detail::fmt_double(reports[i].objective) + "," +
               std::to_string(reports[i].iterations) + "," + (reports[i].converged ? "1" : "0") +
               "," + reports[i].error + "\n";
  }
  write_text(dir / "tracking_grid.csv", gridcsv);
}

} // namespace cadmm::cli

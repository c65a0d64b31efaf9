// Command-line driver: generate | solve | benchmark | track.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 non-convergence.

#include "cadmm/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using cadmm::cli::json;

struct FlagOverrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> threads;
  std::optional<long long> machines;
  std::optional<double> lambda1, lambda2, mu, rho, snr, tau, delta;
  std::optional<std::string> loss, sparsity, structure, constraint, regime, strategy,
      standardize, csv_path, response;
  std::optional<long long> n, p, train_rows, max_iter, groups, stocks, grid_points, repeats;
};

void add_common_flags(CLI::App* cmd, FlagOverrides& f) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--output-dir", f.output_dir, "directory for output files");
  cmd->add_option("--threads", f.threads, "worker thread cap");
  cmd->add_option("--machines", f.machines, "number of data shards M");
  cmd->add_option("--lambda1", f.lambda1, "sparsity penalty weight");
  cmd->add_option("--lambda2", f.lambda2, "structure penalty weight");
  cmd->add_option("--mu", f.mu, "augmented-Lagrangian parameter");
  cmd->add_option("--loss", f.loss, "least_squares | quantile | square_root | huber");
  cmd->add_option("--tau", f.tau, "quantile level");
  cmd->add_option("--delta", f.delta, "huber scale");
  cmd->add_option("--sparsity", f.sparsity, "l1 | scad | mcp");
  cmd->add_option("--structure", f.structure, "ridge | group_l21 | total_variation");
  cmd->add_option("--groups", f.groups, "contiguous group count for group_l21");
  cmd->add_option("--constraint", f.constraint, "none | nonnegative | simplex");
  cmd->add_option("--strategy", f.strategy,
                  "automatic | direct_gram | woodbury | conjugate_gradient");
  cmd->add_option("--standardize", f.standardize, "none | center | zscore");
  cmd->add_option("--max-iter", f.max_iter, "iteration cap");
  cmd->add_option("--n", f.n, "synthetic sample count");
  cmd->add_option("--p", f.p, "synthetic feature count");
  cmd->add_option("--rho", f.rho, "synthetic equicorrelation");
  cmd->add_option("--snr", f.snr, "synthetic signal-to-noise ratio");
  cmd->add_option("--regime", f.regime,
                  "elastic_net_decay | fused_blocks | group_sparse");
  cmd->add_option("--data", f.csv_path, "CSV data file (switches the source to csv)");
  cmd->add_option("--response", f.response, "response column name for CSV data");
  cmd->add_option("--train-rows", f.train_rows, "prefix rows used for fitting");
  cmd->add_option("--stocks", f.stocks, "target stock count for track");
  cmd->add_option("--grid-points", f.grid_points, "lambda grid size for track");
  cmd->add_option("--repeats", f.repeats, "benchmark repeats");
}

json build_config_json(const FlagOverrides& f) {
  json j = json::object();
  if (f.config_path) {
    std::ifstream in(*f.config_path);
    if (!in) throw cadmm::cli::config_error("cannot open config file '" + *f.config_path + "'");
    try {
      in >> j;
    } catch (const json::exception& ex) {
      throw cadmm::cli::config_error(std::string("config parse error: ") + ex.what());
    }
  }
  auto ensure = [&j](const char* key) -> json& {
    if (!j.contains(key) || !j[key].is_object()) j[key] = json::object();
    return j[key];
  };
  if (f.seed) j["seed"] = *f.seed;
  if (f.output_dir) j["output_dir"] = *f.output_dir;
  if (f.machines) j["machines"] = *f.machines;
  if (f.mu) j["mu"] = *f.mu;
  if (f.standardize) j["standardize"] = *f.standardize;
  if (f.train_rows) j["train_rows"] = *f.train_rows;
  if (f.csv_path) {
    json& d = ensure("data");
    d["source"] = "csv";
    d["path"] = *f.csv_path;
  }
  if (f.response) ensure("data")["response_column"] = *f.response;
  if (f.n) ensure("data")["n"] = *f.n;
  if (f.p) ensure("data")["p"] = *f.p;
  if (f.rho) ensure("data")["rho"] = *f.rho;
  if (f.snr) ensure("data")["snr"] = *f.snr;
  if (f.regime) ensure("data")["regime"] = *f.regime;
  if (f.loss) ensure("loss")["kind"] = *f.loss;
  if (f.tau) ensure("loss")["tau"] = *f.tau;
  if (f.delta) ensure("loss")["delta"] = *f.delta;
  if (f.sparsity) ensure("penalty")["sparsity"] = *f.sparsity;
  if (f.structure) ensure("penalty")["structure"] = *f.structure;
  if (f.lambda1) ensure("penalty")["lambda1"] = *f.lambda1;
  if (f.lambda2) ensure("penalty")["lambda2"] = *f.lambda2;
  if (f.groups) ensure("penalty")["groups"] = *f.groups;
  if (f.constraint) ensure("constraint")["kind"] = *f.constraint;
  if (f.threads) ensure("solver")["threads"] = *f.threads;
  if (f.max_iter) ensure("solver")["max_iter"] = *f.max_iter;
  if (f.strategy) ensure("solver")["strategy"] = *f.strategy;
  if (f.stocks) ensure("track")["stocks"] = *f.stocks;
  if (f.grid_points) ensure("track")["grid_points"] = *f.grid_points;
  if (f.repeats) ensure("benchmark")["repeats"] = *f.repeats;
  return j;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"consensus-ADMM solver for combined-regularization regression"};
  app.require_subcommand(1);

  FlagOverrides fg, fs, fb, ft;
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic benchmark dataset");
  CLI::App* solve = app.add_subcommand("solve", "fit one model and write the solution");
  CLI::App* benchmark = app.add_subcommand("benchmark", "sweep machine counts and repeats");
  CLI::App* track = app.add_subcommand("track", "index-tracking lambda sweep on CSV data");
  add_common_flags(generate, fg);
  add_common_flags(solve, fs);
  add_common_flags(benchmark, fb);
  add_common_flags(track, ft);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed()) {
      cadmm::cli::cmd_generate(cadmm::cli::parse_config(build_config_json(fg)));
    } else if (solve->parsed()) {
      if (!cadmm::cli::cmd_solve(cadmm::cli::parse_config(build_config_json(fs)))) {
        std::cerr << "solve hit the iteration cap before converging\n";
        return 3;
      }
    } else if (benchmark->parsed()) {
      cadmm::cli::cmd_benchmark(cadmm::cli::parse_config(build_config_json(fb)));
    } else if (track->parsed()) {
      cadmm::cli::cmd_track(cadmm::cli::parse_config(build_config_json(ft)));
    }
  } catch (const cadmm::cli::config_error& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 1;
  } catch (const cadmm::cli::data_error& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}

#pragma once

#include "cadmm/rng.hpp"
#include "cadmm/types.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace cadmm {

// ============================================================================
// Synthetic benchmark designs
// ============================================================================

enum class CoefficientRegime {
  elastic_net_decay, // beta_j = (-1)^j exp(-(2j-1)/20)
  fused_blocks,      // 10 of n_groups contiguous blocks, constant U[-3,3] per block
  group_sparse       // 10 of n_groups active groups, entries sign * (1 + |N(0,1)|)
};

inline const char* to_string(CoefficientRegime r) {
  switch (r) {
    case CoefficientRegime::elastic_net_decay: return "elastic_net_decay";
    case CoefficientRegime::fused_blocks: return "fused_blocks";
    case CoefficientRegime::group_sparse: return "group_sparse";
  }
  return "?";
}

/// Equicorrelated Gaussian regression design. Rows are iid N(0, Sigma) with
/// Sigma = rho * 1 1^T + (1 - rho) * I; the noise scale is set from the
/// signal-to-noise ratio Var(x^T beta*) / sigma^2 = snr.
struct SyntheticDesign {
  Index n = 0;
  Index p = 0;
  double rho = 0.5;
  CoefficientRegime regime = CoefficientRegime::elastic_net_decay;
  int n_groups = 80;
  int n_active = 10;
  double snr = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || p < 1) throw std::invalid_argument("design needs n >= 1 and p >= 1");
    if (!(rho >= 0.0 && rho < 1.0))
      throw std::invalid_argument("equicorrelation must lie in [0,1), got " + std::to_string(rho));
    if (!(snr > 0.0)) throw std::invalid_argument("snr must be positive");
    if (regime != CoefficientRegime::elastic_net_decay) {
      if (n_groups < 1 || n_active < 1 || n_active > n_groups)
        throw std::invalid_argument("invalid group counts for the design");
      if (p % n_groups != 0)
        throw std::invalid_argument("p = " + std::to_string(p) + " is not divisible into " +
                                    std::to_string(n_groups) + " equal groups");
    }
  }
};

struct SyntheticData {
  Matrix X;
  Vector y;
  Vector beta_true;
  double sigma = 0.0;
};

namespace detail {

// Stream layout per seed: 0 = shared row factor, 1..p = columns,
// p+1 = noise, p+2 = coefficient randomness.
inline Vector draw_normals(RandomStream& stream, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = stream.normal();
  return v;
}

inline Vector make_coefficients(const SyntheticDesign& d, RandomStream& stream) {
  Vector beta = Vector::Zero(d.p);
  switch (d.regime) {
    case CoefficientRegime::elastic_net_decay: {
      for (Index j = 0; j < d.p; ++j) {
        const double mag = std::exp(-(2.0 * static_cast<double>(j + 1) - 1.0) / 20.0);
        beta[j] = ((j + 1) % 2 == 0 ? 1.0 : -1.0) * mag;
      }
      return beta;
    }
    case CoefficientRegime::fused_blocks:
    case CoefficientRegime::group_sparse: {
      // Partial Fisher-Yates draw of n_active distinct groups.
      std::vector<int> ids(static_cast<std::size_t>(d.n_groups));
      for (int g = 0; g < d.n_groups; ++g) ids[static_cast<std::size_t>(g)] = g;
      std::vector<bool> active(static_cast<std::size_t>(d.n_groups), false);
      for (int k = 0; k < d.n_active; ++k) {
        const auto pick = static_cast<std::size_t>(
            k + static_cast<int>(stream.uniform_below(static_cast<std::uint64_t>(d.n_groups - k))));
        std::swap(ids[static_cast<std::size_t>(k)], ids[pick]);
        active[static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])] = true;
      }
      const Index width = d.p / d.n_groups;
      if (d.regime == CoefficientRegime::fused_blocks) {
        for (int g = 0; g < d.n_groups; ++g) {
          if (!active[static_cast<std::size_t>(g)]) continue;
          const double value = stream.uniform(-3.0, 3.0);
          beta.segment(g * width, width).setConstant(value);
        }
      } else {
        for (int g = 0; g < d.n_groups; ++g) {
          if (!active[static_cast<std::size_t>(g)]) continue;
          for (Index j = g * width; j < (g + 1) * width; ++j) {
            const double sign = stream.coin() ? 1.0 : -1.0;
            beta[j] = sign * (1.0 + std::abs(stream.normal()));
          }
        }
      }
      return beta;
    }
  }
  throw std::logic_error("unreachable regime");
}

} // namespace detail

/// Generate (X, y, beta*) for a design; bit-identical per seed.
inline SyntheticData gen_synthetic(const SyntheticDesign& design) {
  design.validate();
  SyntheticData out;
  RandomStream shared_stream(design.seed, 0);
  const Vector shared = detail::draw_normals(shared_stream, design.n);
  out.X.resize(design.n, design.p);
  const double w_shared = std::sqrt(design.rho);
  const double w_own = std::sqrt(1.0 - design.rho);
  for (Index j = 0; j < design.p; ++j) {
    RandomStream col_stream(design.seed, static_cast<std::uint64_t>(j) + 1);
    for (Index i = 0; i < design.n; ++i)
      out.X(i, j) = w_shared * shared[i] + w_own * col_stream.normal();
  }

  RandomStream coef_stream(design.seed, static_cast<std::uint64_t>(design.p) + 2);
  out.beta_true = detail::make_coefficients(design, coef_stream);

  // Var(x^T beta*) under the equicorrelated covariance, in closed form.
  const double sum = out.beta_true.sum();
  const double signal_var = design.rho * sum * sum + (1.0 - design.rho) * out.beta_true.squaredNorm();
  out.sigma = std::sqrt(signal_var / design.snr);

  RandomStream noise_stream(design.seed, static_cast<std::uint64_t>(design.p) + 1);
  out.y = out.X * out.beta_true + out.sigma * detail::draw_normals(noise_stream, design.n);
  return out;
}

// ============================================================================
// CSV ingestion
// ============================================================================

struct CsvData {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) cells.push_back(cell);
  if (!line.empty() && line.back() == delim) cells.emplace_back();
  return cells;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

inline double parse_cell(const std::string& cell, std::size_t line_no, std::size_t col_no) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw std::runtime_error("line " + std::to_string(line_no) + ", column " +
                             std::to_string(col_no) + ": cannot parse '" + cell +
                             "' as a number");
  return value;
}

} // namespace detail

/// Parse a rectangular numeric CSV with a header row. The named response
/// column becomes y; the remaining columns become X in file order.
inline CsvData load_csv(const std::string& path, const std::string& response_column,
                        char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
  const auto header = detail::split_line(detail::strip_cr(line), delimiter);
  const std::size_t n_cols = header.size();
  std::ptrdiff_t response_idx = -1;
  for (std::size_t c = 0; c < n_cols; ++c)
    if (header[c] == response_column) response_idx = static_cast<std::ptrdiff_t>(c);
  if (response_idx < 0)
    throw std::runtime_error("response column '" + response_column + "' not found in '" + path +
                             "'");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = detail::split_line(line, delimiter);
    if (cells.size() != n_cols)
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(n_cols) + " cells, found " +
                               std::to_string(cells.size()));
    std::vector<double> row(n_cols);
    for (std::size_t c = 0; c < n_cols; ++c)
      row[c] = detail::parse_cell(cells[c], line_no, c + 1);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("'" + path + "' has a header but no data rows");

  CsvData data;
  const Index n = static_cast<Index>(rows.size());
  const Index p = static_cast<Index>(n_cols) - 1;
  if (p < 1) throw std::runtime_error("'" + path + "' has no feature columns");
  data.X.resize(n, p);
  data.y.resize(n);
  for (std::size_t c = 0; c < n_cols; ++c)
    if (static_cast<std::ptrdiff_t>(c) != response_idx) data.feature_names.push_back(header[c]);
  for (Index i = 0; i < n; ++i) {
    Index k = 0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (static_cast<std::ptrdiff_t>(c) == response_idx)
        data.y[i] = rows[static_cast<std::size_t>(i)][c];
      else
        data.X(i, k++) = rows[static_cast<std::size_t>(i)][c];
    }
  }
  return data;
}

// ============================================================================
// Standardization and splitting
// ============================================================================

enum class StandardizeMode { none, center, zscore };

inline const char* to_string(StandardizeMode m) {
  switch (m) {
    case StandardizeMode::none: return "none";
    case StandardizeMode::center: return "center";
    case StandardizeMode::zscore: return "zscore";
  }
  return "?";
}

/// Record of the applied transform, sufficient to map coefficients back to
/// the original units: beta_orig = beta_std / x_scale,
/// intercept = y_mean - sum_j beta_orig_j * x_mean_j.
struct StandardizeRecord {
  StandardizeMode mode = StandardizeMode::none;
  Vector x_mean, x_scale;
  double y_mean = 0.0;
  std::vector<Index> constant_columns; // scale forced to 1 under zscore
};

inline StandardizeRecord standardize(Matrix& X, Vector& y, StandardizeMode mode) {
  StandardizeRecord rec;
  rec.mode = mode;
  const Index n = X.rows();
  const Index p = X.cols();
  rec.x_mean = Vector::Zero(p);
  rec.x_scale = Vector::Ones(p);
  if (mode == StandardizeMode::none) return rec;
  if (mode == StandardizeMode::zscore && n < 2)
    throw std::invalid_argument("zscore standardization needs at least 2 rows");

  rec.x_mean = X.colwise().mean();
  X.rowwise() -= rec.x_mean.transpose();
  rec.y_mean = y.mean();
  y.array() -= rec.y_mean;

  if (mode == StandardizeMode::zscore) {
    for (Index j = 0; j < p; ++j) {
      const double sd = std::sqrt(X.col(j).squaredNorm() / static_cast<double>(n - 1));
      if (sd > 0.0) {
        rec.x_scale[j] = sd;
        X.col(j) /= sd;
      } else {
        rec.constant_columns.push_back(j);
      }
    }
  }
  return rec;
}

/// Contiguous prefix split, preserving row order (time-ordered data).
inline std::pair<std::pair<Matrix, Vector>, std::pair<Matrix, Vector>> split_train_test(
    const Matrix& X, const Vector& y, Index n_train) {
  const Index n = X.rows();
  if (n_train < 1 || n_train >= n)
    throw std::invalid_argument("train size must lie in [1, n-1], got " +
                                std::to_string(n_train));
  return {{X.topRows(n_train), y.head(n_train)},
          {X.bottomRows(n - n_train), y.tail(n - n_train)}};
}

} // namespace cadmm

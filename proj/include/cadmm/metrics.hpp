#pragma once

#include "cadmm/types.hpp"

#include <cmath>

namespace cadmm {

/// Estimation / prediction error summary. aae and ase average over all p
/// coordinates; aap and asp average over the evaluation rows. Support counts
/// use an absolute nonzero tolerance of 1e-8.
struct ErrorSummary {
  double aae = 0.0; // mean |beta_hat - beta*|
  double ase = 0.0; // mean (beta_hat - beta*)^2
  double aap = 0.0; // mean |yhat - y|
  double asp = 0.0; // mean (yhat - y)^2
  Index true_positives = 0;
  Index false_positives = 0;
  Index true_support = 0;
  Index estimated_support = 0;
};

inline constexpr double kSupportTol = 1e-8;

inline ErrorSummary estimation_errors(const Vector& beta_hat, const Vector& beta_true) {
  if (beta_hat.size() != beta_true.size())
    throw std::invalid_argument("coefficient dimension mismatch");
  ErrorSummary s;
  const Index p = beta_hat.size();
  for (Index j = 0; j < p; ++j) {
    const double d = beta_hat[j] - beta_true[j];
    s.aae += std::abs(d);
    s.ase += d * d;
    const bool est = std::abs(beta_hat[j]) > kSupportTol;
    const bool tru = std::abs(beta_true[j]) > kSupportTol;
    s.true_support += tru;
    s.estimated_support += est;
    if (est && tru) ++s.true_positives;
    if (est && !tru) ++s.false_positives;
  }
  s.aae /= static_cast<double>(p);
  s.ase /= static_cast<double>(p);
  return s;
}

inline ErrorSummary prediction_errors(const Matrix& X_test, const Vector& y_test,
                                      const Vector& beta_hat) {
  if (X_test.cols() != beta_hat.size() || X_test.rows() != y_test.size())
    throw std::invalid_argument("prediction dimension mismatch");
  ErrorSummary s;
  const Vector err = X_test * beta_hat - y_test;
  s.aap = err.lpNorm<1>() / static_cast<double>(err.size());
  s.asp = err.squaredNorm() / static_cast<double>(err.size());
  return s;
}

/// Annualized tracking error: sqrt(252) times the sample standard deviation
/// of the daily tracking errors.
inline double annual_tracking_error(const Vector& err) {
  const Index t = err.size();
  if (t < 2) throw std::invalid_argument("tracking error needs at least 2 observations");
  const double mean = err.mean();
  double ss = 0.0;
  for (Index i = 0; i < t; ++i) ss += (err[i] - mean) * (err[i] - mean);
  return std::sqrt(252.0) * std::sqrt(ss / static_cast<double>(t - 1));
}

} // namespace cadmm

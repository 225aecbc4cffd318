#include "scool/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "scool/errors.hpp"

namespace scool {
namespace {

constexpr double kShiftThreshold = 6.0;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(fn) + ": argument must be finite and > 0, got " +
                      std::to_string(x));
  }
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  double shift = 0.0;
  while (x < kShiftThreshold) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic expansion with Bernoulli coefficients B_2n / (2n).
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double tail =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
  return shift + std::log(x) - 0.5 * inv - tail;
}

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  double shift = 0.0;
  while (x < kShiftThreshold) {
    shift -= std::log(x);
    x += 1.0;
  }
  // Stirling series.
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 / 12.0 -
             inv2 * (1.0 / 360.0 -
                     inv2 * (1.0 / 1260.0 -
                             inv2 * (1.0 / 1680.0 -
                                     inv2 * (1.0 / 1188.0 -
                                             inv2 * (691.0 / 360360.0 - inv2 / 156.0))))));
  return shift + (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series;
}

std::vector<double> softmax_tempered(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) throw InputError("softmax_tempered: tau must be > 0");
  if (logits.empty()) throw InputError("softmax_tempered: empty logits");
  double max_logit = logits.front();
  for (double l : logits) {
    if (!std::isfinite(l)) throw InputError("softmax_tempered: non-finite logit");
    max_logit = std::max(max_logit, l);
  }
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp((logits[k] - max_logit) / tau);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return out;
}

double sigmoid_tempered(double x, double tau) {
  const double z = x / tau;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix row_normalize(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double total = 0.0;
    for (double v : m.row(r)) total += v;
    if (!(total > 0.0)) {
      throw NormalizationError("row_normalize: row " + std::to_string(r) +
                               " has non-positive sum");
    }
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) / total;
  }
  return out;
}

}  // namespace scool

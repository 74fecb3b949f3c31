#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace tscp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A closed prediction interval [lower, upper]; either bound may be infinite.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double y) const { return lower <= y && y <= upper; }
  double length() const { return upper - lower; }
  bool is_infinite() const { return std::isinf(lower) || std::isinf(upper); }
};

/// Dense row-major matrix of features.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

/// A fixed-design time series: T = t0 + t1 rows in strict time order, the
/// first t0 for training/calibration and the last t1 for testing. The row
/// index is the time; no timestamps are stored.
struct SeriesDataset {
  Matrix features;
  std::vector<double> targets;
  std::size_t t0 = 0;
  std::size_t t1 = 0;

  void validate() const {
    if (features.rows != targets.size() || features.rows != t0 + t1) {
      throw std::invalid_argument("dataset dimension mismatch");
    }
    if (t0 == 0 || t1 == 0) {
      throw std::invalid_argument("dataset needs nonempty train and test");
    }
  }

  /// Target of test step j (0-based within the test horizon).
  double test_target(std::size_t j) const { return targets[t0 + j]; }
};

/// Output of one conformal run over the test horizon.
struct RunResult {
  std::vector<Interval> intervals;
  std::vector<bool> covered;
  std::optional<std::vector<double>> alphas;  ///< effective levels, if tracked
  std::vector<double> point_forecasts;
};

/// The ceil(p*n)-th smallest score (1-based), with the conformal clamping
/// conventions: p >= 1 gives +infinity, p <= 0 gives 0.
inline double empirical_quantile(const std::vector<double>& scores, double p) {
  if (scores.empty()) throw std::runtime_error("no calibration scores");
  if (p >= 1.0) return kInf;
  if (p <= 0.0) return 0.0;
  const std::size_t n = scores.size();
  auto k = static_cast<std::size_t>(
      std::max(1.0, std::ceil(p * static_cast<double>(n) - 1e-9)));
  if (k > n) k = n;
  std::vector<double> tmp(scores);
  std::nth_element(tmp.begin(), tmp.begin() + (k - 1), tmp.end());
  return tmp[k - 1];
}

/// Same rule on scores already sorted ascending (no copy).
inline double empirical_quantile_sorted(const std::vector<double>& sorted,
                                        double p) {
  if (sorted.empty()) throw std::runtime_error("no calibration scores");
  if (p >= 1.0) return kInf;
  if (p <= 0.0) return 0.0;
  const std::size_t n = sorted.size();
  auto k = static_cast<std::size_t>(
      std::max(1.0, std::ceil(p * static_cast<double>(n) - 1e-9)));
  if (k > n) k = n;
  return sorted[k - 1];
}

/// Fraction of test points whose interval covered the target.
inline double coverage(const RunResult& result) {
  if (result.covered.empty()) throw std::invalid_argument("empty run");
  std::size_t hits = 0;
  for (bool c : result.covered) hits += c ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(result.covered.size());
}

/// Median of a vector of lengths; +infinity participates as itself and an
/// even count takes the mean of the two central order statistics.
inline double median_of(std::vector<double> lengths) {
  if (lengths.empty()) throw std::invalid_argument("empty run");
  std::sort(lengths.begin(), lengths.end());
  const std::size_t n = lengths.size();
  if (n % 2 == 1) return lengths[n / 2];
  const double lo = lengths[n / 2 - 1], hi = lengths[n / 2];
  if (std::isinf(hi)) return hi;  // avoids inf-inf when both are infinite
  return 0.5 * (lo + hi);
}

/// Median interval length of a run.
inline double median_length(const RunResult& result) {
  std::vector<double> lengths;
  lengths.reserve(result.intervals.size());
  for (const auto& iv : result.intervals) lengths.push_back(iv.length());
  return median_of(std::move(lengths));
}

/// Mean interval length of a run (may be +infinity).
inline double average_length(const RunResult& result) {
  if (result.intervals.empty()) throw std::invalid_argument("empty run");
  double sum = 0.0;
  for (const auto& iv : result.intervals) sum += iv.length();
  return sum / static_cast<double>(result.intervals.size());
}

/// Clips a bound that exceeds mu_hat +/- eps_max back to that range; bounds
/// already inside the range are left untouched. Idempotent.
inline Interval impute_interval(Interval iv, double mu_hat, double eps_max) {
  const double hi = mu_hat + eps_max, lo = mu_hat - eps_max;
  if (iv.upper > hi) iv.upper = hi;
  if (iv.lower < lo) iv.lower = lo;
  if (iv.lower > iv.upper) std::swap(iv.lower, iv.upper);  // degenerate input
  return iv;
}

/// Fraction of intervals with an infinite bound.
inline double infinite_rate(const RunResult& result) {
  if (result.intervals.empty()) throw std::invalid_argument("empty run");
  std::size_t n_inf = 0;
  for (const auto& iv : result.intervals) n_inf += iv.is_infinite() ? 1 : 0;
  return static_cast<double>(n_inf) /
         static_cast<double>(result.intervals.size());
}

/// Largest absolute test residual |y_t - mu_hat_t|; the imputation radius.
inline double max_abs_test_residual(const RunResult& result,
                                    const SeriesDataset& data) {
  double m = 0.0;
  for (std::size_t j = 0; j < result.point_forecasts.size(); ++j) {
    m = std::max(m, std::abs(data.test_target(j) - result.point_forecasts[j]));
  }
  return m;
}

/// Interval lengths after imputing each interval at its own forecast center.
inline std::vector<double> imputed_lengths(const RunResult& result,
                                           double eps_max) {
  std::vector<double> out;
  out.reserve(result.intervals.size());
  for (std::size_t j = 0; j < result.intervals.size(); ++j) {
    out.push_back(
        impute_interval(result.intervals[j], result.point_forecasts[j], eps_max)
            .length());
  }
  return out;
}

}  // namespace tscp

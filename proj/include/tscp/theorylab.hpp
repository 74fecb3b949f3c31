#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tscp/core.hpp"
#include "tscp/rng.hpp"

namespace tscp {

/// Inverse standard normal CDF: Acklam's rational initial guess refined by
/// one Halley step, giving full double accuracy (checked by a round-trip
/// test against erfc).
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("probability outside (0,1)");
  }
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against the exact CDF.
  const double err = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u =
      err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Quantile function of |Z| for Z ~ N(0, sigma^2), capped at `cap` so it is
/// bounded on all of [0,1] (the cap stands in for the clipping level R).
inline std::function<double(double)> folded_gaussian_quantile(
    double sigma = 1.0, double cap = kInf) {
  return [sigma, cap](double u) {
    if (u <= 0.0) return 0.0;
    const double p = 0.5 * (1.0 + u);
    if (u >= 1.0 || p >= 1.0) return cap;  // p can round to 1 for u near 1
    return std::min(cap, sigma * inverse_normal_cdf(p));
  };
}

/// Configuration of the adaptive-level Markov chain. The target level is the
/// rational p/q; the quantile function must be nondecreasing and bounded.
struct ChainConfig {
  std::uint64_t alpha_num = 1;
  std::uint64_t alpha_den = 10;
  double gamma = 0.01;
  std::function<double(double)> quantile_fn = folded_gaussian_quantile(1.0, 5.0);
  std::optional<double> phi;  ///< residual AR coefficient (coupled variant)
  double clip = 5.0;          ///< residual clipping level R
  std::size_t steps = 1000000;
  std::size_t burn_in = 10000;
  std::uint64_t seed = 0;

  double alpha() const {
    return static_cast<double>(alpha_num) / static_cast<double>(alpha_den);
  }

  void validate() const {
    if (alpha_num == 0 || alpha_num >= alpha_den) {
      throw std::invalid_argument("alpha outside (0,1)");
    }
    if (std::gcd(alpha_num, alpha_den) != 1) {
      throw std::invalid_argument("alpha fraction not reduced");
    }
    if (gamma < 0.0) throw std::invalid_argument("negative gamma");
    if (clip <= 0.0) throw std::invalid_argument("clip must be positive");
    if (!quantile_fn) throw std::invalid_argument("no quantile function");
    if (!std::isfinite(quantile_fn(1.0))) {
      throw std::invalid_argument("quantile_fn unbounded");
    }
    double prev = -kInf;  // monotonicity spot check
    for (int i = 0; i <= 64; ++i) {
      const double v = quantile_fn(static_cast<double>(i) / 64.0);
      if (v < prev - 1e-12) {
        throw std::invalid_argument("quantile_fn not monotone");
      }
      prev = v;
    }
  }
};

/// Q(1 - a) extended by continuity of the interval construction: levels at
/// or below 0 give the bounded sup Q(1), levels at or above 1 give 0.
inline double extended_radius(const ChainConfig& cfg, double alpha_t) {
  const double u = 1.0 - alpha_t;
  if (u >= 1.0) return cfg.quantile_fn(1.0);
  if (u <= 0.0) return 0.0;
  return cfg.quantile_fn(u);
}

/// The finite state lattice of the exchangeable chain: alpha + multiples of
/// gamma * gcd(q - p, p) / q, inside the open chain range.
struct ChainLattice {
  double alpha, step, lo, hi;
};

inline ChainLattice chain_lattice(const ChainConfig& cfg) {
  const auto p = cfg.alpha_num, q = cfg.alpha_den;
  const double g = static_cast<double>(std::gcd(q - p, p));
  ChainLattice lat;
  lat.alpha = cfg.alpha();
  lat.step = cfg.gamma * g / static_cast<double>(q);
  lat.lo = cfg.gamma * (lat.alpha - 1.0);
  lat.hi = 1.0 + cfg.gamma * lat.alpha;
  return lat;
}

inline bool lattice_contains(const ChainLattice& lat, double x,
                             double tol = 1e-8) {
  if (x <= lat.lo - tol || x >= lat.hi + tol) return false;
  if (lat.step <= 0.0) return std::abs(x - lat.alpha) <= tol;
  const double k = std::round((x - lat.alpha) / lat.step);
  return std::abs(x - (lat.alpha + k * lat.step)) <= tol;
}

/// One step of the exchangeable-case chain: a miss occurs with probability
/// equal to the effective level projected onto [0,1].
inline double chain_step_exchangeable(double alpha_t, const ChainConfig& cfg,
                                      Rng& rng) {
  const double p_miss = std::clamp(alpha_t, 0.0, 1.0);
  const bool miss = rng.uniform() < p_miss;
  return alpha_t + cfg.gamma * (cfg.alpha() - (miss ? 1.0 : 0.0));
}

/// Post-burn-in path of the exchangeable chain (cfg.steps values).
inline std::vector<double> chain_run_exchangeable(const ChainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  double x = cfg.alpha();
  std::vector<double> path;
  path.reserve(cfg.steps);
  for (std::size_t t = 0; t < cfg.burn_in + cfg.steps; ++t) {
    if (t >= cfg.burn_in) path.push_back(x);
    x = chain_step_exchangeable(x, cfg, rng);
  }
  return path;
}

/// Coupled chain: clipped AR(1) residuals drive the miss events.
struct Ar1ChainPaths {
  std::vector<double> alphas;    ///< effective level in force at each step
  std::vector<double> epsilons;  ///< residual revealed at each step
};

/// Runs the residual-coupled chain for T recorded steps: the residual is a
/// clipped AR(1) process of asymptotic variance 1, a miss is the event that
/// the absolute residual exceeds the radius at the projected level, and the
/// effective level follows the adaptive recursion.
inline Ar1ChainPaths chain_run_ar1(const ChainConfig& cfg, std::size_t T) {
  cfg.validate();
  const double phi = cfg.phi.value_or(0.0);
  if (phi >= 1.0 || phi < 0.0) throw std::invalid_argument("nonstationary");
  const double innov_sd = std::sqrt(1.0 - phi * phi);
  Rng rng(cfg.seed);
  Ar1ChainPaths out;
  out.alphas.reserve(T);
  out.epsilons.reserve(T);
  double x = cfg.alpha();
  double eps = std::clamp(rng.normal(), -cfg.clip, cfg.clip);
  for (std::size_t t = 0; t < cfg.burn_in + T; ++t) {
    eps = std::clamp(phi * eps + innov_sd * rng.normal(), -cfg.clip, cfg.clip);
    const double p_level = std::clamp(x, 0.0, 1.0);
    const bool miss = std::abs(eps) > extended_radius(cfg, p_level);
    if (t >= cfg.burn_in) {
      out.alphas.push_back(x);
      out.epsilons.push_back(eps);
    }
    x += cfg.gamma * (cfg.alpha() - (miss ? 1.0 : 0.0));
  }
  return out;
}

enum class LengthMode { mean_clipped, median };

/// Ergodic estimate of the stationary interval length 2 * Q(1 - alpha_t),
/// with the extension conventions of `extended_radius`.
inline double estimate_expected_length(const std::vector<double>& alpha_path,
                                       const ChainConfig& cfg,
                                       LengthMode mode) {
  if (alpha_path.empty()) throw std::invalid_argument("empty path");
  std::vector<double> lengths;
  lengths.reserve(alpha_path.size());
  for (double a : alpha_path) {
    lengths.push_back(2.0 * extended_radius(cfg, a));
  }
  if (mode == LengthMode::median) return median_of(std::move(lengths));
  double sum = 0.0;
  for (double l : lengths) sum += l;
  return sum / static_cast<double>(lengths.size());
}

/// One row of the gamma sweep table.
struct GammaSweepRow {
  double phi, gamma;
  std::size_t rep;
  double mean_length, median_length, miss_rate, pct_infinite;
};

struct GammaSweepResult {
  std::vector<GammaSweepRow> rows;
  std::vector<std::pair<double, double>> gamma_star;  ///< (phi, argmin gamma)
};

/// Sweeps the learning rate over AR(1) dependence levels. Infinite-interval
/// steps (effective level at or below 0) contribute the imputed length
/// 2 * max |eps| of that path; degenerate steps (level at or above 1)
/// contribute 0. The optimal gamma per phi minimizes the repetition-averaged
/// mean length, ties going to the smaller gamma.
inline GammaSweepResult sweep_gamma(const ChainConfig& base,
                                    const std::vector<double>& gammas,
                                    const std::vector<double>& phis,
                                    std::size_t reps = 1) {
  if (gammas.empty() || phis.empty()) throw std::invalid_argument("empty grid");
  if (reps == 0) throw std::invalid_argument("reps == 0");
  GammaSweepResult out;
  std::uint64_t cell = 0;
  for (double phi : phis) {
    double best_gamma = gammas.front();
    double best_mean = kInf;
    for (double gamma : gammas) {
      double rep_mean_sum = 0.0;
      for (std::size_t rep = 0; rep < reps; ++rep, ++cell) {
        ChainConfig cfg = base;
        cfg.gamma = gamma;
        cfg.phi = phi;
        cfg.seed = mix_seed(base.seed, cell);
        const auto paths = chain_run_ar1(cfg, cfg.steps);
        double eps_max = 0.0;
        for (double e : paths.epsilons) eps_max = std::max(eps_max, std::abs(e));
        double len_sum = 0.0, miss_sum = 0.0, inf_sum = 0.0;
        std::vector<double> lengths;
        lengths.reserve(paths.alphas.size());
        for (std::size_t t = 0; t < paths.alphas.size(); ++t) {
          const double a = paths.alphas[t];
          double len;
          if (a <= 0.0) {
            len = 2.0 * eps_max;  // infinite interval, imputed
            inf_sum += 1.0;
          } else if (a >= 1.0) {
            len = 0.0;
          } else {
            len = 2.0 * cfg.quantile_fn(1.0 - a);
          }
          lengths.push_back(len);
          len_sum += len;
          const double radius = extended_radius(cfg, std::clamp(a, 0.0, 1.0));
          miss_sum += std::abs(paths.epsilons[t]) > radius ? 1.0 : 0.0;
        }
        const double n = static_cast<double>(paths.alphas.size());
        GammaSweepRow row;
        row.phi = phi;
        row.gamma = gamma;
        row.rep = rep;
        row.mean_length = len_sum / n;
        row.median_length = median_of(std::move(lengths));
        row.miss_rate = miss_sum / n;
        row.pct_infinite = inf_sum / n;
        rep_mean_sum += row.mean_length;
        out.rows.push_back(row);
      }
      const double cell_mean = rep_mean_sum / static_cast<double>(reps);
      if (cell_mean < best_mean) {  // strict: ties keep the smaller gamma
        best_mean = cell_mean;
        best_gamma = gamma;
      }
    }
    out.gamma_star.emplace_back(phi, best_gamma);
  }
  return out;
}

/// Writes the sweep table as CSV (fixed column set, deterministic layout).
inline void write_gamma_sweep_csv(const GammaSweepResult& result,
                                  std::ostream& os) {
  os << "phi,gamma,rep,mean_length,median_length,miss_rate,pct_infinite\n";
  char buf[256];
  for (const auto& r : result.rows) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%zu,%.10g,%.10g,%.10g,%.10g\n",
                  r.phi, r.gamma, r.rep, r.mean_length, r.median_length,
                  r.miss_rate, r.pct_infinite);
    os << buf;
  }
}

/// Empirical first and second moments of P(alpha_t) - alpha against the
/// leading-order second-moment prediction gamma/2 * alpha * (1 - alpha).
struct MomentReport {
  double m1, m2, m2_predicted;
};

inline MomentReport moment_checks(const std::vector<double>& alpha_path,
                                  const ChainConfig& cfg) {
  if (alpha_path.empty()) throw std::invalid_argument("empty path");
  const double alpha = cfg.alpha();
  double s1 = 0.0, s2 = 0.0;
  for (double a : alpha_path) {
    const double dev = std::clamp(a, 0.0, 1.0) - alpha;
    s1 += dev;
    s2 += dev * dev;
  }
  const double n = static_cast<double>(alpha_path.size());
  return MomentReport{s1 / n, s2 / n,
                      0.5 * cfg.gamma * alpha * (1.0 - alpha)};
}

/// Leading-order stationary expected length: L0 plus the second-derivative
/// term, with Q'' taken by central differences (step 1e-4).
inline double taylor_prediction(const std::function<double(double)>& Q,
                                double alpha, double gamma) {
  const double x = 1.0 - alpha, h = 1e-4;
  const double qpp = (Q(x + h) - 2.0 * Q(x) + Q(x - h)) / (h * h);
  return 2.0 * Q(x) + qpp * 0.5 * gamma * alpha * (1.0 - alpha);
}

}  // namespace tscp

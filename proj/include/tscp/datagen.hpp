#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "tscp/core.hpp"
#include "tscp/rng.hpp"

namespace tscp {

/// Innovation distribution for the noise process (Gaussian only).
enum class InnovationDist { gaussian };

/// ARMA(1,1) noise specification at a fixed asymptotic target variance.
/// AR(1) and MA(1) are the theta = 0 / phi = 0 special cases; phi = theta = 0
/// is white noise.
struct NoiseSpec {
  double phi = 0.0;
  double theta = 0.0;
  double target_variance = 1.0;
  InnovationDist innovation_dist = InnovationDist::gaussian;
  std::uint64_t seed = 0;
};

/// Innovation variance sigma^2 that gives the recursion
///   eps_{t+1} = phi * eps_t + xi_{t+1} + theta * xi_t
/// an asymptotic variance of v. The stationary variance of that recursion is
/// sigma^2 * (1 + 2*phi*theta + theta^2) / (1 - phi^2), so the scaling is its
/// inverse; a unit test checks the realized path variance directly.
inline double innovation_variance(double v, double phi, double theta) {
  if (std::abs(phi) >= 1.0) throw std::invalid_argument("nonstationary");
  return v * (1.0 - phi * phi) / (1.0 + 2.0 * phi * theta + theta * theta);
}

inline void validate_noise(const NoiseSpec& spec) {
  if (std::abs(spec.phi) >= 1.0) throw std::invalid_argument("nonstationary");
  const bool both_zero = spec.phi == 0.0 && spec.theta == 0.0;
  if (!both_zero && spec.phi + spec.theta == 0.0) {
    throw std::invalid_argument("degenerate arma: phi + theta = 0");
  }
}

/// Length-T ARMA(1,1) path, deterministic per spec.seed; the first burn_in
/// steps are discarded so the output is effectively stationary.
inline std::vector<double> simulate_noise(const NoiseSpec& spec,
                                          std::size_t T,
                                          std::size_t burn_in = 1000) {
  validate_noise(spec);
  if (T == 0) throw std::invalid_argument("empty path");
  const double sigma =
      std::sqrt(innovation_variance(spec.target_variance, spec.phi, spec.theta));
  Rng rng(spec.seed);
  std::vector<double> out;
  out.reserve(T);
  double eps = 0.0;
  double xi_prev = sigma * rng.normal();
  for (std::size_t t = 0; t < burn_in + T; ++t) {
    const double xi = sigma * rng.normal();
    eps = spec.phi * eps + xi + spec.theta * xi_prev;
    xi_prev = xi;
    if (t >= burn_in) out.push_back(eps);
  }
  return out;
}

/// Friedman regression function of the first six components; the sixth is
/// deliberately uninformative (zero coefficient).
inline double friedman(const std::vector<double>& x) {
  if (x.size() < 6) throw std::invalid_argument("friedman needs 6 features");
  return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) +
         20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] + 5.0 * x[4] +
         0.0 * x[5];
}

/// Uniform features with Friedman signal plus ARMA noise. The single seed
/// argument drives both the feature draw and the noise path; spec.seed is
/// ignored here so one value reproduces the whole dataset.
inline SeriesDataset generate_dataset(std::size_t n_features, std::size_t t0,
                                      std::size_t t1, const NoiseSpec& noise,
                                      std::uint64_t seed) {
  if (n_features < 6) throw std::invalid_argument("need >= 6 features");
  const std::size_t T = t0 + t1;
  SeriesDataset data;
  data.features = Matrix(T, n_features);
  data.targets.resize(T);
  data.t0 = t0;
  data.t1 = t1;

  Rng feat_rng(mix_seed(seed, 0));
  NoiseSpec path_spec = noise;
  path_spec.seed = mix_seed(seed, 1);
  const auto eps = simulate_noise(path_spec, T);

  std::vector<double> row(n_features);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < n_features; ++j) {
      row[j] = feat_rng.uniform();
      data.features.at(t, j) = row[j];
    }
    data.targets[t] = friedman(row) + eps[t];
  }
  data.validate();
  return data;
}

/// Convenience: the default benchmark setup (300 observations, 200 train).
inline SeriesDataset generate_default_dataset(const NoiseSpec& noise,
                                              std::uint64_t seed) {
  return generate_dataset(6, 200, 100, noise, seed);
}

/// Deterministic seasonal-plus-trend signal with slowly mixing AR(1) noise
/// (phi = 0.99, innovation variance 0.01). The signal value is the single
/// feature; meant for visual regression tests of interval plots.
inline SeriesDataset model1_preset(std::size_t T, std::uint64_t seed) {
  if (T < 4) throw std::invalid_argument("preset needs T >= 4");
  SeriesDataset data;
  data.features = Matrix(T, 1);
  data.targets.resize(T);
  data.t0 = T / 2;
  data.t1 = T - data.t0;

  Rng rng(seed);
  const double sigma = std::sqrt(0.01);
  double eps = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / 180.0;
    const double signal =
        std::cos(angle) + std::sin(angle) + static_cast<double>(t) / 100.0;
    eps = 0.99 * eps + sigma * rng.normal();
    data.features.at(t, 0) = signal;
    data.targets[t] = signal + eps;
  }
  data.validate();
  return data;
}

}  // namespace tscp

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tscp/core.hpp"
#include "tscp/models.hpp"
#include "tscp/rng.hpp"

namespace tscp {

enum class SplitKind { sequential, randomized };

/// How each window is divided into proper-training and calibration parts.
struct SplitPolicy {
  SplitKind kind = SplitKind::sequential;
  double train_fraction = 0.5;
};

/// Adaptive-level state: the target level, the learning rate, the current
/// effective level (unconstrained real) and the (alpha_t, miss) history.
struct AciState {
  double alpha = 0.1;
  double gamma = 0.0;
  double alpha_t = 0.1;
  std::vector<std::pair<double, bool>> history;

  AciState(double a, double g) : alpha(a), gamma(g), alpha_t(a) {}

  /// One recursion step after observing whether the target was missed.
  void update(bool miss) {
    history.emplace_back(alpha_t, miss);
    alpha_t += gamma * (alpha - (miss ? 1.0 : 0.0));
  }
};

/// Per-step outputs of the shared online protocol: for each test step the
/// point forecast and ascending calibration scores under the model in force
/// at that step, plus the fit-once offline variant of the same run. Methods
/// that differ only in how they turn scores into a radius can share one
/// stream, which is the expensive part (the model fits).
struct OnlineStream {
  std::vector<double> mu;                   ///< forecasts, one per test step
  std::vector<std::vector<double>> scores;  ///< ascending, one set per step
  std::vector<double> offline_mu;           ///< forecasts under step-0 model
  std::vector<double> offline_scores;       ///< step-0 calibration, ascending
};

namespace detail {

inline void check_online_inputs(const SeriesDataset& data,
                                const SplitPolicy& policy,
                                std::size_t refit_every) {
  data.validate();
  if (data.t0 < 4) throw std::invalid_argument("need t0 >= 4");
  if (policy.train_fraction <= 0.0 || policy.train_fraction >= 1.0) {
    throw std::invalid_argument("train_fraction outside (0,1)");
  }
  if (refit_every == 0) throw std::invalid_argument("refit_every == 0");
}

}  // namespace detail

/// Runs the online protocol once: at every test step the most recent t0 rows
/// form the window, split by `policy` (a fresh seeded permutation at each
/// refit when randomized); the model is refit every `refit_every` steps and
/// the calibration scores are refreshed every step under the current model.
inline OnlineStream compute_online_stream(const RegressorSpec& spec,
                                          const SeriesDataset& data,
                                          const SplitPolicy& policy,
                                          std::size_t refit_every,
                                          std::uint64_t seed) {
  detail::check_online_inputs(data, policy, refit_every);
  const std::size_t t0 = data.t0, t1 = data.t1, d = data.features.cols;
  const auto n_train = static_cast<std::size_t>(
      std::floor(policy.train_fraction * static_cast<double>(t0)));
  const std::size_t n_tr = std::clamp<std::size_t>(n_train, 1, t0 - 1);
  const std::size_t n_cal = t0 - n_tr;

  OnlineStream out;
  out.mu.resize(t1);
  out.scores.resize(t1);
  out.offline_mu.resize(t1);

  std::vector<std::size_t> positions(t0);  // window positions; first n_tr train
  std::iota(positions.begin(), positions.end(), 0);

  std::vector<FittedModel> model;  // single slot; rebuilt at refits
  Matrix Xtr(n_tr, d);
  std::vector<double> ytr(n_tr);

  for (std::size_t j = 0; j < t1; ++j) {
    if (j % refit_every == 0) {
      if (policy.kind == SplitKind::randomized) {
        std::iota(positions.begin(), positions.end(), 0);
        Rng perm_rng(mix_seed(seed, j));
        perm_rng.shuffle(positions);
      }
      for (std::size_t r = 0; r < n_tr; ++r) {
        const std::size_t row = j + positions[r];
        std::copy(data.features.row(row), data.features.row(row) + d,
                  Xtr.row(r));
        ytr[r] = data.targets[row];
      }
      RegressorSpec step_spec = spec;
      step_spec.seed = mix_seed(seed ^ spec.seed, 2 * j + 1);
      model.clear();
      model.push_back(fit(step_spec, Xtr, ytr));
    }
    out.mu[j] = model.front().predict(data.features.row(t0 + j));
    auto& sc = out.scores[j];
    sc.resize(n_cal);
    for (std::size_t r = 0; r < n_cal; ++r) {
      const std::size_t row = j + positions[n_tr + r];
      sc[r] = std::abs(data.targets[row] -
                       model.front().predict(data.features.row(row)));
    }
    std::sort(sc.begin(), sc.end());

    if (j == 0) {
      out.offline_scores = sc;  // step-0 calibration under the step-0 model
      for (std::size_t k = 0; k < t1; ++k) {
        out.offline_mu[k] = model.front().predict(data.features.row(t0 + k));
      }
    }
  }
  return out;
}

/// Radius at a corrected level: the ceil(level*n)-th smallest score, infinite
/// once level exceeds 1 (level == 1 still selects the maximum).
inline double corrected_radius(const std::vector<double>& sorted_scores,
                               double level) {
  if (sorted_scores.empty()) throw std::runtime_error("no calibration scores");
  const std::size_t n = sorted_scores.size();
  const double kk = std::ceil(level * static_cast<double>(n) - 1e-9);
  if (kk < 1.0) return sorted_scores.front();
  if (kk > static_cast<double>(n)) return kInf;
  return sorted_scores[static_cast<std::size_t>(kk) - 1];
}

namespace detail {

inline RunResult finalize_symmetric(const SeriesDataset& data,
                                    const std::vector<double>& mu,
                                    const std::vector<double>& radii) {
  RunResult res;
  res.intervals.resize(mu.size());
  res.covered.resize(mu.size());
  res.point_forecasts = mu;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double r = radii[j];
    res.intervals[j] = Interval{mu[j] - r, mu[j] + r};
    res.covered[j] = res.intervals[j].contains(data.test_target(j));
  }
  return res;
}

}  // namespace detail

/// Split conformal prediction: one fit on the initial window, one corrected
/// quantile at level (1-alpha)(1+1/n_cal) used for every test interval.
inline RunResult scp_from_stream(const OnlineStream& stream,
                                 const SeriesDataset& data, double alpha) {
  const double n_cal = static_cast<double>(stream.offline_scores.size());
  const double level = (1.0 - alpha) * (1.0 + 1.0 / n_cal);
  const double r = corrected_radius(stream.offline_scores, level);
  std::vector<double> radii(stream.offline_mu.size(), r);
  return detail::finalize_symmetric(data, stream.offline_mu, radii);
}

inline RunResult scp(const RegressorSpec& spec, const SeriesDataset& data,
                     double alpha, const SplitPolicy& policy = {},
                     std::uint64_t seed = 0) {
  // A stream that never refits past step 0 is exactly the offline protocol.
  const auto stream = compute_online_stream(spec, data, policy, data.t1, seed);
  return scp_from_stream(stream, data, alpha);
}

/// Online sequential split conformal: an SCP interval at every step from the
/// sliding window, with refits and refreshed calibration scores.
inline RunResult osscp_from_stream(const OnlineStream& stream,
                                   const SeriesDataset& data, double alpha) {
  std::vector<double> radii(stream.mu.size());
  for (std::size_t j = 0; j < stream.mu.size(); ++j) {
    const double n_cal = static_cast<double>(stream.scores[j].size());
    const double level = (1.0 - alpha) * (1.0 + 1.0 / n_cal);
    radii[j] = corrected_radius(stream.scores[j], level);
  }
  return detail::finalize_symmetric(data, stream.mu, radii);
}

inline RunResult osscp(const RegressorSpec& spec, const SeriesDataset& data,
                       double alpha, const SplitPolicy& policy = {},
                       std::size_t refit_every = 1, std::uint64_t seed = 0) {
  const auto stream =
      compute_online_stream(spec, data, policy, refit_every, seed);
  return osscp_from_stream(stream, data, alpha);
}

/// Checks the adaptive-level guarantee |mean miss - alpha| <= 2/(gamma*T1).
inline bool aci_error_bound_check(const RunResult& result, double alpha,
                                  double gamma) {
  if (gamma <= 0.0) throw std::runtime_error("bound undefined");
  if (result.covered.empty()) throw std::invalid_argument("empty run");
  std::size_t misses = 0;
  for (bool c : result.covered) misses += c ? 0 : 1;
  const double t1 = static_cast<double>(result.covered.size());
  const double mean_err = static_cast<double>(misses) / t1;
  return std::abs(mean_err - alpha) <= 2.0 / (gamma * t1);
}

/// Adaptive conformal inference: the OSSCP loop with the effective level
/// alpha_t updated by the miss recursion; the raw level 1 - alpha_t is used
/// (no finite-sample correction), with the quantile clamping conventions
/// giving the whole line at alpha_t <= 0 and the point forecast at
/// alpha_t >= 1. Always a sequential split.
inline RunResult aci_from_stream(const OnlineStream& stream,
                                 const SeriesDataset& data, double alpha,
                                 double gamma) {
  if (alpha <= 0.0 || alpha >= 1.0) {
    throw std::invalid_argument("alpha outside (0,1)");
  }
  if (gamma < 0.0) throw std::invalid_argument("negative gamma");
  const std::size_t t1 = stream.mu.size();
  AciState state(alpha, gamma);
  RunResult res;
  res.intervals.resize(t1);
  res.covered.resize(t1);
  res.point_forecasts = stream.mu;
  std::vector<double> alphas(t1);
  for (std::size_t j = 0; j < t1; ++j) {
    alphas[j] = state.alpha_t;
    const double r =
        empirical_quantile_sorted(stream.scores[j], 1.0 - state.alpha_t);
    res.intervals[j] = Interval{stream.mu[j] - r, stream.mu[j] + r};
    res.covered[j] = res.intervals[j].contains(data.test_target(j));
    state.update(!res.covered[j]);
  }
  res.alphas = std::move(alphas);
  if (gamma > 0.0 && !aci_error_bound_check(res, alpha, gamma)) {
    // A telescoped identity of the recursion; failure means a broken update.
    throw std::logic_error("adaptive level bound violated");
  }
  return res;
}

inline RunResult aci(const RegressorSpec& spec, const SeriesDataset& data,
                     double alpha, double gamma, std::size_t refit_every = 1,
                     std::uint64_t seed = 0) {
  const auto stream = compute_online_stream(spec, data, SplitPolicy{},
                                            refit_every, seed);
  return aci_from_stream(stream, data, alpha, gamma);
}

/// Bootstrap-ensemble intervals with sliding leave-out residuals.
struct EnbpiConfig {
  std::size_t B = 30;          ///< bootstrap members
  std::size_t batch_size = 1;  ///< residual slide period s
  bool v2 = false;             ///< mean aggregation at prediction time
};

/// Ensemble batch prediction intervals: B models fit once on bootstrap
/// resamples of the initial window, leave-out residuals per training point,
/// and a residual queue that slides forward by `batch_size` as test targets
/// are revealed. The center is the (1-alpha)-quantile of the per-member
/// predictions, or their mean in the V2 variant; the radius is the raw
/// (1-alpha)-quantile of the current residual set. Models are never refit.
inline RunResult enbpi(
    const RegressorSpec& spec, const SeriesDataset& data, double alpha,
    const EnbpiConfig& cfg, std::uint64_t seed,
    const std::vector<std::vector<std::size_t>>* forced_samples = nullptr) {
  data.validate();
  if (cfg.B == 0) throw std::invalid_argument("B == 0");
  if (cfg.batch_size == 0) throw std::invalid_argument("batch_size == 0");
  const std::size_t t0 = data.t0, t1 = data.t1, d = data.features.cols;

  Matrix Xtr(t0, d);
  std::vector<double> ytr(t0);
  for (std::size_t i = 0; i < t0; ++i) {
    std::copy(data.features.row(i), data.features.row(i) + d, Xtr.row(i));
    ytr[i] = data.targets[i];
  }
  const auto members = fit_bootstrap_ensemble(spec, Xtr, ytr, cfg.B,
                                              mix_seed(seed, 0), forced_samples);

  // Membership table: contains[b*t0 + i] = 1 iff row i is in member b's bag.
  std::vector<char> contains(cfg.B * t0, 0);
  for (std::size_t b = 0; b < cfg.B; ++b) {
    for (auto i : members[b].indices) contains[b * t0 + i] = 1;
  }

  // Leave-out residuals over the training window, ordered by time; points in
  // every bag have no leave-out model and are dropped.
  std::deque<double> residuals;
  for (std::size_t i = 0; i < t0; ++i) {
    double sum = 0.0;
    std::size_t n_out = 0;
    for (std::size_t b = 0; b < cfg.B; ++b) {
      if (!contains[b * t0 + i]) {
        sum += members[b].model.predict(data.features.row(i));
        ++n_out;
      }
    }
    if (n_out == 0) continue;
    residuals.push_back(
        std::abs(data.targets[i] - sum / static_cast<double>(n_out)));
  }
  if (residuals.empty()) throw std::runtime_error("degenerate bootstrap");

  auto sorted_residuals = [&residuals]() {
    std::vector<double> v(residuals.begin(), residuals.end());
    std::sort(v.begin(), v.end());
    return v;
  };

  RunResult res;
  res.intervals.resize(t1);
  res.covered.resize(t1);
  res.point_forecasts.resize(t1);

  std::vector<double> member_preds(cfg.B);
  std::vector<double> sorted = sorted_residuals();
  std::size_t batch_start = 0;
  for (std::size_t j = 0; j < t1; ++j) {
    for (std::size_t b = 0; b < cfg.B; ++b) {
      member_preds[b] = members[b].model.predict(data.features.row(t0 + j));
    }
    double center;
    if (cfg.v2) {
      center = std::accumulate(member_preds.begin(), member_preds.end(), 0.0) /
               static_cast<double>(cfg.B);
    } else {
      center = empirical_quantile(member_preds, 1.0 - alpha);
    }
    const double r = empirical_quantile_sorted(sorted, 1.0 - alpha);
    res.point_forecasts[j] = center;
    res.intervals[j] = Interval{center - r, center + r};
    res.covered[j] = res.intervals[j].contains(data.test_target(j));

    if ((j + 1 - batch_start) == cfg.batch_size) {
      for (std::size_t jj = batch_start; jj <= j; ++jj) {
        residuals.pop_front();
        residuals.push_back(
            std::abs(data.test_target(jj) - res.point_forecasts[jj]));
      }
      sorted = sorted_residuals();
      batch_start = j + 1;
    }
  }
  return res;
}

}  // namespace tscp

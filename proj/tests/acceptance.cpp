// End-to-end acceptance checks. Each numbered criterion prints exactly one
// PASS/FAIL line with the measured quantities; the exit code is the number
// of failing criteria. Tolerances are part of the criterion definitions and
// are not tuned to the implementation.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "tscp/agaci.hpp"
#include "tscp/datagen.hpp"
#include "tscp/harness.hpp"
#include "tscp/methods.hpp"
#include "tscp/models.hpp"
#include "tscp/price.hpp"
#include "tscp/theorylab.hpp"

namespace {

int g_failures = 0;

void report(bool ok, int idx, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", idx,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

void note(const std::string& text) {
  std::printf("       %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* spec, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, spec);
  std::vsnprintf(buf, sizeof(buf), spec, ap);
  va_end(ap);
  return buf;
}

double run_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

/// Standard error of the mean of a batch-means estimate (20 batches), for
/// autocorrelated chain output.
double batch_se(const std::vector<double>& xs) {
  const std::size_t B = 20, n = xs.size() / B;
  std::vector<double> means(B, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      means[b] += xs[b * n + i];
    }
    means[b] /= static_cast<double>(n);
  }
  double m = 0.0;
  for (double v : means) m += v;
  m /= static_cast<double>(B);
  double var = 0.0;
  for (double v : means) var += (v - m) * (v - m);
  var /= static_cast<double>(B - 1);
  return std::sqrt(var / static_cast<double>(B));
}

const tscp::BenchAggregate& agg(const tscp::BenchmarkResult& r,
                                const std::string& method, double phi) {
  for (const auto& a : r.aggregates) {
    if (a.method == method && std::abs(a.phi - phi) < 1e-12) return a;
  }
  throw std::runtime_error("aggregate not found: " + method);
}

// ---------------------------------------------------------------------------
// 1. Offline split conformal coverage on exchangeable data: with i.i.d.
//    noise the mean coverage over many repetitions must sit inside the
//    two-sided finite-sample window [1-alpha, 1-alpha + 1/(n_cal+1)],
//    widened by three standard errors on each side.
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t reps = 500;
  const double alpha = 0.1;
  tscp::NoiseSpec noise;  // phi = theta = 0: white noise
  noise.target_variance = 10.0;
  tscp::RegressorSpec model;
  model.kind = tscp::RegressorKind::ridge;
  std::vector<double> covs(reps);
  for (std::size_t rep = 0; rep < reps; ++rep) {
    const auto data = tscp::generate_dataset(6, 200, 100, noise,
                                             tscp::mix_seed(101, rep));
    covs[rep] = tscp::coverage(tscp::scp(model, data, alpha));
  }
  double mean = 0.0;
  for (double c : covs) mean += c;
  mean /= static_cast<double>(reps);
  double var = 0.0;
  for (double c : covs) var += (c - mean) * (c - mean);
  var /= static_cast<double>(reps - 1);
  const double se = std::sqrt(var / static_cast<double>(reps));
  const double lo = 0.9 - 3.0 * se;
  const double hi = 0.9 + 2.0 / 202.0 + 3.0 * se;
  report(mean >= lo && mean <= hi, 1,
         fmt("offline SCP coverage on i.i.d. noise: mean %.5f over %zu reps, "
             "window [%.5f, %.5f] (%.1fs)",
             mean, reps, lo, hi, run_seconds(t0)));
}

// ---------------------------------------------------------------------------
// 2. Deterministic error bound of the adaptive level: every run with
//    gamma > 0 must satisfy |mean miss - alpha| <= 2/(gamma*T1). Checked as
//    a hard postcondition on 1000 randomized configurations.
void criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  tscp::Rng rng(9001);
  tscp::RegressorSpec model;
  model.kind = tscp::RegressorKind::ridge;
  std::size_t ok_count = 0;
  const std::size_t runs = 1000;
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0_size = static_cast<std::size_t>(30 + rng.uniform() * 120);
    const auto t1_size = static_cast<std::size_t>(20 + rng.uniform() * 100);
    const double alpha = 0.05 + rng.uniform() * 0.25;
    const double gamma = 0.005 + rng.uniform() * 0.795;
    tscp::NoiseSpec noise;
    noise.phi = rng.uniform() * 0.95;
    noise.theta = rng.uniform() * 0.95;
    noise.target_variance = 10.0;
    const auto data = tscp::generate_dataset(6, t0_size, t1_size, noise,
                                             tscp::mix_seed(202, i));
    // aci() itself re-checks the bound and throws on violation.
    const auto res = tscp::aci(model, data, alpha, gamma);
    if (tscp::aci_error_bound_check(res, alpha, gamma)) ++ok_count;
  }
  report(ok_count == runs, 2,
         fmt("adaptive-level error bound |mean miss - alpha| <= 2/(gamma*T1) "
             "held on %zu/%zu randomized runs (%.1fs)",
             ok_count, runs, run_seconds(t0)));
}

// ---------------------------------------------------------------------------
// 3. Stationary length expansion of the exchangeable chain at alpha = 1/100,
//    T = 1e6: target ratios E[L]/L0 = 1.0159 +- 0.003 at gamma = 0.03 and
//    1.0338 +- 0.003 at gamma = 0.05.
void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  tscp::ChainConfig cfg;  // folded-Gaussian scores, cap 5
  cfg.alpha_num = 1;
  cfg.alpha_den = 100;
  cfg.steps = 1000000;
  cfg.burn_in = 10000;
  cfg.seed = 42;
  const double L0 = 2.0 * cfg.quantile_fn(1.0 - cfg.alpha());
  double ratio[2];
  const double gammas[2] = {0.03, 0.05}, targets[2] = {1.0159, 1.0338};
  for (int i = 0; i < 2; ++i) {
    cfg.gamma = gammas[i];
    const auto path = tscp::chain_run_exchangeable(cfg);
    ratio[i] = tscp::estimate_expected_length(path, cfg,
                                              tscp::LengthMode::mean_clipped) /
               L0;
  }
  const bool ok = std::abs(ratio[0] - targets[0]) <= 0.003 &&
                  std::abs(ratio[1] - targets[1]) <= 0.003;
  report(ok, 3,
         fmt("chain length expansion at alpha=1/100: E[L]/L0 = %.4f (target "
             "%.4f+-0.003) at gamma=0.03, %.4f (target %.4f+-0.003) at "
             "gamma=0.05 (%.1fs)",
             ratio[0], targets[0], ratio[1], targets[1], run_seconds(t0)));
  if (!ok) {
    const auto targets_at_tenth = [&](double gamma) {
      return tscp::taylor_prediction(cfg.quantile_fn, 0.1, gamma) /
             (2.0 * cfg.quantile_fn(0.9));
    };
    note(fmt("the curvature expansion at alpha=1/10 gives %.4f at gamma=0.03 "
             "and %.4f at gamma=0.05; the stated targets are consistent with "
             "a 1/10 target level, not with the 1/100 level requested here",
             targets_at_tenth(0.03), targets_at_tenth(0.05)));
  }
}

// ---------------------------------------------------------------------------
// 4. Moment laws of the chain deviation alpha_t - alpha at small gamma:
//    mean zero within three (batch) standard errors; second moment within
//    10% of (gamma/2) * alpha * (1 - alpha).
void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  tscp::ChainConfig cfg;
  cfg.alpha_num = 1;
  cfg.alpha_den = 10;
  cfg.gamma = 0.001;
  cfg.quantile_fn = tscp::folded_gaussian_quantile(1.0, 3.0);
  cfg.clip = 3.0;
  cfg.steps = 1000000;
  cfg.burn_in = 200000;
  cfg.seed = 1;
  const auto path = tscp::chain_run_exchangeable(cfg);
  const auto rep = tscp::moment_checks(path, cfg);
  std::vector<double> devs(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) devs[i] = path[i] - cfg.alpha();
  const double se = batch_se(devs);
  const double m2_ratio = rep.m2 / rep.m2_predicted;
  const bool ok = std::abs(rep.m1) <= 3.0 * se && m2_ratio >= 0.9 &&
                  m2_ratio <= 1.1;
  report(ok, 4,
         fmt("chain moments at gamma=0.001: mean deviation %.2e (3*SE %.2e), "
             "second moment %.3e vs predicted %.3e (ratio %.3f in [0.9,1.1]) "
             "(%.1fs)",
             rep.m1, 3.0 * se, rep.m2, rep.m2_predicted, m2_ratio,
             run_seconds(t0)));
}

// ---------------------------------------------------------------------------
// 5. Shape of the learning-rate sweep: gamma* = 0 without dependence; a
//    positive gamma strictly beats gamma = 0 under strong dependence; and at
//    a fixed positive gamma the mean length decreases as dependence grows.
void criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  tscp::ChainConfig base;
  base.alpha_num = 1;
  base.alpha_den = 10;
  base.quantile_fn = tscp::folded_gaussian_quantile(1.0, 3.0);
  base.clip = 3.0;
  base.steps = 100000;
  base.burn_in = 10000;
  base.seed = 424242;
  std::vector<double> gammas;
  for (int i = 0; i < 40; ++i) gammas.push_back(0.005 * i);
  const std::vector<double> phis = {0.0, 0.85, 0.99};
  const auto sweep = tscp::sweep_gamma(base, gammas, phis, 5);

  const auto mean_len = [&](double phi, double gamma) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : sweep.rows) {
      if (std::abs(row.phi - phi) < 1e-12 &&
          std::abs(row.gamma - gamma) < 1e-12) {
        sum += row.mean_length;
        ++n;
      }
    }
    return sum / static_cast<double>(n);
  };
  const auto gstar = [&](double phi) {
    for (const auto& [p, g] : sweep.gamma_star) {
      if (std::abs(p - phi) < 1e-12) return g;
    }
    throw std::runtime_error("phi not swept");
  };

  const bool flat_at_zero = gstar(0.0) == 0.0;
  const bool improves = mean_len(0.99, gstar(0.99)) < mean_len(0.99, 0.0);
  const double l0 = mean_len(0.0, 0.05), l85 = mean_len(0.85, 0.05),
               l99 = mean_len(0.99, 0.05);
  const bool decreasing = l0 > l85 && l85 > l99;
  report(flat_at_zero && improves && decreasing, 5,
         fmt("sweep shape: gamma*(phi=0)=%.3f (want 0); E[L] %.4f at "
             "gamma*(0.99)=%.3f vs %.4f at gamma=0 (want <); E[L] at "
             "gamma=0.05 %.4f > %.4f > %.4f across phi=0,0.85,0.99 (%.1fs)",
             gstar(0.0), mean_len(0.99, gstar(0.99)), gstar(0.99),
             mean_len(0.99, 0.0), l0, l85, l99, run_seconds(t0)));
}

// ---------------------------------------------------------------------------
// 6 + 7. Desk-scale benchmark across ARMA dependence levels with bagged
//    trees (100 reps, t1 = 100): method orderings, the aggregated-expert
//    coverage floor, and the infinite-interval rate of the adaptive method.
void criteria_6_and_7() {
  const auto t0 = std::chrono::steady_clock::now();
  tscp::ExperimentConfig cfg;
  cfg.methods = {"scp",   "osscp", "aci:0", "aci:0.05",
                 "agaci", "enbpi", "enbpi-v2"};
  cfg.repetitions = 100;
  cfg.seed = 1;
  const auto res = tscp::run_benchmark(cfg);
  const double secs = run_seconds(t0);

  const bool a_ok =
      agg(res, "osscp", 0.99).coverage_mean > agg(res, "scp", 0.99).coverage_mean;
  const bool b_ok =
      std::abs(agg(res, "enbpi-v2", 0.9).coverage_mean - 0.9) <=
      std::abs(agg(res, "enbpi", 0.9).coverage_mean - 0.9);
  double agaci_min = 1.0;
  double agaci_len = 0.0, aci0_len = 0.0;
  for (const auto& cell : cfg.noise) {
    agaci_min = std::min(agaci_min, agg(res, "agaci", cell.phi).coverage_mean);
    agaci_len += agg(res, "agaci", cell.phi).median_length_mean;
    aci0_len += agg(res, "aci:0", cell.phi).median_length_mean;
  }
  const bool c_ok = agaci_min >= 0.888;
  const bool d_ok = agaci_len <= 1.05 * aci0_len;
  report(a_ok && b_ok && c_ok && d_ok, 6,
         fmt("benchmark orderings (100 reps, bagged trees): online SCP %.4f "
             "> offline %.4f at phi=0.99 [%s]; V2 ensemble |%.4f-0.9| <= "
             "|%.4f-0.9| at phi=0.9 [%s]; aggregated-expert min coverage "
             "%.4f >= 0.888 [%s]; its median length %.3f <= 1.05 x %.3f of "
             "the frozen-level expert [%s] (%.0fs)",
             agg(res, "osscp", 0.99).coverage_mean,
             agg(res, "scp", 0.99).coverage_mean, a_ok ? "ok" : "FAIL",
             agg(res, "enbpi-v2", 0.9).coverage_mean,
             agg(res, "enbpi", 0.9).coverage_mean, b_ok ? "ok" : "FAIL",
             agaci_min, c_ok ? "ok" : "FAIL", agaci_len / 5.0, aci0_len / 5.0,
             d_ok ? "ok" : "FAIL", secs));

  const double inf_rate = agg(res, "aci:0.05", 0.95).pct_infinite_mean;
  report(std::abs(inf_rate - 0.0445) <= 0.01, 7,
         fmt("infinite-interval rate of aci(gamma=0.05) at phi=theta=0.95: "
             "%.4f, target 0.0445 +- 0.01",
             inf_rate));
}

// ---------------------------------------------------------------------------
// 8. Price pipeline on the bundled stand-in generator: completes for all six
//    methods; the aggregated-expert coverage lands in [0.85, 1]; the online
//    refitting variant covers at least as well as the frozen offline fit.
void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  tscp::StandinSpec spec;
  spec.start_year = 2015;
  spec.years = 4;
  spec.seed = 5;
  const auto records = tscp::generate_standin_records(spec);
  const std::vector<std::string> methods = {"scp",   "osscp", "aci",
                                            "agaci", "enbpi", "enbpi-v2"};
  double cov_scp = 0.0, cov_osscp = 0.0, cov_agaci = 0.0;
  std::size_t completed = 0;
  for (const auto& m : methods) {
    const auto r = tscp::run_price_pipeline(records, 0.1, m, 7);
    ++completed;
    if (m == "scp") cov_scp = r.overall_coverage;
    if (m == "osscp") cov_osscp = r.overall_coverage;
    if (m == "agaci") cov_agaci = r.overall_coverage;
  }
  const bool ok = completed == methods.size() && cov_agaci >= 0.85 &&
                  cov_agaci <= 1.0 && cov_osscp >= cov_scp;
  report(ok, 8,
         fmt("price pipeline on stand-in data: %zu/6 methods completed; "
             "aggregated-expert coverage %.4f in [0.85,1]; online %.4f >= "
             "offline %.4f (%.0fs)",
             completed, cov_agaci, cov_osscp, cov_scp, run_seconds(t0)));
}

// ---------------------------------------------------------------------------
// 9. Determinism: the same benchmark configuration run twice produces a
//    byte-identical results CSV.
void criterion_9() {
  const auto t0 = std::chrono::steady_clock::now();
  tscp::ExperimentConfig cfg;
  cfg.methods = {"scp", "osscp", "aci:0.05", "agaci", "enbpi", "enbpi-v2"};
  cfg.noise = {{0.9, 0.9, 10.0}};
  cfg.t0 = 100;
  cfg.t1 = 50;
  cfg.repetitions = 3;
  cfg.seed = 314159;
  cfg.model.tree_count = 30;
  std::string first, second;
  for (int pass = 0; pass < 2; ++pass) {
    const auto res = tscp::run_benchmark(cfg);
    std::ostringstream os;
    tscp::write_results_csv(res, os);
    std::ostringstream agg_os;
    tscp::write_aggregates_csv(res, agg_os);
    (pass == 0 ? first : second) = os.str() + agg_os.str();
  }
  report(!first.empty() && first == second, 9,
         fmt("benchmark rerun with the same seed: results and aggregates "
             "CSVs byte-identical (%zu bytes) (%.1fs)",
             first.size(), run_seconds(t0)));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criteria_6_and_7();
  criterion_8();
  criterion_9();
  std::printf("%d of 9 criteria failed (%.0fs total)\n", g_failures,
              run_seconds(t0));
  return g_failures;
}

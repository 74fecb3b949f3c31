// Command-line front end: synthetic benchmarks, learning-rate sweeps, the
// stationary-chain diagnostics, the electricity-price pipeline, and SVG plots.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tscp/agaci.hpp"
#include "tscp/datagen.hpp"
#include "tscp/harness.hpp"
#include "tscp/methods.hpp"
#include "tscp/models.hpp"
#include "tscp/price.hpp"
#include "tscp/theorylab.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) out.push_back(std::stod(tok));
  return out;
}

tscp::RegressorSpec make_model(const std::string& name, std::size_t trees,
                               std::size_t min_leaf, std::size_t max_features,
                               double ridge_penalty) {
  tscp::RegressorSpec spec;
  if (name == "ridge") {
    spec.kind = tscp::RegressorKind::ridge;
  } else if (name == "trees") {
    spec.kind = tscp::RegressorKind::bagged_trees;
  } else {
    throw std::runtime_error("unknown model: " + name);
  }
  spec.tree_count = trees;
  spec.min_leaf = min_leaf;
  spec.max_features = max_features;
  spec.ridge_penalty = ridge_penalty;
  return spec;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  return os;
}

void print_run_summary(const tscp::RunResult& res,
                       const tscp::SeriesDataset& data) {
  const double cap = tscp::max_abs_test_residual(res, data);
  const auto imputed = tscp::imputed_lengths(res, cap);
  double mean_imp = 0.0;
  for (double v : imputed) mean_imp += v;
  mean_imp /= static_cast<double>(imputed.size());
  std::printf("coverage            %.6g\n", tscp::coverage(res));
  std::printf("median_length       %.6g\n", tscp::median_length(res));
  std::printf("avg_length_imputed  %.6g\n", mean_imp);
  std::printf("pct_infinite        %.6g\n", tscp::infinite_rate(res));
}

int cmd_simulate(std::size_t t0, std::size_t t1, std::size_t features,
                 double phi, double theta, double variance, double alpha,
                 const std::string& method_name, const std::string& model_name,
                 std::size_t trees, std::size_t min_leaf,
                 std::size_t max_features, double ridge_penalty,
                 std::uint64_t seed, const std::string& out_path) {
  const tscp::MethodSpec method = tscp::parse_method(method_name);
  const auto model =
      make_model(model_name, trees, min_leaf, max_features, ridge_penalty);
  tscp::NoiseSpec noise;
  noise.phi = phi;
  noise.theta = theta;
  noise.target_variance = variance;
  const auto data = tscp::generate_dataset(features, t0, t1, noise,
                                           tscp::mix_seed(seed, 0));
  const auto res = tscp::detail::dispatch_method(
      method, model, data, alpha, tscp::mix_seed(seed, 1),
      tscp::mix_seed(seed, 2));
  std::printf("method              %s\n", method.label.c_str());
  print_run_summary(res, data);
  if (!out_path.empty()) {
    auto os = open_out(out_path);
    os << "index,observed,lower,upper\n";
    for (std::size_t j = 0; j < res.intervals.size(); ++j) {
      os << j << ',' << tscp::fmt_g(data.test_target(j)) << ','
         << tscp::fmt_g(res.intervals[j].lower) << ','
         << tscp::fmt_g(res.intervals[j].upper) << '\n';
    }
    std::printf("wrote %s (%zu rows)\n", out_path.c_str(),
                res.intervals.size());
  }
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& methods,
              const std::string& phis, double variance, std::size_t t0,
              std::size_t t1, std::size_t reps, double alpha,
              std::uint64_t seed, const std::string& model_name,
              std::size_t trees, std::size_t min_leaf, std::size_t max_features,
              double ridge_penalty, const std::string& outdir, bool quiet) {
  tscp::ExperimentConfig cfg;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw std::runtime_error("cannot open " + config_path);
    cfg = tscp::parse_experiment_config(is);
  }
  if (!methods.empty()) cfg.methods = split_list(methods);
  if (!phis.empty()) {
    cfg.noise.clear();
    for (double p : split_doubles(phis)) cfg.noise.push_back({p, p, variance});
  }
  if (t0 != 0) cfg.t0 = t0;
  if (t1 != 0) cfg.t1 = t1;
  if (reps != 0) cfg.repetitions = reps;
  if (alpha > 0.0) cfg.alpha = alpha;
  cfg.seed = seed;
  if (!model_name.empty()) {
    cfg.model = make_model(model_name, trees, min_leaf, max_features,
                           ridge_penalty);
  }
  if (!outdir.empty()) cfg.output_dir = outdir;
  cfg.validate();

  const auto result = tscp::run_benchmark(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  const auto results_path =
      std::filesystem::path(cfg.output_dir) / "results.csv";
  const auto agg_path = std::filesystem::path(cfg.output_dir) / "aggregates.csv";
  {
    auto os = open_out(results_path);
    tscp::write_results_csv(result, os);
  }
  {
    auto os = open_out(agg_path);
    tscp::write_aggregates_csv(result, os);
  }
  if (!quiet) {
    std::printf("%-10s %-6s %10s %14s %12s\n", "method", "phi", "coverage",
                "median_length", "pct_infinite");
    for (const auto& a : result.aggregates) {
      std::printf("%-10s %-6g %7.4f+-%.4f %9.3f+-%.3f %7.4f+-%.4f\n",
                  a.method.c_str(), a.phi, a.coverage_mean, a.coverage_se,
                  a.median_length_mean, a.median_length_se,
                  a.pct_infinite_mean, a.pct_infinite_se);
    }
  }
  std::printf("wrote %s and %s\n", results_path.string().c_str(),
              agg_path.string().c_str());
  return 0;
}

tscp::ChainConfig make_chain(int alpha_num, int alpha_den, double gamma,
                             std::size_t steps, std::size_t burn_in,
                             std::uint64_t seed, double cap, double clip,
                             double phi) {
  tscp::ChainConfig cfg;
  cfg.alpha_num = alpha_num;
  cfg.alpha_den = alpha_den;
  cfg.gamma = gamma;
  cfg.steps = steps;
  cfg.burn_in = burn_in;
  cfg.seed = seed;
  cfg.quantile_fn = tscp::folded_gaussian_quantile(1.0, cap);
  cfg.clip = clip;
  if (phi >= 0.0) cfg.phi = phi;
  cfg.validate();
  return cfg;
}

int cmd_gamma_sweep(int alpha_num, int alpha_den, const std::string& gammas_arg,
                    double gamma_max, std::size_t gamma_count,
                    const std::string& phis_arg, std::size_t reps,
                    std::size_t steps, std::size_t burn_in, std::uint64_t seed,
                    double cap, double clip, const std::string& out_path) {
  std::vector<double> gammas;
  if (!gammas_arg.empty()) {
    gammas = split_doubles(gammas_arg);
  } else {
    for (std::size_t i = 0; i < gamma_count; ++i) {
      gammas.push_back(gamma_max * static_cast<double>(i) /
                       static_cast<double>(gamma_count - 1));
    }
  }
  const auto phis = split_doubles(phis_arg);
  const auto base = make_chain(alpha_num, alpha_den, gammas.front(), steps,
                               burn_in, seed, cap, clip, -1.0);
  const auto result = tscp::sweep_gamma(base, gammas, phis, reps);
  auto os = open_out(out_path);
  tscp::write_gamma_sweep_csv(result, os);
  std::printf("%-8s %s\n", "phi", "gamma_star");
  for (const auto& [phi, gstar] : result.gamma_star) {
    std::printf("%-8g %g\n", phi, gstar);
  }
  std::printf("wrote %s (%zu rows)\n", out_path.c_str(), result.rows.size());
  return 0;
}

int cmd_theory(int alpha_num, int alpha_den, double gamma, std::size_t steps,
               std::size_t burn_in, std::uint64_t seed, double cap, double clip,
               double phi) {
  const auto cfg =
      make_chain(alpha_num, alpha_den, gamma, steps, burn_in, seed, cap, clip,
                 phi);
  const double alpha = cfg.alpha();
  const double L0 = 2.0 * cfg.quantile_fn(1.0 - alpha);
  std::vector<double> alphas;
  if (cfg.phi) {
    alphas = tscp::chain_run_ar1(cfg, cfg.steps).alphas;
  } else {
    alphas = tscp::chain_run_exchangeable(cfg);
  }
  const double mean_len = tscp::estimate_expected_length(
      alphas, cfg, tscp::LengthMode::mean_clipped);
  const double med_len =
      tscp::estimate_expected_length(alphas, cfg, tscp::LengthMode::median);
  const auto moments = tscp::moment_checks(alphas, cfg);
  const double taylor = tscp::taylor_prediction(cfg.quantile_fn, alpha, gamma);
  std::printf("alpha               %d/%d = %.6g\n", alpha_num, alpha_den,
              alpha);
  std::printf("gamma               %.6g\n", gamma);
  if (cfg.phi) std::printf("phi                 %.6g\n", *cfg.phi);
  std::printf("L0 = 2 Q(1-alpha)   %.10g\n", L0);
  std::printf("mean length         %.10g\n", mean_len);
  std::printf("mean/L0             %.10g\n", mean_len / L0);
  std::printf("median length       %.10g\n", med_len);
  std::printf("median/L0           %.10g\n", med_len / L0);
  std::printf("curvature expansion %.10g (ratio %.10g)\n", taylor,
              taylor / L0);
  std::printf("mean(alpha_t-alpha) %.6g\n", moments.m1);
  std::printf("second moment       %.6g (predicted %.6g)\n", moments.m2,
              moments.m2_predicted);
  return 0;
}

int cmd_price(const std::string& input, int standin_years, int standin_start,
              std::uint64_t standin_seed, const std::string& emit_standin,
              const std::string& methods_arg, double alpha, std::uint64_t seed,
              const std::string& outdir) {
  std::vector<tscp::PriceRecord> records;
  if (!input.empty()) {
    std::ifstream is(input);
    if (!is) throw std::runtime_error("cannot open " + input);
    records = tscp::parse_price_csv(is);
  } else {
    tscp::StandinSpec spec;
    spec.start_year = standin_start;
    spec.years = standin_years;
    spec.seed = standin_seed;
    records = tscp::generate_standin_records(spec);
    std::printf("generated stand-in data: %zu hourly rows from %d-01-01\n",
                records.size(), standin_start);
  }
  if (!emit_standin.empty()) {
    auto os = open_out(emit_standin);
    tscp::write_price_csv(records, os);
    std::printf("wrote %s\n", emit_standin.c_str());
    if (methods_arg == "none") return 0;
  }
  const auto methods = split_list(methods_arg);
  std::filesystem::create_directories(outdir);
  std::vector<tscp::PricePipelineResult> results;
  for (const auto& m : methods) {
    results.push_back(tscp::run_price_pipeline(records, alpha, m, seed));
    const auto& r = results.back();
    std::printf("%-10s coverage %.4f  median_length %.4f\n", r.method.c_str(),
                r.overall_coverage, r.overall_median_length);
    for (int h = 0; h < 24; ++h) {
      char name[64];
      std::snprintf(name, sizeof(name), "intervals_%s_h%02d.csv",
                    r.method.c_str(), h);
      auto os = open_out(std::filesystem::path(outdir) / name);
      tscp::write_hour_intervals_csv(r, h, os);
    }
  }
  const auto results_path =
      std::filesystem::path(outdir) / "price_results.csv";
  auto os = open_out(results_path);
  tscp::write_price_results_csv(results, os);
  std::printf("wrote %s and %zu interval files\n",
              results_path.string().c_str(), methods.size() * 24);
  return 0;
}

int cmd_plot(const std::string& kind_name, const std::string& input,
             const std::string& out_path, double alpha) {
  tscp::PlotKind kind;
  if (kind_name == "validity-efficiency") {
    kind = tscp::PlotKind::validity_efficiency;
  } else if (kind_name == "gamma-sweep") {
    kind = tscp::PlotKind::gamma_sweep;
  } else if (kind_name == "series") {
    kind = tscp::PlotKind::series_with_intervals;
  } else {
    throw std::runtime_error("unknown plot kind: " + kind_name);
  }
  std::ifstream is(input);
  if (!is) throw std::runtime_error("cannot open " + input);
  const auto table = tscp::read_csv(is);
  auto os = open_out(out_path);
  tscp::emit_plots(table, kind, os, alpha);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Adaptive conformal prediction for time series: benchmarks, "
      "learning-rate sweeps, chain diagnostics, and the price pipeline"};
  app.require_subcommand(1);

  // simulate
  std::size_t t0 = 200, t1 = 100, features = 6;
  double phi = 0.1, theta = 0.1, variance = 10.0, alpha = 0.1;
  std::string method_name = "aci:0.05", model_name = "ridge";
  std::size_t trees = 100, min_leaf = 1, max_features = 0;
  double ridge_penalty = 0.0;
  std::uint64_t seed = 1;
  std::string out_path;
  auto* sim = app.add_subcommand(
      "simulate", "Generate one synthetic series and run a single method");
  sim->add_option("--t0", t0, "training + calibration size");
  sim->add_option("--t1", t1, "test size");
  sim->add_option("--features", features, "feature count (>= 6)");
  sim->add_option("--phi", phi, "ARMA AR coefficient");
  sim->add_option("--theta", theta, "ARMA MA coefficient");
  sim->add_option("--variance", variance, "noise asymptotic variance");
  sim->add_option("--alpha", alpha, "target miscoverage level");
  sim->add_option("--method", method_name,
                  "scp|osscp|aci[:gamma]|agaci|agaci-ewa|naive|enbpi|enbpi-v2");
  sim->add_option("--model", model_name, "ridge|trees");
  sim->add_option("--trees", trees, "ensemble size for trees");
  sim->add_option("--min-leaf", min_leaf, "minimum leaf size for trees");
  sim->add_option("--max-features", max_features,
                  "features tried per split (0 = all)");
  sim->add_option("--ridge-penalty", ridge_penalty, "ridge penalty");
  sim->add_option("--seed", seed, "seed");
  sim->add_option("--out", out_path, "interval CSV (index,observed,lower,upper)");

  // bench
  std::string config_path, methods_arg, phis_arg, outdir = "out";
  std::size_t b_t0 = 0, b_t1 = 0, reps = 0;
  double b_alpha = 0.0, b_variance = 10.0;
  std::string b_model;
  bool quiet = false;
  auto* bench = app.add_subcommand(
      "bench", "Run the repeated-benchmark grid and write results CSVs");
  bench->add_option("--config", config_path, "key=value config file");
  bench->add_option("--methods", methods_arg, "comma-separated method list");
  bench->add_option("--phis", phis_arg,
                    "comma-separated phi=theta noise cells");
  bench->add_option("--variance", b_variance, "noise variance for --phis");
  bench->add_option("--t0", b_t0, "training + calibration size");
  bench->add_option("--t1", b_t1, "test size");
  bench->add_option("--reps", reps, "repetitions per cell");
  bench->add_option("--alpha", b_alpha, "target miscoverage level");
  bench->add_option("--seed", seed, "seed base");
  bench->add_option("--model", b_model, "ridge|trees");
  bench->add_option("--trees", trees, "ensemble size for trees");
  bench->add_option("--min-leaf", min_leaf, "minimum leaf size for trees");
  bench->add_option("--max-features", max_features,
                    "features tried per split (0 = all)");
  bench->add_option("--ridge-penalty", ridge_penalty, "ridge penalty");
  bench->add_option("--outdir", outdir, "output directory");
  bench->add_flag("--quiet", quiet, "suppress the aggregate table");

  // gamma-sweep
  int alpha_num = 1, alpha_den = 10;
  std::string gammas_arg, sweep_phis = "0,0.6,0.85,0.95,0.99,0.997";
  double gamma_max = 0.2;
  std::size_t gamma_count = 40, sweep_reps = 5;
  std::size_t steps = 100000, burn_in = 10000;
  double cap = 3.0, clip = 3.0;
  std::string sweep_out = "gamma_sweep.csv";
  std::uint64_t sweep_seed = 2026;
  auto* sweep = app.add_subcommand(
      "gamma-sweep",
      "Sweep the learning rate against AR dependence and report gamma*");
  sweep->add_option("--alpha-num", alpha_num, "target level numerator");
  sweep->add_option("--alpha-den", alpha_den, "target level denominator");
  sweep->add_option("--gammas", gammas_arg, "explicit gamma grid");
  sweep->add_option("--gamma-max", gamma_max, "top of the even gamma grid");
  sweep->add_option("--gamma-count", gamma_count, "points in the even grid");
  sweep->add_option("--phis", sweep_phis, "AR coefficients");
  sweep->add_option("--reps", sweep_reps, "repetitions per cell");
  sweep->add_option("--steps", steps, "chain steps per run");
  sweep->add_option("--burn-in", burn_in, "discarded initial steps");
  sweep->add_option("--seed", sweep_seed, "seed base");
  sweep->add_option("--cap", cap, "score quantile cap");
  sweep->add_option("--clip", clip, "AR residual clipping range");
  sweep->add_option("--out", sweep_out, "output CSV");

  // theory
  double th_gamma = 0.01, th_phi = -1.0, th_cap = 5.0, th_clip = 5.0;
  std::size_t th_steps = 1000000, th_burn = 10000;
  std::uint64_t th_seed = 42;
  auto* theory = app.add_subcommand(
      "theory",
      "Run one stationary chain and print length and moment diagnostics");
  theory->add_option("--alpha-num", alpha_num, "target level numerator");
  theory->add_option("--alpha-den", alpha_den, "target level denominator");
  theory->add_option("--gamma", th_gamma, "learning rate");
  theory->add_option("--steps", th_steps, "chain steps");
  theory->add_option("--burn-in", th_burn, "discarded initial steps");
  theory->add_option("--seed", th_seed, "seed");
  theory->add_option("--cap", th_cap, "score quantile cap");
  theory->add_option("--clip", th_clip, "AR residual clipping range");
  theory->add_option("--phi", th_phi,
                     "AR coefficient (omit for the exchangeable chain)");

  // price
  std::string price_input, emit_standin;
  int standin_years = 5, standin_start = 2015;
  std::uint64_t standin_seed = 7, price_seed = 1;
  std::string price_methods = "scp,osscp,aci,agaci,enbpi,enbpi-v2";
  double price_alpha = 0.1;
  std::string price_outdir = "price_out";
  auto* price = app.add_subcommand(
      "price",
      "Hourly day-ahead price pipeline on a CSV or the stand-in generator");
  price->add_option("--input", price_input,
                    "hourly price CSV (omit to use the stand-in generator)");
  price->add_option("--standin-years", standin_years,
                    "years of stand-in data");
  price->add_option("--standin-start", standin_start,
                    "first stand-in year");
  price->add_option("--standin-seed", standin_seed, "stand-in seed");
  price->add_option("--emit-standin", emit_standin,
                    "write the stand-in CSV here ('--methods none' to skip "
                    "the pipeline)");
  price->add_option("--methods", price_methods, "comma-separated method list");
  price->add_option("--alpha", price_alpha, "target miscoverage level");
  price->add_option("--seed", price_seed, "pipeline seed");
  price->add_option("--outdir", price_outdir, "output directory");

  // plot
  std::string plot_kind = "validity-efficiency", plot_input,
              plot_out = "plot.svg";
  double plot_alpha = 0.1;
  auto* plot = app.add_subcommand("plot", "Render a results CSV as an SVG");
  plot->add_option("--kind", plot_kind,
                   "validity-efficiency|gamma-sweep|series");
  plot->add_option("--input", plot_input, "input CSV")->required();
  plot->add_option("--out", plot_out, "output SVG");
  plot->add_option("--alpha", plot_alpha, "target level for the coverage line");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(t0, t1, features, phi, theta, variance, alpha,
                          method_name, model_name, trees, min_leaf,
                          max_features, ridge_penalty, seed, out_path);
    }
    if (bench->parsed()) {
      return cmd_bench(config_path, methods_arg, phis_arg, b_variance, b_t0,
                       b_t1, reps, b_alpha, seed, b_model, trees, min_leaf,
                       max_features, ridge_penalty, outdir, quiet);
    }
    if (sweep->parsed()) {
      return cmd_gamma_sweep(alpha_num, alpha_den, gammas_arg, gamma_max,
                             gamma_count, sweep_phis, sweep_reps, steps,
                             burn_in, sweep_seed, cap, clip, sweep_out);
    }
    if (theory->parsed()) {
      return cmd_theory(alpha_num, alpha_den, th_gamma, th_steps, th_burn,
                        th_seed, th_cap, th_clip, th_phi);
    }
    if (price->parsed()) {
      return cmd_price(price_input, standin_years, standin_start, standin_seed,
                       emit_standin, price_methods, price_alpha, price_seed,
                       price_outdir);
    }
    if (plot->parsed()) {
      return cmd_plot(plot_kind, plot_input, plot_out, plot_alpha);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

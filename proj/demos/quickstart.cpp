// Minimal tour of the library: simulate one dependent series, run four
// interval methods on it, and compare coverage and length.
#include <cstdio>

#include "tscp/agaci.hpp"
#include "tscp/datagen.hpp"
#include "tscp/methods.hpp"

int main() {
  using namespace tscp;

  // A Friedman regression surface with ARMA(1,1) noise: the features are
  // exchangeable but the errors are strongly dependent, which is exactly the
  // regime where offline split conformal prediction starts losing coverage.
  NoiseSpec noise;
  noise.phi = 0.9;
  noise.theta = 0.9;
  noise.target_variance = 10.0;
  const auto data = generate_dataset(/*n_features=*/6, /*t0=*/200,
                                     /*t1=*/100, noise, /*seed=*/2);

  RegressorSpec model;  // ridge regression; swap to bagged_trees if desired
  model.kind = RegressorKind::ridge;

  const double alpha = 0.1;

  // All online methods share one model/score stream: per test step, refit on
  // the trailing window and recompute calibration scores. The offline method
  // reuses the same stream's step-0 state.
  const auto stream = compute_online_stream(model, data, SplitPolicy{},
                                            /*refit_every=*/1, /*seed=*/7);

  struct Row {
    const char* name;
    RunResult res;
  };
  const Row rows[] = {
      {"scp", scp_from_stream(stream, data, alpha)},
      {"osscp", osscp_from_stream(stream, data, alpha)},
      {"aci(0.05)", aci_from_stream(stream, data, alpha, 0.05)},
      {"agaci", agaci_from_stream(stream, data, alpha, default_gamma_grid())},
  };

  std::printf("%-10s %10s %15s %14s\n", "method", "coverage", "median_length",
              "pct_infinite");
  for (const auto& row : rows) {
    std::printf("%-10s %10.3f %15.3f %14.3f\n", row.name, coverage(row.res),
                median_length(row.res), infinite_rate(row.res));
  }
  std::printf(
      "\nTarget coverage is %.2f. The offline row typically undercovers on\n"
      "dependent noise; the adaptive rows recover it, at some length cost.\n",
      1.0 - alpha);
  return 0;
}

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "tscp/agaci.hpp"
#include "tscp/datagen.hpp"
#include "tscp/methods.hpp"

namespace tscp {

// ---------------------------------------------------------------------------
// Parallel execution: repetitions are independent jobs; outputs are collected
// into index-addressed slots so results never depend on the worker count.
// ---------------------------------------------------------------------------

template <typename Fn>
inline void parallel_for(std::size_t n, Fn&& fn) {
  unsigned workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = static_cast<unsigned>(
      std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Method registry
// ---------------------------------------------------------------------------

enum class MethodKind { scp, osscp, aci, agaci, agaci_ewa, naive, enbpi, enbpi_v2 };

/// A parsed method token. `aci` accepts a learning-rate suffix (`aci:0.05`);
/// the bare token defaults to gamma = 0.05.
struct MethodSpec {
  MethodKind kind = MethodKind::scp;
  double gamma = 0.05;
  std::string label;
};

inline MethodSpec parse_method(const std::string& name) {
  MethodSpec m;
  m.label = name;
  if (name == "scp") {
    m.kind = MethodKind::scp;
  } else if (name == "osscp") {
    m.kind = MethodKind::osscp;
  } else if (name == "aci" || name.rfind("aci:", 0) == 0) {
    m.kind = MethodKind::aci;
    if (name.size() > 4) {
      try {
        std::size_t used = 0;
        m.gamma = std::stod(name.substr(4), &used);
        if (used != name.size() - 4 || m.gamma < 0.0 ||
            !std::isfinite(m.gamma)) {
          throw std::invalid_argument(name);
        }
      } catch (const std::exception&) {
        throw std::runtime_error("unknown method: " + name);
      }
    }
  } else if (name == "agaci") {
    m.kind = MethodKind::agaci;
  } else if (name == "agaci-ewa") {
    m.kind = MethodKind::agaci_ewa;
  } else if (name == "naive") {
    m.kind = MethodKind::naive;
  } else if (name == "enbpi") {
    m.kind = MethodKind::enbpi;
  } else if (name == "enbpi-v2") {
    m.kind = MethodKind::enbpi_v2;
  } else {
    throw std::runtime_error("unknown method: " + name);
  }
  return m;
}

inline bool method_uses_stream(MethodKind k) {
  return k != MethodKind::enbpi && k != MethodKind::enbpi_v2;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct NoiseCell {
  double phi = 0.0, theta = 0.0, variance = 10.0;
};

struct ExperimentConfig {
  std::vector<std::string> methods = {"scp",   "osscp", "aci",
                                      "agaci", "enbpi", "enbpi-v2"};
  std::vector<NoiseCell> noise = {{0.1, 0.1, 10.0},
                                  {0.8, 0.8, 10.0},
                                  {0.9, 0.9, 10.0},
                                  {0.95, 0.95, 10.0},
                                  {0.99, 0.99, 10.0}};
  std::size_t t0 = 200;
  std::size_t t1 = 100;
  std::size_t repetitions = 100;
  std::uint64_t seed = 1;
  double alpha = 0.1;
  std::string output_dir = ".";
  RegressorSpec model = [] {
    RegressorSpec s;
    s.kind = RegressorKind::bagged_trees;
    return s;
  }();

  void validate() const {
    if (repetitions < 1) throw std::invalid_argument("repetitions < 1");
    if (methods.empty()) throw std::invalid_argument("no methods");
    if (noise.empty()) throw std::invalid_argument("empty noise grid");
    if (alpha <= 0.0 || alpha >= 1.0) {
      throw std::invalid_argument("alpha outside (0,1)");
    }
    for (const auto& name : methods) parse_method(name);  // unknown -> throw
  }
};

// ---------------------------------------------------------------------------
// Plain-text configuration files: `key = value` lines, `#` comments, and an
// explicit config_version guard. Schema documented in docs/config.md.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(std::istream& is) {
  ExperimentConfig cfg;
  bool saw_version = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') continue;  // section headers
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    try {
      if (key == "config_version") {
        if (std::stoi(value) != 1) {
          throw std::runtime_error("unsupported config_version: " + value);
        }
        saw_version = true;
      } else if (key == "methods") {
        cfg.methods.clear();
        for (const auto& tok : detail::split(value, ',')) {
          const std::string name = detail::trim(tok);
          if (!name.empty()) cfg.methods.push_back(name);
        }
      } else if (key == "noise") {
        cfg.noise.clear();
        for (const auto& cell : detail::split(value, ';')) {
          const std::string c = detail::trim(cell);
          if (c.empty()) continue;
          const auto parts = detail::split(c, ',');
          if (parts.size() != 3) {
            throw std::runtime_error("noise cell needs phi,theta,variance");
          }
          cfg.noise.push_back(NoiseCell{std::stod(parts[0]),
                                        std::stod(parts[1]),
                                        std::stod(parts[2])});
        }
      } else if (key == "t0") {
        cfg.t0 = std::stoul(value);
      } else if (key == "t1") {
        cfg.t1 = std::stoul(value);
      } else if (key == "repetitions") {
        cfg.repetitions = std::stoul(value);
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else if (key == "alpha") {
        cfg.alpha = std::stod(value);
      } else if (key == "output_dir") {
        cfg.output_dir = value;
      } else if (key == "model") {
        if (value == "ridge") {
          cfg.model.kind = RegressorKind::ridge;
        } else if (value == "trees") {
          cfg.model.kind = RegressorKind::bagged_trees;
        } else {
          throw std::runtime_error("unknown model: " + value);
        }
      } else if (key == "tree_count") {
        cfg.model.tree_count = std::stoul(value);
      } else if (key == "min_leaf") {
        cfg.model.min_leaf = std::stoul(value);
      } else if (key == "max_features") {
        cfg.model.max_features = std::stoul(value);
      } else if (key == "ridge_penalty") {
        cfg.model.ridge_penalty = std::stod(value);
      } else {
        throw std::runtime_error("unknown config key: " + key);
      }
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": bad value for " + key);
    }
  }
  if (!saw_version) throw std::runtime_error("missing config_version");
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

struct BenchRow {
  std::string method;
  double phi = 0.0, theta = 0.0, variance = 0.0;
  std::size_t rep = 0;
  double coverage = 0.0, median_length = 0.0, avg_length_imputed = 0.0,
         pct_infinite = 0.0;
};

struct BenchAggregate {
  std::string method;
  double phi = 0.0, theta = 0.0, variance = 0.0;
  std::size_t n = 0;
  double coverage_mean = 0.0, coverage_se = 0.0;
  double median_length_mean = 0.0, median_length_se = 0.0;
  double avg_length_imputed_mean = 0.0, avg_length_imputed_se = 0.0;
  double pct_infinite_mean = 0.0, pct_infinite_se = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchRow> rows;
  std::vector<BenchAggregate> aggregates;
};

namespace detail {

struct RunMetrics {
  double coverage = 0.0, median_length = 0.0, avg_length_imputed = 0.0,
         pct_infinite = 0.0;
};

inline RunMetrics run_metrics(const RunResult& res, const SeriesDataset& data) {
  RunMetrics m;
  m.coverage = coverage(res);
  m.median_length = median_length(res);
  const auto lengths = imputed_lengths(res, max_abs_test_residual(res, data));
  double sum = 0.0;
  for (double l : lengths) sum += l;
  m.avg_length_imputed = sum / static_cast<double>(lengths.size());
  m.pct_infinite = infinite_rate(res);
  return m;
}

inline std::pair<double, double> mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  if (v.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace detail

/// Runs every configured method on every noise cell for the configured number
/// of repetitions. Repetitions are independent jobs with derived seeds, so the
/// output is byte-identical however many workers execute them. Methods that
/// share the sliding-window protocol reuse one stream of model fits per job.
inline BenchmarkResult run_benchmark(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<MethodSpec> methods;
  methods.reserve(cfg.methods.size());
  for (const auto& name : cfg.methods) methods.push_back(parse_method(name));
  const bool need_stream =
      std::any_of(methods.begin(), methods.end(),
                  [](const MethodSpec& m) { return method_uses_stream(m.kind); });

  const std::size_t n_jobs = cfg.noise.size() * cfg.repetitions;
  std::vector<std::vector<detail::RunMetrics>> per_job(n_jobs);

  parallel_for(n_jobs, [&](std::size_t job) {
    const std::size_t cell_idx = job / cfg.repetitions;
    const NoiseCell& cell = cfg.noise[cell_idx];
    const std::uint64_t job_seed = mix_seed(cfg.seed, job);

    NoiseSpec noise;
    noise.phi = cell.phi;
    noise.theta = cell.theta;
    noise.target_variance = cell.variance;
    const SeriesDataset data = generate_dataset(
        6, cfg.t0, cfg.t1, noise, mix_seed(job_seed, 0));

    OnlineStream stream;
    if (need_stream) {
      stream = compute_online_stream(cfg.model, data, SplitPolicy{}, 1,
                                     mix_seed(job_seed, 1));
    }

    std::vector<detail::RunMetrics> metrics;
    metrics.reserve(methods.size());
    for (const auto& m : methods) {
      RunResult res;
      switch (m.kind) {
        case MethodKind::scp:
          res = scp_from_stream(stream, data, cfg.alpha);
          break;
        case MethodKind::osscp:
          res = osscp_from_stream(stream, data, cfg.alpha);
          break;
        case MethodKind::aci:
          res = aci_from_stream(stream, data, cfg.alpha, m.gamma);
          break;
        case MethodKind::agaci:
          res = agaci_from_stream(stream, data, cfg.alpha,
                                  default_gamma_grid());
          break;
        case MethodKind::agaci_ewa:
          res = agaci_from_stream(stream, data, cfg.alpha, default_gamma_grid(),
                                  AggregationRule::ewa);
          break;
        case MethodKind::naive:
          res = naive_aci_from_stream(stream, data, cfg.alpha,
                                      default_gamma_grid());
          break;
        case MethodKind::enbpi:
        case MethodKind::enbpi_v2: {
          EnbpiConfig ec;
          ec.v2 = m.kind == MethodKind::enbpi_v2;
          res = enbpi(cfg.model, data, cfg.alpha, ec, mix_seed(job_seed, 2));
          break;
        }
      }
      metrics.push_back(detail::run_metrics(res, data));
    }
    per_job[job] = std::move(metrics);
  });

  BenchmarkResult out;
  out.rows.reserve(n_jobs * methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t cell_idx = 0; cell_idx < cfg.noise.size(); ++cell_idx) {
      const NoiseCell& cell = cfg.noise[cell_idx];
      std::vector<double> cov, med, avg, inf;
      for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
        const auto& m = per_job[cell_idx * cfg.repetitions + rep][mi];
        BenchRow row;
        row.method = methods[mi].label;
        row.phi = cell.phi;
        row.theta = cell.theta;
        row.variance = cell.variance;
        row.rep = rep;
        row.coverage = m.coverage;
        row.median_length = m.median_length;
        row.avg_length_imputed = m.avg_length_imputed;
        row.pct_infinite = m.pct_infinite;
        out.rows.push_back(std::move(row));
        cov.push_back(m.coverage);
        med.push_back(m.median_length);
        avg.push_back(m.avg_length_imputed);
        inf.push_back(m.pct_infinite);
      }
      BenchAggregate agg;
      agg.method = methods[mi].label;
      agg.phi = cell.phi;
      agg.theta = cell.theta;
      agg.variance = cell.variance;
      agg.n = cfg.repetitions;
      std::tie(agg.coverage_mean, agg.coverage_se) = detail::mean_se(cov);
      std::tie(agg.median_length_mean, agg.median_length_se) =
          detail::mean_se(med);
      std::tie(agg.avg_length_imputed_mean, agg.avg_length_imputed_se) =
          detail::mean_se(avg);
      std::tie(agg.pct_infinite_mean, agg.pct_infinite_se) =
          detail::mean_se(inf);
      out.aggregates.push_back(std::move(agg));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV emission (deterministic layout; %.10g everywhere)
// ---------------------------------------------------------------------------

inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline void write_results_csv(const BenchmarkResult& result, std::ostream& os) {
  os << "method,phi,theta,variance,rep,coverage,median_length,"
        "avg_length_imputed,pct_infinite\n";
  for (const auto& r : result.rows) {
    os << r.method << ',' << fmt_g(r.phi) << ',' << fmt_g(r.theta) << ','
       << fmt_g(r.variance) << ',' << r.rep << ',' << fmt_g(r.coverage) << ','
       << fmt_g(r.median_length) << ',' << fmt_g(r.avg_length_imputed) << ','
       << fmt_g(r.pct_infinite) << '\n';
  }
}

inline void write_aggregates_csv(const BenchmarkResult& result,
                                 std::ostream& os) {
  os << "method,phi,theta,variance,n,coverage_mean,coverage_se,"
        "median_length_mean,median_length_se,avg_length_imputed_mean,"
        "avg_length_imputed_se,pct_infinite_mean,pct_infinite_se\n";
  for (const auto& a : result.aggregates) {
    os << a.method << ',' << fmt_g(a.phi) << ',' << fmt_g(a.theta) << ','
       << fmt_g(a.variance) << ',' << a.n << ',' << fmt_g(a.coverage_mean)
       << ',' << fmt_g(a.coverage_se) << ',' << fmt_g(a.median_length_mean)
       << ',' << fmt_g(a.median_length_se) << ','
       << fmt_g(a.avg_length_imputed_mean) << ','
       << fmt_g(a.avg_length_imputed_se) << ',' << fmt_g(a.pct_infinite_mean)
       << ',' << fmt_g(a.pct_infinite_se) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Generic CSV ingestion for the plot commands
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw std::runtime_error("missing column: " + name);
  }

  double num(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    return std::stod(s);
  }
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty csv");
  for (auto& c : detail::split(detail::trim(line), ',')) {
    t.columns.push_back(detail::trim(c));
  }
  while (std::getline(is, line)) {
    const std::string row = detail::trim(line);
    if (row.empty()) continue;
    auto cells = detail::split(row, ',');
    if (cells.size() != t.columns.size()) {
      throw std::runtime_error("csv row width mismatch");
    }
    for (auto& c : cells) c = detail::trim(c);
    t.rows.push_back(std::move(cells));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Plot emission: deterministic static SVG files, no interactive output.
// ---------------------------------------------------------------------------

enum class PlotKind { validity_efficiency, gamma_sweep, series_with_intervals };

namespace detail {

inline const char* plot_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  return palette[i % 8];
}

inline std::string fmt_coord(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Maps data coordinates into a pixel box (y axis flipped).
struct AxisBox {
  double x0, x1, y0, y1;          // data ranges
  double px, py, pw, ph;          // pixel box
  double X(double x) const { return px + (x - x0) / (x1 - x0) * pw; }
  double Y(double y) const { return py + ph - (y - y0) / (y1 - y0) * ph; }
};

inline void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double c = lo;
    lo = c - 0.5;
    hi = c + 0.5;
    return;
  }
  const double pad = 0.06 * (hi - lo);
  lo -= pad;
  hi += pad;
}

inline void svg_axes(std::ostream& os, const AxisBox& b,
                     const std::string& xlabel, const std::string& ylabel) {
  os << "<rect x='" << fmt_coord(b.px) << "' y='" << fmt_coord(b.py)
     << "' width='" << fmt_coord(b.pw) << "' height='" << fmt_coord(b.ph)
     << "' fill='none' stroke='#333'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = b.x0 + (b.x1 - b.x0) * i / 4.0;
    const double fy = b.y0 + (b.y1 - b.y0) * i / 4.0;
    os << "<text x='" << fmt_coord(b.X(fx)) << "' y='"
       << fmt_coord(b.py + b.ph + 16.0)
       << "' font-size='10' text-anchor='middle'>" << fmt_coord(fx)
       << "</text>\n";
    os << "<text x='" << fmt_coord(b.px - 6.0) << "' y='"
       << fmt_coord(b.Y(fy) + 3.0)
       << "' font-size='10' text-anchor='end'>" << fmt_coord(fy)
       << "</text>\n";
  }
  os << "<text x='" << fmt_coord(b.px + b.pw / 2.0) << "' y='"
     << fmt_coord(b.py + b.ph + 32.0)
     << "' font-size='12' text-anchor='middle'>" << xlabel << "</text>\n";
  os << "<text x='" << fmt_coord(b.px - 40.0) << "' y='"
     << fmt_coord(b.py + b.ph / 2.0) << "' font-size='12' text-anchor='middle'"
     << " transform='rotate(-90 " << fmt_coord(b.px - 40.0) << " "
     << fmt_coord(b.py + b.ph / 2.0) << ")'>" << ylabel << "</text>\n";
}

inline void emit_validity_efficiency(const CsvTable& t, std::ostream& os,
                                     double alpha) {
  const std::size_t c_method = t.column("method");
  const std::size_t c_cov = t.column("coverage_mean");
  const std::size_t c_cov_se = t.column("coverage_se");
  const std::size_t c_len = t.column("median_length_mean");
  const std::size_t c_len_se = t.column("median_length_se");

  struct Point {
    std::string method;
    double x, y, xe, ye;
  };
  std::vector<Point> pts;
  std::vector<std::string> order;  // method -> color by first appearance
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Point p;
    p.method = t.rows[r][c_method];
    p.x = t.num(r, c_cov);
    p.y = t.num(r, c_len);
    p.xe = t.num(r, c_cov_se);
    p.ye = t.num(r, c_len_se);
    if (!std::isfinite(p.y)) continue;  // unplottable: infinite median
    if (std::find(order.begin(), order.end(), p.method) == order.end()) {
      order.push_back(p.method);
    }
    pts.push_back(std::move(p));
  }
  if (pts.empty()) throw std::runtime_error("no rows");

  AxisBox b{0, 1, 0, 1, 70, 20, 440, 400};
  b.x0 = 1.0 - alpha;
  b.x1 = 1.0 - alpha;
  b.y0 = b.y1 = pts.front().y;
  for (const auto& p : pts) {
    b.x0 = std::min(b.x0, p.x - p.xe);
    b.x1 = std::max(b.x1, p.x + p.xe);
    b.y0 = std::min(b.y0, p.y - p.ye);
    b.y1 = std::max(b.y1, p.y + p.ye);
  }
  pad_range(b.x0, b.x1);
  pad_range(b.y0, b.y1);

  os << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='480'>\n";
  svg_axes(os, b, "empirical coverage", "median length");
  os << "<line x1='" << fmt_coord(b.X(1.0 - alpha)) << "' y1='"
     << fmt_coord(b.py) << "' x2='" << fmt_coord(b.X(1.0 - alpha)) << "' y2='"
     << fmt_coord(b.py + b.ph)
     << "' stroke='#555' stroke-dasharray='5,4'/>\n";
  for (const auto& p : pts) {
    const std::size_t ci = static_cast<std::size_t>(
        std::find(order.begin(), order.end(), p.method) - order.begin());
    const char* col = plot_color(ci);
    os << "<line x1='" << fmt_coord(b.X(p.x - p.xe)) << "' y1='"
       << fmt_coord(b.Y(p.y)) << "' x2='" << fmt_coord(b.X(p.x + p.xe))
       << "' y2='" << fmt_coord(b.Y(p.y)) << "' stroke='" << col << "'/>\n";
    os << "<line x1='" << fmt_coord(b.X(p.x)) << "' y1='"
       << fmt_coord(b.Y(p.y - p.ye)) << "' x2='" << fmt_coord(b.X(p.x))
       << "' y2='" << fmt_coord(b.Y(p.y + p.ye)) << "' stroke='" << col
       << "'/>\n";
    os << "<circle cx='" << fmt_coord(b.X(p.x)) << "' cy='"
       << fmt_coord(b.Y(p.y)) << "' r='4' fill='" << col << "'/>\n";
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double ly = 30.0 + 16.0 * static_cast<double>(i);
    os << "<circle cx='530' cy='" << fmt_coord(ly - 4.0) << "' r='4' fill='"
       << plot_color(i) << "'/>\n";
    os << "<text x='540' y='" << fmt_coord(ly)
       << "' font-size='11'>" << order[i] << "</text>\n";
  }
  os << "</svg>\n";
}

inline void emit_gamma_sweep_plot(const CsvTable& t, std::ostream& os) {
  const std::size_t c_phi = t.column("phi");
  const std::size_t c_gamma = t.column("gamma");
  t.column("rep");  // required by the schema even though rows are averaged
  const std::size_t c_mean = t.column("mean_length");
  if (t.rows.empty()) throw std::runtime_error("no rows");

  // Average repetitions per (phi, gamma), preserving first-seen order.
  std::vector<double> phis;
  std::map<std::pair<double, double>, std::pair<double, std::size_t>> cells;
  std::vector<double> gammas;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double phi = t.num(r, c_phi), gamma = t.num(r, c_gamma);
    if (std::find(phis.begin(), phis.end(), phi) == phis.end()) {
      phis.push_back(phi);
    }
    if (std::find(gammas.begin(), gammas.end(), gamma) == gammas.end()) {
      gammas.push_back(gamma);
    }
    auto& cell = cells[{phi, gamma}];
    cell.first += t.num(r, c_mean);
    cell.second += 1;
  }
  std::sort(gammas.begin(), gammas.end());

  double len_lo = kInf, len_hi = -kInf;
  for (const auto& [key, v] : cells) {
    const double m = v.first / static_cast<double>(v.second);
    len_lo = std::min(len_lo, m);
    len_hi = std::max(len_hi, m);
  }
  std::vector<std::pair<double, double>> gamma_star;  // (phi, argmin)
  for (double phi : phis) {
    double best_g = gammas.front(), best_m = kInf;
    for (double gamma : gammas) {
      const auto it = cells.find({phi, gamma});
      if (it == cells.end()) continue;
      const double m = it->second.first / it->second.second;
      if (m < best_m) {
        best_m = m;
        best_g = gamma;
      }
    }
    gamma_star.emplace_back(phi, best_g);
  }

  os << "<svg xmlns='http://www.w3.org/2000/svg' width='960' height='480'>\n";
  AxisBox left{gammas.front(), gammas.back(), len_lo, len_hi, 70, 20, 360, 400};
  pad_range(left.x0, left.x1);
  pad_range(left.y0, left.y1);
  svg_axes(os, left, "gamma", "mean length");
  for (std::size_t pi = 0; pi < phis.size(); ++pi) {
    os << "<polyline fill='none' stroke='" << plot_color(pi) << "' points='";
    for (double gamma : gammas) {
      const auto it = cells.find({phis[pi], gamma});
      if (it == cells.end()) continue;
      const double m = it->second.first / it->second.second;
      os << fmt_coord(left.X(gamma)) << ',' << fmt_coord(left.Y(m)) << ' ';
    }
    os << "'/>\n";
    const double ly = 30.0 + 16.0 * static_cast<double>(pi);
    os << "<circle cx='380' cy='" << fmt_coord(ly - 4.0) << "' r='4' fill='"
       << plot_color(pi) << "'/>\n";
    os << "<text x='390' y='" << fmt_coord(ly)
       << "' font-size='11'>phi=" << fmt_coord(phis[pi]) << "</text>\n";
  }

  AxisBox right{0, 1, 0, 1, 560, 20, 360, 400};
  right.x0 = right.x1 = gamma_star.front().first;
  right.y0 = right.y1 = gamma_star.front().second;
  for (const auto& [phi, gs] : gamma_star) {
    right.x0 = std::min(right.x0, phi);
    right.x1 = std::max(right.x1, phi);
    right.y0 = std::min(right.y0, gs);
    right.y1 = std::max(right.y1, gs);
  }
  pad_range(right.x0, right.x1);
  pad_range(right.y0, right.y1);
  svg_axes(os, right, "phi", "optimal gamma");
  os << "<polyline fill='none' stroke='#1f77b4' points='";
  for (const auto& [phi, gs] : gamma_star) {
    os << fmt_coord(right.X(phi)) << ',' << fmt_coord(right.Y(gs)) << ' ';
  }
  os << "'/>\n";
  for (const auto& [phi, gs] : gamma_star) {
    os << "<circle cx='" << fmt_coord(right.X(phi)) << "' cy='"
       << fmt_coord(right.Y(gs)) << "' r='4' fill='#1f77b4'/>\n";
  }
  os << "</svg>\n";
}

inline void emit_series_plot(const CsvTable& t, std::ostream& os) {
  const std::size_t c_obs = t.column("observed");
  const std::size_t c_lo = t.column("lower");
  const std::size_t c_hi = t.column("upper");
  if (t.rows.empty()) throw std::runtime_error("no rows");
  const std::size_t n = t.rows.size();

  double y_lo = kInf, y_hi = -kInf;
  for (std::size_t r = 0; r < n; ++r) {
    y_lo = std::min(y_lo, t.num(r, c_obs));
    y_hi = std::max(y_hi, t.num(r, c_obs));
    if (std::isfinite(t.num(r, c_lo))) y_lo = std::min(y_lo, t.num(r, c_lo));
    if (std::isfinite(t.num(r, c_hi))) y_hi = std::max(y_hi, t.num(r, c_hi));
  }
  AxisBox b{0, static_cast<double>(n - 1), y_lo, y_hi, 70, 20, 520, 400};
  if (n == 1) b.x1 = 1;
  pad_range(b.y0, b.y1);

  os << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='480'>\n";
  svg_axes(os, b, "step", "value");
  // Interval band: upper bound forward, lower bound in reverse. Non-finite
  // bounds are drawn clamped to the plot box.
  os << "<path fill='#1f77b4' fill-opacity='0.25' stroke='none' d='";
  for (std::size_t r = 0; r < n; ++r) {
    const double v = std::clamp(t.num(r, c_hi), b.y0, b.y1);
    os << (r == 0 ? 'M' : 'L') << fmt_coord(b.X(static_cast<double>(r)))
       << ' ' << fmt_coord(b.Y(v));
  }
  for (std::size_t r = n; r-- > 0;) {
    const double v = std::clamp(t.num(r, c_lo), b.y0, b.y1);
    os << 'L' << fmt_coord(b.X(static_cast<double>(r))) << ' '
       << fmt_coord(b.Y(v));
  }
  os << "Z'/>\n";
  os << "<polyline fill='none' stroke='#222' points='";
  for (std::size_t r = 0; r < n; ++r) {
    os << fmt_coord(b.X(static_cast<double>(r))) << ','
       << fmt_coord(b.Y(t.num(r, c_obs))) << ' ';
  }
  os << "'/>\n";
  os << "</svg>\n";
}

}  // namespace detail

/// Renders the requested plot kind from a results table into a static SVG.
inline void emit_plots(const CsvTable& table, PlotKind kind, std::ostream& os,
                       double alpha = 0.1) {
  if (table.rows.empty()) throw std::runtime_error("no rows");
  switch (kind) {
    case PlotKind::validity_efficiency:
      detail::emit_validity_efficiency(table, os, alpha);
      break;
    case PlotKind::gamma_sweep:
      detail::emit_gamma_sweep_plot(table, os);
      break;
    case PlotKind::series_with_intervals:
      detail::emit_series_plot(table, os);
      break;
  }
}

}  // namespace tscp

#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tscp/harness.hpp"

namespace tscp {

// ---------------------------------------------------------------------------
// Civil calendar arithmetic (proleptic Gregorian, day serial from 1970-01-01)
// ---------------------------------------------------------------------------

inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      (153 * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
      static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  int year, month, day;
};

inline CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned month = mp < 10 ? mp + 3 : mp - 9;
  return CivilDate{static_cast<int>(y + (month <= 2)),
                   static_cast<int>(month), static_cast<int>(d)};
}

/// ISO weekday: 1 = Monday .. 7 = Sunday.
inline int weekday_1to7(std::int64_t day_serial) {
  return static_cast<int>((day_serial % 7 + 7 + 3) % 7) + 1;
}

inline std::string date_string(std::int64_t day_serial) {
  const CivilDate c = civil_from_days(day_serial);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
  return buf;
}

inline std::string datetime_string(std::int64_t day_serial, int hour) {
  char buf[48];
  const CivilDate c = civil_from_days(day_serial);
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00:00", c.year, c.month,
                c.day, hour);
  return buf;
}

// ---------------------------------------------------------------------------
// Price records and CSV schema
// ---------------------------------------------------------------------------

/// One hourly spot-price row: the observed price plus the information known a
/// day ahead (forecast consumption, weekday, and the full price curves of the
/// previous day and of the same weekday one week earlier).
struct PriceRecord {
  std::string datetime;  ///< ISO-8601, hour resolution
  std::int64_t day = 0;  ///< civil day serial
  int hour = 0;          ///< 0..23
  double price = 0.0;    ///< EUR/MWh
  double fc_consumption = 0.0;  ///< MW
  int dow = 1;                  ///< 1 = Monday .. 7 = Sunday
  std::array<double, 24> price_d1{};
  std::array<double, 24> price_d7{};
};

inline std::string price_csv_header() {
  std::string h = "datetime,price,fc_consumption,dow";
  for (int i = 0; i < 24; ++i) h += ",price_d1_h" + std::to_string(i);
  for (int i = 0; i < 24; ++i) h += ",price_d7_h" + std::to_string(i);
  return h;
}

namespace detail {

inline std::pair<std::int64_t, int> parse_datetime(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &se) !=
      6) {
    throw std::runtime_error("schema mismatch: bad datetime " + s);
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi != 0 ||
      se != 0) {
    throw std::runtime_error("schema mismatch: bad datetime " + s);
  }
  const std::int64_t serial = days_from_civil(y, mo, d);
  const CivilDate back = civil_from_days(serial);
  if (back.year != y || back.month != mo || back.day != d) {
    throw std::runtime_error("schema mismatch: bad datetime " + s);
  }
  return {serial, h};
}

inline void check_day_group(const std::vector<PriceRecord>& records,
                            std::size_t begin, std::size_t end) {
  const std::string date = date_string(records[begin].day);
  if (end - begin != 24) {
    throw std::runtime_error("schema mismatch: day " + date + " has " +
                             std::to_string(end - begin) + " rows");
  }
  for (std::size_t i = begin; i < end; ++i) {
    if (records[i].hour != static_cast<int>(i - begin)) {
      throw std::runtime_error("schema mismatch: day " + date +
                               " hours out of order");
    }
  }
}

inline bool close_enough(double a, double b) {
  return std::abs(a - b) <= 1e-6 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

/// Parses and validates a price CSV: exact header, contiguous days of 24
/// hourly rows each, true weekdays, and lag columns consistent with the
/// prices recorded on the lagged days (this is the causality check: every
/// covariate of day D is verified against rows strictly before D).
inline std::vector<PriceRecord> parse_price_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error("schema mismatch: empty file");
  }
  if (detail::trim(line) != price_csv_header()) {
    throw std::runtime_error("schema mismatch: unexpected header");
  }
  std::vector<PriceRecord> records;
  while (std::getline(is, line)) {
    const std::string row = detail::trim(line);
    if (row.empty()) continue;
    const auto cells = detail::split(row, ',');
    if (cells.size() != 52) {
      throw std::runtime_error("schema mismatch: row with " +
                               std::to_string(cells.size()) + " fields");
    }
    PriceRecord r;
    r.datetime = cells[0];
    std::tie(r.day, r.hour) = detail::parse_datetime(cells[0]);
    try {
      r.price = std::stod(cells[1]);
      r.fc_consumption = std::stod(cells[2]);
      r.dow = std::stoi(cells[3]);
      for (int i = 0; i < 24; ++i) r.price_d1[i] = std::stod(cells[4 + i]);
      for (int i = 0; i < 24; ++i) r.price_d7[i] = std::stod(cells[28 + i]);
    } catch (const std::exception&) {
      throw std::runtime_error("schema mismatch: bad numeric field at " +
                               r.datetime);
    }
    if (r.dow != weekday_1to7(r.day)) {
      throw std::runtime_error("schema mismatch: day-of-week for " +
                               date_string(r.day));
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw std::runtime_error("schema mismatch: no rows");

  // Day grouping: 24 in-order rows per day, days contiguous.
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= records.size(); ++i) {
    if (i == records.size() || records[i].day != records[begin].day) {
      detail::check_day_group(records, begin, i);
      if (i < records.size() && records[i].day != records[begin].day + 1) {
        throw std::runtime_error("schema mismatch: gap after " +
                                 date_string(records[begin].day));
      }
      begin = i;
    }
  }

  // Lag consistency against the actual earlier rows.
  const std::int64_t first_day = records.front().day;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const PriceRecord& r = records[i];
    for (int lag : {1, 7}) {
      const std::int64_t lag_day = r.day - lag;
      if (lag_day < first_day) continue;  // lagged day outside the file
      const std::size_t base =
          static_cast<std::size_t>(lag_day - first_day) * 24;
      const auto& lags = lag == 1 ? r.price_d1 : r.price_d7;
      for (int h = 0; h < 24; ++h) {
        if (!detail::close_enough(lags[h], records[base + h].price)) {
          throw std::runtime_error(
              "schema mismatch: inconsistent day-" + std::to_string(lag) +
              " lags for " + date_string(r.day));
        }
      }
    }
  }
  return records;
}

inline void write_price_csv(const std::vector<PriceRecord>& records,
                            std::ostream& os) {
  os << price_csv_header() << '\n';
  for (const auto& r : records) {
    os << r.datetime << ',' << fmt_g(r.price) << ',' << fmt_g(r.fc_consumption)
       << ',' << r.dow;
    for (double v : r.price_d1) os << ',' << fmt_g(v);
    for (double v : r.price_d7) os << ',' << fmt_g(v);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Stand-in generator: a seasonal consumption-driven price surface with AR
// noise, shipped so the pipeline can run end to end without the real data.
// ---------------------------------------------------------------------------

struct StandinSpec {
  int start_year = 2015;
  int years = 5;
  std::uint64_t seed = 0;
};

inline std::vector<PriceRecord> generate_standin_records(
    const StandinSpec& spec) {
  if (spec.years < 1) throw std::invalid_argument("years < 1");
  const std::int64_t day0 = days_from_civil(spec.start_year, 1, 1);
  const std::int64_t day_end = days_from_civil(spec.start_year + spec.years, 1, 1);
  const std::int64_t lead = 7;  // so every emitted row has in-range lags
  const std::int64_t n_days = day_end - day0 + lead;

  std::vector<std::array<double, 24>> price(n_days), cons(n_days);
  Rng rng(mix_seed(spec.seed, 17));
  double c_noise = 0.0, p_noise = 0.0;
  for (std::int64_t d = 0; d < n_days; ++d) {
    const std::int64_t serial = day0 - lead + d;
    const int dow = weekday_1to7(serial);
    const double year_frac =
        static_cast<double>(serial - day0) / 365.25;
    for (int h = 0; h < 24; ++h) {
      const double season =
          9000.0 * std::cos(2.0 * std::numbers::pi * (year_frac - 0.05));
      const double daily =
          -5500.0 * std::cos(2.0 * std::numbers::pi * (h - 13.5) / 24.0) +
          1100.0 * std::cos(4.0 * std::numbers::pi * (h - 9.0) / 24.0);
      const double weekend = dow >= 6 ? -4200.0 : 0.0;
      c_noise = 0.95 * c_noise + 600.0 * rng.normal();
      cons[d][h] = 52000.0 + season + daily + weekend + c_noise;
      p_noise = 0.9 * p_noise + 1.6 * rng.normal();
      // A drifting market: prices trend upward and the consumption
      // sensitivity strengthens over the years, so models fitted on stale
      // windows lose calibration and refitting pays off.
      const double sensitivity = 0.00115 * (1.0 + 0.18 * year_frac);
      price[d][h] =
          -35.0 + sensitivity * cons[d][h] + 5.5 * year_frac + p_noise;
    }
  }

  std::vector<PriceRecord> records;
  records.reserve(static_cast<std::size_t>(day_end - day0) * 24);
  for (std::int64_t d = lead; d < n_days; ++d) {
    const std::int64_t serial = day0 - lead + d;
    for (int h = 0; h < 24; ++h) {
      PriceRecord r;
      r.day = serial;
      r.hour = h;
      r.datetime = datetime_string(serial, h);
      r.price = price[d][h];
      r.fc_consumption = cons[d][h];
      r.dow = weekday_1to7(serial);
      r.price_d1 = price[d - 1];
      r.price_d7 = price[d - 7];
      records.push_back(std::move(r));
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Per-hour pipeline
// ---------------------------------------------------------------------------

struct PriceIntervalRow {
  std::string date;
  double observed = 0.0, lower = 0.0, upper = 0.0;
};

struct PricePipelineResult {
  std::string method;
  double alpha = 0.1;
  struct HourSummary {
    int hour = 0;
    double coverage = 0.0;
    double median_length = 0.0;
  };
  std::vector<HourSummary> hours;  ///< one entry per hour of day
  double overall_coverage = 0.0;
  double overall_median_length = 0.0;
  std::array<std::vector<PriceIntervalRow>, 24> intervals;
};

namespace detail {

constexpr std::size_t kPriceWindowDays = 1095;  // 3-year sliding window
constexpr std::size_t kPricePredictDays = 365;  // final predicted year
constexpr std::size_t kPriceTotalDays = kPriceWindowDays + kPricePredictDays;

inline RunResult dispatch_method(const MethodSpec& m, const RegressorSpec& spec,
                                 const SeriesDataset& data, double alpha,
                                 std::uint64_t stream_seed,
                                 std::uint64_t enbpi_seed) {
  if (method_uses_stream(m.kind)) {
    const auto stream =
        compute_online_stream(spec, data, SplitPolicy{}, 1, stream_seed);
    switch (m.kind) {
      case MethodKind::scp:
        return scp_from_stream(stream, data, alpha);
      case MethodKind::osscp:
        return osscp_from_stream(stream, data, alpha);
      case MethodKind::aci:
        return aci_from_stream(stream, data, alpha, m.gamma);
      case MethodKind::agaci:
        return agaci_from_stream(stream, data, alpha, default_gamma_grid());
      case MethodKind::agaci_ewa:
        return agaci_from_stream(stream, data, alpha, default_gamma_grid(),
                                 AggregationRule::ewa);
      default:
        return naive_aci_from_stream(stream, data, alpha, default_gamma_grid());
    }
  }
  EnbpiConfig ec;
  ec.v2 = m.kind == MethodKind::enbpi_v2;
  return enbpi(spec, data, alpha, ec, enbpi_seed);
}

}  // namespace detail

/// Runs one method through 24 independent per-hour pipelines. Each pipeline
/// models its hour's price from the day-ahead information (56 features:
/// forecast consumption, 24+24 lagged prices, 7 weekday indicators), slides a
/// 3-year window (1.5y train / 1.5y calibration, sequential split, daily
/// refits) over the data, and predicts the final year.
inline PricePipelineResult run_price_pipeline(
    const std::vector<PriceRecord>& records, double alpha,
    const std::string& method, std::uint64_t seed) {
  if (alpha <= 0.0 || alpha >= 1.0) {
    throw std::invalid_argument("alpha outside (0,1)");
  }
  const MethodSpec m = parse_method(method);
  if (records.empty() || records.size() % 24 != 0) {
    throw std::runtime_error("schema mismatch: partial day");
  }
  const std::size_t n_days = records.size() / 24;
  if (n_days < detail::kPriceTotalDays) {
    throw std::runtime_error("insufficient history");
  }
  const std::size_t offset = n_days - detail::kPriceTotalDays;

  RegressorSpec model;
  model.kind = RegressorKind::ridge;
  model.ridge_penalty = 1.0;

  PricePipelineResult out;
  out.method = method;
  out.alpha = alpha;
  out.hours.resize(24);

  std::array<std::vector<double>, 24> lengths_by_hour;
  std::array<std::size_t, 24> covered_by_hour{};

  parallel_for(24, [&](std::size_t h) {
    SeriesDataset data;
    data.t0 = detail::kPriceWindowDays;
    data.t1 = detail::kPricePredictDays;
    data.features = Matrix(detail::kPriceTotalDays, 56);
    data.targets.resize(detail::kPriceTotalDays);
    for (std::size_t i = 0; i < detail::kPriceTotalDays; ++i) {
      const PriceRecord& rec = records[(offset + i) * 24 + h];
      double* row = &data.features.data[i * 56];
      row[0] = rec.fc_consumption;
      for (int k = 0; k < 24; ++k) row[1 + k] = rec.price_d1[k];
      for (int k = 0; k < 24; ++k) row[25 + k] = rec.price_d7[k];
      for (int k = 0; k < 7; ++k) row[49 + k] = rec.dow == k + 1 ? 1.0 : 0.0;
      data.targets[i] = rec.price;
    }
    const RunResult res =
        detail::dispatch_method(m, model, data, alpha, mix_seed(seed, h),
                                mix_seed(seed, 100 + h));

    auto& rows = out.intervals[h];
    rows.reserve(data.t1);
    std::size_t covered = 0;
    std::vector<double> lengths;
    lengths.reserve(data.t1);
    for (std::size_t j = 0; j < data.t1; ++j) {
      const PriceRecord& rec = records[(offset + data.t0 + j) * 24 + h];
      PriceIntervalRow row;
      row.date = date_string(rec.day);
      row.observed = rec.price;
      row.lower = res.intervals[j].lower;
      row.upper = res.intervals[j].upper;
      rows.push_back(std::move(row));
      covered += res.covered[j] ? 1 : 0;
      lengths.push_back(res.intervals[j].length());
    }
    out.hours[h].hour = static_cast<int>(h);
    out.hours[h].coverage =
        static_cast<double>(covered) / static_cast<double>(data.t1);
    out.hours[h].median_length = median_of(std::vector<double>(lengths));
    covered_by_hour[h] = covered;
    lengths_by_hour[h] = std::move(lengths);
  });

  std::vector<double> all_lengths;
  std::size_t total_covered = 0, total = 0;
  for (int h = 0; h < 24; ++h) {
    total_covered += covered_by_hour[h];
    total += detail::kPricePredictDays;
    all_lengths.insert(all_lengths.end(), lengths_by_hour[h].begin(),
                       lengths_by_hour[h].end());
  }
  out.overall_coverage =
      static_cast<double>(total_covered) / static_cast<double>(total);
  out.overall_median_length = median_of(std::move(all_lengths));
  return out;
}

inline PricePipelineResult run_price_pipeline_csv(std::istream& is,
                                                  double alpha,
                                                  const std::string& method,
                                                  std::uint64_t seed) {
  return run_price_pipeline(parse_price_csv(is), alpha, method, seed);
}

inline void write_price_results_csv(const PricePipelineResult& result,
                                    std::ostream& os) {
  os << "method,hour,coverage,median_length\n";
  for (const auto& h : result.hours) {
    os << result.method << ',' << h.hour << ',' << fmt_g(h.coverage) << ','
       << fmt_g(h.median_length) << '\n';
  }
  os << result.method << ",all," << fmt_g(result.overall_coverage) << ','
     << fmt_g(result.overall_median_length) << '\n';
}

/// Same table with several methods stacked under a single header.
inline void write_price_results_csv(
    const std::vector<PricePipelineResult>& results, std::ostream& os) {
  os << "method,hour,coverage,median_length\n";
  for (const auto& result : results) {
    for (const auto& h : result.hours) {
      os << result.method << ',' << h.hour << ',' << fmt_g(h.coverage) << ','
         << fmt_g(h.median_length) << '\n';
    }
    os << result.method << ",all," << fmt_g(result.overall_coverage) << ','
       << fmt_g(result.overall_median_length) << '\n';
  }
}

inline void write_hour_intervals_csv(const PricePipelineResult& result, int hour,
                                     std::ostream& os) {
  os << "date,observed,lower,upper\n";
  for (const auto& r : result.intervals[static_cast<std::size_t>(hour)]) {
    os << r.date << ',' << fmt_g(r.observed) << ',' << fmt_g(r.lower) << ','
       << fmt_g(r.upper) << '\n';
  }
}

}  // namespace tscp

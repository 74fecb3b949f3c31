#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "tscp/price.hpp"

using namespace tscp;

namespace {

std::vector<PriceRecord> small_records() {
  StandinSpec spec;
  spec.start_year = 2018;
  spec.years = 1;
  spec.seed = 3;
  return generate_standin_records(spec);
}

std::string to_csv(const std::vector<PriceRecord>& records) {
  std::ostringstream os;
  write_price_csv(records, os);
  return os.str();
}

// Drops full CSV lines by zero-based row index (header excluded).
std::string drop_lines(const std::string& csv, std::size_t begin,
                       std::size_t count) {
  std::istringstream is(csv);
  std::ostringstream os;
  std::string line;
  std::getline(is, line);
  os << line << '\n';
  std::size_t idx = 0;
  while (std::getline(is, line)) {
    if (idx < begin || idx >= begin + count) os << line << '\n';
    ++idx;
  }
  return os.str();
}

}  // namespace

TEST_CASE("civil calendar round-trips and knows its weekdays") {
  CHECK(days_from_civil(1970, 1, 1) == 0);
  CHECK(weekday_1to7(days_from_civil(1970, 1, 1)) == 4);   // Thursday
  CHECK(weekday_1to7(days_from_civil(2000, 1, 1)) == 6);   // Saturday
  CHECK(weekday_1to7(days_from_civil(2015, 1, 1)) == 4);   // Thursday
  CHECK(days_from_civil(2016, 3, 1) - days_from_civil(2016, 2, 28) == 2);
  CHECK(days_from_civil(2017, 3, 1) - days_from_civil(2017, 2, 28) == 1);
  for (std::int64_t serial : {-100000LL, -1LL, 0LL, 16890LL, 20000LL}) {
    const CivilDate c = civil_from_days(serial);
    CHECK(days_from_civil(c.year, c.month, c.day) == serial);
  }
  CHECK(date_string(days_from_civil(2016, 2, 29)) == "2016-02-29");
  CHECK(datetime_string(days_from_civil(2016, 2, 29), 5) ==
        "2016-02-29T05:00:00");
}

TEST_CASE("price csv header enumerates both lag blocks") {
  const std::string h = price_csv_header();
  CHECK(h.rfind("datetime,price,fc_consumption,dow,price_d1_h0,", 0) == 0);
  CHECK(h.find("price_d1_h23,price_d7_h0") != std::string::npos);
  CHECK(h.substr(h.size() - 12) == "price_d7_h23");
  std::size_t commas = 0;
  for (char c : h) commas += c == ',' ? 1 : 0;
  CHECK(commas == 51);
}

TEST_CASE("stand-in generator: full days, true weekdays, consistent lags") {
  const auto records = small_records();
  REQUIRE(records.size() == 365u * 24u);
  CHECK(records.front().datetime == "2018-01-01T00:00:00");
  CHECK(records.back().datetime == "2018-12-31T23:00:00");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    CHECK(r.hour == static_cast<int>(i % 24));
    CHECK(r.dow == weekday_1to7(r.day));
  }
  // Lag columns quote the actual prices of D-1 and D-7 where those days are
  // inside the record range.
  for (std::size_t i = 7 * 24; i < records.size(); i += 301) {
    const auto& r = records[i];
    const std::size_t day_idx = i / 24;
    for (int h = 0; h < 24; ++h) {
      CHECK(r.price_d1[h] == records[(day_idx - 1) * 24 + h].price);
      CHECK(r.price_d7[h] == records[(day_idx - 7) * 24 + h].price);
    }
  }
}

TEST_CASE("price csv round-trips through the parser") {
  const auto records = small_records();
  std::istringstream is(to_csv(records));
  const auto parsed = parse_price_csv(is);
  REQUIRE(parsed.size() == records.size());
  for (std::size_t i = 0; i < parsed.size(); i += 997) {
    CHECK(parsed[i].datetime == records[i].datetime);
    CHECK(parsed[i].dow == records[i].dow);
    CHECK(parsed[i].price ==
          doctest::Approx(records[i].price).epsilon(1e-9));
    CHECK(parsed[i].fc_consumption ==
          doctest::Approx(records[i].fc_consumption).epsilon(1e-9));
    CHECK(parsed[i].price_d7[13] ==
          doctest::Approx(records[i].price_d7[13]).epsilon(1e-9));
  }
}

TEST_CASE("a 23-row day is rejected with the date in the message") {
  const std::string csv = to_csv(small_records());
  // Remove hour 13 of the 40th day (2018-02-09).
  const std::string broken = drop_lines(csv, 39 * 24 + 13, 1);
  std::istringstream is(broken);
  CHECK_THROWS_WITH_AS(parse_price_csv(is),
                       "schema mismatch: day 2018-02-09 has 23 rows",
                       std::runtime_error);
}

TEST_CASE("a missing day is rejected as a gap") {
  const std::string csv = to_csv(small_records());
  const std::string broken = drop_lines(csv, 40 * 24, 24);
  std::istringstream is(broken);
  CHECK_THROWS_WITH_AS(parse_price_csv(is),
                       "schema mismatch: gap after 2018-02-09",
                       std::runtime_error);
}

TEST_CASE("tampered lag columns are rejected with the date") {
  auto records = small_records();
  records[100 * 24 + 5].price_d1[7] += 25.0;
  std::istringstream is(to_csv(records));
  CHECK_THROWS_WITH_AS(parse_price_csv(is),
                       "schema mismatch: inconsistent day-1 lags for 2018-04-11",
                       std::runtime_error);

  auto records7 = small_records();
  records7[200 * 24 + 11].price_d7[3] -= 18.0;
  std::istringstream is7(to_csv(records7));
  CHECK_THROWS_WITH_AS(parse_price_csv(is7),
                       "schema mismatch: inconsistent day-7 lags for 2018-07-20",
                       std::runtime_error);
}

TEST_CASE("wrong weekday and malformed datetimes are schema errors") {
  auto records = small_records();
  records[50].dow = records[50].dow % 7 + 1;
  std::istringstream is(to_csv(records));
  CHECK_THROWS_AS(parse_price_csv(is), std::runtime_error);

  std::istringstream bad_header("datetime,price\n");
  CHECK_THROWS_WITH_AS(parse_price_csv(bad_header),
                       "schema mismatch: unexpected header",
                       std::runtime_error);

  std::string csv = to_csv(small_records());
  const auto pos = csv.find("2018-06-01T14");
  REQUIRE(pos != std::string::npos);
  csv.replace(pos, 13, "2018-06-99T14");
  std::istringstream bad_date(csv);
  CHECK_THROWS_AS(parse_price_csv(bad_date), std::runtime_error);
}

TEST_CASE("pipelines demand four years of history") {
  StandinSpec spec;
  spec.years = 2;
  spec.seed = 1;
  const auto records = generate_standin_records(spec);
  CHECK_THROWS_WITH_AS(run_price_pipeline(records, 0.1, "scp", 1),
                       "insufficient history", std::runtime_error);
  CHECK_THROWS_AS(run_price_pipeline(records, 1.5, "scp", 1),
                  std::invalid_argument);
  CHECK_THROWS_WITH_AS(run_price_pipeline(records, 0.1, "teleport", 1),
                       "unknown method: teleport", std::runtime_error);
}

TEST_CASE("per-hour pipelines: layout, determinism, and orderings") {
  StandinSpec spec;
  spec.years = 4;
  spec.seed = 5;
  const auto records = generate_standin_records(spec);

  const auto offline = run_price_pipeline(records, 0.1, "scp", 7);
  const auto online = run_price_pipeline(records, 0.1, "osscp", 7);
  const auto adaptive = run_price_pipeline(records, 0.1, "agaci", 7);

  for (const auto& res : {offline, online, adaptive}) {
    REQUIRE(res.hours.size() == 24);
    for (int h = 0; h < 24; ++h) {
      CHECK(res.hours[h].hour == h);
      CHECK(res.hours[h].coverage >= 0.0);
      CHECK(res.hours[h].coverage <= 1.0);
      REQUIRE(res.intervals[h].size() == 365);
      CHECK(res.intervals[h].front().date == "2018-01-01");
      CHECK(res.intervals[h].back().date == "2018-12-31");
    }
  }

  // Daily refits recover the coverage the drifting market takes from the
  // offline run; the adaptive aggregation stays close to the target level.
  CHECK(online.overall_coverage >= offline.overall_coverage);
  CHECK(adaptive.overall_coverage >= 0.85);
  CHECK(adaptive.overall_coverage <= 1.0);

  const auto online_again = run_price_pipeline(records, 0.1, "osscp", 7);
  CHECK(online_again.overall_coverage == online.overall_coverage);
  for (int h = 0; h < 24; h += 7) {
    for (std::size_t j = 0; j < 365; j += 60) {
      CHECK(online_again.intervals[h][j].lower == online.intervals[h][j].lower);
      CHECK(online_again.intervals[h][j].upper == online.intervals[h][j].upper);
    }
  }

  std::ostringstream res_csv;
  write_price_results_csv(online, res_csv);
  std::istringstream res_is(res_csv.str());
  std::string line;
  std::getline(res_is, line);
  CHECK(line == "method,hour,coverage,median_length");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(res_is, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 25);
  CHECK(last.rfind("osscp,all,", 0) == 0);

  std::ostringstream iv_csv;
  write_hour_intervals_csv(online, 12, iv_csv);
  std::istringstream iv_is(iv_csv.str());
  std::getline(iv_is, line);
  CHECK(line == "date,observed,lower,upper");
  rows = 0;
  while (std::getline(iv_is, line)) ++rows;
  CHECK(rows == 365);
}

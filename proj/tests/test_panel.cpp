#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "alphaloom/errors.hpp"
#include "alphaloom/panel.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace alphaloom;
using testsup::day;
using testsup::obs;

TEST_CASE("ingest: minimal file") {
  std::istringstream in(
      "date,stock_id,ret,price,volume\n"
      "2020-01-01,AAA,0.01,10,100\n"
      "2020-01-02,AAA,-0.02,9.8,50\n");
  const IngestResult r = ingest_panel(in);
  CHECK(r.panel.n_observations() == 2);
  CHECK(r.panel.n_stocks() == 1);
  CHECK(r.panel.n_dates() == 2);
  CHECK(r.report.rows_loaded == 2);
  CHECK(r.report.rows_rejected == 0);
}

TEST_CASE("ingest: missing ret column is a schema error naming it") {
  std::istringstream in("date,stock_id,price,volume\n2020-01-01,AAA,10,100\n");
  CHECK_THROWS_WITH_AS(ingest_panel(in), doctest::Contains("ret"), SchemaError);
}

TEST_CASE("ingest: negative volume row is rejected and counted") {
  std::istringstream in(
      "date,stock_id,ret,price,volume\n"
      "2020-01-01,AAA,0.01,10,-5\n"
      "2020-01-02,AAA,0.01,10,5\n");
  const IngestResult r = ingest_panel(in);
  CHECK(r.report.rows_rejected == 1);
  CHECK(r.report.rejection_reasons.at("negative volume") == 1);
  CHECK(r.panel.n_observations() == 1);
}

TEST_CASE("ingest: duplicate (date, stock) names the pair") {
  std::istringstream in(
      "date,stock_id,ret,price,volume\n"
      "2020-01-01,AAA,0.01,10,100\n"
      "2020-01-01,AAA,0.02,11,100\n");
  CHECK_THROWS_WITH_AS(ingest_panel(in), doctest::Contains("2020-01-01, AAA"), DuplicateKeyError);
}

TEST_CASE("ingest: negative vendor-coded price folded to absolute value") {
  std::istringstream in(
      "date,stock_id,ret,price,volume\n"
      "2020-01-01,AAA,0.01,-12.5,100\n");
  const IngestResult r = ingest_panel(in);
  CHECK(r.report.negative_prices == 1);
  CHECK(r.panel.value("price", 0, 0) == 12.5);
}

TEST_CASE("ingest: identical bytes produce structurally identical panels") {
  const std::string text =
      "date,stock_id,ret,price,volume\n"
      "2020-01-02,BBB,0.01,10,100\n"
      "2020-01-01,AAA,0.03,22,900\n"
      "2020-01-02,AAA,-0.01,21.8,500\n";
  std::istringstream a(text), b(text);
  CHECK(ingest_panel(a).panel.structurally_equal(ingest_panel(b).panel));
}

TEST_CASE("screens: inclusive price boundary") {
  std::vector<RawObservation> rows;
  const double prices[] = {4.0, 5.0, 6.0};
  const char* names[] = {"AAA", "BBB", "CCC"};
  for (int s = 0; s < 3; ++s) rows.push_back(obs(day(0), names[s], 0.0, prices[s], 100));
  ScreenConfig cfg;
  cfg.min_price = 5.0;
  cfg.min_history_days = 1;
  auto [screened, report] = apply_screens(Panel::from_observations(rows), cfg);
  CHECK(screened.n_stocks() == 2);
  const auto& ids = screened.stock_ids();
  CHECK(std::find(ids.begin(), ids.end(), "AAA") == ids.end());
}

TEST_CASE("screens: history boundary removes a 251-observation stock at 252") {
  std::vector<RawObservation> rows;
  for (int t = 0; t < 251; ++t) rows.push_back(obs(day(t), "SHORT", 0.0, 10, 100));
  for (int t = 0; t < 252; ++t) rows.push_back(obs(day(t), "LONG", 0.0, 10, 100));
  ScreenConfig cfg;
  cfg.min_price = 0.0;
  cfg.min_history_days = 252;
  auto [screened, report] = apply_screens(Panel::from_observations(rows), cfg);
  CHECK(screened.n_stocks() == 1);
  CHECK(screened.stock_ids()[0] == "LONG");
}

TEST_CASE("screens: counts match a row-by-row filter oracle on a synthetic panel") {
  std::mt19937_64 rng(7);
  std::vector<RawObservation> rows;
  std::uniform_int_distribution<int> exch(1, 4);
  std::uniform_int_distribution<int> shr(10, 12);
  std::uniform_real_distribution<double> price(1.0, 20.0);
  std::uniform_int_distribution<int> ndays(3, 12);
  for (int s = 0; s < 50; ++s) {
    char name[16];
    std::snprintf(name, sizeof(name), "S%03d", s);
    const int e = exch(rng);
    const int c = shr(rng);
    const int nd = ndays(rng);
    for (int t = 0; t < nd; ++t) {
      RawObservation o = obs(day(t), name, 0.001, price(rng), 100);
      o.exchange_code = e;
      o.share_code = c;
      rows.push_back(std::move(o));
    }
  }
  ScreenConfig cfg;
  cfg.eligible_exchanges = {1, 2, 3};
  cfg.common_share_codes = {10, 11};
  cfg.min_price = 5.0;
  cfg.min_history_days = 6;
  auto [screened, report] = apply_screens(Panel::from_observations(rows), cfg);

  // independent row-by-row filter
  auto pass_exch = [](const RawObservation& o) {
    return o.exchange_code >= 1 && o.exchange_code <= 3;
  };
  auto pass_shr = [](const RawObservation& o) {
    return o.share_code == 10 || o.share_code == 11;
  };
  auto pass_price = [](const RawObservation& o) { return o.price >= 5.0; };
  std::vector<RawObservation> kept = rows;
  std::size_t step = 1;
  for (auto pred : {+pass_exch, +pass_shr, +pass_price}) {
    std::vector<RawObservation> next;
    for (const auto& o : kept) {
      if (pred(o)) next.push_back(o);
    }
    kept = next;
    std::set<std::string> stocks;
    for (const auto& o : kept) stocks.insert(o.stock_id);
    CHECK(report.rows[step].remaining_observations == kept.size());
    CHECK(report.rows[step].remaining_stocks == stocks.size());
    ++step;
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& o : kept) ++counts[o.stock_id];
  std::vector<RawObservation> final_kept;
  for (const auto& o : kept) {
    if (counts[o.stock_id] >= 6) final_kept.push_back(o);
  }
  std::set<std::string> final_stocks;
  for (const auto& o : final_kept) final_stocks.insert(o.stock_id);
  CHECK(report.rows[4].remaining_observations == final_kept.size());
  CHECK(report.rows[4].remaining_stocks == final_stocks.size());
  CHECK(screened.n_observations() == final_kept.size());

  // monotone non-increasing counts
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    CHECK(report.rows[i].remaining_observations <= report.rows[i - 1].remaining_observations);
    CHECK(report.rows[i].remaining_stocks <= report.rows[i - 1].remaining_stocks);
  }
}

TEST_CASE("primitives: constant volume gives ratio 1 and growth 0") {
  std::vector<RawObservation> rows;
  for (int t = 0; t < 30; ++t) rows.push_back(obs(day(t), "AAA", 0.01, 10, 500));
  const Panel p = build_primitives(Panel::from_observations(rows));
  for (int t = 19; t < 30; ++t) {
    CHECK(p.value("vol_ratio", 0, std::size_t(t)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int t = 1; t < 30; ++t) {
    CHECK(p.value("vol_growth", 0, std::size_t(t)) == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(is_missing(p.value("vol_ratio", 0, 18)));
  CHECK(is_missing(p.value("vol_growth", 0, 0)));
}

TEST_CASE("primitives: constant returns give zero realized volatility") {
  std::vector<RawObservation> rows;
  for (int t = 0; t < 25; ++t) rows.push_back(obs(day(t), "AAA", 0.004, 10, 500));
  const Panel p = build_primitives(Panel::from_observations(rows));
  CHECK(p.value("ret_vol", 0, 24) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("primitives: 30-day price-to-MA matches the hand window") {
  std::vector<RawObservation> rows;
  std::vector<double> prices;
  for (int t = 0; t < 30; ++t) {
    const double px = 10.0 + 0.5 * t;
    prices.push_back(px);
    rows.push_back(obs(day(t), "AAA", 0.0, px, 100));
  }
  const Panel p = build_primitives(Panel::from_observations(rows));
  double mean = 0.0;
  for (int t = 10; t < 30; ++t) mean += prices[std::size_t(t)];  // days 11..30, 1-based
  mean /= 20.0;
  CHECK(p.value("price_ma_ratio", 0, 29) == doctest::Approx(prices[29] / mean).epsilon(1e-12));
}

TEST_CASE("primitives: filtration property under future mutation") {
  const Panel base = testsup::random_panel(8, 60, 99);
  const Panel with = build_primitives(base);

  // perturb every observation strictly after date index 40
  std::vector<RawObservation> mutated;
  const std::size_t T = base.n_dates();
  for (std::size_t s = 0; s < base.n_stocks(); ++s) {
    for (int t : base.history(s)) {
      RawObservation o = obs(base.dates()[std::size_t(t)], base.stock_ids()[s],
                             base.column("ret")[s * T + std::size_t(t)],
                             base.column("price")[s * T + std::size_t(t)],
                             base.column("volume")[s * T + std::size_t(t)]);
      o.market_ret_vw = base.market_vw()[std::size_t(t)];
      o.market_ret_sp = base.market_sp()[std::size_t(t)];
      if (t > 40) {
        o.ret = 9.9;
        o.price = 123456.0;
        o.volume = 777.0;
        o.market_ret_vw = -0.5;
      }
      mutated.push_back(std::move(o));
    }
  }
  const Panel mut = build_primitives(Panel::from_observations(std::move(mutated)));
  for (const auto& col : kPrimitiveNames) {
    for (std::size_t s = 0; s < base.n_stocks(); ++s) {
      for (int t = 0; t <= 40; ++t) {
        const double a = with.value(col, s, std::size_t(t));
        const double b = mut.value(col, s, std::size_t(t));
        if (std::isnan(a)) {
          CHECK(std::isnan(b));
        } else {
          CHECK(a == b);  // bit-identical
        }
      }
    }
  }
}

TEST_CASE("winsorize: all-equal vector unchanged") {
  const std::vector<double> v = {3.0, 3.0, 3.0};
  CHECK(winsorize_cross_section(v, 0.01, 0.99) == v);
}

TEST_CASE("winsorize: 1..100 clipped at the interpolated percentile") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(double(i));
  const auto w = winsorize_cross_section(v, 0.01, 0.99);
  const double lo = oracle::quantile(v, 0.01);
  const double hi = oracle::quantile(v, 0.99);
  CHECK(*std::min_element(w.begin(), w.end()) == doctest::Approx(lo).epsilon(1e-14));
  CHECK(*std::max_element(w.begin(), w.end()) == doctest::Approx(hi).epsilon(1e-14));
  CHECK(lo == doctest::Approx(1.99));
}

TEST_CASE("winsorize: full range is the identity") {
  const std::vector<double> v = {5.0, -2.0, 17.0, 0.5};
  CHECK(winsorize_cross_section(v, 0.0, 1.0) == v);
}

TEST_CASE("winsorize: idempotent and missing passes through") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v;
  for (int i = 0; i < 200; ++i) v.push_back(g(rng));
  v[7] = nan_value();
  const auto once = winsorize_cross_section(v, 0.05, 0.95);
  const auto twice = winsorize_cross_section(once, 0.05, 0.95);
  CHECK(std::isnan(once[7]));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i == 7) continue;
    CHECK(once[i] == twice[i]);
  }
}

TEST_CASE("zscore: {1,2,3} maps to {-1,0,1}") {
  const auto z = zscore_cross_section({1.0, 2.0, 3.0});
  CHECK_FALSE(z.degenerate);
  CHECK(z.values[0] == doctest::Approx(-1.0));
  CHECK(z.values[1] == doctest::Approx(0.0));
  CHECK(z.values[2] == doctest::Approx(1.0));
}

TEST_CASE("zscore: symmetric input has exactly zero mean") {
  const auto z = zscore_cross_section({-4.0, 0.0, 4.0});
  CHECK(z.values[0] + z.values[1] + z.values[2] == 0.0);
}

TEST_CASE("zscore: constant vector degenerates to zeros with flag") {
  const auto z = zscore_cross_section({2.0, 2.0, 2.0});
  CHECK(z.degenerate);
  for (double v : z.values) CHECK(v == 0.0);
}

TEST_CASE("zscore: output moments on random non-degenerate dates") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> v;
    const int n = 5 + int(rng() % 60);
    for (int i = 0; i < n; ++i) v.push_back(g(rng) + 3.0);
    const auto z = zscore_cross_section(v);
    REQUIRE_FALSE(z.degenerate);
    double mean = 0.0;
    for (double x : z.values) mean += x;
    mean /= double(n);
    double ss = 0.0;
    for (double x : z.values) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / double(n - 1));
    CHECK(std::fabs(mean) < 1e-10);
    CHECK(std::fabs(sd - 1.0) < 1e-10);
  }
}

TEST_CASE("screen config validation") {
  ScreenConfig bad;
  bad.min_history_days = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "alphaloom/expr.hpp"
#include "alphaloom/metrics.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace alphaloom;
using testsup::day;
using testsup::obs;

namespace {

// panel whose fwd returns at day 0 are chosen directly; scores set via a grid
struct Scored {
  Panel panel;
  FactorSeries scores;
};

// one formation date (day 0), returns realized on day 1
Scored make_cross_section(const std::vector<double>& scores, const std::vector<double>& fwd) {
  std::vector<RawObservation> rows;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    char name[16];
    std::snprintf(name, sizeof(name), "S%03zu", s);
    rows.push_back(obs(day(0), name, 0.0, 10, 100));
    rows.push_back(obs(day(1), name, fwd[s], 10, 100));
  }
  Scored out{Panel::from_observations(rows), {}};
  out.scores.values.assign(out.panel.n_stocks() * 2, nan_value());
  out.scores.range_start = 0;
  out.scores.range_end = 1;
  out.scores.coverage.assign(2, 1.0);
  for (std::size_t s = 0; s < scores.size(); ++s) out.scores.values[s * 2 + 0] = scores[s];
  return out;
}

}  // namespace

TEST_CASE("rank_ic: perfect monotone alignment") {
  std::vector<double> sc, fw;
  for (int i = 0; i < 15; ++i) {
    sc.push_back(double(i));
    fw.push_back(0.001 * double(i));
  }
  Scored x = make_cross_section(sc, fw);
  const IcSeries ic = rank_ic(x.scores, x.panel, 0, 0, 10);
  REQUIRE(ic.values.size() == 1);
  CHECK(ic.values[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("rank_ic: anti-monotone gives -1") {
  std::vector<double> sc, fw;
  for (int i = 0; i < 15; ++i) {
    sc.push_back(double(i));
    fw.push_back(-0.001 * double(i));
  }
  Scored x = make_cross_section(sc, fw);
  CHECK(rank_ic(x.scores, x.panel, 0, 0, 10).values[0] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("rank_ic: matches the brute-force Spearman oracle with ties") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 10 + int(rng() % 20);
    std::vector<double> sc, fw;
    for (int i = 0; i < n; ++i) {
      double s = g(rng);
      double f = g(rng) * 0.01;
      if (rng() % 4 == 0 && i > 0) s = sc[std::size_t(i - 1)];  // inject ties
      sc.push_back(s);
      fw.push_back(f);
    }
    Scored x = make_cross_section(sc, fw);
    const IcSeries ic = rank_ic(x.scores, x.panel, 0, 0, 10);
    REQUIRE(ic.values.size() == 1);
    CHECK(std::fabs(ic.values[0] - oracle::spearman(sc, fw)) < 1e-12);
  }
}

TEST_CASE("rank_ic: thin and degenerate dates are excluded and counted") {
  std::vector<double> sc(5, 1.0), fw(5, 0.01);
  for (int i = 0; i < 5; ++i) sc[std::size_t(i)] = double(i);
  Scored x = make_cross_section(sc, fw);  // zero return variance
  const IcSeries ic = rank_ic(x.scores, x.panel, 0, 0, 3);
  CHECK(ic.values.empty());
  CHECK(ic.excluded_dates == 1);

  const IcSeries thin = rank_ic(x.scores, x.panel, 0, 0, 10);  // below min_names
  CHECK(thin.excluded_dates == 1);
}

TEST_CASE("ic_tstat: worked examples") {
  const IcAggregate sym = ic_tstat({0.1, -0.1});
  CHECK(sym.mean == doctest::Approx(0.0));
  CHECK(sym.tstat == doctest::Approx(0.0));

  const IcAggregate a = ic_tstat({0.02, 0.04, 0.06});
  CHECK(a.mean == doctest::Approx(0.04));
  CHECK(a.tstat == doctest::Approx(0.04 / (0.02 / std::sqrt(3.0))).epsilon(1e-12));
  CHECK(a.tstat == doctest::Approx(3.4641016151).epsilon(1e-9));
  CHECK(a.icir == doctest::Approx(2.0));

  const IcAggregate c = ic_tstat({0.05, 0.05, 0.05});
  CHECK(c.degenerate);
  CHECK(std::isnan(c.tstat));
}

TEST_CASE("quantile_sort: exact division puts the best score in the top bucket") {
  std::vector<double> sc;
  for (int i = 0; i < 10; ++i) sc.push_back(double((i * 7) % 10));
  const auto buckets = quantile_sort(sc, 10);
  for (std::size_t i = 0; i < sc.size(); ++i) {
    CHECK(buckets[i] == int(sc[i]) + 1);
  }
}

TEST_CASE("quantile_sort: remainder goes to the bottom bucket") {
  std::vector<double> sc;
  for (int i = 0; i < 11; ++i) sc.push_back(double(i));
  const auto buckets = quantile_sort(sc, 10);
  std::vector<int> sizes(11, 0);
  for (int b : buckets) ++sizes[std::size_t(b)];
  CHECK(sizes[1] == 2);
  for (int q = 2; q <= 10; ++q) CHECK(sizes[std::size_t(q)] == 1);
  CHECK(buckets[10] == 10);  // highest score in the top decile
  CHECK(buckets[0] == 1);
  CHECK(buckets[1] == 1);  // the extra low name joins the bottom bucket
}

TEST_CASE("quantile_sort: matches a sort-then-slice oracle") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> sc;
  for (int i = 0; i < 100; ++i) sc.push_back(g(rng));
  const int Q = 5;
  const auto buckets = quantile_sort(sc, Q);

  std::vector<std::size_t> order(sc.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sc[a] < sc[b]; });
  const std::size_t base = sc.size() / Q;
  const std::size_t rem = sc.size() % Q;
  std::size_t pos = 0;
  for (int q = 1; q <= Q; ++q) {
    const std::size_t size = base + (std::size_t(q) <= rem ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) CHECK(buckets[order[pos++]] == q);
  }
}

TEST_CASE("quantile_sort: deterministic tie handling by stock order") {
  const std::vector<double> sc = {1.0, 1.0, 1.0, 1.0};
  const auto buckets = quantile_sort(sc, 2);
  CHECK(buckets == std::vector<int>{1, 1, 2, 2});
}

TEST_CASE("long_short_returns: hand means and symmetry") {
  // two quantiles: top returns {0.02, 0.04}, bottom {0.00, 0.02}
  Scored x = make_cross_section({1.0, 2.0, 3.0, 4.0}, {0.00, 0.02, 0.02, 0.04});
  const SpreadSeries s = long_short_returns(x.scores, x.panel, 0, 0, 2);
  REQUIRE(s.values.size() == 1);
  CHECK(s.values[0] == doctest::Approx(0.02).epsilon(1e-14));

  // identical legs give zero spread
  Scored y = make_cross_section({1.0, 2.0, 3.0, 4.0}, {0.01, 0.01, 0.01, 0.01});
  CHECK(long_short_returns(y.scores, y.panel, 0, 0, 2).values[0] == doctest::Approx(0.0));
}

TEST_CASE("long_short_returns: 50-date run matches an independent leg-mean oracle") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.0);
  const int S = 20, T = 51, Q = 4;
  std::vector<RawObservation> rows;
  std::vector<std::vector<double>> rets(std::size_t(S), std::vector<double>(std::size_t(T), 0.0));
  for (int s = 0; s < S; ++s) {
    char name[16];
    std::snprintf(name, sizeof(name), "S%03d", s);
    for (int t = 0; t < T; ++t) {
      rets[std::size_t(s)][std::size_t(t)] = 0.01 * g(rng);
      rows.push_back(obs(day(t), name, rets[std::size_t(s)][std::size_t(t)], 10, 100));
    }
  }
  const Panel panel = Panel::from_observations(rows);
  FactorSeries scores;
  scores.values.assign(std::size_t(S * T), nan_value());
  scores.range_start = 0;
  scores.range_end = T - 1;
  scores.coverage.assign(std::size_t(T), 1.0);
  std::vector<std::vector<double>> sc(std::size_t(S), std::vector<double>(std::size_t(T), 0.0));
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < T; ++t) {
      sc[std::size_t(s)][std::size_t(t)] = g(rng);
      scores.values[std::size_t(s) * std::size_t(T) + std::size_t(t)] =
          sc[std::size_t(s)][std::size_t(t)];
    }
  }
  const SpreadSeries got = long_short_returns(scores, panel, 0, T - 2, Q);
  REQUIRE(got.values.size() == std::size_t(T - 1));

  for (int t = 0; t + 1 < T; ++t) {
    // oracle: sort stocks by score, slice into quartiles, average raw fwd rets
    std::vector<std::size_t> order(std::size_t(S), 0);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sc[a][std::size_t(t)] < sc[b][std::size_t(t)];
    });
    const std::size_t per = std::size_t(S / Q);
    double bot = 0.0, top = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      bot += rets[order[k]][std::size_t(t + 1)];
      top += rets[order[std::size_t(S) - 1 - k]][std::size_t(t + 1)];
    }
    CHECK(got.values[std::size_t(t)] == doctest::Approx((top - bot) / double(per)).epsilon(1e-12));
  }
}

TEST_CASE("perf_summary: drawdown from equity {100, 50, 75}") {
  // returns that realize the equity path
  const PerfSummary p = perf_summary({-0.5, 0.5});
  CHECK(p.max_drawdown == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("perf_summary: monotone equity has zero drawdown and undefined calmar") {
  const PerfSummary p = perf_summary({0.01, 0.0, 0.02, 0.0});
  CHECK(p.max_drawdown == 0.0);
  CHECK(std::isnan(p.calmar));
}

TEST_CASE("perf_summary: sharpe formula at mean 0.001 and std 0.01") {
  // alternating series with population mean .001 and population std .01
  std::vector<double> r;
  for (int i = 0; i < 500; ++i) r.push_back(i % 2 ? 0.011 : -0.009);
  const PerfSummary p = perf_summary(r);
  CHECK(p.sharpe == doctest::Approx(std::sqrt(252.0) * 0.1).epsilon(1e-12));
  CHECK(p.sharpe == doctest::Approx(1.5875).epsilon(1e-4));
  CHECK(p.ann_vol == doctest::Approx(std::sqrt(252.0) * 0.01).epsilon(1e-12));
}

TEST_CASE("perf_summary: max drawdown equals the all-pairs oracle") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.02);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 2 + int(rng() % 200);
    std::vector<double> r;
    std::vector<double> equity;
    double eq = 1.0;
    for (int i = 0; i < n; ++i) {
      r.push_back(g(rng));
      eq *= 1.0 + r.back();
      equity.push_back(eq);
    }
    const PerfSummary p = perf_summary(r);
    CHECK(p.max_drawdown == doctest::Approx(oracle::max_drawdown_allpairs(equity)).epsilon(1e-12));
  }
}

TEST_CASE("perf_summary: sharpe invariant under series duplication") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.001, 0.02);
  std::vector<double> r;
  for (int i = 0; i < 37; ++i) r.push_back(g(rng));
  std::vector<double> twice = r;
  twice.insert(twice.end(), r.begin(), r.end());
  const double a = perf_summary(r).sharpe;
  const double b = perf_summary(twice).sharpe;
  CHECK(std::fabs(a - b) < 1e-12);
}

TEST_CASE("perf_summary: zero volatility leaves sharpe undefined") {
  const PerfSummary p = perf_summary({0.01, 0.01, 0.01});
  CHECK(std::isnan(p.sharpe));
  CHECK(p.ann_return > 0.0);
}

TEST_CASE("long_only_ic: full-universe fraction reproduces mean IC") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  const int S = 30, T = 40;
  Panel panel = testsup::random_panel(S, T, 314);
  FactorSeries scores;
  scores.values.assign(std::size_t(S * T), nan_value());
  scores.range_start = 0;
  scores.range_end = T - 1;
  scores.coverage.assign(std::size_t(T), 1.0);
  for (std::size_t i = 0; i < scores.values.size(); ++i) scores.values[i] = g(rng);

  const LongOnlyIc full = long_only_ic(scores, panel, 0, T - 2, 1.0, 10);
  const IcSeries ic = rank_ic(scores, panel, 0, T - 2, 10);
  const IcAggregate agg = ic_tstat(ic.values);
  CHECK(full.icl == doctest::Approx(agg.mean).epsilon(1e-12));
  CHECK(full.iclir == doctest::Approx(agg.icir).epsilon(1e-12));
}

TEST_CASE("long_only_ic: perfect ordering within the top half") {
  // top half of scores perfectly ordered against returns, bottom half noise
  std::vector<double> sc, fw;
  for (int i = 0; i < 20; ++i) sc.push_back(double(i));
  for (int i = 0; i < 10; ++i) fw.push_back(((i * 13) % 7) * 0.001 - 0.002);  // scrambled
  for (int i = 10; i < 20; ++i) fw.push_back(0.01 + 0.001 * double(i));       // aligned
  Scored x = make_cross_section(sc, fw);
  const LongOnlyIc lo = long_only_ic(x.scores, x.panel, 0, 0, 0.5, 5);
  CHECK(lo.icl == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("long_only_ic: matches a filter-then-Spearman oracle") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 31;
  std::vector<double> sc, fw;
  for (int i = 0; i < n; ++i) {
    sc.push_back(g(rng));
    fw.push_back(0.01 * g(rng));
  }
  Scored x = make_cross_section(sc, fw);
  const LongOnlyIc lo = long_only_ic(x.scores, x.panel, 0, 0, 0.5, 5);

  std::vector<std::size_t> order(std::size_t(n), 0);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sc[a] > sc[b]; });
  const std::size_t k = std::size_t(std::ceil(n * 0.5));
  std::vector<double> ts, tf;
  for (std::size_t i = 0; i < k; ++i) {
    ts.push_back(sc[order[i]]);
    tf.push_back(fw[order[i]]);
  }
  CHECK(lo.icl == doctest::Approx(oracle::spearman(ts, tf)).epsilon(1e-12));
}

TEST_CASE("compute_eval_metrics: protocol uniformity via the config hash") {
  const Panel panel = build_primitives(testsup::random_panel(25, 60, 8));
  const MetricsConfig cfg;
  const FactorSeries a = evaluate(FactorExpr::parse("cs_rank(vol_ratio)"), panel);
  const FactorSeries b = evaluate(FactorExpr::parse("cs_rank(vol_growth)"), panel);
  const EvalMetrics ma = compute_eval_metrics(a, panel, 20, 58, cfg);
  const EvalMetrics mb = compute_eval_metrics(b, panel, 20, 58, cfg);
  CHECK(ma.config_hash == mb.config_hash);
  CHECK(ma.n_days == mb.n_days);

  MetricsConfig other;
  other.quantiles = 5;
  CHECK(other.config_hash() != cfg.config_hash());
}

TEST_CASE("spread anti-symmetry: negated scores negate the spread date by date") {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> g(0.0, 1.0);
  const int S = 24, T = 30;
  const Panel panel = testsup::random_panel(S, T, 999);
  FactorSeries scores;
  scores.values.assign(std::size_t(S * T), nan_value());
  scores.range_start = 0;
  scores.range_end = T - 1;
  scores.coverage.assign(std::size_t(T), 1.0);
  for (auto& v : scores.values) v = g(rng);
  FactorSeries negated = scores;
  for (auto& v : negated.values) v = -v;

  const SpreadSeries sp = long_short_returns(scores, panel, 0, T - 2, 4);
  const SpreadSeries sn = long_short_returns(negated, panel, 0, T - 2, 4);
  REQUIRE(sp.values.size() == sn.values.size());
  for (std::size_t i = 0; i < sp.values.size(); ++i) {
    CHECK(sp.values[i] == doctest::Approx(-sn.values[i]).epsilon(1e-12));
  }
}

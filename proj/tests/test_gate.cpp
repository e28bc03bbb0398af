#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "alphaloom/errors.hpp"
#include "alphaloom/gate.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace alphaloom;

namespace {

EvalMetrics metrics_with(double t, double sharpe) {
  EvalMetrics m;
  m.ic_tstat = t;
  m.sharpe = sharpe;
  m.mean_ic = 0.01;
  m.n_days = 100;
  return m;
}

GateThresholds thresholds(double sig = 3.0, double econ = 1.0, double fail = 1.0,
                          double hurdle = 3.0) {
  GateThresholds th;
  th.tau_sig = sig;
  th.tau_econ = econ;
  th.tau_fail = fail;
  th.hurdle_t = hurdle;
  return th;
}

int verdict_order(Verdict v) {
  switch (v) {
    case Verdict::Retire:
      return 0;
    case Verdict::Hold:
      return 1;
    case Verdict::Promote:
      return 2;
  }
  return 0;
}

}  // namespace

TEST_CASE("decide: worked promote / retire / hold cells") {
  const GateThresholds th = thresholds(3.0, 1.0, 1.0, 3.0);
  CHECK(decide(metrics_with(3.5, 2.0), th).verdict == Verdict::Promote);
  CHECK(decide(metrics_with(0.5, 2.0), th).verdict == Verdict::Retire);
  CHECK(decide(metrics_with(2.0, 2.0), th).verdict == Verdict::Hold);
}

TEST_CASE("decide: piecewise rule on a grid straddling every boundary") {
  const GateThresholds th = thresholds(2.5, 1.0, 1.0, 3.0);
  const double ts[] = {0.5, 0.999, 1.0, 2.0, 2.5, 2.999, 3.0, 3.5};
  const double ss[] = {-1.0, 0.5, 0.999, 1.0, 1.5, 3.0};
  for (double t : ts) {
    for (double s : ss) {
      const Verdict got = decide(metrics_with(t, s), th).verdict;
      Verdict want;
      if (t >= std::max(th.tau_sig, th.hurdle_t) && s >= th.tau_econ) {
        want = Verdict::Promote;
      } else if (t < th.tau_fail) {
        want = Verdict::Retire;
      } else {
        want = Verdict::Hold;
      }
      CHECK(got == want);
    }
  }
}

TEST_CASE("decide: raising t or sharpe never demotes") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 6.0);
  for (int i = 0; i < 1000; ++i) {
    const double fail = u(rng);
    const double sig = fail + std::fabs(u(rng)) + 0.01;
    GateThresholds th = thresholds(sig, u(rng), fail, u(rng));
    const double t = u(rng), s = u(rng);
    const Verdict base = decide(metrics_with(t, s), th).verdict;
    const Verdict up_t = decide(metrics_with(t + std::fabs(u(rng)), s), th).verdict;
    const Verdict up_s = decide(metrics_with(t, s + std::fabs(u(rng))), th).verdict;
    CHECK(verdict_order(up_t) >= verdict_order(base));
    CHECK(verdict_order(up_s) >= verdict_order(base));
  }
}

TEST_CASE("decide: undefined sentinel metrics force Retire with a reason") {
  const GateThresholds th = thresholds();
  EvalMetrics m = metrics_with(nan_value(), 2.0);
  const GateDecision d = decide(m, th);
  CHECK(d.verdict == Verdict::Retire);
  REQUIRE_FALSE(d.reasons.empty());
  CHECK(d.reasons[0].find("undefined") != std::string::npos);
}

TEST_CASE("decide: config-hash mismatch is a protocol violation") {
  EvalMetrics m = metrics_with(3.5, 2.0);
  m.config_hash = "aaaa";
  CHECK_THROWS_AS(decide(m, thresholds(), "bbbb"), ProtocolError);
  CHECK_NOTHROW(decide(m, thresholds(), "aaaa"));
}

TEST_CASE("decide: replaying the stored snapshot reproduces the verdict") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 5.0);
  const GateThresholds th = thresholds();
  for (int i = 0; i < 200; ++i) {
    const GateDecision d = decide(metrics_with(u(rng), u(rng)), th);
    const GateDecision re = decide(d.metrics, th);
    CHECK(re.verdict == d.verdict);
    CHECK(re.reasons == d.reasons);
  }
}

TEST_CASE("thresholds: tau_fail must stay below tau_sig") {
  GateThresholds th = thresholds(1.0, 1.0, 1.0, 3.0);
  CHECK_THROWS_AS(th.validate(), ConfigError);
}

TEST_CASE("redundancy: identical candidate fails, empty library passes") {
  const Panel panel = testsup::random_panel(30, 80, 500);
  FactorSeries a;
  a.values.assign(panel.n_stocks() * panel.n_dates(), nan_value());
  a.range_start = 0;
  a.range_end = int(panel.n_dates()) - 1;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : a.values) v = g(rng);
  a.expr_text = "candidate";

  const RedundancyResult empty = redundancy_check(a, {}, panel, 0, 79, 0.8, 60);
  CHECK(empty.pass);
  CHECK(empty.max_abs_corr == 0.0);

  const RedundancyResult self = redundancy_check(a, {a}, panel, 0, 79, 0.8, 60);
  CHECK_FALSE(self.pass);
  CHECK(self.max_abs_corr == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("redundancy: independent series stay low and match the per-date oracle") {
  const int S = 50, T = 100;
  const Panel panel = testsup::random_panel(S, T, 123);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  auto randomized = [&](const char* name) {
    FactorSeries f;
    f.expr_text = name;
    f.range_start = 0;
    f.range_end = T - 1;
    f.values.assign(std::size_t(S * T), nan_value());
    for (auto& v : f.values) v = g(rng);
    return f;
  };
  const FactorSeries cand = randomized("cand");
  const FactorSeries mem = randomized("mem");

  const RedundancyResult res = redundancy_check(cand, {mem}, panel, 0, T - 1, 0.8, 60);
  CHECK(res.pass);
  CHECK(std::fabs(res.per_member_avg_corr[0]) < 0.2);

  // oracle: average of per-date brute-force Spearman
  double sum = 0.0;
  int n = 0;
  for (int t = 0; t < T; ++t) {
    std::vector<double> x, y;
    for (int s = 0; s < S; ++s) {
      x.push_back(cand.values[std::size_t(s) * std::size_t(T) + std::size_t(t)]);
      y.push_back(mem.values[std::size_t(s) * std::size_t(T) + std::size_t(t)]);
    }
    sum += oracle::spearman(x, y);
    ++n;
  }
  CHECK(res.per_member_avg_corr[0] == doctest::Approx(sum / n).epsilon(1e-12));
}

TEST_CASE("redundancy: insufficient overlap violates the precondition") {
  const Panel panel = testsup::random_panel(10, 20, 7);
  FactorSeries a;
  a.values.assign(panel.n_stocks() * panel.n_dates(), 1.0);
  a.range_start = 0;
  a.range_end = 19;
  CHECK_THROWS_AS(redundancy_check(a, {a}, panel, 0, 19, 0.8, 60), std::invalid_argument);
}

TEST_CASE("feasibility: zero turnover passes") {
  GateThresholds th = thresholds();
  th.max_turnover = 1.5;
  const FeasibilityResult r = feasibility_check({0.0, 0.0, 0.0}, {}, th);
  CHECK(r.pass);
  CHECK_FALSE(r.turnover_breach);
}

TEST_CASE("feasibility: turnover above the ceiling is a breach") {
  GateThresholds th = thresholds();
  th.max_turnover = 1.0;
  const FeasibilityResult r = feasibility_check({1.8, 1.9, 2.0}, {}, th);
  CHECK_FALSE(r.pass);
  CHECK(r.turnover_breach);
}

TEST_CASE("feasibility: rapid decay flag at H2 below a quarter of H1") {
  const GateThresholds th = thresholds();
  const FeasibilityResult fast = feasibility_check({}, {0.40, 0.05}, th);
  CHECK(fast.rapid_decay);
  const FeasibilityResult slow = feasibility_check({}, {0.40, 0.35, 0.30, 0.28, 0.27, 0.26, 0.38},
                                                   th);
  CHECK_FALSE(slow.rapid_decay);
}

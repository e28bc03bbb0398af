#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <set>

#include "alphaloom/errors.hpp"
#include "alphaloom/expr.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace alphaloom;
using testsup::day;
using testsup::obs;

namespace {

// independent recursive tree walk used as the complexity oracle
void walk(const ExprNode& n, int depth, int& max_depth, int& count) {
  if (depth > max_depth) max_depth = depth;
  ++count;
  for (const auto& c : n.children) walk(c, depth + 1, max_depth, count);
}

// test-side random expression builder over the operator set
ExprNode random_tree(std::mt19937_64& rng, int depth_left) {
  const auto pick = [&](const std::vector<std::string>& v) {
    return v[rng() % v.size()];
  };
  const int kind = depth_left <= 1 ? 0 : int(rng() % 5);
  ExprNode n;
  switch (kind) {
    case 0:
      n.kind = NodeKind::Primitive;
      n.op = kPrimitiveNames[rng() % kPrimitiveNames.size()];
      break;
    case 1:
      n.kind = NodeKind::Unary;
      n.op = pick(OperatorSet::unary());
      n.children.push_back(random_tree(rng, depth_left - 1));
      break;
    case 2:
      n.kind = NodeKind::Binary;
      n.op = pick(OperatorSet::binary());
      n.children.push_back(random_tree(rng, depth_left - 1));
      n.children.push_back(random_tree(rng, depth_left - 1));
      break;
    case 3: {
      n.kind = NodeKind::Windowed;
      n.op = pick(OperatorSet::windowed());
      n.window = 1 + int(rng() % 5);
      ExprNode child = random_tree(rng, depth_left - 1);
      if (n.op == "lag" && child.kind == NodeKind::Primitive && child.op == "ret") {
        n.window = std::max(n.window, 1);
      }
      n.children.push_back(std::move(child));
      break;
    }
    default:
      n.kind = NodeKind::CrossSectional;
      n.op = pick(OperatorSet::cross_sectional());
      n.children.push_back(random_tree(rng, depth_left - 1));
      break;
  }
  return n;
}

Panel panel_with_gap() {
  // BBB skips 2020-01-03: the lag must use its previous trading date
  std::vector<RawObservation> rows;
  for (int t = 0; t < 5; ++t) rows.push_back(obs(day(t), "AAA", 0.01 * (t + 1), 10 + t, 100));
  for (int t : {0, 1, 3, 4}) rows.push_back(obs(day(t), "BBB", 0.10 * (t + 1), 20 + t, 200));
  return build_primitives(Panel::from_observations(rows));
}

}  // namespace

TEST_CASE("parse: minimal expression and canonical round trip") {
  const FactorExpr e = FactorExpr::parse("lag(ret, 1)");
  CHECK(e.text() == "lag(ret,1)");
  const auto c = e.complexity();
  CHECK(c.nodes == 2);
  CHECK(c.depth == 2);
  // canonical form is a fixed point
  CHECK(FactorExpr::parse(e.text()).text() == e.text());
}

TEST_CASE("parse: negative lag is a window-bound error") {
  CHECK_THROWS_WITH_AS(FactorExpr::parse("lag(ret, -1)"), doctest::Contains("window"),
                       ParseError);
}

TEST_CASE("parse: unknown operator is named") {
  CHECK_THROWS_WITH_AS(FactorExpr::parse("lead(ret, 1)"), doctest::Contains("lead"), ParseError);
}

TEST_CASE("parse: arity mismatch is named") {
  CHECK_THROWS_WITH_AS(FactorExpr::parse("add(ret, ret, ret)"), doctest::Contains("add"),
                       ParseError);
  CHECK_THROWS_AS(FactorExpr::parse("abs(ret, ret)"), ParseError);
}

TEST_CASE("parse: depth budget error cites the depth") {
  // depth 7 chain under the default max_depth 6
  CHECK_THROWS_WITH_AS(FactorExpr::parse("abs(abs(abs(abs(abs(abs(ret))))))"),
                       doctest::Contains("7"), BudgetError);
}

TEST_CASE("parse: node budget enforced") {
  GrammarBudget tight;
  tight.max_depth = 10;
  tight.max_nodes = 3;
  CHECK_THROWS_AS(FactorExpr::parse("add(add(ret,ret),ret)", tight), BudgetError);
}

TEST_CASE("complexity: worked examples and the recursive-count oracle") {
  CHECK(FactorExpr::parse("ret").complexity().depth == 1);
  CHECK(FactorExpr::parse("ret").complexity().nodes == 1);
  const auto c = FactorExpr::parse("add(ret,ret)").complexity();
  CHECK(c.depth == 2);
  CHECK(c.nodes == 3);

  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    GrammarBudget roomy;
    roomy.max_depth = 8;
    roomy.max_nodes = 200;
    const FactorExpr e = FactorExpr::from_node(random_tree(rng, 5), roomy);
    int depth = 0, nodes = 0;
    walk(e.root(), 1, depth, nodes);
    const auto got = e.complexity();
    CHECK(got.depth == depth);
    CHECK(got.nodes == nodes);
  }
}

TEST_CASE("structural hash equality iff canonical text equality") {
  std::mt19937_64 rng(23);
  std::vector<FactorExpr> exprs;
  GrammarBudget roomy;
  roomy.max_depth = 8;
  roomy.max_nodes = 200;
  for (int i = 0; i < 60; ++i) exprs.push_back(FactorExpr::from_node(random_tree(rng, 4), roomy));
  for (const auto& a : exprs) {
    for (const auto& b : exprs) {
      CHECK((a.hash() == b.hash()) == (a.text() == b.text()));
    }
  }
}

TEST_CASE("cs_rank: strictly increasing vector") {
  const auto r = cs_rank_vector({1.0, 2.0, 3.0, 4.0, 5.0});
  for (int i = 0; i < 5; ++i) CHECK(r[std::size_t(i)] == doctest::Approx(i / 4.0));
}

TEST_CASE("cs_rank: full tie maps to 0.5") {
  for (double v : cs_rank_vector({7.0, 7.0, 7.0})) CHECK(v == 0.5);
}

TEST_CASE("cs_rank: average-rank ties {3,1,3}") {
  const auto r = cs_rank_vector({3.0, 1.0, 3.0});
  CHECK(r[0] == doctest::Approx(0.75));
  CHECK(r[1] == doctest::Approx(0.0));
  CHECK(r[2] == doctest::Approx(0.75));
}

TEST_CASE("cs_rank: single finite value gets the midpoint, flagged") {
  bool flagged = false;
  const auto r = cs_rank_vector({nan_value(), 4.0, nan_value()}, &flagged);
  CHECK(flagged);
  CHECK(r[1] == 0.5);
  CHECK(std::isnan(r[0]));
}

TEST_CASE("cs_rank: invariant under strictly monotone transforms") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v;
  for (int i = 0; i < 40; ++i) v.push_back(g(rng));
  std::vector<double> w;
  for (double x : v) w.push_back(std::exp(3.0 * x) + 10.0);
  CHECK(cs_rank_vector(v) == cs_rank_vector(w));
}

TEST_CASE("evaluate: lag uses the stock's previous trading date") {
  const Panel p = panel_with_gap();
  const FactorSeries s = evaluate(FactorExpr::parse("lag(ret,1)"), p);
  const std::size_t bbb = 1;  // sorted ids: AAA, BBB
  REQUIRE(p.stock_ids()[bbb] == "BBB");
  // BBB observed on day indices 0,1,3,4; at index 3 the lag is day 1's value
  CHECK(s.at(bbb, 3, p.n_dates()) == doctest::Approx(0.10 * 2));
  CHECK(std::isnan(s.at(bbb, 2, p.n_dates())));  // not observed that day
  CHECK(std::isnan(s.at(bbb, 0, p.n_dates())));  // no history yet
}

TEST_CASE("evaluate: rolling_mean hand value") {
  std::vector<RawObservation> rows;
  const double prices[] = {1.0, 2.0, 3.0, 4.0};
  for (int t = 0; t < 4; ++t) rows.push_back(obs(day(t), "AAA", 0.0, prices[t], 100));
  const Panel p = Panel::from_observations(rows);
  const FactorSeries s = evaluate(FactorExpr::parse("rolling_mean(price,3)"), p);
  CHECK(s.at(0, 3, 4) == doctest::Approx(3.0));
  CHECK(std::isnan(s.at(0, 1, 4)));
}

TEST_CASE("evaluate: cs_rank across a date") {
  std::vector<RawObservation> rows;
  rows.push_back(obs(day(0), "AAA", 0.0, 10.0, 100));
  rows.push_back(obs(day(0), "BBB", 0.0, 20.0, 100));
  rows.push_back(obs(day(0), "CCC", 0.0, 30.0, 100));
  const Panel p = Panel::from_observations(rows);
  const FactorSeries s = evaluate(FactorExpr::parse("cs_rank(price)"), p);
  CHECK(s.at(0, 0, 1) == doctest::Approx(0.0));
  CHECK(s.at(1, 0, 1) == doctest::Approx(0.5));
  CHECK(s.at(2, 0, 1) == doctest::Approx(1.0));
}

TEST_CASE("evaluate: protected division and no NaN/inf escape") {
  std::vector<RawObservation> rows;
  rows.push_back(obs(day(0), "AAA", -2.0, 10.0, 0.0));   // log1p(-2) undefined
  rows.push_back(obs(day(0), "BBB", 1e-13, 20.0, 100));  // |denominator| below guard
  const Panel p = Panel::from_observations(rows);
  const FactorSeries s = evaluate(FactorExpr::parse("div(price,ret)"), p);
  CHECK(std::isnan(s.at(1, 0, 1)));
  CHECK_FALSE(std::isnan(s.at(0, 0, 1)));  // -5: plain division
  const FactorSeries l = evaluate(FactorExpr::parse("log1p(ret)"), p);
  CHECK(std::isnan(l.at(0, 0, 1)));

  // nothing non-finite may leave the evaluator
  std::mt19937_64 rng(31);
  const Panel prim = build_primitives(testsup::random_panel(6, 40, 77));
  GrammarBudget roomy;
  roomy.max_depth = 8;
  roomy.max_nodes = 200;
  for (int i = 0; i < 50; ++i) {
    const FactorExpr e = FactorExpr::from_node(random_tree(rng, 4), roomy);
    const FactorSeries s2 = evaluate(e, prim);
    for (double v : s2.values) CHECK_FALSE(std::isinf(v));
  }
}

TEST_CASE("validate_no_lookahead: grammar expressions pass, lag(ret,0) violates") {
  CHECK_NOTHROW(validate_no_lookahead(FactorExpr::parse("cs_rank(delta(volume,1))")));

  ExprNode bad;
  bad.kind = NodeKind::Windowed;
  bad.op = "lag";
  bad.window = 0;
  ExprNode leaf;
  leaf.kind = NodeKind::Primitive;
  leaf.op = "ret";
  bad.children.push_back(leaf);
  const FactorExpr e = FactorExpr::from_node(bad, {}, false);
  CHECK_THROWS_AS(validate_no_lookahead(e), LookaheadViolation);

  // lag 0 elsewhere is legal
  CHECK_NOTHROW(FactorExpr::parse("lag(volume,0)"));
}

TEST_CASE("validate_no_lookahead: legal tree at exactly max_depth passes") {
  const FactorExpr e = FactorExpr::parse("abs(abs(abs(abs(abs(ret)))))");  // depth 6
  CHECK(e.complexity().depth == 6);
  CHECK_NOTHROW(validate_no_lookahead(e));
}

TEST_CASE("evaluate: future mutation never changes values at or before t") {
  std::mt19937_64 rng(41);
  GrammarBudget roomy;
  roomy.max_depth = 6;
  roomy.max_nodes = 24;
  const int cut = 25;
  const Panel base = build_primitives(testsup::random_panel(10, 40, 1234));

  // rebuild with garbage after the cut
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
      if (t > cut) {
        o.ret = -0.99;
        o.price = 1e6;
        o.volume = 1.0;
        o.market_ret_vw = 0.77;
      }
      mutated.push_back(std::move(o));
    }
  }
  const Panel mut = build_primitives(Panel::from_observations(std::move(mutated)));

  int checked = 0;
  for (int i = 0; i < 30; ++i) {
    ExprNode node = random_tree(rng, 4);
    FactorExpr e;
    try {
      e = FactorExpr::from_node(std::move(node), roomy);
    } catch (const std::exception&) {
      continue;  // over budget, draw again
    }
    const FactorSeries a = evaluate(e, base);
    const FactorSeries b = evaluate(e, mut);
    for (std::size_t s = 0; s < base.n_stocks(); ++s) {
      for (int t = 0; t <= cut; ++t) {
        const double x = a.at(s, std::size_t(t), T);
        const double y = b.at(s, std::size_t(t), T);
        if (std::isnan(x)) {
          CHECK(std::isnan(y));
        } else {
          CHECK(x == y);
        }
      }
    }
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("evaluate: determinism across repeated runs") {
  const Panel p = build_primitives(testsup::random_panel(8, 30, 5));
  const FactorExpr e = FactorExpr::parse("cs_rank(div(volume,rolling_mean(volume,5)))");
  const FactorSeries a = evaluate(e, p);
  const FactorSeries b = evaluate(e, p);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (std::isnan(a.values[i])) {
      CHECK(std::isnan(b.values[i]));
    } else {
      CHECK(a.values[i] == b.values[i]);
    }
  }
}

#pragma once

#include <string>
#include <vector>

#include "alphaloom/dates.hpp"
#include "alphaloom/expr.hpp"
#include "alphaloom/panel.hpp"

namespace alphaloom {

struct MetricsConfig {
  int quantiles = 10;
  int min_names = 10;        // IC validity floor per date
  double leg_fraction = 0.5;  // long-only IC leg
  int trading_days = 252;

  std::string config_hash() const;
};

/// The unified per-factor performance vector. Undefined entries are NaN.
struct EvalMetrics {
  double mean_ic = nan_value();
  double ic_tstat = nan_value();
  double icir = nan_value();
  double icl = nan_value();
  double iclir = nan_value();
  double ann_return = nan_value();
  double ann_vol = nan_value();
  double sharpe = nan_value();
  double sortino = nan_value();
  double calmar = nan_value();
  double max_drawdown = nan_value();  // positive magnitude
  std::size_t n_days = 0;
  std::size_t n_valid_dates = 0;
  double avg_coverage = 0.0;
  Date window_start = 0;
  Date window_end = 0;
  std::string config_hash;
};

struct IcSeries {
  std::vector<Date> dates;
  std::vector<double> values;
  std::size_t excluded_dates = 0;  // below min_names or zero variance
};

// Per-date Spearman correlation between scores at t and returns over
// (t, t+1], over the intersection of finite entries.
IcSeries rank_ic(const FactorSeries& scores, const Panel& panel, int d0, int d1,
                 int min_names = 10);

struct IcAggregate {
  double mean = nan_value();
  double tstat = nan_value();
  double icir = nan_value();
  bool degenerate = false;  // zero dispersion across dates
};
IcAggregate ic_tstat(const std::vector<double>& ic_series);

struct QuantileAssignment {
  // per requested date: stock index -> bucket 1..Q (0 = unassigned)
  std::vector<std::vector<int>> buckets;
  std::vector<int> date_indices;
  int Q = 0;
  std::size_t skipped_dates = 0;  // breadth below Q
};

// Ascending-score buckets, Low = 1 .. High = Q; sizes differ by at most one
// with remainders filled from the bottom bucket upward; ties broken by stock
// id order.
std::vector<int> quantile_sort(const std::vector<double>& scores, int Q);

struct SpreadSeries {
  std::vector<int> date_indices;    // formation dates
  std::vector<double> values;       // top-minus-bottom equal-weight spread
  std::size_t skipped_dates = 0;
};

SpreadSeries long_short_returns(const FactorSeries& scores, const Panel& panel, int d0, int d1,
                                int Q);

struct PerfSummary {
  double ann_return = nan_value();
  double ann_vol = nan_value();
  double sharpe = nan_value();
  double sortino = nan_value();
  double max_drawdown = nan_value();  // positive magnitude
  double calmar = nan_value();
  std::size_t n = 0;
};

PerfSummary perf_summary(const std::vector<double>& returns, int trading_days = 252);

struct LongOnlyIc {
  double icl = nan_value();
  double iclir = nan_value();
  double tstat = nan_value();
};

LongOnlyIc long_only_ic(const FactorSeries& scores, const Panel& panel, int d0, int d1,
                        double leg_fraction, int min_names = 10);

// The fixed evaluation protocol: identical configuration for every factor.
EvalMetrics compute_eval_metrics(const FactorSeries& scores, const Panel& panel, int d0, int d1,
                                 const MetricsConfig& cfg);

}  // namespace alphaloom

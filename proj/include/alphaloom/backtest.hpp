#pragma once

#include <string>
#include <vector>

#include "alphaloom/dates.hpp"
#include "alphaloom/metrics.hpp"
#include "alphaloom/panel.hpp"

namespace alphaloom {

// Per-(stock, date) score grid, stock-major like panel columns.
using ScoreGrid = std::vector<double>;

ScoreGrid score_grid_from_rows(const Panel& panel, const std::vector<int>& row_date,
                               const std::vector<int>& row_stock,
                               const std::vector<double>& scores);

struct CostModel {
  double one_way_bps = 3.0;
  void validate() const;
};

struct PortfolioWeights {
  std::vector<int> date_indices;  // formation dates
  // per formation date: signed weights; long leg sums to +1, short leg to -1
  std::vector<std::vector<std::pair<int, double>>> holdings;
};

struct BacktestReport {
  int Q = 0;
  std::vector<int> date_indices;  // formation dates with a full assignment
  std::vector<Date> dates;
  std::vector<std::vector<double>> decile_returns;  // per date, Q leg returns
  std::vector<double> spread;                       // D_Q - D_1, raw returns
  PortfolioWeights weights;
  std::size_t skipped_dates = 0;
  double monotonicity = nan_value();  // Spearman(decile index, mean decile return)
  std::vector<PerfSummary> decile_perf;
  PerfSummary spread_perf;
  std::vector<double> decile_period_return;  // compounded per decile
  double spread_period_return = nan_value();
};

// Scores at the formation date t earn the constituents' returns over
// (t, t+1]; series are indexed at t.
BacktestReport decile_backtest(const ScoreGrid& scores, const Panel& panel, int d0, int d1,
                               int Q = 10);

struct HorizonStats {
  int horizon = 0;
  double mean_daily = nan_value();
  double ann_mean = nan_value();  // mean * trading_days
  double nw_tstat = nan_value();
  std::size_t n = 0;
};

// Overlapping-cohort construction: the day-t spread of horizon h averages the
// spreads of the h portfolios formed on days t-h+1 .. t.
std::vector<HorizonStats> multi_horizon(const ScoreGrid& scores, const Panel& panel, int d0,
                                        int d1, int max_horizon, int Q = 10,
                                        int trading_days = 252);

// Drifted-weight turnover per formation date, both legs summed and halved,
// expressed per side of gross exposure. The first formation date is 0.
std::vector<double> turnover(const PortfolioWeights& weights, const Panel& panel);

struct CostedSeries {
  std::vector<double> cost;
  std::vector<double> net;
};

CostedSeries apply_costs(const std::vector<double>& gross, const std::vector<double>& turnover,
                         const CostModel& cost);

struct QuarterRow {
  Quarter quarter;
  bool partial = false;
  std::size_t begin = 0;  // slice [begin, end) into the input series
  std::size_t end = 0;
  double period_return = nan_value();
  double ann_return = nan_value();
  double ann_vol = nan_value();
  double sharpe = nan_value();
  double max_drawdown = nan_value();
  std::size_t n_days = 0;
};

std::vector<QuarterRow> quarterly_table(const std::vector<Date>& dates,
                                        const std::vector<double>& series,
                                        int trading_days = 252);

double compound_return(const std::vector<double>& returns);

}  // namespace alphaloom

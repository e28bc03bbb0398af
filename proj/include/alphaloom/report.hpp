#pragma once

#include <string>
#include <vector>

#include "alphaloom/attribution.hpp"
#include "alphaloom/backtest.hpp"
#include "alphaloom/metrics.hpp"
#include "alphaloom/panel.hpp"

namespace alphaloom {

struct OutputStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

// Every delimited artifact starts with "# config_hash=<h> seed=<s>".
void write_screen_report_csv(const std::string& path, const ScreenReport& report,
                             const OutputStamp& stamp);

// Table-3 layout: Sharpe, IC, ICIR, ICL, ICLIR, Sortino, Calmar, Annual Ret,
// Max DD (drawdown emitted as a negative number).
void write_factor_metrics_csv(const std::string& path,
                              const std::vector<std::pair<std::string, EvalMetrics>>& rows,
                              const OutputStamp& stamp);

// Table-5 layout: full-window row plus quarterly gross rows.
void write_composite_performance_csv(const std::string& path, const std::string& label,
                                     const std::vector<Date>& dates,
                                     const std::vector<double>& series,
                                     const OutputStamp& stamp);

// Table-7 layout: decile period returns and Sharpe plus the long-short row.
void write_decile_csv(const std::string& path, const BacktestReport& report,
                      const OutputStamp& stamp);

// Table-8 layout: one return row and one t-stat row per portfolio.
void write_horizon_csv(const std::string& path,
                       const std::vector<std::pair<std::string, std::vector<HorizonStats>>>& rows,
                       const OutputStamp& stamp);

// Table-9 layout: quarterly turnover and gross/net diagnostics.
void write_cost_turnover_csv(const std::string& path, const std::vector<Date>& dates,
                             const std::vector<double>& gross, const std::vector<double>& net,
                             const std::vector<double>& turnover, const OutputStamp& stamp);

// Table-4/6 layout: CAPM/FF3/FF5/FF6 alphas with Newey-West t-statistics.
void write_alpha_csv(const std::string& path,
                     const std::vector<std::pair<std::string, std::vector<AlphaEstimate>>>& rows,
                     const OutputStamp& stamp);

void write_series_csv(const std::string& path, const std::vector<Date>& dates,
                      const std::vector<double>& values, const OutputStamp& stamp);

struct SeriesRef {
  std::string label;
  const std::vector<double>* values;
};

// dependency-free line chart on cumulative scales
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<Date>& dates, const std::vector<SeriesRef>& series,
                     const OutputStamp& stamp, bool cumulative = true);

std::pair<std::vector<Date>, std::vector<double>> read_series_csv(const std::string& path);

}  // namespace alphaloom

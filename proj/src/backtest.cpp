#include "alphaloom/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "alphaloom/errors.hpp"

namespace alphaloom {

ScoreGrid score_grid_from_rows(const Panel& panel, const std::vector<int>& row_date,
                               const std::vector<int>& row_stock,
                               const std::vector<double>& scores) {
  const std::size_t T = panel.n_dates();
  ScoreGrid grid(T * panel.n_stocks(), nan_value());
  for (std::size_t r = 0; r < scores.size(); ++r) {
    grid[std::size_t(row_stock[r]) * T + std::size_t(row_date[r])] = scores[r];
  }
  return grid;
}

void CostModel::validate() const {
  if (one_way_bps < 0.0) throw ConfigError("one_way_bps must be >= 0");
}

double compound_return(const std::vector<double>& returns) {
  double eq = 1.0;
  for (double r : returns) eq *= (1.0 + r);
  return eq - 1.0;
}

BacktestReport decile_backtest(const ScoreGrid& scores, const Panel& panel, int d0, int d1,
                               int Q) {
  if (Q < 2) throw std::invalid_argument("decile_backtest: Q must be >= 2");
  BacktestReport rep;
  rep.Q = Q;
  const std::size_t T = panel.n_dates();
  const std::vector<double> fwd = panel.forward_returns();

  for (int t = d0; t <= d1; ++t) {
    std::vector<double> sc(panel.n_stocks(), nan_value());
    std::size_t n = 0;
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      const double v = scores[s * T + std::size_t(t)];
      const double fr = fwd[s * T + std::size_t(t)];
      if (!is_missing(v) && !is_missing(fr)) {
        sc[s] = v;
        ++n;
      }
    }
    if (int(n) < Q) {
      ++rep.skipped_dates;
      continue;
    }
    const std::vector<int> buckets = quantile_sort(sc, Q);
    std::vector<double> leg_sum(std::size_t(Q), 0.0);
    std::vector<std::size_t> leg_n(std::size_t(Q), 0);
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      if (buckets[s] > 0) {
        leg_sum[std::size_t(buckets[s] - 1)] += fwd[s * T + std::size_t(t)];
        ++leg_n[std::size_t(buckets[s] - 1)];
      }
    }
    std::vector<double> legs(std::size_t(Q), nan_value());
    for (int q = 0; q < Q; ++q) {
      if (leg_n[std::size_t(q)] > 0) legs[std::size_t(q)] = leg_sum[std::size_t(q)] / double(leg_n[std::size_t(q)]);
    }
    rep.date_indices.push_back(t);
    rep.dates.push_back(panel.dates()[std::size_t(t)]);
    rep.spread.push_back(legs[std::size_t(Q - 1)] - legs[0]);
    rep.decile_returns.push_back(legs);

    std::vector<std::pair<int, double>> holding;
    std::size_t n_top = leg_n[std::size_t(Q - 1)], n_bot = leg_n[0];
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      if (buckets[s] == Q) holding.emplace_back(int(s), 1.0 / double(n_top));
      else if (buckets[s] == 1) holding.emplace_back(int(s), -1.0 / double(n_bot));
    }
    rep.weights.date_indices.push_back(t);
    rep.weights.holdings.push_back(std::move(holding));
  }

  if (!rep.spread.empty()) {
    rep.spread_perf = perf_summary(rep.spread);
    rep.spread_period_return = compound_return(rep.spread);
    std::vector<double> mean_by_decile(std::size_t(Q), 0.0);
    rep.decile_perf.resize(std::size_t(Q));
    rep.decile_period_return.resize(std::size_t(Q));
    std::vector<double> idx(std::size_t(Q), 0.0);
    for (int q = 0; q < Q; ++q) {
      std::vector<double> series;
      series.reserve(rep.decile_returns.size());
      for (const auto& row : rep.decile_returns) {
        if (!is_missing(row[std::size_t(q)])) series.push_back(row[std::size_t(q)]);
      }
      mean_by_decile[std::size_t(q)] = mean_of(series);
      rep.decile_perf[std::size_t(q)] = perf_summary(series);
      rep.decile_period_return[std::size_t(q)] = compound_return(series);
      idx[std::size_t(q)] = double(q + 1);
    }
    rep.monotonicity = spearman(idx, mean_by_decile);
  }
  return rep;
}

namespace {

// HAC t-statistic of the mean with Bartlett weights.
double nw_tstat_of_mean(const std::vector<double>& x, int lags) {
  const std::size_t n = x.size();
  if (n < 2) return nan_value();
  const double m = mean_of(x);
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = x[i] - m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += e[i] * e[i];
  s /= double(n);
  for (int l = 1; l <= lags && std::size_t(l) < n; ++l) {
    double g = 0.0;
    for (std::size_t i = std::size_t(l); i < n; ++i) g += e[i] * e[i - std::size_t(l)];
    g /= double(n);
    s += 2.0 * (1.0 - double(l) / double(lags + 1)) * g;
  }
  if (s <= 0.0) return nan_value();
  return m / std::sqrt(s / double(n));
}

}  // namespace

std::vector<HorizonStats> multi_horizon(const ScoreGrid& scores, const Panel& panel, int d0,
                                        int d1, int max_horizon, int Q, int trading_days) {
  if (max_horizon < 1) throw std::invalid_argument("multi_horizon: H must be >= 1");
  const std::size_t T = panel.n_dates();
  const std::vector<double> fwd = panel.forward_returns();

  // cohort_spread[f][d]: day-d spread of the portfolio formed at date f,
  // holding for up to max_horizon days
  std::map<int, std::vector<double>> cohort_spread;
  for (int f = d0; f <= d1; ++f) {
    std::vector<double> sc(panel.n_stocks(), nan_value());
    std::size_t n = 0;
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      const double v = scores[s * T + std::size_t(f)];
      if (!is_missing(v) && !is_missing(fwd[s * T + std::size_t(f)])) {
        sc[s] = v;
        ++n;
      }
    }
    if (int(n) < Q) continue;
    const std::vector<int> buckets = quantile_sort(sc, Q);
    std::vector<double> days;
    for (int h = 0; h < max_horizon; ++h) {
      const int d = f + h;
      if (d > d1) break;
      double top = 0.0, bot = 0.0;
      std::size_t tn = 0, bn = 0;
      for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
        const double fr = fwd[s * T + std::size_t(d)];
        if (is_missing(fr)) continue;
        if (buckets[s] == Q) {
          top += fr;
          ++tn;
        } else if (buckets[s] == 1) {
          bot += fr;
          ++bn;
        }
      }
      if (tn == 0 || bn == 0) break;
      days.push_back(top / double(tn) - bot / double(bn));
    }
    cohort_spread[f] = std::move(days);
  }

  std::vector<HorizonStats> out;
  for (int h = 1; h <= max_horizon; ++h) {
    std::vector<double> series;
    for (int t = d0; t <= d1; ++t) {
      // average the h cohorts formed on t-h+1 .. t
      double sum = 0.0;
      int cnt = 0;
      bool complete = true;
      for (int f = t - h + 1; f <= t; ++f) {
        auto it = cohort_spread.find(f);
        if (it == cohort_spread.end() || int(it->second.size()) <= t - f) {
          complete = false;
          break;
        }
        sum += it->second[std::size_t(t - f)];
        ++cnt;
      }
      if (complete && cnt == h) series.push_back(sum / double(h));
    }
    HorizonStats hs;
    hs.horizon = h;
    hs.n = series.size();
    if (!series.empty()) {
      hs.mean_daily = mean_of(series);
      hs.ann_mean = hs.mean_daily * double(trading_days);
      hs.nw_tstat = nw_tstat_of_mean(series, h - 1);
    }
    out.push_back(hs);
  }
  return out;
}

std::vector<double> turnover(const PortfolioWeights& weights, const Panel& panel) {
  const std::size_t n = weights.date_indices.size();
  if (n < 2) {
    return std::vector<double>(n, 0.0);
  }
  const std::size_t T = panel.n_dates();
  const std::vector<double> fwd = panel.forward_returns();
  std::vector<double> out(n, 0.0);

  for (std::size_t k = 1; k < n; ++k) {
    const int prev_t = weights.date_indices[k - 1];
    std::map<int, double> prev_long, prev_short;
    double long_ret = 0.0, short_ret = 0.0;
    for (const auto& [s, w] : weights.holdings[k - 1]) {
      const double r = fwd[std::size_t(s) * T + std::size_t(prev_t)];
      const double growth = is_missing(r) ? 1.0 : 1.0 + r;
      if (w > 0) {
        prev_long[s] = w * growth;
        long_ret += w * (growth - 1.0);
      } else {
        prev_short[s] = w * growth;
        short_ret += -w * (growth - 1.0);
      }
    }
    // drifted weights renormalized by the leg growth
    const double long_div = 1.0 + long_ret;
    const double short_div = 1.0 + short_ret;
    for (auto& [s, w] : prev_long) w /= long_div;
    for (auto& [s, w] : prev_short) w /= short_div;

    double traded = 0.0;
    std::map<int, double> cur_long, cur_short;
    for (const auto& [s, w] : weights.holdings[k]) {
      (w > 0 ? cur_long : cur_short)[s] = w;
    }
    auto leg_traded = [&](const std::map<int, double>& prev, const std::map<int, double>& cur) {
      double sum = 0.0;
      for (const auto& [s, w] : cur) {
        auto it = prev.find(s);
        sum += std::fabs(w - (it == prev.end() ? 0.0 : it->second));
      }
      for (const auto& [s, w] : prev) {
        if (!cur.count(s)) sum += std::fabs(w);
      }
      return sum;
    };
    traded += leg_traded(prev_long, cur_long);
    traded += leg_traded(prev_short, cur_short);
    out[k] = 0.5 * traded;
  }
  return out;
}

CostedSeries apply_costs(const std::vector<double>& gross, const std::vector<double>& turnover,
                         const CostModel& cost) {
  cost.validate();
  if (gross.size() != turnover.size()) {
    throw std::invalid_argument("apply_costs: gross and turnover must align");
  }
  CostedSeries out;
  out.cost.resize(gross.size());
  out.net.resize(gross.size());
  for (std::size_t i = 0; i < gross.size(); ++i) {
    out.cost[i] = cost.one_way_bps * 1e-4 * turnover[i];
    out.net[i] = gross[i] - out.cost[i];
  }
  return out;
}

namespace {

Date quarter_start(const Quarter& q) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-01", q.year, (q.q - 1) * 3 + 1);
  return parse_date(buf);
}

Date quarter_end(const Quarter& q) {
  Quarter next = q;
  if (++next.q > 4) {
    next.q = 1;
    ++next.year;
  }
  return quarter_start(next) - 1;
}

}  // namespace

std::vector<QuarterRow> quarterly_table(const std::vector<Date>& dates,
                                        const std::vector<double>& series, int trading_days) {
  if (dates.size() != series.size()) {
    throw std::invalid_argument("quarterly_table: dates and series must align");
  }
  std::vector<QuarterRow> rows;
  std::size_t i = 0;
  while (i < dates.size()) {
    const Quarter q = quarter_of(dates[i]);
    std::size_t j = i;
    while (j < dates.size() && quarter_of(dates[j]) == q) ++j;
    QuarterRow row;
    row.quarter = q;
    row.begin = i;
    row.end = j;
    row.n_days = j - i;
    // partial when the window enters or leaves the quarter mid-way
    if (i == 0 && dates[i] > quarter_start(q) + 6) row.partial = true;
    if (j == dates.size() && dates[j - 1] < quarter_end(q) - 6) row.partial = true;

    std::vector<double> slice(series.begin() + long(i), series.begin() + long(j));
    row.period_return = compound_return(slice);
    const PerfSummary p = perf_summary(slice, trading_days);
    row.ann_return = p.ann_return;
    row.ann_vol = p.ann_vol;
    row.sharpe = p.sharpe;
    row.max_drawdown = p.max_drawdown;
    rows.push_back(row);
    i = j;
  }
  return rows;
}

}  // namespace alphaloom

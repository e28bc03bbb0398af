#include "alphaloom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alphaloom/config.hpp"
#include "alphaloom/errors.hpp"

namespace alphaloom {

std::string MetricsConfig::config_hash() const {
  std::string repr = "metrics:q=" + std::to_string(quantiles) +
                     ";min_names=" + std::to_string(min_names) +
                     ";leg_fraction=" + std::to_string(leg_fraction) +
                     ";trading_days=" + std::to_string(trading_days);
  return hex64(fnv1a64(repr));
}

namespace {

// paired finite (score, forward return) values on one date
void gather_pairs(const FactorSeries& scores, const std::vector<double>& fwd, const Panel& panel,
                  int t, std::vector<double>& s_out, std::vector<double>& r_out) {
  const std::size_t T = panel.n_dates();
  s_out.clear();
  r_out.clear();
  for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
    const double sc = scores.values[s * T + std::size_t(t)];
    const double fr = fwd[s * T + std::size_t(t)];
    if (!is_missing(sc) && !is_missing(fr)) {
      s_out.push_back(sc);
      r_out.push_back(fr);
    }
  }
}

bool zero_dispersion(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] != v[0]) return false;
  }
  return true;
}

}  // namespace

IcSeries rank_ic(const FactorSeries& scores, const Panel& panel, int d0, int d1, int min_names) {
  IcSeries out;
  const std::vector<double> fwd = panel.forward_returns();
  std::vector<double> s, r;
  for (int t = d0; t <= d1; ++t) {
    gather_pairs(scores, fwd, panel, t, s, r);
    if (int(s.size()) < min_names || zero_dispersion(s) || zero_dispersion(r)) {
      ++out.excluded_dates;
      continue;
    }
    const double ic = spearman(s, r);
    if (is_missing(ic)) {
      ++out.excluded_dates;
      continue;
    }
    out.dates.push_back(panel.dates()[std::size_t(t)]);
    out.values.push_back(ic);
  }
  return out;
}

IcAggregate ic_tstat(const std::vector<double>& ic_series) {
  IcAggregate agg;
  if (ic_series.size() < 2) {
    agg.degenerate = true;
    return agg;
  }
  const double m = mean_of(ic_series);
  const double sd = sample_std(ic_series);
  agg.mean = m;
  if (is_missing(sd) || sd == 0.0) {
    agg.degenerate = true;
    return agg;
  }
  agg.tstat = m / (sd / std::sqrt(double(ic_series.size())));
  agg.icir = m / sd;
  return agg;
}

std::vector<int> quantile_sort(const std::vector<double>& scores, int Q) {
  if (Q < 2) throw std::invalid_argument("quantile_sort: Q must be >= 2");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!is_missing(scores[i])) idx.push_back(i);
  }
  std::vector<int> buckets(scores.size(), 0);
  const std::size_t n = idx.size();
  if (n < std::size_t(Q)) return buckets;  // caller counts the skip

  // ascending score; ties resolved by the stable stock order
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const std::size_t base = n / std::size_t(Q);
  const std::size_t rem = n % std::size_t(Q);
  std::size_t pos = 0;
  for (int q = 1; q <= Q; ++q) {
    // extra names go to the bottom buckets
    const std::size_t size = base + (std::size_t(q) <= rem ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) buckets[idx[pos++]] = q;
  }
  return buckets;
}

SpreadSeries long_short_returns(const FactorSeries& scores, const Panel& panel, int d0, int d1,
                                int Q) {
  SpreadSeries out;
  const std::size_t T = panel.n_dates();
  const std::vector<double> fwd = panel.forward_returns();
  for (int t = d0; t <= d1; ++t) {
    std::vector<double> sc(panel.n_stocks(), nan_value());
    bool any = false;
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      const double v = scores.values[s * T + std::size_t(t)];
      const double fr = fwd[s * T + std::size_t(t)];
      if (!is_missing(v) && !is_missing(fr)) {
        sc[s] = v;
        any = true;
      }
    }
    if (!any) {
      ++out.skipped_dates;
      continue;
    }
    const std::vector<int> buckets = quantile_sort(sc, Q);
    double top_sum = 0.0, bot_sum = 0.0;
    std::size_t top_n = 0, bot_n = 0;
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      if (buckets[s] == Q) {
        top_sum += fwd[s * T + std::size_t(t)];
        ++top_n;
      } else if (buckets[s] == 1) {
        bot_sum += fwd[s * T + std::size_t(t)];
        ++bot_n;
      }
    }
    if (top_n == 0 || bot_n == 0) {
      ++out.skipped_dates;
      continue;
    }
    out.date_indices.push_back(t);
    out.values.push_back(top_sum / double(top_n) - bot_sum / double(bot_n));
  }
  return out;
}

PerfSummary perf_summary(const std::vector<double>& returns, int trading_days) {
  PerfSummary p;
  p.n = returns.size();
  if (returns.size() < 2) return p;

  const double m = mean_of(returns);
  // population convention keeps the summary invariant under series duplication
  const double sd = population_std(returns);
  const double ann = std::sqrt(double(trading_days));

  double growth = 1.0;
  double peak = 1.0;
  double equity = 1.0;
  double maxdd = 0.0;
  bool wiped = false;
  for (double r : returns) {
    equity *= (1.0 + r);
    if (equity <= 0.0) wiped = true;
    growth = equity;
    peak = std::max(peak, equity);
    if (peak > 0.0) maxdd = std::max(maxdd, (peak - equity) / peak);
  }
  if (!wiped && growth > 0.0) {
    p.ann_return = std::pow(growth, double(trading_days) / double(returns.size())) - 1.0;
  }
  p.ann_vol = is_missing(sd) ? nan_value() : ann * sd;
  p.sharpe = (!is_missing(sd) && sd > 0.0) ? ann * m / sd : nan_value();

  double down_ss = 0.0;
  for (double r : returns) {
    if (r < 0.0) down_ss += r * r;
  }
  const double downside = std::sqrt(down_ss / double(returns.size()));
  p.sortino = downside > 0.0 ? ann * m / downside : nan_value();

  p.max_drawdown = maxdd;
  p.calmar = (maxdd > 0.0 && !is_missing(p.ann_return)) ? p.ann_return / maxdd : nan_value();
  return p;
}

LongOnlyIc long_only_ic(const FactorSeries& scores, const Panel& panel, int d0, int d1,
                        double leg_fraction, int min_names) {
  if (!(leg_fraction > 0.0 && leg_fraction <= 1.0)) {
    throw std::invalid_argument("leg_fraction must be in (0, 1]");
  }
  const std::vector<double> fwd = panel.forward_returns();
  std::vector<double> series;
  std::vector<double> s, r;
  for (int t = d0; t <= d1; ++t) {
    gather_pairs(scores, fwd, panel, t, s, r);
    if (int(s.size()) < min_names) continue;
    // keep the top leg by score
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    const std::size_t k = std::min(s.size(), std::size_t(std::ceil(double(s.size()) * leg_fraction)));
    if (k < 2) continue;
    std::vector<double> ls(k), lr(k);
    for (std::size_t i = 0; i < k; ++i) {
      ls[i] = s[order[i]];
      lr[i] = r[order[i]];
    }
    if (zero_dispersion(ls) || zero_dispersion(lr)) continue;
    const double ic = spearman(ls, lr);
    if (!is_missing(ic)) series.push_back(ic);
  }
  LongOnlyIc out;
  const IcAggregate agg = ic_tstat(series);
  out.icl = agg.mean;
  out.iclir = agg.icir;
  out.tstat = agg.tstat;
  return out;
}

EvalMetrics compute_eval_metrics(const FactorSeries& scores, const Panel& panel, int d0, int d1,
                                 const MetricsConfig& cfg) {
  EvalMetrics m;
  m.config_hash = cfg.config_hash();
  m.window_start = panel.dates()[std::size_t(d0)];
  m.window_end = panel.dates()[std::size_t(d1)];
  m.n_days = std::size_t(d1 - d0 + 1);

  const IcSeries ic = rank_ic(scores, panel, d0, d1, cfg.min_names);
  m.n_valid_dates = ic.values.size();
  const IcAggregate agg = ic_tstat(ic.values);
  m.mean_ic = agg.mean;
  m.ic_tstat = agg.tstat;
  m.icir = agg.icir;

  const LongOnlyIc lo = long_only_ic(scores, panel, d0, d1, cfg.leg_fraction, cfg.min_names);
  m.icl = lo.icl;
  m.iclir = lo.iclir;

  const SpreadSeries spread = long_short_returns(scores, panel, d0, d1, cfg.quantiles);
  const PerfSummary perf = perf_summary(spread.values, cfg.trading_days);
  m.ann_return = perf.ann_return;
  m.ann_vol = perf.ann_vol;
  m.sharpe = perf.sharpe;
  m.sortino = perf.sortino;
  m.calmar = perf.calmar;
  m.max_drawdown = perf.max_drawdown;

  double cov = 0.0;
  std::size_t nc = 0;
  for (int t = d0; t <= d1; ++t) {
    cov += scores.coverage[std::size_t(t)];
    ++nc;
  }
  m.avg_coverage = nc ? cov / double(nc) : 0.0;
  return m;
}

}  // namespace alphaloom

#include "alphaloom/gate.hpp"

#include <algorithm>
#include <cmath>

#include "alphaloom/config.hpp"
#include "alphaloom/errors.hpp"

namespace alphaloom {

void GateThresholds::validate() const {
  if (!(tau_fail < tau_sig)) {
    throw ConfigError("gate thresholds require tau_fail < tau_sig");
  }
  if (max_abs_corr < 0.0 || max_abs_corr > 1.0) {
    throw ConfigError("max_abs_corr must be in [0, 1]");
  }
}

std::string GateThresholds::config_hash() const {
  std::string repr = "gate:" + std::to_string(tau_sig) + ";" + std::to_string(tau_econ) + ";" +
                     std::to_string(tau_fail) + ";" + std::to_string(hurdle_t) + ";" +
                     std::to_string(max_abs_corr) + ";" + std::to_string(max_turnover) + ";" +
                     std::to_string(redundancy_min_overlap);
  return hex64(fnv1a64(repr));
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Promote:
      return "Promote";
    case Verdict::Hold:
      return "Hold";
    case Verdict::Retire:
      return "Retire";
  }
  return "Retire";
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

GateDecision decide(const EvalMetrics& m, const GateThresholds& th,
                    const std::string& round_metrics_hash) {
  th.validate();
  if (!round_metrics_hash.empty() && m.config_hash != round_metrics_hash) {
    throw ProtocolError("metrics config hash " + m.config_hash +
                        " does not match the round's evaluation protocol " + round_metrics_hash);
  }
  GateDecision d;
  d.metrics = m;
  d.config_hash = th.config_hash();

  if (is_missing(m.ic_tstat) || is_missing(m.sharpe)) {
    d.verdict = Verdict::Retire;
    d.reasons.push_back("undefined metric sentinel (t_ic or sharpe)");
    return d;
  }

  const double promote_floor = std::max(th.tau_sig, th.hurdle_t);
  if (m.ic_tstat >= promote_floor && m.sharpe >= th.tau_econ) {
    d.verdict = Verdict::Promote;
    d.reasons.push_back("t_ic " + fmt(m.ic_tstat) + " >= " + fmt(promote_floor));
    d.reasons.push_back("sharpe " + fmt(m.sharpe) + " >= " + fmt(th.tau_econ));
  } else if (m.ic_tstat < th.tau_fail) {
    d.verdict = Verdict::Retire;
    d.reasons.push_back("t_ic " + fmt(m.ic_tstat) + " < tau_fail " + fmt(th.tau_fail));
  } else {
    d.verdict = Verdict::Hold;
    if (m.ic_tstat < promote_floor) {
      d.reasons.push_back("t_ic " + fmt(m.ic_tstat) + " below promotion floor " +
                          fmt(promote_floor));
    }
    if (m.sharpe < th.tau_econ) {
      d.reasons.push_back("sharpe " + fmt(m.sharpe) + " below tau_econ " + fmt(th.tau_econ));
    }
  }
  return d;
}

RedundancyResult redundancy_check(const FactorSeries& candidate,
                                  const std::vector<FactorSeries>& library, const Panel& panel,
                                  int d0, int d1, double max_abs_corr, int min_overlap) {
  RedundancyResult res;
  if (library.empty()) return res;

  const std::size_t T = panel.n_dates();
  for (const FactorSeries& member : library) {
    std::vector<double> per_date;
    for (int t = d0; t <= d1; ++t) {
      std::vector<double> a, b;
      for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
        const double x = candidate.values[s * T + std::size_t(t)];
        const double y = member.values[s * T + std::size_t(t)];
        if (!is_missing(x) && !is_missing(y)) {
          a.push_back(x);
          b.push_back(y);
        }
      }
      if (a.size() < 2) continue;
      const double c = spearman(a, b);
      if (!is_missing(c)) per_date.push_back(c);
    }
    if (int(per_date.size()) < min_overlap) {
      throw std::invalid_argument("redundancy_check: only " + std::to_string(per_date.size()) +
                                  " overlapping dates against " + member.expr_text +
                                  ", need >= " + std::to_string(min_overlap));
    }
    const double avg = mean_of(per_date);
    res.per_member_avg_corr.push_back(avg);
    if (std::fabs(avg) > std::fabs(res.max_abs_corr)) {
      res.max_abs_corr = avg;
      res.worst_member = member.expr_text;
    }
  }
  res.pass = std::fabs(res.max_abs_corr) <= max_abs_corr;
  return res;
}

FeasibilityResult feasibility_check(const std::vector<double>& turnover_series,
                                    const std::vector<double>& horizon_mean_returns,
                                    const GateThresholds& th) {
  FeasibilityResult res;
  if (!turnover_series.empty()) {
    res.mean_turnover = mean_of(turnover_series);
    if (!is_missing(th.max_turnover) && res.mean_turnover > th.max_turnover) {
      res.turnover_breach = true;
      res.pass = false;
      res.notes.push_back("mean daily turnover " + std::to_string(res.mean_turnover) +
                          " exceeds ceiling " + std::to_string(th.max_turnover));
    }
  }
  if (horizon_mean_returns.size() >= 2) {
    const double h1 = horizon_mean_returns[0];
    const double h2 = horizon_mean_returns[1];
    if (h1 > 0.0 && h2 < 0.25 * h1) {
      res.rapid_decay = true;
      res.notes.push_back("rapid alpha decay: H2 mean below 25% of H1");
    }
  }
  return res;
}

}  // namespace alphaloom

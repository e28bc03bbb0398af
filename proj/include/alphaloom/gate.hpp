#pragma once

#include <string>
#include <vector>

#include "alphaloom/expr.hpp"
#include "alphaloom/metrics.hpp"

namespace alphaloom {

struct GateThresholds {
  double tau_sig = 3.0;   // t-stat floor for promotion
  double tau_econ = 1.0;  // long-short Sharpe floor
  double tau_fail = 1.0;  // t-stat retirement ceiling
  double hurdle_t = 3.0;  // multiple-testing floor
  double max_abs_corr = 0.8;
  double max_turnover = nan_value();  // unset unless finite
  int redundancy_min_overlap = 60;

  void validate() const;
  std::string config_hash() const;
};

enum class Verdict { Promote, Hold, Retire };

std::string verdict_name(Verdict v);

struct GateDecision {
  Verdict verdict = Verdict::Retire;
  std::vector<std::string> reasons;  // ordered rule firings, never empty
  EvalMetrics metrics;               // snapshot
  std::string config_hash;
};

// The pre-committed piecewise rule. Undefined sentinel metrics force Retire.
// Throws ProtocolError when the metrics were produced under a different
// evaluation configuration than the round expects.
GateDecision decide(const EvalMetrics& m, const GateThresholds& th,
                    const std::string& round_metrics_hash = "");

struct RedundancyResult {
  double max_abs_corr = 0.0;
  std::string worst_member;
  bool pass = true;
  std::vector<double> per_member_avg_corr;
};

// Average per-date cross-sectional Spearman correlation of the candidate
// against each library member. Requires >= min_overlap overlapping dates
// (with at least two names each) per member.
RedundancyResult redundancy_check(const FactorSeries& candidate,
                                  const std::vector<FactorSeries>& library, const Panel& panel,
                                  int d0, int d1, double max_abs_corr, int min_overlap = 60);

struct FeasibilityResult {
  bool pass = true;
  double mean_turnover = nan_value();
  bool turnover_breach = false;
  bool rapid_decay = false;  // H2 mean below 25% of H1
  std::vector<std::string> notes;
};

FeasibilityResult feasibility_check(const std::vector<double>& turnover_series,
                                    const std::vector<double>& horizon_mean_returns,
                                    const GateThresholds& th);

}  // namespace alphaloom

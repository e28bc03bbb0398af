#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "alphaloom/panel.hpp"

namespace alphaloom {

/// Synthetic panel generator with a documented data-generating process.
/// Modes:
///   planted     — next-day return = signal_coef * cs_rank(hidden expr) + noise
///   interaction — next-day return = interaction_coef * z1 * z2 + noise,
///                 z1 = cs_zscore(vol_ratio), z2 = cs_zscore(vol_growth)
///   null        — i.i.d. Gaussian returns, no signal
struct SynthParams {
  std::string mode = "planted";
  int stocks = 100;
  int days = 500;
  std::uint64_t seed = 42;
  double signal_coef = 0.02;
  double noise_sigma = 0.15;
  double interaction_coef = 0.004;
  double interaction_noise = 0.02;
  std::string start_date = "2018-01-02";
  // a few names carrying ineligible codes / sub-threshold prices so the
  // sample screens have work to do
  int screenable_stocks = 4;
};

struct SynthResult {
  std::vector<RawObservation> observations;
  std::string hidden_expr;
  std::vector<Date> dates;
};

SynthResult synth_panel(const SynthParams& params);

void write_panel_csv(std::ostream& out, const std::vector<RawObservation>& obs);

// toy daily research-factor file (percent units) spanning the same dates
void write_benchmark_csv(std::ostream& out, const std::vector<Date>& dates,
                         std::uint64_t seed);

}  // namespace alphaloom

#pragma once

#include <map>
#include <string>
#include <vector>

#include "alphaloom/dates.hpp"
#include "alphaloom/stats.hpp"

namespace alphaloom {

struct BenchmarkReturns {
  std::vector<Date> dates;                             // sorted
  std::map<std::string, std::vector<double>> columns;  // daily decimals
  std::string source_id;

  bool has(const std::string& name) const { return columns.count(name) > 0; }
};

// Daily research-factor layout: date plus named factor columns (MKT-RF, SMB,
// HML, RMW, CMA, MOM, RF). Values in percent unless percent=false. Gaps in
// any mapped cell are errors, not filled.
BenchmarkReturns ingest_factor_returns(std::istream& in, bool percent = true, char delim = ',');
BenchmarkReturns ingest_factor_returns_file(const std::string& path, bool percent = true,
                                            char delim = ',');

enum class BenchmarkSpec { CAPM, FF3, FF5, FF6 };

std::string spec_name(BenchmarkSpec spec);
const std::vector<std::string>& spec_factors(BenchmarkSpec spec);

struct AlphaEstimate {
  BenchmarkSpec spec = BenchmarkSpec::CAPM;
  double alpha_daily = nan_value();
  double alpha_annualized = nan_value();
  double alpha_se = nan_value();
  double nw_tstat = nan_value();
  std::map<std::string, double> betas;
  int nw_lags = 0;
  std::size_t n_obs = 0;
};

// OLS of the portfolio series on an intercept plus the spec's factors with
// Bartlett-kernel Newey-West standard errors (no small-sample correction;
// nw_lags = 0 is the White sandwich). subtract_rf applies to long-only legs;
// long-short spreads are treated as already self-financing.
AlphaEstimate alpha_regression(const std::vector<Date>& dates, const std::vector<double>& values,
                               const BenchmarkReturns& bench, BenchmarkSpec spec, int nw_lags,
                               bool subtract_rf = false);

int nw_auto_lags(std::size_t n_obs);  // floor(4 (T/100)^{2/9})

}  // namespace alphaloom

#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "alphaloom/dates.hpp"
#include "alphaloom/stats.hpp"

namespace alphaloom {

struct RawObservation {
  Date date = 0;
  std::string stock_id;
  double ret = nan_value();
  double price = nan_value();
  double volume = nan_value();
  int exchange_code = -1;  // -1 = absent
  int share_code = -1;
  double market_ret_vw = nan_value();
  double market_ret_sp = nan_value();
  double bid = nan_value();
  double ask = nan_value();
};

/// Immutable columnar stock-date store. Columns are dense stock-major grids
/// (index = stock * n_dates + date_idx) with NaN for missing entries; each
/// stock additionally carries the ordered list of date indices where it has
/// an observation, which defines its time-series history.
class Panel {
 public:
  Panel() = default;

  static Panel from_observations(std::vector<RawObservation> obs);

  std::size_t n_dates() const { return dates_.size(); }
  std::size_t n_stocks() const { return stock_ids_.size(); }
  std::size_t n_observations() const;

  const std::vector<Date>& dates() const { return dates_; }
  const std::vector<std::string>& stock_ids() const { return stock_ids_; }
  // index of date in dates(), -1 if absent
  int date_index(Date d) const;

  bool has_column(const std::string& name) const { return columns_.count(name) > 0; }
  const std::vector<double>& column(const std::string& name) const;
  std::vector<std::string> column_names() const;
  void add_column(const std::string& name, std::vector<double> values);

  double value(const std::string& name, std::size_t stock, std::size_t date_idx) const {
    return column(name)[stock * n_dates() + date_idx];
  }
  bool observed(std::size_t stock, std::size_t date_idx) const {
    return obs_mask_[stock * n_dates() + date_idx];
  }

  // Date indices (ascending) at which the stock has an observation.
  const std::vector<int>& history(std::size_t stock) const { return histories_[stock]; }

  // Market series per panel date (broadcast to stocks on demand).
  const std::vector<double>& market_vw() const { return market_vw_; }
  const std::vector<double>& market_sp() const { return market_sp_; }

  // Forward return at formation (stock, t): the stock's return at its next
  // observation date; NaN at the end of its history.
  std::vector<double> forward_returns() const;

  // Number of negative vendor-coded prices folded to absolute value at build.
  std::size_t negative_price_count() const { return negative_price_count_; }
  void set_negative_price_count(std::size_t n) { negative_price_count_ = n; }

  bool structurally_equal(const Panel& other) const;

 private:
  std::vector<Date> dates_;
  std::vector<std::string> stock_ids_;
  std::map<std::string, std::vector<double>> columns_;
  std::vector<char> obs_mask_;
  std::vector<std::vector<int>> histories_;
  std::vector<double> market_vw_;
  std::vector<double> market_sp_;
  std::size_t negative_price_count_ = 0;
};

struct ColumnMapping {
  // logical field -> file column name; identity by default
  std::map<std::string, std::string> names = {
      {"date", "date"},           {"stock_id", "stock_id"},
      {"ret", "ret"},             {"price", "price"},
      {"volume", "volume"},       {"exchange_code", "exchange_code"},
      {"share_code", "share_code"}, {"market_ret_vw", "market_ret_vw"},
      {"market_ret_sp", "market_ret_sp"}, {"bid", "bid"},
      {"ask", "ask"}};
};

struct IngestReport {
  std::size_t rows_total = 0;
  std::size_t rows_loaded = 0;
  std::size_t rows_rejected = 0;
  std::map<std::string, std::size_t> rejection_reasons;
  std::size_t negative_prices = 0;
};

struct IngestResult {
  Panel panel;
  IngestReport report;
};

// Delimited text with a header row. Required columns: date, stock_id, ret,
// price, volume. Rows violating invariants (bad numerics, negative volume)
// are rejected and counted; duplicate (date, stock) pairs are a hard error.
IngestResult ingest_panel(std::istream& in, const ColumnMapping& mapping = {}, char delim = ',');
IngestResult ingest_panel_file(const std::string& path, const ColumnMapping& mapping = {},
                               char delim = ',');

struct ScreenConfig {
  std::vector<int> eligible_exchanges;   // empty = screen passes everything
  std::vector<int> common_share_codes;   // empty = screen passes everything
  double min_price = 5.0;
  int min_history_days = 252;

  void validate() const;
};

struct ScreenRow {
  std::string name;
  std::size_t remaining_observations = 0;
  std::size_t remaining_stocks = 0;
};

struct ScreenReport {
  std::vector<ScreenRow> rows;  // leading "raw universe" row, then one per screen
};

std::pair<Panel, ScreenReport> apply_screens(const Panel& panel, const ScreenConfig& cfg);

// The ten baseline predictor columns. Rolling windows cover the trailing 20
// observations of the stock's own history including date t; market-state
// series use the panel date index. Insufficient history stays missing.
extern const std::vector<std::string> kPrimitiveNames;
Panel build_primitives(const Panel& panel);

// Per-date cross-sectional transforms. Missing entries pass through.
std::vector<double> winsorize_cross_section(const std::vector<double>& values, double p_low,
                                            double p_high);

struct ZScoreResult {
  std::vector<double> values;
  bool degenerate = false;  // zero dispersion (or < 2 finite values)
};
ZScoreResult zscore_cross_section(const std::vector<double>& values);

// winsorize then z-score, the per-date candidate normalization
ZScoreResult normalize_cross_section(const std::vector<double>& values, double p_low = 0.01,
                                     double p_high = 0.99);

}  // namespace alphaloom

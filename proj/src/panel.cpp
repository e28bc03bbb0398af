#include "alphaloom/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "alphaloom/csv.hpp"
#include "alphaloom/errors.hpp"

namespace alphaloom {

const std::vector<std::string> kPrimitiveNames = {
    "ret",       "mkt_ret",        "price",   "volume",     "vol_ratio",
    "ret_vol",   "price_ma_ratio", "mkt_vol", "vol_growth", "spread"};

namespace {
constexpr int kRollWindow = 20;
}

std::size_t Panel::n_observations() const {
  std::size_t n = 0;
  for (const auto& h : histories_) n += h.size();
  return n;
}

int Panel::date_index(Date d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return -1;
  return int(it - dates_.begin());
}

const std::vector<double>& Panel::column(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw SchemaError("panel has no column '" + name + "'");
  return it->second;
}

std::vector<std::string> Panel::column_names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& [k, _] : columns_) out.push_back(k);
  return out;
}

void Panel::add_column(const std::string& name, std::vector<double> values) {
  if (values.size() != n_dates() * n_stocks()) {
    throw SchemaError("column '" + name + "' has wrong size");
  }
  columns_[name] = std::move(values);
}

std::vector<double> Panel::forward_returns() const {
  const std::size_t T = n_dates();
  std::vector<double> fwd(T * n_stocks(), nan_value());
  const auto& ret = column("ret");
  for (std::size_t s = 0; s < n_stocks(); ++s) {
    const auto& hist = histories_[s];
    for (std::size_t k = 0; k + 1 < hist.size(); ++k) {
      fwd[s * T + hist[k]] = ret[s * T + hist[k + 1]];
    }
  }
  return fwd;
}

bool Panel::structurally_equal(const Panel& other) const {
  if (dates_ != other.dates_ || stock_ids_ != other.stock_ids_) return false;
  if (columns_.size() != other.columns_.size()) return false;
  for (const auto& [name, vals] : columns_) {
    auto it = other.columns_.find(name);
    if (it == other.columns_.end()) return false;
    const auto& ovals = it->second;
    if (vals.size() != ovals.size()) return false;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const bool an = std::isnan(vals[i]), bn = std::isnan(ovals[i]);
      if (an != bn) return false;
      if (!an && vals[i] != ovals[i]) return false;
    }
  }
  return obs_mask_ == other.obs_mask_;
}

Panel Panel::from_observations(std::vector<RawObservation> obs) {
  Panel p;
  std::set<Date> date_set;
  std::set<std::string> stock_set;
  for (const auto& o : obs) {
    date_set.insert(o.date);
    stock_set.insert(o.stock_id);
  }
  p.dates_.assign(date_set.begin(), date_set.end());
  p.stock_ids_.assign(stock_set.begin(), stock_set.end());
  const std::size_t T = p.dates_.size();
  const std::size_t S = p.stock_ids_.size();
  const std::size_t N = S * T;

  std::map<std::string, std::size_t> stock_idx;
  for (std::size_t s = 0; s < S; ++s) stock_idx[p.stock_ids_[s]] = s;

  for (const char* name : {"ret", "price", "volume", "bid", "ask", "exchange_code", "share_code"}) {
    p.columns_[name].assign(N, nan_value());
  }
  p.obs_mask_.assign(N, 0);
  p.market_vw_.assign(T, nan_value());
  p.market_sp_.assign(T, nan_value());

  for (const auto& o : obs) {
    const std::size_t s = stock_idx[o.stock_id];
    const std::size_t t = std::size_t(p.date_index(o.date));
    const std::size_t i = s * T + t;
    if (p.obs_mask_[i]) {
      throw DuplicateKeyError("duplicate (date, stock) pair: (" + format_date(o.date) + ", " +
                              o.stock_id + ")");
    }
    p.obs_mask_[i] = 1;
    p.columns_["ret"][i] = o.ret;
    p.columns_["price"][i] = o.price;
    p.columns_["volume"][i] = o.volume;
    p.columns_["bid"][i] = o.bid;
    p.columns_["ask"][i] = o.ask;
    p.columns_["exchange_code"][i] = o.exchange_code < 0 ? nan_value() : double(o.exchange_code);
    p.columns_["share_code"][i] = o.share_code < 0 ? nan_value() : double(o.share_code);
    if (!is_missing(o.market_ret_vw) && is_missing(p.market_vw_[t])) {
      p.market_vw_[t] = o.market_ret_vw;
    }
    if (!is_missing(o.market_ret_sp) && is_missing(p.market_sp_[t])) {
      p.market_sp_[t] = o.market_ret_sp;
    }
  }

  p.histories_.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      if (p.obs_mask_[s * T + t]) p.histories_[s].push_back(int(t));
    }
  }
  return p;
}

IngestResult ingest_panel(std::istream& in, const ColumnMapping& mapping, char delim) {
  DelimitedReader reader(in, delim);

  auto mapped = [&](const std::string& logical) {
    auto it = mapping.names.find(logical);
    return it == mapping.names.end() ? logical : it->second;
  };
  auto col_of = [&](const std::string& logical) { return reader.column(mapped(logical)); };

  std::vector<std::string> missing;
  for (const char* req : {"date", "stock_id", "ret", "price", "volume"}) {
    if (col_of(req) < 0) missing.push_back(mapped(req));
  }
  if (!missing.empty()) {
    std::string msg = "missing required column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError(msg);
  }

  const int c_date = col_of("date"), c_stock = col_of("stock_id"), c_ret = col_of("ret");
  const int c_price = col_of("price"), c_vol = col_of("volume");
  const int c_exch = col_of("exchange_code"), c_shr = col_of("share_code");
  const int c_mvw = col_of("market_ret_vw"), c_msp = col_of("market_ret_sp");
  const int c_bid = col_of("bid"), c_ask = col_of("ask");

  IngestResult res;
  std::vector<RawObservation> obs;
  std::vector<std::string> fields;
  std::set<std::pair<Date, std::string>> seen;

  auto field = [&](int c) -> std::string {
    return (c >= 0 && c < int(fields.size())) ? fields[c] : std::string();
  };

  while (reader.next(fields)) {
    ++res.report.rows_total;
    RawObservation o;
    try {
      o.date = parse_date(field(c_date));
    } catch (const ParseError&) {
      ++res.report.rows_rejected;
      ++res.report.rejection_reasons["bad date"];
      continue;
    }
    o.stock_id = field(c_stock);
    if (o.stock_id.empty()) {
      ++res.report.rows_rejected;
      ++res.report.rejection_reasons["empty stock_id"];
      continue;
    }
    auto ret = parse_double(field(c_ret));
    auto price = parse_double(field(c_price));
    auto volume = parse_double(field(c_vol));
    if (!ret || !price || !volume) {
      ++res.report.rows_rejected;
      ++res.report.rejection_reasons["bad numeric field"];
      continue;
    }
    if (*volume < 0.0) {
      ++res.report.rows_rejected;
      ++res.report.rejection_reasons["negative volume"];
      continue;
    }
    o.ret = *ret;
    o.volume = *volume;
    if (*price < 0.0) {
      o.price = -*price;  // vendor convention: negated bid/ask midpoint
      ++res.report.negative_prices;
    } else {
      o.price = *price;
    }
    if (c_exch >= 0) {
      if (auto v = parse_double(field(c_exch))) o.exchange_code = int(*v);
    }
    if (c_shr >= 0) {
      if (auto v = parse_double(field(c_shr))) o.share_code = int(*v);
    }
    if (c_mvw >= 0) {
      if (auto v = parse_double(field(c_mvw))) o.market_ret_vw = *v;
    }
    if (c_msp >= 0) {
      if (auto v = parse_double(field(c_msp))) o.market_ret_sp = *v;
    }
    if (c_bid >= 0) {
      if (auto v = parse_double(field(c_bid))) o.bid = *v;
    }
    if (c_ask >= 0) {
      if (auto v = parse_double(field(c_ask))) o.ask = *v;
    }
    auto key = std::make_pair(o.date, o.stock_id);
    if (!seen.insert(key).second) {
      throw DuplicateKeyError("duplicate (date, stock) pair: (" + format_date(o.date) + ", " +
                              o.stock_id + ")");
    }
    obs.push_back(std::move(o));
    ++res.report.rows_loaded;
  }

  res.panel = Panel::from_observations(std::move(obs));
  res.panel.set_negative_price_count(res.report.negative_prices);
  return res;
}

IngestResult ingest_panel_file(const std::string& path, const ColumnMapping& mapping, char delim) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open panel file: " + path);
  return ingest_panel(in, mapping, delim);
}

void ScreenConfig::validate() const {
  if (min_price < 0.0) throw ConfigError("min_price must be >= 0");
  if (min_history_days < 1) throw ConfigError("min_history_days must be >= 1");
}

namespace {

struct ObsRef {
  std::size_t stock;
  int date_idx;
};

std::size_t count_stocks(const std::vector<ObsRef>& kept, std::size_t n_stocks) {
  std::vector<char> present(n_stocks, 0);
  for (const auto& o : kept) present[o.stock] = 1;
  return std::size_t(std::count(present.begin(), present.end(), 1));
}

}  // namespace

std::pair<Panel, ScreenReport> apply_screens(const Panel& panel, const ScreenConfig& cfg) {
  cfg.validate();
  const std::size_t T = panel.n_dates();
  ScreenReport report;

  std::vector<ObsRef> kept;
  for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
    for (int t : panel.history(s)) kept.push_back({s, t});
  }
  report.rows.push_back({"raw universe", kept.size(), count_stocks(kept, panel.n_stocks())});

  auto filter = [&](const std::string& name, auto&& pred) {
    std::vector<ObsRef> next;
    next.reserve(kept.size());
    for (const auto& o : kept) {
      if (pred(o)) next.push_back(o);
    }
    kept = std::move(next);
    report.rows.push_back({name, kept.size(), count_stocks(kept, panel.n_stocks())});
  };

  const auto& exch = panel.column("exchange_code");
  filter("eligible exchanges", [&](const ObsRef& o) {
    if (cfg.eligible_exchanges.empty()) return true;
    const double v = exch[o.stock * T + std::size_t(o.date_idx)];
    if (is_missing(v)) return false;
    return std::find(cfg.eligible_exchanges.begin(), cfg.eligible_exchanges.end(), int(v)) !=
           cfg.eligible_exchanges.end();
  });

  const auto& shr = panel.column("share_code");
  filter("common shares", [&](const ObsRef& o) {
    if (cfg.common_share_codes.empty()) return true;
    const double v = shr[o.stock * T + std::size_t(o.date_idx)];
    if (is_missing(v)) return false;
    return std::find(cfg.common_share_codes.begin(), cfg.common_share_codes.end(), int(v)) !=
           cfg.common_share_codes.end();
  });

  const auto& price = panel.column("price");
  filter("min price", [&](const ObsRef& o) {
    const double v = price[o.stock * T + std::size_t(o.date_idx)];
    return !is_missing(v) && v >= cfg.min_price;
  });

  std::vector<std::size_t> per_stock(panel.n_stocks(), 0);
  for (const auto& o : kept) ++per_stock[o.stock];
  filter("min history", [&](const ObsRef& o) {
    return per_stock[o.stock] >= std::size_t(cfg.min_history_days);
  });

  // rebuild the panel from kept observations
  std::vector<RawObservation> obs;
  obs.reserve(kept.size());
  const auto& ret = panel.column("ret");
  const auto& volume = panel.column("volume");
  const auto& bid = panel.column("bid");
  const auto& ask = panel.column("ask");
  for (const auto& o : kept) {
    const std::size_t i = o.stock * T + std::size_t(o.date_idx);
    RawObservation r;
    r.date = panel.dates()[std::size_t(o.date_idx)];
    r.stock_id = panel.stock_ids()[o.stock];
    r.ret = ret[i];
    r.price = price[i];
    r.volume = volume[i];
    r.bid = bid[i];
    r.ask = ask[i];
    r.exchange_code = is_missing(exch[i]) ? -1 : int(exch[i]);
    r.share_code = is_missing(shr[i]) ? -1 : int(shr[i]);
    r.market_ret_vw = panel.market_vw()[std::size_t(o.date_idx)];
    r.market_ret_sp = panel.market_sp()[std::size_t(o.date_idx)];
    obs.push_back(std::move(r));
  }
  Panel out = Panel::from_observations(std::move(obs));
  out.set_negative_price_count(panel.negative_price_count());
  return {std::move(out), std::move(report)};
}

namespace {

double window_mean(const std::vector<double>& v, std::size_t end, std::size_t w) {
  // trailing w entries ending at `end` inclusive; NaN if any missing
  double sum = 0.0;
  for (std::size_t k = 0; k < w; ++k) {
    const double x = v[end - k];
    if (is_missing(x)) return nan_value();
    sum += x;
  }
  return sum / double(w);
}

double window_sample_std(const std::vector<double>& v, std::size_t end, std::size_t w) {
  const double m = window_mean(v, end, w);
  if (is_missing(m)) return nan_value();
  double ss = 0.0;
  for (std::size_t k = 0; k < w; ++k) {
    const double d = v[end - k] - m;
    ss += d * d;
  }
  return std::sqrt(ss / double(w - 1));
}

}  // namespace

Panel build_primitives(const Panel& panel) {
  Panel out = panel;
  const std::size_t T = panel.n_dates();
  const std::size_t S = panel.n_stocks();
  const std::size_t N = S * T;

  const auto& ret = panel.column("ret");
  const auto& price = panel.column("price");
  const auto& volume = panel.column("volume");
  const auto& bid = panel.column("bid");
  const auto& ask = panel.column("ask");

  std::vector<double> mkt_ret(N, nan_value());
  std::vector<double> mkt_vol(N, nan_value());
  std::vector<double> vol_ratio(N, nan_value());
  std::vector<double> ret_vol(N, nan_value());
  std::vector<double> price_ma_ratio(N, nan_value());
  std::vector<double> vol_growth(N, nan_value());
  std::vector<double> spread(N, nan_value());

  // market-state series on the panel date index
  const auto& mvw = panel.market_vw();
  std::vector<double> mkt_vol_by_date(T, nan_value());
  for (std::size_t t = std::size_t(kRollWindow) - 1; t < T; ++t) {
    mkt_vol_by_date[t] = window_sample_std(mvw, t, kRollWindow);
  }

  for (std::size_t s = 0; s < S; ++s) {
    const auto& hist = panel.history(s);
    const std::size_t H = hist.size();
    std::vector<double> sret(H), sprice(H), svol(H);
    for (std::size_t k = 0; k < H; ++k) {
      const std::size_t i = s * T + std::size_t(hist[k]);
      sret[k] = ret[i];
      sprice[k] = price[i];
      svol[k] = volume[i];
    }
    for (std::size_t k = 0; k < H; ++k) {
      const std::size_t t = std::size_t(hist[k]);
      const std::size_t i = s * T + t;
      mkt_ret[i] = mvw[t];
      mkt_vol[i] = mkt_vol_by_date[t];
      if (k >= 1) {
        const double prev = svol[k - 1];
        if (!is_missing(prev) && !is_missing(svol[k]) && prev > 0.0) {
          vol_growth[i] = svol[k] / prev - 1.0;
        }
      }
      if (k + 1 >= std::size_t(kRollWindow)) {
        const double vmean = window_mean(svol, k, kRollWindow);
        if (!is_missing(vmean) && vmean > 0.0 && !is_missing(svol[k])) {
          vol_ratio[i] = svol[k] / vmean;
        }
        ret_vol[i] = window_sample_std(sret, k, kRollWindow);
        const double pmean = window_mean(sprice, k, kRollWindow);
        if (!is_missing(pmean) && pmean > 0.0 && !is_missing(sprice[k])) {
          price_ma_ratio[i] = sprice[k] / pmean;
        }
      }
      if (!is_missing(bid[i]) && !is_missing(ask[i])) {
        const double mid = 0.5 * (bid[i] + ask[i]);
        if (mid > 0.0) spread[i] = (ask[i] - bid[i]) / mid;
      }
    }
  }

  out.add_column("mkt_ret", std::move(mkt_ret));
  out.add_column("mkt_vol", std::move(mkt_vol));
  out.add_column("vol_ratio", std::move(vol_ratio));
  out.add_column("ret_vol", std::move(ret_vol));
  out.add_column("price_ma_ratio", std::move(price_ma_ratio));
  out.add_column("vol_growth", std::move(vol_growth));
  out.add_column("spread", std::move(spread));
  return out;
}

std::vector<double> winsorize_cross_section(const std::vector<double>& values, double p_low,
                                            double p_high) {
  if (!(p_low >= 0.0 && p_low < p_high && p_high <= 1.0)) {
    throw std::invalid_argument("winsorize bounds must satisfy 0 <= p_low < p_high <= 1");
  }
  std::vector<double> finite;
  finite.reserve(values.size());
  for (double v : values) {
    if (!is_missing(v)) finite.push_back(v);
  }
  std::vector<double> out = values;
  if (finite.empty()) return out;
  const double lo = quantile_interp(finite, p_low);
  const double hi = quantile_interp(finite, p_high);
  for (double& v : out) {
    if (is_missing(v)) continue;
    v = std::clamp(v, lo, hi);
  }
  return out;
}

ZScoreResult zscore_cross_section(const std::vector<double>& values) {
  std::vector<double> finite;
  finite.reserve(values.size());
  for (double v : values) {
    if (!is_missing(v)) finite.push_back(v);
  }
  ZScoreResult res;
  res.values = values;
  const double sd = sample_std(finite);
  if (finite.size() < 2 || is_missing(sd) || sd == 0.0) {
    res.degenerate = true;
    for (double& v : res.values) {
      if (!is_missing(v)) v = 0.0;
    }
    return res;
  }
  const double m = mean_of(finite);
  for (double& v : res.values) {
    if (!is_missing(v)) v = (v - m) / sd;
  }
  return res;
}

ZScoreResult normalize_cross_section(const std::vector<double>& values, double p_low,
                                     double p_high) {
  return zscore_cross_section(winsorize_cross_section(values, p_low, p_high));
}

}  // namespace alphaloom

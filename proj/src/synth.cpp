#include "alphaloom/synth.hpp"

#include <cmath>
#include <random>

#include "alphaloom/csv.hpp"
#include "alphaloom/errors.hpp"
#include "alphaloom/expr.hpp"

namespace alphaloom {

SynthResult synth_panel(const SynthParams& params) {
  if (params.mode != "planted" && params.mode != "interaction" && params.mode != "null") {
    throw ConfigError("synth mode must be planted | interaction | null");
  }
  if (params.stocks < 2 || params.days < 2) {
    throw ConfigError("synth needs at least 2 stocks and 2 days");
  }

  const int S = params.stocks;
  const int T = params.days;
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthResult res;
  res.dates.reserve(std::size_t(T));
  Date d = parse_date(params.start_date);
  if (!is_weekday(d)) d = next_weekday(d);
  for (int t = 0; t < T; ++t) {
    res.dates.push_back(d);
    d = next_weekday(d);
  }

  std::vector<double> mkt(std::size_t(T), 0.0);
  for (int t = 0; t < T; ++t) mkt[std::size_t(t)] = 0.0003 + 0.01 * gauss(rng);

  std::vector<std::vector<double>> volume(std::size_t(S), std::vector<double>(std::size_t(T), 0.0));
  std::vector<std::vector<double>> price(std::size_t(S), std::vector<double>(std::size_t(T), 0.0));
  std::vector<std::vector<double>> ret(std::size_t(S), std::vector<double>(std::size_t(T), 0.0));
  std::vector<double> price0(std::size_t(S), 0.0);
  for (int s = 0; s < S; ++s) {
    volume[std::size_t(s)][0] = std::exp(12.0 + 0.8 * gauss(rng));
    price0[std::size_t(s)] = std::exp(std::log(30.0) + 0.5 * gauss(rng));
    for (int t = 1; t < T; ++t) {
      volume[std::size_t(s)][std::size_t(t)] =
          volume[std::size_t(s)][std::size_t(t - 1)] * std::exp(0.3 * gauss(rng));
    }
  }

  const double sigma = params.mode == "interaction" ? params.interaction_noise : params.noise_sigma;
  const double null_sigma = 0.02;

  // trailing 20-observation mean used by the interaction signal
  auto vol_ma20 = [&](int s, int t) -> double {
    if (t < 19) return nan_value();
    double sum = 0.0;
    for (int j = 0; j < 20; ++j) sum += volume[std::size_t(s)][std::size_t(t - j)];
    return sum / 20.0;
  };

  for (int s = 0; s < S; ++s) ret[std::size_t(s)][0] = sigma * gauss(rng);

  for (int t = 1; t < T; ++t) {
    std::vector<double> signal(std::size_t(S), 0.0);
    if (params.mode == "planted") {
      // signal at formation t-1 drives the return over (t-1, t]
      std::vector<double> growth(std::size_t(S), nan_value());
      if (t - 1 >= 1) {
        for (int s = 0; s < S; ++s) {
          growth[std::size_t(s)] = volume[std::size_t(s)][std::size_t(t - 1)] /
                                       volume[std::size_t(s)][std::size_t(t - 2)] -
                                   1.0;
        }
      }
      const std::vector<double> ranks = cs_rank_vector(growth);
      for (int s = 0; s < S; ++s) {
        const double r = ranks[std::size_t(s)];
        signal[std::size_t(s)] = is_missing(r) ? 0.0 : params.signal_coef * r;
      }
    } else if (params.mode == "interaction") {
      std::vector<double> vratio(std::size_t(S), nan_value());
      std::vector<double> growth(std::size_t(S), nan_value());
      for (int s = 0; s < S; ++s) {
        const double ma = vol_ma20(s, t - 1);
        if (!is_missing(ma) && ma > 0.0) {
          vratio[std::size_t(s)] = volume[std::size_t(s)][std::size_t(t - 1)] / ma;
        }
        if (t - 1 >= 1) {
          growth[std::size_t(s)] = volume[std::size_t(s)][std::size_t(t - 1)] /
                                       volume[std::size_t(s)][std::size_t(t - 2)] -
                                   1.0;
        }
      }
      const std::vector<double> z1 = zscore_cross_section(vratio).values;
      const std::vector<double> z2 = zscore_cross_section(growth).values;
      for (int s = 0; s < S; ++s) {
        const double a = z1[std::size_t(s)], b = z2[std::size_t(s)];
        if (!is_missing(a) && !is_missing(b)) {
          signal[std::size_t(s)] = params.interaction_coef * a * b;
        }
      }
    }
    for (int s = 0; s < S; ++s) {
      const double noise = (params.mode == "null" ? null_sigma : sigma) * gauss(rng);
      ret[std::size_t(s)][std::size_t(t)] = signal[std::size_t(s)] + noise;
    }
  }

  for (int s = 0; s < S; ++s) {
    price[std::size_t(s)][0] = price0[std::size_t(s)];
    for (int t = 1; t < T; ++t) {
      price[std::size_t(s)][std::size_t(t)] =
          price[std::size_t(s)][std::size_t(t - 1)] *
          (1.0 + ret[std::size_t(s)][std::size_t(t)]);
    }
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<char> quoted(std::size_t(S), 0);
  for (int s = 0; s < S; ++s) quoted[std::size_t(s)] = unif(rng) < 0.5 ? 1 : 0;

  for (int s = 0; s < S; ++s) {
    char name[16];
    std::snprintf(name, sizeof(name), "S%04d", s + 1);
    int exchange = (s % 3) + 1;
    int share = (s % 2) ? 11 : 10;
    // the tail stocks carry codes the default screens drop
    if (params.screenable_stocks > 0 && s >= S - params.screenable_stocks) {
      if ((S - 1 - s) % 2 == 0) {
        exchange = 9;
      } else {
        share = 73;
      }
    }
    for (int t = 0; t < T; ++t) {
      RawObservation o;
      o.date = res.dates[std::size_t(t)];
      o.stock_id = name;
      o.ret = ret[std::size_t(s)][std::size_t(t)];
      o.price = price[std::size_t(s)][std::size_t(t)];
      o.volume = volume[std::size_t(s)][std::size_t(t)];
      o.exchange_code = exchange;
      o.share_code = share;
      o.market_ret_vw = mkt[std::size_t(t)];
      o.market_ret_sp = mkt[std::size_t(t)] + 0.0002;
      if (quoted[std::size_t(s)]) {
        const double half = 0.001 * o.price;
        o.bid = o.price - half;
        o.ask = o.price + half;
      }
      res.observations.push_back(std::move(o));
    }
  }

  res.hidden_expr = params.mode == "planted"   ? "cs_rank(vol_growth)"
                    : params.mode == "interaction"
                        ? "mul(cs_zscore(vol_ratio),cs_zscore(vol_growth))"
                        : "";
  return res;
}

void write_panel_csv(std::ostream& out, const std::vector<RawObservation>& obs) {
  out << "date,stock_id,ret,price,volume,exchange_code,share_code,market_ret_vw,market_ret_sp,"
         "bid,ask\n";
  for (const auto& o : obs) {
    out << format_date(o.date) << ',' << o.stock_id << ',' << format_double(o.ret) << ','
        << format_double(o.price) << ',' << format_double(o.volume) << ',' << o.exchange_code
        << ',' << o.share_code << ',' << format_double(o.market_ret_vw) << ','
        << format_double(o.market_ret_sp) << ',';
    if (!is_missing(o.bid)) out << format_double(o.bid);
    out << ',';
    if (!is_missing(o.ask)) out << format_double(o.ask);
    out << '\n';
  }
}

void write_benchmark_csv(std::ostream& out, const std::vector<Date>& dates, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  out << "date,Mkt-RF,SMB,HML,RMW,CMA,MOM,RF\n";
  for (Date d : dates) {
    const double mkt = 0.03 + 1.0 * gauss(rng);  // percent units
    out << format_date(d) << ',' << format_double(mkt);
    for (int f = 0; f < 5; ++f) out << ',' << format_double(0.4 * gauss(rng));
    out << ",0.005\n";
  }
}

}  // namespace alphaloom

#include "alphaloom/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "alphaloom/csv.hpp"
#include "alphaloom/errors.hpp"

namespace alphaloom {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file: " + path);
  return out;
}

void stamp_line(std::ostream& out, const OutputStamp& stamp) {
  out << "# config_hash=" << stamp.config_hash << " seed=" << stamp.seed << '\n';
}

std::string num(double v, int decimals = 4) {
  if (is_missing(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string pct(double v, int decimals = 2) {
  if (is_missing(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v * 100.0);
  return buf;
}

}  // namespace

void write_screen_report_csv(const std::string& path, const ScreenReport& report,
                             const OutputStamp& stamp) {
  auto out = open_out(path);
  stamp_line(out, stamp);
  out << "Screen,Obs,Stocks\n";
  for (const auto& row : report.rows) {
    out << row.name << ',' << row.remaining_observations << ',' << row.remaining_stocks << '\n';
  }
}

void write_factor_metrics_csv(const std::string& path,
                              const std::vector<std::pair<std::string, EvalMetrics>>& rows,
                              const OutputStamp& stamp) {
  auto out = open_out(path);
  stamp_line(out, stamp);
  out << "Factor,Sharpe,IC,ICIR,ICL,ICLIR,Sortino,Calmar,Annual Ret,Max DD\n";
  for (const auto& [name, m] : rows) {
    out << name << ',' << num(m.sharpe) << ',' << num(m.mean_ic) << ',' << num(m.icir) << ','
        << num(m.icl) << ',' << num(m.iclir) << ',' << num(m.sortino) << ',' << num(m.calmar)
        << ',' << num(m.ann_return) << ','
        << (is_missing(m.max_drawdown) ? "NA" : num(-m.max_drawdown)) << '\n';
  }
}

void write_composite_performance_csv(const std::string& path, const std::string& label,
                                     const std::vector<Date>& dates,
                                     const std::vector<double>& series,
                                     const OutputStamp& stamp) {
  auto out = open_out(path);
  stamp_line(out, stamp);
  out << "Period,Period Ret. (%),Ann. Ret. (%),Ann. Vol. (%),Sharpe,Max DD (%),N\n";
  const PerfSummary full = perf_summary(series);
  out << label << ',' << pct(compound_return(series)) << ',' << pct(full.ann_return) << ','
      << pct(full.ann_vol) << ',' << num(full.sharpe, 2) << ','
      << (is_missing(full.max_drawdown) ? "NA" : pct(-full.max_drawdown)) << ',' << series.size()
      << '\n';
  for (const QuarterRow& q : quarterly_table(dates, series)) {
    out << quarter_label(q.quarter) << (q.partial ? "*" : "") << ',' << pct(q.period_return)
        << ',' << pct(q.ann_return) << ',' << pct(q.ann_vol) << ',' << num(q.sharpe, 2) << ','
        << (is_missing(q.max_drawdown) ? "NA" : pct(-q.max_drawdown)) << ',' << q.n_days << '\n';
  }
}

void write_decile_csv(const std::string& path, const BacktestReport& report,
                      const OutputStamp& stamp) {
  auto out = open_out(path);
  stamp_line(out, stamp);
  out << "Portfolio,Period Return (%),Ann. Sharpe,N Days\n";
  for (int q = 0; q < report.Q; ++q) {
    out << 'D' << (q + 1) << ',' << pct(report.decile_period_return[std::size_t(q)]) << ','
        << num(report.decile_perf[std::size_t(q)].sharpe, 3) << ',' << report.date_indices.size()
        << '\n';
  }
  out << "D" << report.Q << "-D1," << pct(report.spread_period_return) << ','
      << num(report.spread_perf.sharpe, 3) << ',' << report.date_indices.size() << '\n';
  out << "# decile_monotonicity=" << num(report.monotonicity, 4) << '\n';
}

void write_horizon_csv(const std::string& path,
                       const std::vector<std::pair<std::string, std::vector<HorizonStats>>>& rows,
                       const OutputStamp& stamp) {
  auto out = open_out(path);
  stamp_line(out, stamp);
  out << "Portfolio";
  if (!rows.empty()) {
    for (const auto& h : rows.front().second) out << ",H" << h.horizon;
  }
  out << '\n';
  for (const auto& [name, stats] : rows) {
    out << name;
    for (const auto& h : stats) out << ',' << pct(h.ann_mean);
    out << '\n';
    out << name << " t";
    for (const auto& h : stats) out << ",(" << num(h.nw_tstat, 2) << ')';
    out << '\n';
  }
}

void write_cost_turnover_csv(const std::string& path, const std::vector<Date>& dates,
                             const std::vector<double>& gross, const std::vector<double>& net,
                             const std::vector<double>& turnover, const OutputStamp& stamp) {
  auto out = open_out(path);
  stamp_line(out, stamp);
  out << "Quarter,Avg Turnover (%),Gross Ret (%),Net Ret (%),Gross Sharpe,Net Sharpe\n";
  const std::vector<QuarterRow> rows = quarterly_table(dates, gross);
  for (const QuarterRow& q : rows) {
    std::vector<double> g(gross.begin() + long(q.begin), gross.begin() + long(q.end));
    std::vector<double> n(net.begin() + long(q.begin), net.begin() + long(q.end));
    std::vector<double> t(turnover.begin() + long(q.begin), turnover.begin() + long(q.end));
    const PerfSummary pg = perf_summary(g);
    const PerfSummary pn = perf_summary(n);
    out << quarter_label(q.quarter) << (q.partial ? "*" : "") << ',' << pct(mean_of(t)) << ','
        << pct(compound_return(g)) << ',' << pct(compound_return(n)) << ',' << num(pg.sharpe, 3)
        << ',' << num(pn.sharpe, 3) << '\n';
  }
}

void write_alpha_csv(const std::string& path,
                     const std::vector<std::pair<std::string, std::vector<AlphaEstimate>>>& rows,
                     const OutputStamp& stamp) {
  auto out = open_out(path);
  stamp_line(out, stamp);
  out << "Portfolio";
  for (const char* m : {"CAPM", "FF3", "FF5", "FF6"}) {
    out << ',' << m << " alpha (daily %)," << m << " alpha (ann %)," << m << " t";
  }
  out << '\n';
  for (const auto& [name, estimates] : rows) {
    out << name;
    for (const auto& est : estimates) {
      out << ',' << pct(est.alpha_daily, 4) << ',' << pct(est.alpha_annualized) << ','
          << num(est.nw_tstat, 2);
    }
    out << '\n';
  }
}

void write_series_csv(const std::string& path, const std::vector<Date>& dates,
                      const std::vector<double>& values, const OutputStamp& stamp) {
  if (dates.size() != values.size()) {
    throw std::invalid_argument("write_series_csv: dates and values must align");
  }
  auto out = open_out(path);
  stamp_line(out, stamp);
  out << "date,value\n";
  for (std::size_t i = 0; i < dates.size(); ++i) {
    out << format_date(dates[i]) << ',' << format_double(values[i]) << '\n';
  }
}

std::pair<std::vector<Date>, std::vector<double>> read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open series file: " + path);
  DelimitedReader reader(in, ',');
  const int cd = reader.column("date");
  const int cv = reader.column("value");
  if (cd < 0 || cv < 0) throw SchemaError("series file needs date,value columns: " + path);
  std::pair<std::vector<Date>, std::vector<double>> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    out.first.push_back(parse_date(fields[std::size_t(cd)]));
    const auto v = parse_double(fields[std::size_t(cv)]);
    out.second.push_back(v ? *v : nan_value());
  }
  return out;
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<Date>& dates, const std::vector<SeriesRef>& series,
                     const OutputStamp& stamp, bool cumulative) {
  const int W = 960, H = 420;
  const int ML = 70, MR = 20, MT = 40, MB = 40;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::vector<std::vector<double>> lines;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const SeriesRef& s : series) {
    std::vector<double> line;
    double eq = 1.0;
    for (double v : *s.values) {
      if (cumulative) {
        eq *= (1.0 + (is_missing(v) ? 0.0 : v));
        line.push_back(eq - 1.0);
      } else {
        line.push_back(v);
      }
    }
    for (double v : line) {
      if (is_missing(v)) continue;
      if (first) {
        lo = hi = v;
        first = false;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    lines.push_back(std::move(line));
  }
  if (first) {
    lo = -1.0;
    hi = 1.0;
  }
  if (hi == lo) hi = lo + 1.0;

  auto xpix = [&](std::size_t i) {
    const double frac = dates.size() > 1 ? double(i) / double(dates.size() - 1) : 0.0;
    return ML + frac * (W - ML - MR);
  };
  auto ypix = [&](double v) { return MT + (hi - v) / (hi - lo) * (H - MT - MB); };

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  out << "<!-- config_hash=" << stamp.config_hash << " seed=" << stamp.seed << " -->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">"
      << title << "</text>\n";
  // axes
  out << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\""
      << H - MB << "\" stroke=\"#444\"/>\n";
  out << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
      << "\" stroke=\"#444\"/>\n";
  if (lo < 0.0 && hi > 0.0) {
    out << "<line x1=\"" << ML << "\" y1=\"" << ypix(0.0) << "\" x2=\"" << W - MR << "\" y2=\""
        << ypix(0.0) << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
  }
  char buf[64];
  for (double v : {lo, 0.5 * (lo + hi), hi}) {
    std::snprintf(buf, sizeof(buf), "%.1f%%", v * 100.0);
    out << "<text x=\"" << ML - 6 << "\" y=\"" << ypix(v) + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << buf
        << "</text>\n";
  }
  if (!dates.empty()) {
    out << "<text x=\"" << ML << "\" y=\"" << H - MB + 16
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << format_date(dates.front())
        << "</text>\n";
    out << "<text x=\"" << W - MR << "\" y=\"" << H - MB + 16
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << format_date(dates.back()) << "</text>\n";
  }
  for (std::size_t k = 0; k < lines.size(); ++k) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[k % 10] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < lines[k].size(); ++i) {
      if (is_missing(lines[k][i])) continue;
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", xpix(i), ypix(lines[k][i]));
      out << buf;
    }
    out << "\"/>\n";
    out << "<text x=\"" << ML + 10 << "\" y=\"" << MT + 16 * int(k) + 12 << "\" fill=\""
        << colors[k % 10] << "\" font-size=\"12\" font-family=\"sans-serif\">" << series[k].label
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace alphaloom

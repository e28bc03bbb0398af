#include "alphaloom/attribution.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "alphaloom/csv.hpp"
#include "alphaloom/errors.hpp"

namespace alphaloom {

namespace {

std::string canonical_factor_name(std::string s) {
  for (char& c : s) {
    c = char(std::toupper(static_cast<unsigned char>(c)));
    if (c == '-') c = '_';
  }
  return s;
}

}  // namespace

BenchmarkReturns ingest_factor_returns(std::istream& in, bool percent, char delim) {
  DelimitedReader reader(in, delim);
  int date_col = -1;
  std::vector<std::pair<std::string, int>> factor_cols;
  for (std::size_t i = 0; i < reader.header().size(); ++i) {
    const std::string canon = canonical_factor_name(reader.header()[i]);
    if (canon == "DATE") {
      date_col = int(i);
    } else {
      factor_cols.emplace_back(canon, int(i));
    }
  }
  if (date_col < 0) throw SchemaError("benchmark file: missing date column");

  BenchmarkReturns out;
  for (const auto& [name, _] : factor_cols) out.columns[name] = {};

  std::vector<std::string> fields;
  std::size_t rowno = 0;
  while (reader.next(fields)) {
    ++rowno;
    out.dates.push_back(parse_date(fields[std::size_t(date_col)]));
    for (const auto& [name, idx] : factor_cols) {
      if (idx >= int(fields.size())) {
        throw SchemaError("benchmark file: short row " + std::to_string(rowno));
      }
      const auto v = parse_double(fields[std::size_t(idx)]);
      if (!v) {
        throw SchemaError("benchmark file: gap in column " + name + " at row " +
                          std::to_string(rowno) + "; gaps are errors, not filled");
      }
      out.columns[name].push_back(percent ? *v / 100.0 : *v);
    }
  }
  if (!std::is_sorted(out.dates.begin(), out.dates.end())) {
    throw SchemaError("benchmark file: dates must be sorted ascending");
  }
  return out;
}

BenchmarkReturns ingest_factor_returns_file(const std::string& path, bool percent, char delim) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open benchmark file: " + path);
  BenchmarkReturns b = ingest_factor_returns(in, percent, delim);
  b.source_id = path;
  return b;
}

std::string spec_name(BenchmarkSpec spec) {
  switch (spec) {
    case BenchmarkSpec::CAPM:
      return "CAPM";
    case BenchmarkSpec::FF3:
      return "FF3";
    case BenchmarkSpec::FF5:
      return "FF5";
    case BenchmarkSpec::FF6:
      return "FF6";
  }
  return "CAPM";
}

const std::vector<std::string>& spec_factors(BenchmarkSpec spec) {
  static const std::vector<std::string> capm = {"MKT_RF"};
  static const std::vector<std::string> ff3 = {"MKT_RF", "SMB", "HML"};
  static const std::vector<std::string> ff5 = {"MKT_RF", "SMB", "HML", "RMW", "CMA"};
  static const std::vector<std::string> ff6 = {"MKT_RF", "SMB", "HML", "RMW", "CMA", "MOM"};
  switch (spec) {
    case BenchmarkSpec::CAPM:
      return capm;
    case BenchmarkSpec::FF3:
      return ff3;
    case BenchmarkSpec::FF5:
      return ff5;
    case BenchmarkSpec::FF6:
      return ff6;
  }
  return capm;
}

AlphaEstimate alpha_regression(const std::vector<Date>& dates, const std::vector<double>& values,
                               const BenchmarkReturns& bench, BenchmarkSpec spec, int nw_lags,
                               bool subtract_rf) {
  if (dates.size() != values.size()) {
    throw std::invalid_argument("alpha_regression: dates and values must align");
  }
  if (nw_lags < 0) throw std::invalid_argument("alpha_regression: nw_lags must be >= 0");
  const std::vector<std::string>& factors = spec_factors(spec);
  for (const auto& f : factors) {
    if (!bench.has(f)) {
      throw SchemaError("benchmark data missing factor " + f + " required by " + spec_name(spec));
    }
  }
  if (subtract_rf && !bench.has("RF")) {
    throw SchemaError("benchmark data missing RF required for excess-return regression");
  }

  // intersect on dates
  std::vector<double> y;
  std::vector<std::size_t> bench_rows;
  {
    std::size_t bi = 0;
    for (std::size_t i = 0; i < dates.size(); ++i) {
      while (bi < bench.dates.size() && bench.dates[bi] < dates[i]) ++bi;
      if (bi < bench.dates.size() && bench.dates[bi] == dates[i]) {
        double v = values[i];
        if (is_missing(v)) continue;
        if (subtract_rf) v -= bench.columns.at("RF")[bi];
        y.push_back(v);
        bench_rows.push_back(bi);
      }
    }
  }
  const std::size_t k = factors.size() + 1;
  if (y.size() < 3 * k) {
    throw std::invalid_argument("alpha_regression: needs >= " + std::to_string(3 * k) +
                                " overlapping dates, got " + std::to_string(y.size()));
  }

  const std::size_t n = y.size();
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd Y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(Eigen::Index(i), 0) = 1.0;
    for (std::size_t c = 0; c < factors.size(); ++c) {
      X(Eigen::Index(i), Eigen::Index(c + 1)) = bench.columns.at(factors[c])[bench_rows[i]];
    }
    Y(Eigen::Index(i)) = y[i];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < Eigen::Index(k)) {
    throw SingularityError("alpha_regression: collinear regressors in " + spec_name(spec));
  }
  const Eigen::VectorXd beta = qr.solve(Y);
  const Eigen::VectorXd resid = Y - X * beta;

  // Bartlett-weighted HAC sandwich
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(Eigen::Index(k), Eigen::Index(k));
  for (std::size_t t = 0; t < n; ++t) {
    const Eigen::VectorXd xt = X.row(Eigen::Index(t)).transpose();
    S += resid(Eigen::Index(t)) * resid(Eigen::Index(t)) * xt * xt.transpose();
  }
  for (int l = 1; l <= nw_lags && std::size_t(l) < n; ++l) {
    const double w = 1.0 - double(l) / double(nw_lags + 1);
    for (std::size_t t = std::size_t(l); t < n; ++t) {
      const Eigen::VectorXd xt = X.row(Eigen::Index(t)).transpose();
      const Eigen::VectorXd xl = X.row(Eigen::Index(t - std::size_t(l))).transpose();
      const double ee = resid(Eigen::Index(t)) * resid(Eigen::Index(t - std::size_t(l)));
      const Eigen::MatrixXd cross = ee * xt * xl.transpose();
      S += w * (cross + cross.transpose());
    }
  }
  const Eigen::MatrixXd V = xtx_inv * S * xtx_inv;

  AlphaEstimate est;
  est.spec = spec;
  est.nw_lags = nw_lags;
  est.n_obs = n;
  est.alpha_daily = beta(0);
  est.alpha_annualized = std::pow(1.0 + beta(0), 252.0) - 1.0;
  est.alpha_se = std::sqrt(V(0, 0));
  est.nw_tstat = est.alpha_se > 0.0 ? est.alpha_daily / est.alpha_se : nan_value();
  for (std::size_t c = 0; c < factors.size(); ++c) {
    est.betas[factors[c]] = beta(Eigen::Index(c + 1));
  }
  return est;
}

int nw_auto_lags(std::size_t n_obs) {
  return int(std::floor(4.0 * std::pow(double(n_obs) / 100.0, 2.0 / 9.0)));
}

}  // namespace alphaloom

// Independent brute-force oracles for the test suites. Everything here is
// written against the definitions directly, without touching the library's
// computation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

inline bool finite(double x) { return std::isfinite(x); }

// rank-then-Pearson Spearman with average ties
inline std::vector<double> ranks_avg(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> r(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    r[i] = less + 0.5 * (equal + 1.0);
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double cxy = 0.0, cxx = 0.0, cyy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cxy += (x[i] - mx) * (y[i] - my);
    cxx += (x[i] - mx) * (x[i] - mx);
    cyy += (y[i] - my) * (y[i] - my);
  }
  return cxy / std::sqrt(cxx * cyy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks_avg(x), ranks_avg(y));
}

// all-pairs peak/trough maximum drawdown over an equity path
inline double max_drawdown_allpairs(const std::vector<double>& equity) {
  double dd = 0.0;
  for (std::size_t peak = 0; peak < equity.size(); ++peak) {
    for (std::size_t trough = peak; trough < equity.size(); ++trough) {
      if (equity[peak] > 0.0) {
        dd = std::max(dd, (equity[peak] - equity[trough]) / equity[peak]);
      }
    }
  }
  return dd;
}

// sort-then-interpolate quantile
inline double quantile(std::vector<double> v, double q) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !finite(x); }), v.end());
  std::sort(v.begin(), v.end());
  if (v.empty()) return std::nan("");
  const double pos = q * double(v.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::size_t(std::ceil(pos));
  const double w = pos - double(lo);
  return v[lo] * (1.0 - w) + v[hi] * w;
}

// naive dense matrix helpers for the regression oracle
using Mat = std::vector<std::vector<double>>;

inline Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), m = b[0].size(), k = b.size();
  Mat c(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][l] * b[l][j];
    }
  }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  }
  return t;
}

// Gauss-Jordan inverse
inline Mat inverse(Mat a) {
  const std::size_t n = a.size();
  Mat inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const double d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

struct OlsNw {
  std::vector<double> beta;
  std::vector<double> se;  // Bartlett HAC, no dof correction
};

// textbook (X'X)^{-1} X'y plus the Bartlett-weighted sandwich
inline OlsNw ols_newey_west(const Mat& X, const std::vector<double>& y, int lags) {
  const std::size_t n = X.size(), k = X[0].size();
  const Mat Xt = transpose(X);
  const Mat xtx_inv = inverse(matmul(Xt, X));
  Mat ycol(n, std::vector<double>(1));
  for (std::size_t i = 0; i < n; ++i) ycol[i][0] = y[i];
  const Mat xty = matmul(Xt, ycol);
  const Mat bcol = matmul(xtx_inv, xty);

  OlsNw out;
  out.beta.resize(k);
  for (std::size_t j = 0; j < k; ++j) out.beta[j] = bcol[j][0];

  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t j = 0; j < k; ++j) fit += X[i][j] * out.beta[j];
    e[i] = y[i] - fit;
  }

  Mat S(k, std::vector<double>(k, 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) S[a][b] += e[t] * e[t] * X[t][a] * X[t][b];
    }
  }
  for (int l = 1; l <= lags; ++l) {
    const double w = 1.0 - double(l) / double(lags + 1);
    for (std::size_t t = std::size_t(l); t < n; ++t) {
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          const double c = e[t] * e[t - std::size_t(l)] *
                           (X[t][a] * X[t - std::size_t(l)][b] + X[t - std::size_t(l)][a] * X[t][b]);
          S[a][b] += w * c;
        }
      }
    }
  }
  const Mat V = matmul(matmul(xtx_inv, S), xtx_inv);
  out.se.resize(k);
  for (std::size_t j = 0; j < k; ++j) out.se[j] = std::sqrt(V[j][j]);
  return out;
}

}  // namespace oracle

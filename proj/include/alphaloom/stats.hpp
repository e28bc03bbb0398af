#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace alphaloom {

inline double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double x) { return !std::isfinite(x); }

// 1-based average-tie ranks over the given values (caller filters non-finite).
std::vector<double> average_ranks(const std::vector<double>& values);

// Linear-interpolation quantile over finite entries; NaN if none.
double quantile_interp(std::vector<double> values, double q);

double mean_of(const std::vector<double>& v);
// divide-by-(n-1); NaN if fewer than 2 values
double sample_std(const std::vector<double>& v);
// divide-by-n; NaN if empty
double population_std(const std::vector<double>& v);

// Pearson correlation; NaN when either side has zero dispersion or n < 2.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Spearman = Pearson on average-tie ranks; inputs must be same length, finite.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace alphaloom

#pragma once

#include <map>
#include <string>
#include <vector>

#include "alphaloom/expr.hpp"
#include "alphaloom/panel.hpp"

namespace alphaloom {

/// Stacked (date, stock) rows over the promoted factor set. Features are the
/// per-date normalized (winsorize + z-score) factor values; the fit target is
/// the next-day return winsorized per date; the raw next-day return is kept
/// for portfolio accounting.
struct FeatureMatrix {
  std::vector<std::string> factor_names;
  std::vector<int> row_date;   // panel date index
  std::vector<int> row_stock;  // panel stock index
  std::vector<double> X;       // row-major, NaN = missing
  std::vector<double> y;       // winsorized fit target
  std::vector<double> y_raw;   // raw forward return

  std::size_t n_rows() const { return row_date.size(); }
  std::size_t n_cols() const { return factor_names.size(); }
  double x(std::size_t r, std::size_t c) const { return X[r * n_cols() + c]; }
};

FeatureMatrix build_feature_matrix(const Panel& panel, const std::vector<FactorSeries>& factors,
                                   const std::vector<std::string>& names, int d0, int d1,
                                   double winsor_low = 0.01, double winsor_high = 0.99);

// Row-wise mean of the non-missing z-scores; rows with fewer than half the
// factors present are missing.
std::vector<double> equal_weight_composite(const FeatureMatrix& fm);

struct LinearModel {
  double intercept = 0.0;
  std::vector<double> weights;  // per factor_names order
  std::vector<std::string> factor_names;
  double ridge_lambda = 0.0;
};

// Least squares with an optional L2 penalty on the slopes (intercept
// unpenalized). Uses finite rows only. Throws SingularityError for a
// rank-deficient design at ridge_lambda = 0.
LinearModel fit_linear(const FeatureMatrix& fm, double ridge_lambda = 0.0);

std::vector<double> predict_linear(const LinearModel& model, const FeatureMatrix& fm);

struct GbdtParams {
  int rounds = 200;  // K
  double learning_rate = 0.05;
  int max_leaves = 31;  // J
  int max_depth = 6;
  double lambda_l2 = 1.0;
  double gamma = 0.0;
  int min_leaf_size = 1;
};

struct GbdtNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  bool default_left = true;  // learned routing for missing values
  int left = -1;
  int right = -1;
  double leaf_weight = 0.0;  // unshrunk -G/(H+lambda)
  double grad_sum = 0.0;
  double hess_sum = 0.0;
  double gain = 0.0;  // accepted split gain (includes the -gamma term)
  int depth = 1;
  bool is_leaf() const { return feature < 0; }
};

struct GbdtTree {
  std::vector<GbdtNode> nodes;  // root at index 0
};

struct GbdtModel {
  GbdtParams params;
  double base_score = 0.0;
  std::vector<GbdtTree> trees;
  std::vector<std::string> feature_names;
  std::vector<double> round_train_loss;  // mean squared error after each round

  double predict_row(const double* x) const;
};

// Second-order boosting with squared-error loss (g = pred - y, h = 1), exact
// greedy splits over sorted feature values, leaf-wise growth, splits accepted
// only at positive gain.
GbdtModel fit_gbdt(const FeatureMatrix& fm, const GbdtParams& params);

std::vector<double> predict_gbdt(const GbdtModel& model, const FeatureMatrix& fm);

struct FeatureImportance {
  std::string name;
  double gain = 0.0;
  std::size_t frequency = 0;
};

std::vector<FeatureImportance> feature_importance(const GbdtModel& model);

struct WalkForwardPlan {
  int train_window = 250;  // training dates per fit
  int refit_every = 60;    // prediction dates per segment
  int embargo = 1;         // dates skipped between train end and prediction start

  void validate() const;
};

enum class ModelKind { Equal, Linear, Gbdt };

struct WalkForwardResult {
  std::vector<double> scores;  // per FeatureMatrix row, NaN before coverage
  std::size_t segments = 0;
};

WalkForwardResult walk_forward(const FeatureMatrix& fm, const WalkForwardPlan& plan,
                               ModelKind kind, double ridge_lambda, const GbdtParams& gbdt);

// versioned JSON model files
std::string linear_model_to_json(const LinearModel& m);
LinearModel linear_model_from_json(const std::string& text);
std::string gbdt_model_to_json(const GbdtModel& m);
GbdtModel gbdt_model_from_json(const std::string& text);

}  // namespace alphaloom

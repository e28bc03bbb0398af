#include "alphaloom/aggregate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "alphaloom/errors.hpp"
#include "json.hpp"

namespace alphaloom {

FeatureMatrix build_feature_matrix(const Panel& panel, const std::vector<FactorSeries>& factors,
                                   const std::vector<std::string>& names, int d0, int d1,
                                   double winsor_low, double winsor_high) {
  if (factors.size() != names.size()) {
    throw std::invalid_argument("factor series and names must align");
  }
  const std::size_t T = panel.n_dates();
  const std::size_t S = panel.n_stocks();
  const std::size_t M = factors.size();
  const std::vector<double> fwd = panel.forward_returns();

  FeatureMatrix fm;
  fm.factor_names = names;

  std::vector<std::vector<double>> norm(M);
  for (int t = d0; t <= d1; ++t) {
    // per-date normalization over all finite factor values
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<double> slice(S);
      for (std::size_t s = 0; s < S; ++s) slice[s] = factors[m].values[s * T + std::size_t(t)];
      norm[m] = normalize_cross_section(slice, winsor_low, winsor_high).values;
    }
    std::vector<double> target(S, nan_value());
    for (std::size_t s = 0; s < S; ++s) target[s] = fwd[s * T + std::size_t(t)];
    const std::vector<double> target_w = winsorize_cross_section(target, winsor_low, winsor_high);

    for (std::size_t s = 0; s < S; ++s) {
      if (is_missing(target[s])) continue;
      fm.row_date.push_back(t);
      fm.row_stock.push_back(int(s));
      fm.y.push_back(target_w[s]);
      fm.y_raw.push_back(target[s]);
      for (std::size_t m = 0; m < M; ++m) fm.X.push_back(norm[m][s]);
    }
  }
  return fm;
}

std::vector<double> equal_weight_composite(const FeatureMatrix& fm) {
  const std::size_t M = fm.n_cols();
  if (M == 0) throw std::invalid_argument("equal_weight_composite: no factor columns");
  std::vector<double> out(fm.n_rows(), nan_value());
  for (std::size_t r = 0; r < fm.n_rows(); ++r) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < M; ++c) {
      const double v = fm.x(r, c);
      if (!is_missing(v)) {
        sum += v;
        ++n;
      }
    }
    if (n * 2 >= M && n > 0) out[r] = sum / double(n);
  }
  return out;
}

namespace {

// rows with a finite target and all features finite
std::vector<std::size_t> complete_rows(const FeatureMatrix& fm) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < fm.n_rows(); ++r) {
    if (is_missing(fm.y[r])) continue;
    bool ok = true;
    for (std::size_t c = 0; c < fm.n_cols(); ++c) {
      if (is_missing(fm.x(r, c))) {
        ok = false;
        break;
      }
    }
    if (ok) rows.push_back(r);
  }
  return rows;
}

LinearModel fit_linear_rows(const FeatureMatrix& fm, const std::vector<std::size_t>& rows,
                            double ridge_lambda) {
  const std::size_t p = fm.n_cols();
  if (rows.size() < p + 1) {
    throw std::invalid_argument("fit_linear: needs at least " + std::to_string(p + 1) +
                                " complete rows, got " + std::to_string(rows.size()));
  }
  Eigen::MatrixXd X(rows.size(), p + 1);
  Eigen::VectorXd y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    X(i, 0) = 1.0;
    for (std::size_t c = 0; c < p; ++c) X(i, c + 1) = fm.x(rows[i], c);
    y(i) = fm.y[rows[i]];
  }

  if (ridge_lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < Eigen::Index(p + 1)) {
      throw SingularityError(
          "fit_linear: design matrix is rank-deficient; set a positive ridge_lambda");
    }
    const Eigen::VectorXd beta = qr.solve(y);
    LinearModel m;
    m.factor_names = fm.factor_names;
    m.ridge_lambda = 0.0;
    m.intercept = beta(0);
    m.weights.assign(p, 0.0);
    for (std::size_t c = 0; c < p; ++c) m.weights[c] = beta(c + 1);
    return m;
  }

  Eigen::MatrixXd A = X.transpose() * X;
  for (std::size_t c = 1; c <= p; ++c) A(c, c) += ridge_lambda;  // intercept unpenalized
  const Eigen::VectorXd b = X.transpose() * y;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) {
    throw SingularityError("fit_linear: normal equations not solvable");
  }
  const Eigen::VectorXd beta = ldlt.solve(b);
  LinearModel m;
  m.factor_names = fm.factor_names;
  m.ridge_lambda = ridge_lambda;
  m.intercept = beta(0);
  m.weights.assign(p, 0.0);
  for (std::size_t c = 0; c < p; ++c) m.weights[c] = beta(c + 1);
  return m;
}

}  // namespace

LinearModel fit_linear(const FeatureMatrix& fm, double ridge_lambda) {
  return fit_linear_rows(fm, complete_rows(fm), ridge_lambda);
}

std::vector<double> predict_linear(const LinearModel& model, const FeatureMatrix& fm) {
  if (model.factor_names != fm.factor_names) {
    throw SchemaError("predict: feature columns do not match the trained model");
  }
  std::vector<double> out(fm.n_rows(), nan_value());
  for (std::size_t r = 0; r < fm.n_rows(); ++r) {
    double v = model.intercept;
    bool ok = true;
    for (std::size_t c = 0; c < fm.n_cols(); ++c) {
      const double x = fm.x(r, c);
      if (is_missing(x)) {
        ok = false;
        break;
      }
      v += model.weights[c] * x;
    }
    if (ok) out[r] = v;
  }
  return out;
}

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  bool valid = false;
};

struct Workspace {
  const FeatureMatrix& fm;
  const GbdtParams& params;
  const std::vector<std::size_t>& rows;
  const std::vector<double>& grad;  // per rows index

  double leaf_objective(double g, double h) const {
    return g * g / (h + params.lambda_l2);
  }

  SplitCandidate best_split(const std::vector<std::size_t>& members) const {
    SplitCandidate best;
    double g_total = 0.0;
    for (std::size_t i : members) g_total += grad[i];
    const double h_total = double(members.size());
    const double parent_obj = leaf_objective(g_total, h_total);

    for (std::size_t f = 0; f < fm.n_cols(); ++f) {
      std::vector<std::pair<double, std::size_t>> present;
      double g_miss = 0.0;
      double h_miss = 0.0;
      for (std::size_t i : members) {
        const double x = fm.x(rows[i], f);
        if (is_missing(x)) {
          g_miss += grad[i];
          h_miss += 1.0;
        } else {
          present.emplace_back(x, i);
        }
      }
      if (present.size() < 2) continue;
      std::stable_sort(present.begin(), present.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });

      double g_left = 0.0;
      double h_left = 0.0;
      for (std::size_t k = 0; k + 1 < present.size(); ++k) {
        g_left += grad[present[k].second];
        h_left += 1.0;
        if (present[k + 1].first == present[k].first) continue;
        const double threshold = 0.5 * (present[k].first + present[k + 1].first);
        const double g_right = (g_total - g_miss) - g_left;
        const double h_right = (h_total - h_miss) - h_left;
        // missing values routed to whichever side lowers the loss more
        for (bool miss_left : {true, false}) {
          const double gl = g_left + (miss_left ? g_miss : 0.0);
          const double hl = h_left + (miss_left ? h_miss : 0.0);
          const double gr = g_right + (miss_left ? 0.0 : g_miss);
          const double hr = h_right + (miss_left ? 0.0 : h_miss);
          if (hl < double(params.min_leaf_size) || hr < double(params.min_leaf_size)) continue;
          const double gain =
              0.5 * (leaf_objective(gl, hl) + leaf_objective(gr, hr) - parent_obj) - params.gamma;
          if (!best.valid || gain > best.gain) {
            best.valid = true;
            best.gain = gain;
            best.feature = int(f);
            best.threshold = threshold;
            best.default_left = miss_left;
          }
        }
      }
    }
    return best;
  }
};

}  // namespace

double GbdtModel::predict_row(const double* x) const {
  double out = base_score;
  for (const GbdtTree& tree : trees) {
    int idx = 0;
    while (!tree.nodes[std::size_t(idx)].is_leaf()) {
      const GbdtNode& n = tree.nodes[std::size_t(idx)];
      const double v = x[n.feature];
      const bool go_left = is_missing(v) ? n.default_left : (v < n.threshold);
      idx = go_left ? n.left : n.right;
    }
    out += params.learning_rate * tree.nodes[std::size_t(idx)].leaf_weight;
  }
  return out;
}

GbdtModel fit_gbdt(const FeatureMatrix& fm, const GbdtParams& params) {
  if (params.rounds < 0 || params.max_leaves < 1 || params.max_depth < 1 ||
      params.learning_rate <= 0.0 || params.learning_rate > 1.0 || params.lambda_l2 < 0.0 ||
      params.gamma < 0.0) {
    throw std::invalid_argument("fit_gbdt: invalid hyperparameters");
  }

  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < fm.n_rows(); ++r) {
    if (!is_missing(fm.y[r])) rows.push_back(r);
  }

  GbdtModel model;
  model.params = params;
  model.feature_names = fm.factor_names;
  if (rows.empty()) return model;

  double base = 0.0;
  for (std::size_t i : rows) base += fm.y[i];
  base /= double(rows.size());
  model.base_score = base;

  std::vector<double> pred(rows.size(), base);
  std::vector<double> grad(rows.size(), 0.0);

  for (int k = 0; k < params.rounds; ++k) {
    for (std::size_t i = 0; i < rows.size(); ++i) grad[i] = pred[i] - fm.y[rows[i]];

    Workspace ws{fm, params, rows, grad};
    GbdtTree tree;
    // per-node member row indices (into `rows`), kept alongside the tree
    std::vector<std::vector<std::size_t>> members(1);
    members[0].resize(rows.size());
    std::iota(members[0].begin(), members[0].end(), 0);

    GbdtNode root;
    root.depth = 1;
    for (std::size_t i : members[0]) root.grad_sum += grad[i];
    root.hess_sum = double(members[0].size());
    tree.nodes.push_back(root);

    struct Pending {
      int node = 0;
      SplitCandidate split;
    };
    std::vector<Pending> frontier;
    if (params.max_depth > 1) {
      frontier.push_back({0, ws.best_split(members[0])});
    }

    int leaves = 1;
    while (leaves < params.max_leaves) {
      int pick = -1;
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        const auto& p = frontier[i];
        if (!p.split.valid || p.split.gain <= 0.0) continue;
        if (pick < 0 || p.split.gain > frontier[std::size_t(pick)].split.gain) pick = int(i);
      }
      if (pick < 0) break;

      const Pending chosen = frontier[std::size_t(pick)];
      frontier.erase(frontier.begin() + pick);
      GbdtNode& parent = tree.nodes[std::size_t(chosen.node)];
      parent.feature = chosen.split.feature;
      parent.threshold = chosen.split.threshold;
      parent.default_left = chosen.split.default_left;
      parent.gain = chosen.split.gain;

      std::vector<std::size_t> left_members, right_members;
      for (std::size_t i : members[std::size_t(chosen.node)]) {
        const double x = fm.x(rows[i], std::size_t(chosen.split.feature));
        const bool go_left =
            is_missing(x) ? chosen.split.default_left : (x < chosen.split.threshold);
        (go_left ? left_members : right_members).push_back(i);
      }

      auto add_child = [&](std::vector<std::size_t>&& mem) {
        GbdtNode child;
        child.depth = tree.nodes[std::size_t(chosen.node)].depth + 1;
        for (std::size_t i : mem) child.grad_sum += grad[i];
        child.hess_sum = double(mem.size());
        const int id = int(tree.nodes.size());
        tree.nodes.push_back(child);
        members.push_back(std::move(mem));
        return id;
      };
      const int left_id = add_child(std::move(left_members));
      const int right_id = add_child(std::move(right_members));
      tree.nodes[std::size_t(chosen.node)].left = left_id;
      tree.nodes[std::size_t(chosen.node)].right = right_id;
      ++leaves;

      for (int child : {left_id, right_id}) {
        if (tree.nodes[std::size_t(child)].depth < params.max_depth && leaves < params.max_leaves) {
          frontier.push_back({child, ws.best_split(members[std::size_t(child)])});
        }
      }
    }

    // leaf weights and prediction update
    for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
      GbdtNode& node = tree.nodes[n];
      if (!node.is_leaf()) continue;
      node.leaf_weight = -node.grad_sum / (node.hess_sum + params.lambda_l2);
      for (std::size_t i : members[n]) {
        pred[i] += params.learning_rate * node.leaf_weight;
      }
    }
    model.trees.push_back(std::move(tree));

    double loss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double e = fm.y[rows[i]] - pred[i];
      loss += e * e;
    }
    model.round_train_loss.push_back(loss / double(rows.size()));
  }
  return model;
}

std::vector<double> predict_gbdt(const GbdtModel& model, const FeatureMatrix& fm) {
  if (model.feature_names != fm.factor_names) {
    throw SchemaError("predict: feature columns do not match the trained model");
  }
  std::vector<double> out(fm.n_rows(), nan_value());
  std::vector<double> x(fm.n_cols());
  for (std::size_t r = 0; r < fm.n_rows(); ++r) {
    for (std::size_t c = 0; c < fm.n_cols(); ++c) x[c] = fm.x(r, c);
    out[r] = model.predict_row(x.data());
  }
  return out;
}

std::vector<FeatureImportance> feature_importance(const GbdtModel& model) {
  std::vector<FeatureImportance> out;
  if (model.trees.empty()) return out;
  std::vector<double> gain(model.feature_names.size(), 0.0);
  std::vector<std::size_t> freq(model.feature_names.size(), 0);
  bool any = false;
  for (const GbdtTree& tree : model.trees) {
    for (const GbdtNode& n : tree.nodes) {
      if (n.is_leaf()) continue;
      gain[std::size_t(n.feature)] += n.gain;
      ++freq[std::size_t(n.feature)];
      any = true;
    }
  }
  if (!any) return out;
  for (std::size_t f = 0; f < model.feature_names.size(); ++f) {
    out.push_back({model.feature_names[f], gain[f], freq[f]});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) {
                     return a.gain > b.gain;
                   });
  return out;
}

void WalkForwardPlan::validate() const {
  if (train_window < 1 || refit_every < 1 || embargo < 0) {
    throw ConfigError("walk-forward plan requires train_window >= 1, refit_every >= 1, embargo >= 0");
  }
}

WalkForwardResult walk_forward(const FeatureMatrix& fm, const WalkForwardPlan& plan,
                               ModelKind kind, double ridge_lambda, const GbdtParams& gbdt) {
  plan.validate();
  WalkForwardResult res;
  res.scores.assign(fm.n_rows(), nan_value());
  if (kind == ModelKind::Equal) {
    res.scores = equal_weight_composite(fm);
    res.segments = 1;
    return res;
  }

  std::vector<int> dates;
  for (int d : fm.row_date) {
    if (dates.empty() || dates.back() != d) dates.push_back(d);
  }
  std::sort(dates.begin(), dates.end());
  dates.erase(std::unique(dates.begin(), dates.end()), dates.end());

  std::map<int, std::vector<std::size_t>> rows_by_date;
  for (std::size_t r = 0; r < fm.n_rows(); ++r) rows_by_date[fm.row_date[r]].push_back(r);

  const int first_pred = plan.train_window + plan.embargo;
  for (int pos = first_pred; pos < int(dates.size()); pos += plan.refit_every) {
    const int seg_end = std::min(pos + plan.refit_every, int(dates.size()));
    const int train_end = pos - plan.embargo;          // exclusive
    const int train_begin = train_end - plan.train_window;

    std::vector<std::size_t> train_rows;
    for (int p = train_begin; p < train_end; ++p) {
      for (std::size_t r : rows_by_date[dates[std::size_t(p)]]) {
        if (is_missing(fm.y[r])) continue;
        bool ok = true;
        if (kind == ModelKind::Linear) {
          for (std::size_t c = 0; c < fm.n_cols(); ++c) {
            if (is_missing(fm.x(r, c))) {
              ok = false;
              break;
            }
          }
        }
        if (ok) train_rows.push_back(r);
      }
    }

    std::vector<std::size_t> pred_rows;
    for (int p = pos; p < seg_end; ++p) {
      for (std::size_t r : rows_by_date[dates[std::size_t(p)]]) pred_rows.push_back(r);
    }

    if (kind == ModelKind::Linear) {
      if (train_rows.size() < fm.n_cols() + 1) continue;  // segment stays missing
      LinearModel m = fit_linear_rows(fm, train_rows, ridge_lambda);
      for (std::size_t r : pred_rows) {
        double v = m.intercept;
        bool ok = true;
        for (std::size_t c = 0; c < fm.n_cols(); ++c) {
          const double xv = fm.x(r, c);
          if (is_missing(xv)) {
            ok = false;
            break;
          }
          v += m.weights[c] * xv;
        }
        if (ok) res.scores[r] = v;
      }
    } else {
      if (train_rows.empty()) continue;
      FeatureMatrix sub;
      sub.factor_names = fm.factor_names;
      for (std::size_t r : train_rows) {
        sub.row_date.push_back(fm.row_date[r]);
        sub.row_stock.push_back(fm.row_stock[r]);
        sub.y.push_back(fm.y[r]);
        sub.y_raw.push_back(fm.y_raw[r]);
        for (std::size_t c = 0; c < fm.n_cols(); ++c) sub.X.push_back(fm.x(r, c));
      }
      GbdtModel m = fit_gbdt(sub, gbdt);
      std::vector<double> x(fm.n_cols());
      for (std::size_t r : pred_rows) {
        for (std::size_t c = 0; c < fm.n_cols(); ++c) x[c] = fm.x(r, c);
        res.scores[r] = m.predict_row(x.data());
      }
    }
    ++res.segments;
  }
  return res;
}

std::string linear_model_to_json(const LinearModel& m) {
  nlohmann::json j;
  j["schema"] = "alphaloom.linear.v1";
  j["intercept"] = m.intercept;
  j["ridge_lambda"] = m.ridge_lambda;
  nlohmann::json w = nlohmann::json::object();
  for (std::size_t i = 0; i < m.factor_names.size(); ++i) w[m.factor_names[i]] = m.weights[i];
  j["weights"] = w;
  j["factor_order"] = m.factor_names;
  return j.dump(2);
}

LinearModel linear_model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "alphaloom.linear.v1") {
    throw SchemaError("not a linear model file");
  }
  LinearModel m;
  m.intercept = j.at("intercept").get<double>();
  m.ridge_lambda = j.value("ridge_lambda", 0.0);
  m.factor_names = j.at("factor_order").get<std::vector<std::string>>();
  for (const auto& name : m.factor_names) m.weights.push_back(j.at("weights").at(name).get<double>());
  return m;
}

std::string gbdt_model_to_json(const GbdtModel& m) {
  nlohmann::json j;
  j["schema"] = "alphaloom.gbdt.v1";
  j["base_score"] = m.base_score;
  j["learning_rate"] = m.params.learning_rate;
  j["lambda_l2"] = m.params.lambda_l2;
  j["gamma"] = m.params.gamma;
  j["feature_names"] = m.feature_names;
  nlohmann::json trees = nlohmann::json::array();
  for (const GbdtTree& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const GbdtNode& n : t.nodes) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"default_left", n.default_left},
                       {"left", n.left},
                       {"right", n.right},
                       {"leaf_weight", n.leaf_weight},
                       {"grad_sum", n.grad_sum},
                       {"hess_sum", n.hess_sum},
                       {"gain", n.gain},
                       {"depth", n.depth}});
    }
    trees.push_back({{"nodes", nodes}});
  }
  j["trees"] = trees;
  return j.dump();
}

GbdtModel gbdt_model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "alphaloom.gbdt.v1") {
    throw SchemaError("not a gbdt model file");
  }
  GbdtModel m;
  m.base_score = j.at("base_score").get<double>();
  m.params.learning_rate = j.at("learning_rate").get<double>();
  m.params.lambda_l2 = j.at("lambda_l2").get<double>();
  m.params.gamma = j.value("gamma", 0.0);
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& tj : j.at("trees")) {
    GbdtTree t;
    for (const auto& nj : tj.at("nodes")) {
      GbdtNode n;
      n.feature = nj.at("feature").get<int>();
      n.threshold = nj.at("threshold").get<double>();
      n.default_left = nj.at("default_left").get<bool>();
      n.left = nj.at("left").get<int>();
      n.right = nj.at("right").get<int>();
      n.leaf_weight = nj.at("leaf_weight").get<double>();
      n.grad_sum = nj.at("grad_sum").get<double>();
      n.hess_sum = nj.at("hess_sum").get<double>();
      n.gain = nj.at("gain").get<double>();
      n.depth = nj.at("depth").get<int>();
      t.nodes.push_back(n);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace alphaloom

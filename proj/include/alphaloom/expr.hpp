#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "alphaloom/panel.hpp"

namespace alphaloom {

enum class NodeKind { Primitive, Constant, Unary, Binary, Windowed, CrossSectional };

struct ExprNode {
  NodeKind kind = NodeKind::Constant;
  std::string op;       // operator name, or primitive name for Primitive
  double constant = 0;  // Constant only
  int window = 0;       // Windowed only
  std::vector<ExprNode> children;
};

struct GrammarBudget {
  int max_depth = 6;
  int max_nodes = 24;
};

// Operator universe. Windowed ops take (child, window); `lag` accepts
// window >= 0 except directly on the own-return primitive where it must be
// >= 1; all other windows are >= 1.
struct OperatorSet {
  static const std::vector<std::string>& unary();
  static const std::vector<std::string>& binary();
  static const std::vector<std::string>& windowed();
  static const std::vector<std::string>& cross_sectional();
  static bool is_primitive(const std::string& name);
};

/// Immutable bounded-depth expression tree with a canonical prefix text form
/// and a structural hash derived from it.
class FactorExpr {
 public:
  static FactorExpr parse(std::string_view text, const GrammarBudget& budget = {});
  // Wrap a hand-built tree. With validate=false the structural rules are not
  // enforced (used to exercise the validator on illegal trees).
  static FactorExpr from_node(ExprNode node, const GrammarBudget& budget = {},
                              bool validate = true);

  const std::string& text() const { return text_; }
  std::uint64_t hash() const { return hash_; }
  const ExprNode& root() const { return root_; }
  const GrammarBudget& budget() const { return budget_; }

  struct Complexity {
    int depth = 0;
    int nodes = 0;
  };
  Complexity complexity() const;

 private:
  ExprNode root_;
  std::string text_;
  std::uint64_t hash_ = 0;
  GrammarBudget budget_;
};

std::string render_expr(const ExprNode& node);

// Structural no-look-ahead check: backward windows/lags only, lag >= 1 on the
// own-return primitive, budget respected. Throws LookaheadViolation or
// BudgetError naming the offending node.
void validate_no_lookahead(const FactorExpr& expr);

struct EvalDiagnostics {
  std::size_t overflow_saturations = 0;  // non-finite results folded to missing
  std::size_t degenerate_dates = 0;      // zero-dispersion cross-sections
  std::size_t single_name_dates = 0;     // cs_rank over a single finite value
};

struct FactorSeries {
  std::string expr_text;
  std::uint64_t expr_hash = 0;
  std::vector<double> values;  // stock-major grid, NaN outside [range_start, range_end]
  int range_start = 0;
  int range_end = 0;  // inclusive date indices
  std::vector<double> coverage;  // per panel date: finite values / observed stocks
  EvalDiagnostics diagnostics;

  double at(std::size_t stock, std::size_t date_idx, std::size_t n_dates) const {
    return values[stock * n_dates + date_idx];
  }
};

// Time-series stages run within each stock's observation history; the
// cross-sectional stages run within each date. d1 < 0 means the last date.
FactorSeries evaluate(const FactorExpr& expr, const Panel& panel, int d0 = 0, int d1 = -1);

// Fractional average-tie ranks in [0, 1] over finite entries; missing passes
// through. A single finite value maps to 0.5 (reported via *single_flagged).
std::vector<double> cs_rank_vector(const std::vector<double>& values,
                                   bool* single_flagged = nullptr);

}  // namespace alphaloom

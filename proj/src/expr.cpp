#include "alphaloom/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>

#include "alphaloom/config.hpp"
#include "alphaloom/csv.hpp"
#include "alphaloom/errors.hpp"

namespace alphaloom {

namespace {
constexpr double kDivGuard = 1e-12;
}

const std::vector<std::string>& OperatorSet::unary() {
  static const std::vector<std::string> ops = {"negate", "abs", "log1p", "sign"};
  return ops;
}
const std::vector<std::string>& OperatorSet::binary() {
  static const std::vector<std::string> ops = {"add", "sub", "mul", "div"};
  return ops;
}
const std::vector<std::string>& OperatorSet::windowed() {
  static const std::vector<std::string> ops = {"lag",         "rolling_mean", "rolling_std",
                                               "rolling_sum", "rolling_max",  "rolling_min",
                                               "delta"};
  return ops;
}
const std::vector<std::string>& OperatorSet::cross_sectional() {
  static const std::vector<std::string> ops = {"cs_rank", "cs_zscore"};
  return ops;
}
bool OperatorSet::is_primitive(const std::string& name) {
  return std::find(kPrimitiveNames.begin(), kPrimitiveNames.end(), name) != kPrimitiveNames.end();
}

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg + " (at offset " + std::to_string(pos) + " of '" + std::string(text) +
                     "')");
  }

  bool peek_is(char c) {
    skip_ws();
    return pos < text.size() && text[pos] == c;
  }

  void expect(char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c) {
      fail(std::string("expected '") + c + "'");
    }
    ++pos;
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
      ++pos;
    }
    if (pos == start) fail("expected identifier");
    return std::string(text.substr(start, pos - start));
  }

  double number() {
    skip_ws();
    std::size_t start = pos;
    if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
    while (pos < text.size() && (std::isdigit(static_cast<unsigned char>(text[pos])) ||
                                 text[pos] == '.' || text[pos] == 'e' || text[pos] == 'E' ||
                                 ((text[pos] == '-' || text[pos] == '+') &&
                                  (text[pos - 1] == 'e' || text[pos - 1] == 'E')))) {
      ++pos;
    }
    auto v = parse_double(std::string(text.substr(start, pos - start)));
    if (!v) fail("expected number");
    return *v;
  }

  ExprNode expr() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of expression");
    const char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      ExprNode n;
      n.kind = NodeKind::Constant;
      n.constant = number();
      return n;
    }
    const std::string name = ident();
    if (!peek_is('(')) {
      if (!OperatorSet::is_primitive(name)) {
        fail("unknown primitive '" + name + "'");
      }
      ExprNode n;
      n.kind = NodeKind::Primitive;
      n.op = name;
      return n;
    }
    expect('(');
    std::vector<ExprNode> args;
    std::vector<double> numeric_args;  // mirrors args; NaN when not a bare number
    if (!peek_is(')')) {
      while (true) {
        skip_ws();
        args.push_back(expr());
        if (!peek_is(',')) break;
        expect(',');
      }
    }
    expect(')');

    ExprNode n;
    n.op = name;
    if (contains(OperatorSet::unary(), name)) {
      n.kind = NodeKind::Unary;
      if (args.size() != 1) {
        fail("arity mismatch for '" + name + "': expected 1 argument, got " +
             std::to_string(args.size()));
      }
      n.children = std::move(args);
    } else if (contains(OperatorSet::binary(), name)) {
      n.kind = NodeKind::Binary;
      if (args.size() != 2) {
        fail("arity mismatch for '" + name + "': expected 2 arguments, got " +
             std::to_string(args.size()));
      }
      n.children = std::move(args);
    } else if (contains(OperatorSet::windowed(), name)) {
      n.kind = NodeKind::Windowed;
      if (args.size() != 2) {
        fail("arity mismatch for '" + name + "': expected (child, window), got " +
             std::to_string(args.size()) + " arguments");
      }
      if (args[1].kind != NodeKind::Constant || args[1].constant != std::floor(args[1].constant)) {
        fail("window for '" + name + "' must be an integer literal");
      }
      n.window = int(args[1].constant);
      n.children.push_back(std::move(args[0]));
    } else if (contains(OperatorSet::cross_sectional(), name)) {
      n.kind = NodeKind::CrossSectional;
      if (args.size() != 1) {
        fail("arity mismatch for '" + name + "': expected 1 argument, got " +
             std::to_string(args.size()));
      }
      n.children = std::move(args);
    } else {
      fail("unknown operator '" + name + "'");
    }
    return n;
  }
};

void measure(const ExprNode& n, int depth, int& max_depth, int& nodes) {
  max_depth = std::max(max_depth, depth);
  ++nodes;
  for (const auto& c : n.children) measure(c, depth + 1, max_depth, nodes);
}

// Structural rules shared by parse-time validation and validate_no_lookahead.
void check_node(const ExprNode& n) {
  switch (n.kind) {
    case NodeKind::Windowed: {
      const bool is_lag = n.op == "lag";
      const int min_window = is_lag ? 0 : 1;
      if (n.window < min_window) {
        throw ParseError("window out of bounds for '" + n.op + "': got " +
                         std::to_string(n.window) + ", minimum " + std::to_string(min_window));
      }
      if (is_lag && n.window < 1 && n.children[0].kind == NodeKind::Primitive &&
          n.children[0].op == "ret") {
        throw LookaheadViolation(
            "lag on the own-return primitive requires k >= 1 (got lag(ret, " +
            std::to_string(n.window) + "))");
      }
      break;
    }
    case NodeKind::Primitive:
      if (!OperatorSet::is_primitive(n.op)) {
        throw ParseError("unknown primitive '" + n.op + "'");
      }
      break;
    default:
      break;
  }
  for (const auto& c : n.children) check_node(c);
}

void check_budget(const ExprNode& n, const GrammarBudget& b) {
  int depth = 0, nodes = 0;
  measure(n, 1, depth, nodes);
  if (depth > b.max_depth) {
    throw BudgetError("expression depth " + std::to_string(depth) + " exceeds max_depth " +
                      std::to_string(b.max_depth));
  }
  if (nodes > b.max_nodes) {
    throw BudgetError("expression node count " + std::to_string(nodes) + " exceeds max_nodes " +
                      std::to_string(b.max_nodes));
  }
}

}  // namespace

std::string render_expr(const ExprNode& node) {
  switch (node.kind) {
    case NodeKind::Primitive:
      return node.op;
    case NodeKind::Constant:
      return format_double(node.constant);
    case NodeKind::Windowed:
      return node.op + "(" + render_expr(node.children[0]) + "," + std::to_string(node.window) +
             ")";
    default: {
      std::string out = node.op + "(";
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) out += ",";
        out += render_expr(node.children[i]);
      }
      return out + ")";
    }
  }
}

FactorExpr FactorExpr::parse(std::string_view text, const GrammarBudget& budget) {
  Parser p{text};
  ExprNode root = p.expr();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing characters after expression");
  return from_node(std::move(root), budget, true);
}

FactorExpr FactorExpr::from_node(ExprNode node, const GrammarBudget& budget, bool validate) {
  FactorExpr e;
  e.root_ = std::move(node);
  e.budget_ = budget;
  e.text_ = render_expr(e.root_);
  e.hash_ = fnv1a64(e.text_);
  if (validate) {
    check_node(e.root_);
    check_budget(e.root_, budget);
  }
  return e;
}

FactorExpr::Complexity FactorExpr::complexity() const {
  Complexity c;
  measure(root_, 1, c.depth, c.nodes);
  return c;
}

void validate_no_lookahead(const FactorExpr& expr) {
  // The operator set has no lead; the structural checks reduce to window
  // signs, the own-return lag rule, and the budget.
  check_node(expr.root());
  check_budget(expr.root(), expr.budget());
}

std::vector<double> cs_rank_vector(const std::vector<double>& values, bool* single_flagged) {
  std::vector<double> finite;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!is_missing(values[i])) {
      finite.push_back(values[i]);
      idx.push_back(i);
    }
  }
  std::vector<double> out(values.size(), nan_value());
  if (finite.empty()) return out;
  if (finite.size() == 1) {
    out[idx[0]] = 0.5;
    if (single_flagged) *single_flagged = true;
    return out;
  }
  const std::vector<double> ranks = average_ranks(finite);
  const double denom = double(finite.size() - 1);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out[idx[k]] = (ranks[k] - 1.0) / denom;
  }
  return out;
}

namespace {

struct EvalContext {
  const Panel& panel;
  EvalDiagnostics diag;

  std::size_t T() const { return panel.n_dates(); }
  std::size_t S() const { return panel.n_stocks(); }

  // fold non-finite arithmetic results to missing
  void sanitize(std::vector<double>& grid) {
    for (double& v : grid) {
      if (std::isinf(v)) {
        v = nan_value();
        ++diag.overflow_saturations;
      }
    }
  }

  std::vector<double> eval(const ExprNode& n) {
    const std::size_t N = S() * T();
    switch (n.kind) {
      case NodeKind::Primitive: {
        return panel.column(n.op);
      }
      case NodeKind::Constant: {
        std::vector<double> g(N, nan_value());
        for (std::size_t s = 0; s < S(); ++s) {
          for (int t : panel.history(s)) g[s * T() + std::size_t(t)] = n.constant;
        }
        return g;
      }
      case NodeKind::Unary: {
        std::vector<double> g = eval(n.children[0]);
        if (n.op == "negate") {
          for (double& v : g) v = -v;
        } else if (n.op == "abs") {
          for (double& v : g) v = std::fabs(v);
        } else if (n.op == "sign") {
          for (double& v : g) {
            if (!is_missing(v)) v = (v > 0) - (v < 0);
          }
        } else {  // log1p, defined for x > -1
          for (double& v : g) {
            if (!is_missing(v)) v = v > -1.0 ? std::log1p(v) : nan_value();
          }
        }
        sanitize(g);
        return g;
      }
      case NodeKind::Binary: {
        std::vector<double> a = eval(n.children[0]);
        const std::vector<double> b = eval(n.children[1]);
        for (std::size_t i = 0; i < N; ++i) {
          const double x = a[i], y = b[i];
          if (is_missing(x) || is_missing(y)) {
            a[i] = nan_value();
          } else if (n.op == "add") {
            a[i] = x + y;
          } else if (n.op == "sub") {
            a[i] = x - y;
          } else if (n.op == "mul") {
            a[i] = x * y;
          } else {  // protected division
            a[i] = std::fabs(y) < kDivGuard ? nan_value() : x / y;
          }
        }
        sanitize(a);
        return a;
      }
      case NodeKind::Windowed: {
        const std::vector<double> child = eval(n.children[0]);
        std::vector<double> g(N, nan_value());
        const int w = n.window;
        for (std::size_t s = 0; s < S(); ++s) {
          const auto& hist = panel.history(s);
          const std::size_t H = hist.size();
          std::vector<double> v(H);
          for (std::size_t k = 0; k < H; ++k) v[k] = child[s * T() + std::size_t(hist[k])];
          for (std::size_t k = 0; k < H; ++k) {
            double out = nan_value();
            if (n.op == "lag") {
              if (int(k) >= w) out = v[k - std::size_t(w)];
            } else if (n.op == "delta") {
              if (int(k) >= w) {
                const double a = v[k], b = v[k - std::size_t(w)];
                out = (is_missing(a) || is_missing(b)) ? nan_value() : a - b;
              }
            } else if (int(k) >= w - 1) {
              // rolling window of the trailing w observations including k
              bool ok = true;
              double sum = 0.0, mx = -HUGE_VAL, mn = HUGE_VAL;
              for (int j = 0; j < w; ++j) {
                const double x = v[k - std::size_t(j)];
                if (is_missing(x)) {
                  ok = false;
                  break;
                }
                sum += x;
                mx = std::max(mx, x);
                mn = std::min(mn, x);
              }
              if (ok) {
                if (n.op == "rolling_mean") {
                  out = sum / w;
                } else if (n.op == "rolling_sum") {
                  out = sum;
                } else if (n.op == "rolling_max") {
                  out = mx;
                } else if (n.op == "rolling_min") {
                  out = mn;
                } else {  // rolling_std, sample convention
                  if (w >= 2) {
                    const double m = sum / w;
                    double ss = 0.0;
                    for (int j = 0; j < w; ++j) {
                      const double d = v[k - std::size_t(j)] - m;
                      ss += d * d;
                    }
                    out = std::sqrt(ss / double(w - 1));
                  }
                }
              }
            }
            g[s * T() + std::size_t(hist[k])] = out;
          }
        }
        sanitize(g);
        return g;
      }
      case NodeKind::CrossSectional: {
        const std::vector<double> child = eval(n.children[0]);
        std::vector<double> g(N, nan_value());
        for (std::size_t t = 0; t < T(); ++t) {
          std::vector<double> slice(S());
          for (std::size_t s = 0; s < S(); ++s) slice[s] = child[s * T() + t];
          if (n.op == "cs_rank") {
            bool single = false;
            std::vector<double> ranks = cs_rank_vector(slice, &single);
            if (single) ++diag.single_name_dates;
            for (std::size_t s = 0; s < S(); ++s) g[s * T() + t] = ranks[s];
          } else {  // cs_zscore
            ZScoreResult z = zscore_cross_section(slice);
            bool any = false;
            for (double v : slice) {
              if (!is_missing(v)) {
                any = true;
                break;
              }
            }
            if (z.degenerate && any) ++diag.degenerate_dates;
            for (std::size_t s = 0; s < S(); ++s) g[s * T() + t] = z.values[s];
          }
        }
        sanitize(g);
        return g;
      }
    }
    return std::vector<double>(N, nan_value());
  }
};

}  // namespace

FactorSeries evaluate(const FactorExpr& expr, const Panel& panel, int d0, int d1) {
  validate_no_lookahead(expr);
  const int T = int(panel.n_dates());
  if (d1 < 0) d1 = T - 1;
  if (d0 < 0 || d0 > d1 || d1 >= T) {
    throw std::invalid_argument("evaluate: date range [" + std::to_string(d0) + ", " +
                                std::to_string(d1) + "] outside panel");
  }
  EvalContext ctx{panel, {}};
  std::vector<double> grid = ctx.eval(expr.root());

  FactorSeries out;
  out.expr_text = expr.text();
  out.expr_hash = expr.hash();
  out.range_start = d0;
  out.range_end = d1;
  out.diagnostics = ctx.diag;
  out.coverage.assign(panel.n_dates(), 0.0);

  const std::size_t S = panel.n_stocks();
  for (int t = 0; t < T; ++t) {
    if (t < d0 || t > d1) {
      for (std::size_t s = 0; s < S; ++s) grid[s * std::size_t(T) + std::size_t(t)] = nan_value();
      continue;
    }
    std::size_t observed = 0, finite = 0;
    for (std::size_t s = 0; s < S; ++s) {
      if (panel.observed(s, std::size_t(t))) {
        ++observed;
        if (!is_missing(grid[s * std::size_t(T) + std::size_t(t)])) ++finite;
      }
    }
    out.coverage[std::size_t(t)] = observed ? double(finite) / double(observed) : 0.0;
  }
  out.values = std::move(grid);
  return out;
}

}  // namespace alphaloom

#include "alphaloom/discovery.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "alphaloom/backtest.hpp"
#include "alphaloom/config.hpp"
#include "alphaloom/csv.hpp"
#include "alphaloom/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace alphaloom {

using nlohmann::json;

void SplitSpec::validate() const {
  if (!(is_start <= is_end)) throw ConfigError("split: is_start must be <= is_end");
  if (!(is_end < oos_start)) throw ConfigError("split: is_end must precede oos_start");
  if (!(oos_start <= oos_end)) throw ConfigError("split: oos_start must be <= oos_end");
}

namespace {

json double_or_null(double v) {
  if (is_missing(v)) return nullptr;
  return v;
}

double null_or_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return nan_value();
  return j.at(key).get<double>();
}

json metrics_to_json(const EvalMetrics& m) {
  json j;
  j["mean_ic"] = double_or_null(m.mean_ic);
  j["ic_tstat"] = double_or_null(m.ic_tstat);
  j["icir"] = double_or_null(m.icir);
  j["icl"] = double_or_null(m.icl);
  j["iclir"] = double_or_null(m.iclir);
  j["ann_return"] = double_or_null(m.ann_return);
  j["ann_vol"] = double_or_null(m.ann_vol);
  j["sharpe"] = double_or_null(m.sharpe);
  j["sortino"] = double_or_null(m.sortino);
  j["calmar"] = double_or_null(m.calmar);
  j["max_drawdown"] = double_or_null(m.max_drawdown);
  j["n_days"] = m.n_days;
  j["n_valid_dates"] = m.n_valid_dates;
  j["avg_coverage"] = m.avg_coverage;
  j["window_start"] = format_date(m.window_start);
  j["window_end"] = format_date(m.window_end);
  j["config_hash"] = m.config_hash;
  return j;
}

EvalMetrics metrics_from_json(const json& j) {
  EvalMetrics m;
  m.mean_ic = null_or_double(j, "mean_ic");
  m.ic_tstat = null_or_double(j, "ic_tstat");
  m.icir = null_or_double(j, "icir");
  m.icl = null_or_double(j, "icl");
  m.iclir = null_or_double(j, "iclir");
  m.ann_return = null_or_double(j, "ann_return");
  m.ann_vol = null_or_double(j, "ann_vol");
  m.sharpe = null_or_double(j, "sharpe");
  m.sortino = null_or_double(j, "sortino");
  m.calmar = null_or_double(j, "calmar");
  m.max_drawdown = null_or_double(j, "max_drawdown");
  m.n_days = j.value("n_days", std::size_t(0));
  m.n_valid_dates = j.value("n_valid_dates", std::size_t(0));
  m.avg_coverage = j.value("avg_coverage", 0.0);
  if (j.contains("window_start")) m.window_start = parse_date(j.at("window_start").get<std::string>());
  if (j.contains("window_end")) m.window_end = parse_date(j.at("window_end").get<std::string>());
  m.config_hash = j.value("config_hash", "");
  return m;
}

}  // namespace

bool AgentState::is_retired(const std::string& hash_hexstr) const {
  return std::find(retired_hashes.begin(), retired_hashes.end(), hash_hexstr) !=
         retired_hashes.end();
}

std::string AgentState::to_json_text() const {
  json j;
  j["schema"] = "alphaloom.state.v1";
  j["round"] = round;
  j["seed"] = seed;
  j["rng_state"] = rng_state;
  j["explore_cursor"] = explore_cursor;
  json lib = json::array();
  for (const auto& f : library) {
    lib.push_back({{"expr", f.expr},
                   {"rationale", f.rationale},
                   {"metrics", metrics_to_json(f.metrics)},
                   {"round", f.round}});
  }
  j["library"] = lib;
  json hd = json::array();
  for (const auto& h : held) {
    hd.push_back({{"expr", h.expr},
                  {"rationale", h.rationale},
                  {"metrics", metrics_to_json(h.metrics)},
                  {"rounds_held", h.rounds_held}});
  }
  j["held"] = hd;
  j["retired"] = retired_hashes;
  json tl = json::object();
  for (const auto& [k, v] : tallies) tl[k] = {{"proposed", v.first}, {"promoted", v.second}};
  j["tallies"] = tl;
  return j.dump(2);
}

AgentState AgentState::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("schema", "") != "alphaloom.state.v1") {
    throw SchemaError("not an agent state file");
  }
  AgentState s;
  s.round = j.at("round").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.rng_state = j.value("rng_state", "");
  s.explore_cursor = j.value("explore_cursor", 0);
  for (const auto& f : j.at("library")) {
    PromotedFactor pf;
    pf.expr = f.at("expr").get<std::string>();
    pf.rationale = f.at("rationale").get<std::string>();
    pf.metrics = metrics_from_json(f.at("metrics"));
    pf.round = f.at("round").get<int>();
    s.library.push_back(std::move(pf));
  }
  for (const auto& h : j.at("held")) {
    HeldCandidate hc;
    hc.expr = h.at("expr").get<std::string>();
    hc.rationale = h.at("rationale").get<std::string>();
    hc.metrics = metrics_from_json(h.at("metrics"));
    hc.rounds_held = h.at("rounds_held").get<int>();
    s.held.push_back(std::move(hc));
  }
  s.retired_hashes = j.at("retired").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("tallies").items()) {
    s.tallies[k] = {v.at("proposed").get<int>(), v.at("promoted").get<int>()};
  }
  return s;
}

void AgentState::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write state file: " + path);
  out << to_json_text() << '\n';
}

AgentState AgentState::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open state file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

bool AgentState::operator==(const AgentState& other) const {
  return to_json_text() == other.to_json_text();
}

// ---------------------------------------------------------------------------
// baseline generator

namespace {

struct TemplateEntry {
  std::string expr;
  std::string rationale;
};

const std::map<std::string, std::pair<std::string, std::string>>& primitive_phrases() {
  // primitive -> (description, economic channel)
  static const std::map<std::string, std::pair<std::string, std::string>> phrases = {
      {"ret", {"the day's realized return", "short-horizon reversal and continuation in order flow"}},
      {"mkt_ret", {"the aggregate market return", "systematic state dependence of the cross-section"}},
      {"price", {"the absolute price level", "level-linked effects such as tick size and lottery demand"}},
      {"volume", {"raw trading volume", "attention and liquidity demand"}},
      {"vol_ratio", {"turnover relative to its trailing month", "crowding and unusual participation"}},
      {"ret_vol", {"trailing realized volatility", "risk-state conditioning of expected returns"}},
      {"price_ma_ratio", {"price relative to its trailing average", "trend gaps and mean-reversion pressure"}},
      {"mkt_vol", {"the market volatility regime", "regime-dependent risk appetite"}},
      {"vol_growth", {"one-day volume growth", "flow surprise the market may absorb with delay"}},
      {"spread", {"the quoted spread proxy", "liquidity supply and transaction-cost pressure"}}};
  return phrases;
}

std::string rationale_for(const std::string& primitive, const std::string& flavor) {
  const auto& [desc, channel] = primitive_phrases().at(primitive);
  return flavor + " of " + desc + "; candidate channel: " + channel + ".";
}

const std::vector<TemplateEntry>& template_sweep() {
  static const std::vector<TemplateEntry> sweep = [] {
    std::vector<TemplateEntry> v;
    for (const auto& p : kPrimitiveNames) {
      v.push_back({"cs_rank(" + p + ")", rationale_for(p, "Cross-sectional rank")});
    }
    for (const auto& p : kPrimitiveNames) {
      v.push_back({"cs_zscore(" + p + ")", rationale_for(p, "Cross-sectional z-score")});
    }
    for (const auto& p : {"volume", "vol_ratio", "vol_growth", "ret", "price_ma_ratio"}) {
      v.push_back({std::string("cs_rank(delta(") + p + ",1))",
                   rationale_for(p, "Rank of the one-day change")});
    }
    for (const auto& p : {"vol_ratio", "vol_growth", "ret_vol", "spread"}) {
      for (int w : {5, 7, 9}) {
        v.push_back({std::string("cs_rank(rolling_mean(") + p + "," + std::to_string(w) + "))",
                     rationale_for(p, "Rank of the " + std::to_string(w) + "-day average")});
      }
    }
    v.push_back({"cs_zscore(div(volume,rolling_mean(volume,20)))",
                 rationale_for("volume", "Z-score of the trend-relative level")});
    v.push_back({"cs_zscore(div(price,rolling_mean(price,20)))",
                 rationale_for("price", "Z-score of the trend-relative level")});
    v.push_back({"negate(cs_rank(ret))", rationale_for("ret", "Reversal-signed rank")});
    v.push_back({"negate(cs_rank(price_ma_ratio))",
                 rationale_for("price_ma_ratio", "Reversal-signed rank")});
    v.push_back({"cs_rank(rolling_std(ret,10))",
                 rationale_for("ret_vol", "Rank of the short-window dispersion")});
    for (int w : {5, 10, 20}) {
      v.push_back({"cs_rank(rolling_sum(ret," + std::to_string(w) + "))",
                   rationale_for("ret", "Rank of the " + std::to_string(w) + "-day cumulative move")});
    }
    v.push_back({"cs_rank(mul(cs_zscore(vol_ratio),cs_zscore(vol_growth)))",
                 rationale_for("vol_ratio", "Rank of the interaction with flow surprise")});
    v.push_back({"cs_rank(mul(cs_zscore(ret_vol),cs_zscore(vol_ratio)))",
                 rationale_for("ret_vol", "Rank of the interaction with crowding")});
    v.push_back({"cs_rank(mul(cs_zscore(price_ma_ratio),cs_zscore(ret_vol)))",
                 rationale_for("price_ma_ratio", "Rank of the risk-conditioned trend gap")});
    v.push_back({"negate(cs_rank(mul(cs_zscore(price_ma_ratio),cs_zscore(ret_vol))))",
                 rationale_for("price_ma_ratio", "Reversal-signed risk-conditioned trend gap")});
    for (int k : {1, 2, 5}) {
      v.push_back({"cs_rank(lag(ret," + std::to_string(k) + "))",
                   rationale_for("ret", "Rank of the " + std::to_string(k) + "-day lagged return")});
    }
    return v;
  }();
  return sweep;
}

std::vector<std::string> expr_tokens(const ExprNode& n) {
  std::vector<std::string> out;
  if (n.kind == NodeKind::Primitive || n.kind == NodeKind::Unary || n.kind == NodeKind::Binary ||
      n.kind == NodeKind::Windowed || n.kind == NodeKind::CrossSectional) {
    out.push_back(n.op);
  }
  for (const auto& c : n.children) {
    for (auto& t : expr_tokens(c)) out.push_back(std::move(t));
  }
  return out;
}

void collect_nodes(ExprNode& n, std::vector<ExprNode*>& out) {
  out.push_back(&n);
  for (auto& c : n.children) collect_nodes(c, out);
}

const std::vector<std::string>& swap_family(const std::string& op) {
  static const std::vector<std::string> rolling = {"rolling_mean", "rolling_sum", "rolling_max",
                                                   "rolling_min", "rolling_std"};
  static const std::vector<std::string> binary = {"add", "sub", "mul", "div"};
  static const std::vector<std::string> unary = {"negate", "abs", "sign", "log1p"};
  static const std::vector<std::string> cs = {"cs_rank", "cs_zscore"};
  static const std::vector<std::string> none = {};
  for (const auto* fam : {&rolling, &binary, &unary, &cs}) {
    if (std::find(fam->begin(), fam->end(), op) != fam->end()) return *fam;
  }
  return none;
}

}  // namespace

BaselineGenerator::BaselineGenerator(double p_exploit, GrammarBudget budget)
    : p_exploit_(p_exploit), budget_(budget) {}

int BaselineGenerator::template_count() { return int(template_sweep().size()); }

ProposeResult BaselineGenerator::propose(const AgentState& state,
                                         const std::vector<ExperimentRecord>&, int n,
                                         std::mt19937_64& rng) {
  ProposeResult out;
  if (n <= 0) return out;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int explored = 0;

  // survivor pool: promoted library plus held candidates
  std::vector<std::pair<std::string, std::string>> pool;  // (expr, rationale)
  for (const auto& f : state.library) pool.emplace_back(f.expr, f.rationale);
  for (const auto& h : state.held) pool.emplace_back(h.expr, h.rationale);

  auto explore_template = [&]() {
    const auto& sweep = template_sweep();
    const int idx = (state.explore_cursor + explored) % int(sweep.size());
    const int lap = (state.explore_cursor + explored) / int(sweep.size());
    ++explored;
    TemplateEntry entry = sweep[std::size_t(idx)];
    if (lap > 0) {
      // later laps re-visit the sweep with jittered windows
      try {
        FactorExpr e = FactorExpr::parse(entry.expr, budget_);
        ExprNode root = e.root();
        std::vector<ExprNode*> nodes;
        collect_nodes(root, nodes);
        std::vector<ExprNode*> windowed;
        for (auto* nd : nodes) {
          if (nd->kind == NodeKind::Windowed) windowed.push_back(nd);
        }
        if (!windowed.empty()) {
          ExprNode* nd = windowed[std::size_t(rng() % windowed.size())];
          const int deltas[] = {1, 2, 5};
          int delta = deltas[rng() % 3] * lap;
          nd->window = std::max(nd->op == "lag" ? 0 : 1, nd->window + delta);
          if (nd->op == "lag" && nd->children[0].kind == NodeKind::Primitive &&
              nd->children[0].op == "ret") {
            nd->window = std::max(1, nd->window);
          }
          FactorExpr mutated = FactorExpr::from_node(std::move(root), budget_, true);
          entry.expr = mutated.text();
        }
      } catch (const std::exception&) {
        // keep the base template
      }
    }
    return Proposal{entry.expr, entry.rationale, "baseline", ""};
  };

  auto mutate_survivor = [&]() -> std::optional<Proposal> {
    if (pool.empty()) return std::nullopt;
    const auto& [parent_expr, parent_rationale] = pool[std::size_t(rng() % pool.size())];
    FactorExpr parent;
    try {
      parent = FactorExpr::parse(parent_expr, budget_);
    } catch (const std::exception&) {
      return std::nullopt;
    }
    ExprNode root = parent.root();
    std::vector<ExprNode*> nodes;
    collect_nodes(root, nodes);
    const int move = int(rng() % 3);
    std::string flavor;
    if (move == 0) {
      // swap an operator within its family
      std::vector<ExprNode*> swappable;
      for (auto* nd : nodes) {
        if (!swap_family(nd->op).empty()) swappable.push_back(nd);
      }
      if (swappable.empty()) return std::nullopt;
      ExprNode* nd = swappable[std::size_t(rng() % swappable.size())];
      const auto& fam = swap_family(nd->op);
      std::string next = fam[std::size_t(rng() % fam.size())];
      if (next == nd->op) next = fam[(std::size_t(rng()) + 1) % fam.size()];
      nd->op = next;
      if (nd->op == "rolling_std" && nd->window < 2) nd->window = 2;
      flavor = "operator variant";
    } else if (move == 1) {
      std::vector<ExprNode*> windowed;
      for (auto* nd : nodes) {
        if (nd->kind == NodeKind::Windowed) windowed.push_back(nd);
      }
      if (windowed.empty()) return std::nullopt;
      ExprNode* nd = windowed[std::size_t(rng() % windowed.size())];
      const int deltas[] = {1, 2, 5};
      const int delta = deltas[rng() % 3] * (rng() % 2 ? 1 : -1);
      int floor = nd->op == "lag" ? 0 : 1;
      if (nd->op == "lag" && nd->children[0].kind == NodeKind::Primitive &&
          nd->children[0].op == "ret") {
        floor = 1;
      }
      nd->window = std::max(floor, nd->window + delta);
      flavor = "window variant";
    } else {
      ExprNode wrapped;
      wrapped.kind = NodeKind::CrossSectional;
      wrapped.op = rng() % 2 ? "cs_rank" : "cs_zscore";
      wrapped.children.push_back(std::move(root));
      root = std::move(wrapped);
      flavor = "renormalized variant";
    }
    try {
      FactorExpr mutated = FactorExpr::from_node(std::move(root), budget_, true);
      return Proposal{mutated.text(), "Local " + flavor + " of a survivor. Parent thesis: " +
                                          parent_rationale,
                      "baseline", parent.text()};
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };

  for (int i = 0; i < n; ++i) {
    if (!pool.empty() && unif(rng) < p_exploit_) {
      if (auto p = mutate_survivor()) {
        out.proposals.push_back(std::move(*p));
        continue;
      }
    }
    out.proposals.push_back(explore_template());
  }
  return out;
}

// ---------------------------------------------------------------------------
// llm generator

namespace {

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

ParsedUrl parse_http_url(const std::string& url) {
  const std::string prefix = "http://";
  if (url.rfind(prefix, 0) != 0) {
    throw ConfigError("llm endpoint must be an http:// URL: " + url);
  }
  ParsedUrl out;
  std::string rest = url.substr(prefix.size());
  const std::size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  if (slash != std::string::npos) out.path = rest.substr(slash);
  const std::size_t colon = hostport.find(':');
  if (colon == std::string::npos) {
    out.host = hostport;
  } else {
    out.host = hostport.substr(0, colon);
    out.port = std::stoi(hostport.substr(colon + 1));
  }
  return out;
}

}  // namespace

LlmGenerator::LlmGenerator(LlmConfig cfg, double p_exploit, GrammarBudget budget)
    : cfg_(std::move(cfg)), fallback_(p_exploit, budget), budget_(budget) {}

ProposeResult LlmGenerator::propose(const AgentState& state,
                                    const std::vector<ExperimentRecord>& recent, int n,
                                    std::mt19937_64& rng) {
  auto fall_back = [&](const std::string& reason) {
    ProposeResult out = fallback_.propose(state, recent, n, rng);
    out.downgrade = reason;
    return out;
  };
  if (cfg_.endpoint.empty()) return fall_back("no endpoint configured");

  json req;
  req["schema"] = "alphaloom.llm.v1";
  req["n"] = n;
  req["round"] = state.round + 1;
  req["budget"] = {{"max_depth", budget_.max_depth}, {"max_nodes", budget_.max_nodes}};
  req["primitives"] = kPrimitiveNames;
  req["operators"] = {{"unary", OperatorSet::unary()},
                      {"binary", OperatorSet::binary()},
                      {"windowed", OperatorSet::windowed()},
                      {"cross_sectional", OperatorSet::cross_sectional()}};
  json lib = json::array();
  for (const auto& f : state.library) {
    lib.push_back({{"expr", f.expr},
                   {"rationale", f.rationale},
                   {"t_ic", double_or_null(f.metrics.ic_tstat)},
                   {"sharpe", double_or_null(f.metrics.sharpe)}});
  }
  req["library"] = lib;
  json rec = json::array();
  const std::size_t take = std::min(recent.size(), std::size_t(cfg_.recent_records));
  for (std::size_t i = recent.size() - take; i < recent.size(); ++i) {
    const auto& r = recent[i];
    rec.push_back({{"expr", r.expr},
                   {"verdict", r.status == "evaluated" ? r.final_verdict : "Rejected"},
                   {"t_ic", double_or_null(r.metrics.ic_tstat)},
                   {"sharpe", double_or_null(r.metrics.sharpe)}});
  }
  req["recent"] = rec;

  try {
    const ParsedUrl url = parse_http_url(cfg_.endpoint);
    httplib::Client cli(url.host, url.port);
    cli.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    cli.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto resp = cli.Post(url.path, headers, req.dump(), "application/json");
    if (!resp) return fall_back("transport error contacting " + cfg_.endpoint);
    if (resp->status != 200) {
      return fall_back("endpoint returned status " + std::to_string(resp->status));
    }
    const json reply = json::parse(resp->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_array()) {
      return fall_back("malformed reply (expected a JSON array)");
    }
    ProposeResult out;
    for (const auto& item : reply) {
      if (!item.is_object() || !item.contains("expr")) continue;
      Proposal p;
      p.expr_text = item.at("expr").get<std::string>();
      p.rationale = item.value("rationale", "");
      p.source = "llm";
      out.proposals.push_back(std::move(p));
    }
    return out;
  } catch (const std::exception& e) {
    return fall_back(std::string("llm transport failure: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// replay generator

ReplayGenerator::ReplayGenerator(const std::string& log_path) {
  for (const auto& rec : read_experiment_log(log_path)) {
    Proposal p;
    p.expr_text = rec.expr;
    p.rationale = rec.rationale;
    p.source = rec.source.rfind("replay:", 0) == 0 ? rec.source : "replay:" + rec.source;
    p.parent = rec.parent;
    by_round_[rec.round].push_back(std::move(p));
  }
}

ProposeResult ReplayGenerator::propose(const AgentState& state,
                                       const std::vector<ExperimentRecord>&, int,
                                       std::mt19937_64&) {
  ProposeResult out;
  auto it = by_round_.find(state.round + 1);
  if (it != by_round_.end()) out.proposals = it->second;
  return out;
}

// ---------------------------------------------------------------------------
// the round and campaign drivers

FactorSeries normalized_series(const FactorExpr& expr, const Panel& panel, int d0, int d1,
                               double winsor_low, double winsor_high) {
  FactorSeries s = evaluate(expr, panel, d0, d1);
  const std::size_t T = panel.n_dates();
  for (int t = d0; t <= d1; ++t) {
    std::vector<double> slice(panel.n_stocks());
    for (std::size_t st = 0; st < panel.n_stocks(); ++st) {
      slice[st] = s.values[st * T + std::size_t(t)];
    }
    const ZScoreResult z = normalize_cross_section(slice, winsor_low, winsor_high);
    if (z.degenerate) ++s.diagnostics.degenerate_dates;
    for (std::size_t st = 0; st < panel.n_stocks(); ++st) {
      s.values[st * T + std::size_t(t)] = z.values[st];
    }
  }
  return s;
}

namespace {

int first_index_at_or_after(const Panel& panel, Date d) {
  const auto& dates = panel.dates();
  auto it = std::lower_bound(dates.begin(), dates.end(), d);
  return it == dates.end() ? -1 : int(it - dates.begin());
}

int last_index_at_or_before(const Panel& panel, Date d) {
  const auto& dates = panel.dates();
  auto it = std::upper_bound(dates.begin(), dates.end(), d);
  return it == dates.begin() ? -1 : int(it - dates.begin()) - 1;
}

}  // namespace

RoundResult run_round(AgentState& state, HypothesisGenerator& gen, const Panel& panel,
                      const SplitSpec& split, const CampaignConfig& cfg,
                      const std::vector<ExperimentRecord>& recent) {
  split.validate();
  cfg.gate.validate();
  const int round = state.round + 1;

  const int is_d0 = first_index_at_or_after(panel, split.is_start);
  const int is_last = last_index_at_or_before(panel, split.is_end);
  if (is_d0 < 0 || is_last < 0 || is_last <= is_d0) {
    throw ConfigError("panel does not cover the in-sample window");
  }
  // formation dates whose next-day targets stay inside the IS window
  const int eval_d1 = is_last - 1;

  std::mt19937_64 rng;
  if (!state.rng_state.empty()) {
    std::istringstream is(state.rng_state);
    is >> rng;
  } else {
    rng.seed(state.seed);
  }

  RoundResult rr;
  ProposeResult proposed = gen.propose(state, recent, cfg.batch, rng);
  if (proposed.downgrade) {
    rr.events.push_back("round " + std::to_string(round) +
                        " generator downgrade: " + *proposed.downgrade);
  }

  // library series for the redundancy screen; same-round promotions are
  // appended as they happen (selection is sequential in candidate order)
  std::vector<FactorSeries> lib_series;
  const bool want_feasibility = !is_missing(cfg.gate.max_turnover) || cfg.decay_check;
  if (!state.library.empty()) {
    for (const auto& f : state.library) {
      lib_series.push_back(normalized_series(FactorExpr::parse(f.expr, cfg.budget), panel, is_d0,
                                             eval_d1, cfg.winsor_low, cfg.winsor_high));
    }
  }
  std::set<std::string> promoted_hashes;
  std::set<std::string> held_hashes;
  for (const auto& f : state.library) {
    promoted_hashes.insert(hex64(FactorExpr::parse(f.expr, cfg.budget).hash()));
  }
  for (const auto& h : state.held) {
    held_hashes.insert(hex64(FactorExpr::parse(h.expr, cfg.budget).hash()));
  }

  std::set<std::string> seen_this_round;
  std::vector<PromotedFactor> new_promotions;
  std::vector<HeldCandidate> new_held;
  std::vector<std::string> new_retired;
  std::map<std::string, std::pair<int, int>> tally_delta;

  int seq = 0;
  int explored = 0;
  for (const Proposal& prop : proposed.proposals) {
    if (prop.source == "baseline" && prop.parent.empty()) ++explored;

    ExperimentRecord rec;
    rec.round = round;
    rec.seq = seq++;
    rec.expr = prop.expr_text;
    rec.rationale = prop.rationale;
    rec.source = prop.source;
    rec.parent = prop.parent;
    rec.config_hash = cfg.run_config_hash;

    FactorExpr expr;
    try {
      expr = FactorExpr::parse(prop.expr_text, cfg.budget);
      validate_no_lookahead(expr);
    } catch (const std::exception& e) {
      rec.status = "rejected";
      rec.reject_reason = e.what();
      rr.records.push_back(std::move(rec));
      continue;
    }
    rec.expr = expr.text();
    const std::string h = hex64(expr.hash());
    if (state.is_retired(h) || promoted_hashes.count(h) || seen_this_round.count(h)) {
      rec.status = "rejected";
      rec.reject_reason = "duplicate structural hash against retired/promoted sets";
      rr.records.push_back(std::move(rec));
      continue;
    }
    seen_this_round.insert(h);

    const FactorSeries series =
        normalized_series(expr, panel, is_d0, eval_d1, cfg.winsor_low, cfg.winsor_high);
    const EvalMetrics m = compute_eval_metrics(series, panel, is_d0, eval_d1, cfg.metrics);
    if (m.window_end > split.is_end) {
      throw ProtocolError("gate would read past the in-sample boundary");
    }
    GateDecision d = decide(m, cfg.gate, cfg.metrics.config_hash());

    rec.status = "evaluated";
    rec.metrics = m;
    rec.gate_verdict = verdict_name(d.verdict);
    rec.reasons = d.reasons;

    Verdict final = d.verdict;
    if (final == Verdict::Promote && !lib_series.empty()) {
      const RedundancyResult red =
          redundancy_check(series, lib_series, panel, is_d0, eval_d1, cfg.gate.max_abs_corr,
                           cfg.gate.redundancy_min_overlap);
      if (!red.pass) {
        final = Verdict::Retire;
        rec.reasons.push_back("redundant: avg cross-sectional rank corr " +
                              format_double(red.max_abs_corr) + " vs " + red.worst_member +
                              " exceeds ceiling");
      }
    }
    if (final == Verdict::Promote && want_feasibility) {
      const BacktestReport bt =
          decile_backtest(series.values, panel, is_d0, eval_d1, cfg.metrics.quantiles);
      const std::vector<double> to = turnover(bt.weights, panel);
      std::vector<double> decay;
      if (cfg.decay_check) {
        for (const HorizonStats& hs :
             multi_horizon(series.values, panel, is_d0, eval_d1, cfg.decay_horizon,
                           cfg.metrics.quantiles)) {
          decay.push_back(hs.ann_mean);
        }
      }
      const FeasibilityResult fr = feasibility_check(to, decay, cfg.gate);
      if (fr.turnover_breach) {
        final = Verdict::Hold;
      }
      for (const auto& note : fr.notes) rec.reasons.push_back(note);
    }
    rec.final_verdict = verdict_name(final);

    for (const auto& tok : expr_tokens(expr.root())) {
      auto& t = tally_delta[tok];
      ++t.first;
      if (final == Verdict::Promote) ++t.second;
    }

    if (final == Verdict::Promote) {
      new_promotions.push_back({expr.text(), prop.rationale, m, round});
      promoted_hashes.insert(h);
      lib_series.push_back(series);  // same-round promotions join the redundancy screen
    } else if (final == Verdict::Retire) {
      new_retired.push_back(h);
    } else {
      if (!held_hashes.count(h)) {
        new_held.push_back({expr.text(), prop.rationale, m, 0});
        held_hashes.insert(h);
      }
    }
    rr.records.push_back(std::move(rec));
  }

  // Step 5: state updates from outcomes only, applied at round end
  for (auto& p : new_promotions) state.library.push_back(std::move(p));
  for (const auto& h : new_retired) {
    if (!state.is_retired(h)) state.retired_hashes.push_back(h);
  }
  // drop held entries that were promoted or retired by re-proposal this round
  state.held.erase(
      std::remove_if(state.held.begin(), state.held.end(),
                     [&](const HeldCandidate& hc) {
                       const std::string h =
                           hex64(FactorExpr::parse(hc.expr, cfg.budget).hash());
                       return promoted_hashes.count(h) > 0 || state.is_retired(h);
                     }),
      state.held.end());
  for (auto& h : new_held) state.held.push_back(std::move(h));

  // hold-set aging
  std::vector<HeldCandidate> survivors;
  for (auto& h : state.held) {
    ++h.rounds_held;
    if (h.rounds_held >= cfg.hold_max_rounds) {
      const std::string hash = hex64(FactorExpr::parse(h.expr, cfg.budget).hash());
      if (!state.is_retired(hash)) state.retired_hashes.push_back(hash);
      rr.events.push_back("round " + std::to_string(round) + " hold-aging retirement: " + h.expr);
    } else {
      survivors.push_back(std::move(h));
    }
  }
  state.held = std::move(survivors);

  for (const auto& [tok, delta] : tally_delta) {
    auto& t = state.tallies[tok];
    t.first += delta.first;
    t.second += delta.second;
  }

  state.explore_cursor += explored;
  std::ostringstream os;
  os << rng;
  state.rng_state = os.str();
  state.round = round;
  return rr;
}

CampaignResult run_campaign(AgentState initial, HypothesisGenerator& gen, const Panel& panel,
                            const SplitSpec& split, const CampaignConfig& cfg) {
  if (cfg.rounds < 0) throw ConfigError("campaign rounds must be >= 0");
  CampaignResult res;
  res.state = std::move(initial);
  while (res.state.round < cfg.rounds) {
    RoundResult rr = run_round(res.state, gen, panel, split, cfg, res.records);
    for (auto& r : rr.records) res.records.push_back(std::move(r));
    for (auto& e : rr.events) res.events.push_back(std::move(e));
  }
  return res;
}

// ---------------------------------------------------------------------------
// experiment log

std::string record_to_json(const ExperimentRecord& rec) {
  json j;
  j["type"] = "candidate";
  j["round"] = rec.round;
  j["seq"] = rec.seq;
  j["status"] = rec.status;
  j["expr"] = rec.expr;
  j["rationale"] = rec.rationale;
  j["source"] = rec.source;
  j["parent"] = rec.parent;
  j["config_hash"] = rec.config_hash;
  if (rec.status == "rejected") {
    j["reject_reason"] = rec.reject_reason;
  } else {
    j["metrics"] = metrics_to_json(rec.metrics);
    j["gate_verdict"] = rec.gate_verdict;
    j["final_verdict"] = rec.final_verdict;
    j["reasons"] = rec.reasons;
  }
  return j.dump();
}

ExperimentRecord record_from_json(const std::string& line) {
  const json j = json::parse(line);
  ExperimentRecord rec;
  rec.round = j.at("round").get<int>();
  rec.seq = j.at("seq").get<int>();
  rec.status = j.at("status").get<std::string>();
  rec.expr = j.at("expr").get<std::string>();
  rec.rationale = j.value("rationale", "");
  rec.source = j.value("source", "");
  rec.parent = j.value("parent", "");
  rec.config_hash = j.value("config_hash", "");
  rec.reject_reason = j.value("reject_reason", "");
  if (j.contains("metrics")) rec.metrics = metrics_from_json(j.at("metrics"));
  rec.gate_verdict = j.value("gate_verdict", "");
  rec.final_verdict = j.value("final_verdict", "");
  if (j.contains("reasons")) rec.reasons = j.at("reasons").get<std::vector<std::string>>();
  return rec;
}

void write_experiment_log(const std::string& path, const std::vector<ExperimentRecord>& records,
                          const std::string& config_hash, std::uint64_t seed,
                          const std::vector<std::string>& events) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write experiment log: " + path);
  json meta;
  meta["type"] = "meta";
  meta["schema"] = "alphaloom.log.v1";
  meta["config_hash"] = config_hash;
  meta["seed"] = seed;
  out << meta.dump() << '\n';
  for (const auto& rec : records) out << record_to_json(rec) << '\n';
  for (const auto& e : events) {
    json ev;
    ev["type"] = "event";
    ev["what"] = e;
    out << ev.dump() << '\n';
  }
}

std::vector<ExperimentRecord> read_experiment_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment log: " + path);
  std::vector<ExperimentRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.value("type", "") != "candidate") continue;
    out.push_back(record_from_json(line));
  }
  return out;
}

}  // namespace alphaloom

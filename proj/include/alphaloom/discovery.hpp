#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "alphaloom/expr.hpp"
#include "alphaloom/gate.hpp"
#include "alphaloom/metrics.hpp"
#include "alphaloom/panel.hpp"

namespace alphaloom {

struct SplitSpec {
  Date is_start = 0;
  Date is_end = 0;
  Date oos_start = 0;
  Date oos_end = 0;
  void validate() const;  // enforces is_start <= is_end < oos_start <= oos_end
};

struct Proposal {
  std::string expr_text;
  std::string rationale;
  std::string source;  // baseline | llm | replay:<source>
  std::string parent;  // mutation parentage, empty for fresh templates
};

struct ProposeResult {
  std::vector<Proposal> proposals;
  std::optional<std::string> downgrade;  // generator fell back, with reason
};

struct PromotedFactor {
  std::string expr;
  std::string rationale;
  EvalMetrics metrics;
  int round = 0;
};

struct HeldCandidate {
  std::string expr;
  std::string rationale;
  EvalMetrics metrics;
  int rounds_held = 0;
};

struct ExperimentRecord {
  int round = 0;
  int seq = 0;  // logical order, deterministic across reruns
  std::string status;  // evaluated | rejected
  std::string expr;
  std::string rationale;
  std::string source;
  std::string parent;
  std::string reject_reason;
  EvalMetrics metrics;
  std::string gate_verdict;   // decide() outcome
  std::string final_verdict;  // after redundancy / feasibility adjustments
  std::vector<std::string> reasons;
  std::string config_hash;
};

/// The agent's serializable knowledge state; the experiment log is the
/// authoritative history, this is the working set.
struct AgentState {
  int round = 0;
  std::uint64_t seed = 0;
  std::string rng_state;  // serialized engine, empty = derive from seed
  int explore_cursor = 0;
  std::vector<PromotedFactor> library;
  std::vector<HeldCandidate> held;
  std::vector<std::string> retired_hashes;  // hex structural hashes
  std::map<std::string, std::pair<int, int>> tallies;  // token -> (proposed, promoted)

  bool is_retired(const std::string& hash_hexstr) const;
  std::string to_json_text() const;
  static AgentState from_json_text(const std::string& text);
  void save(const std::string& path) const;
  static AgentState load(const std::string& path);

  bool operator==(const AgentState& other) const;
};

class HypothesisGenerator {
 public:
  virtual ~HypothesisGenerator() = default;
  virtual ProposeResult propose(const AgentState& state,
                                const std::vector<ExperimentRecord>& recent, int n,
                                std::mt19937_64& rng) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic generator: with probability p_exploit mutate a survivor
/// (operator swap, window nudge, cs wrap), otherwise walk a fixed template
/// sweep over the primitive families. Proposals carry template rationales.
class BaselineGenerator : public HypothesisGenerator {
 public:
  BaselineGenerator(double p_exploit, GrammarBudget budget);
  ProposeResult propose(const AgentState& state, const std::vector<ExperimentRecord>& recent,
                        int n, std::mt19937_64& rng) override;
  std::string name() const override { return "baseline"; }

  // visible for the aging/continuation of the exploration sweep
  static int template_count();

 private:
  double p_exploit_;
  GrammarBudget budget_;
};

struct LlmConfig {
  std::string endpoint;  // http://host:port/path
  int timeout_ms = 10000;
  std::string key_env = "ALPHALOOM_LLM_KEY";
  int recent_records = 24;
};

/// One-shot JSON-over-HTTP transport. Replies are re-validated downstream;
/// transport failures fall back to the baseline generator for the round.
class LlmGenerator : public HypothesisGenerator {
 public:
  LlmGenerator(LlmConfig cfg, double p_exploit, GrammarBudget budget);
  ProposeResult propose(const AgentState& state, const std::vector<ExperimentRecord>& recent,
                        int n, std::mt19937_64& rng) override;
  std::string name() const override { return "llm"; }

 private:
  LlmConfig cfg_;
  BaselineGenerator fallback_;
  GrammarBudget budget_;
};

/// Feeds back the candidates recorded in an experiment log, round by round;
/// campaigns replay without network access.
class ReplayGenerator : public HypothesisGenerator {
 public:
  explicit ReplayGenerator(const std::string& log_path);
  ProposeResult propose(const AgentState& state, const std::vector<ExperimentRecord>& recent,
                        int n, std::mt19937_64& rng) override;
  std::string name() const override { return "replay"; }

 private:
  std::map<int, std::vector<Proposal>> by_round_;
};

struct CampaignConfig {
  int rounds = 5;
  int batch = 16;
  int hold_max_rounds = 3;
  MetricsConfig metrics;
  GateThresholds gate;
  GrammarBudget budget;
  double winsor_low = 0.01;
  double winsor_high = 0.99;
  bool decay_check = false;
  int decay_horizon = 7;
  std::string run_config_hash;  // stamps every record
};

struct RoundResult {
  std::vector<ExperimentRecord> records;
  std::vector<std::string> events;  // downgrades, hold-aging retirements
};

// One Algorithm-1 cycle: generate, construct (winsorize+z-score per date),
// evaluate on IS formation dates whose targets stay inside IS, gate, update
// state. Duplicate structural hashes against retired/promoted sets are
// rejected before evaluation.
RoundResult run_round(AgentState& state, HypothesisGenerator& gen, const Panel& panel,
                      const SplitSpec& split, const CampaignConfig& cfg,
                      const std::vector<ExperimentRecord>& recent);

struct CampaignResult {
  AgentState state;
  std::vector<ExperimentRecord> records;
  std::vector<std::string> events;
};

CampaignResult run_campaign(AgentState initial, HypothesisGenerator& gen, const Panel& panel,
                            const SplitSpec& split, const CampaignConfig& cfg);

// normalized per-date (winsorize + z-score) factor series, the Step-2 form
FactorSeries normalized_series(const FactorExpr& expr, const Panel& panel, int d0, int d1,
                               double winsor_low = 0.01, double winsor_high = 0.99);

// record (de)serialization, newline-delimited JSON
std::string record_to_json(const ExperimentRecord& rec);
ExperimentRecord record_from_json(const std::string& line);
void write_experiment_log(const std::string& path, const std::vector<ExperimentRecord>& records,
                          const std::string& config_hash, std::uint64_t seed,
                          const std::vector<std::string>& events);
std::vector<ExperimentRecord> read_experiment_log(const std::string& path);

}  // namespace alphaloom

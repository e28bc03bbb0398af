#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "alphaloom/aggregate.hpp"
#include "alphaloom/attribution.hpp"
#include "alphaloom/backtest.hpp"
#include "alphaloom/config.hpp"
#include "alphaloom/csv.hpp"
#include "alphaloom/discovery.hpp"
#include "alphaloom/errors.hpp"
#include "alphaloom/expr.hpp"
#include "alphaloom/metrics.hpp"
#include "alphaloom/panel.hpp"
#include "alphaloom/report.hpp"
#include "alphaloom/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace alphaloom;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::uint64_t seed = 42;
  bool seed_given = false;
  std::string out_dir;
  std::string split;
  double cost_bps = -1.0;
  std::string model;
  std::string llm_endpoint;
};

struct Context {
  IniFile ini;
  std::string config_hash;
  std::uint64_t seed = 42;
  fs::path out;

  OutputStamp stamp() const { return {config_hash, seed}; }
  std::string out_file(const std::string& name) const { return (out / name).string(); }
};

Context make_context(const CliOptions& opt) {
  Context ctx;
  ctx.ini = IniFile::load(opt.config_path);
  if (opt.seed_given) ctx.ini.set("run", "seed", std::to_string(opt.seed));
  if (!opt.out_dir.empty()) ctx.ini.set("paths", "out_dir", opt.out_dir);
  if (!opt.split.empty()) ctx.ini.set("split", "preset", opt.split);
  if (opt.cost_bps >= 0.0) ctx.ini.set("costs", "one_way_bps", format_double(opt.cost_bps));
  if (!opt.model.empty()) ctx.ini.set("aggregation", "model", opt.model);
  if (!opt.llm_endpoint.empty()) ctx.ini.set("generator", "llm_endpoint", opt.llm_endpoint);

  ctx.seed = std::uint64_t(ctx.ini.get_int("run", "seed", 42));
  IniFile hashed = ctx.ini;
  hashed.set("run", "seed", "");  // the seed is stamped separately
  ctx.config_hash = hex64(fnv1a64(hashed.canonical()));
  ctx.out = ctx.ini.get("paths", "out_dir", "out");
  fs::create_directories(ctx.out);
  return ctx;
}

ScreenConfig screen_config(const IniFile& ini) {
  ScreenConfig cfg;
  cfg.eligible_exchanges = ini.get_int_list("panel", "eligible_exchanges");
  cfg.common_share_codes = ini.get_int_list("panel", "common_share_codes");
  cfg.min_price = ini.get_double("panel", "min_price", 5.0);
  cfg.min_history_days = int(ini.get_int("panel", "min_history_days", 252));
  return cfg;
}

ColumnMapping column_mapping(const IniFile& ini) {
  ColumnMapping map;
  for (auto& [logical, file_col] : map.names) {
    file_col = ini.get("panel", "col_" + logical, file_col);
  }
  return map;
}

SplitSpec split_spec(const IniFile& ini) {
  SplitSpec s;
  const std::string preset = ini.get("split", "preset", "");
  if (preset == "paper2021") {
    s.is_start = parse_date("2004-01-01");
    s.is_end = parse_date("2020-12-31");
    s.oos_start = parse_date("2021-01-01");
    s.oos_end = parse_date("2024-12-31");
  } else if (preset == "paper2023") {
    s.is_start = parse_date("2004-01-01");
    s.is_end = parse_date("2020-12-31");
    s.oos_start = parse_date("2023-01-01");
    s.oos_end = parse_date("2024-12-31");
  } else if (!preset.empty() && preset.find(':') != std::string::npos) {
    const auto parts = split_line(preset, ':');
    if (parts.size() != 4) throw ConfigError("--split dates need is_start:is_end:oos_start:oos_end");
    s.is_start = parse_date(parts[0]);
    s.is_end = parse_date(parts[1]);
    s.oos_start = parse_date(parts[2]);
    s.oos_end = parse_date(parts[3]);
  } else {
    s.is_start = parse_date(ini.get("split", "is_start", "2004-01-01"));
    s.is_end = parse_date(ini.get("split", "is_end", "2020-12-31"));
    s.oos_start = parse_date(ini.get("split", "oos_start", "2021-01-01"));
    s.oos_end = parse_date(ini.get("split", "oos_end", "2024-12-31"));
  }
  s.validate();
  return s;
}

GateThresholds gate_thresholds(const IniFile& ini) {
  GateThresholds th;
  th.tau_sig = ini.get_double("gate", "tau_sig", 3.0);
  th.tau_econ = ini.get_double("gate", "tau_econ", 1.0);
  th.tau_fail = ini.get_double("gate", "tau_fail", 1.0);
  th.hurdle_t = ini.get_double("gate", "hurdle_t", 3.0);
  th.max_abs_corr = ini.get_double("gate", "max_abs_corr", 0.8);
  if (ini.has("gate", "max_turnover")) {
    th.max_turnover = ini.get_double("gate", "max_turnover", nan_value());
  }
  th.redundancy_min_overlap = int(ini.get_int("gate", "redundancy_min_overlap", 60));
  th.validate();
  return th;
}

MetricsConfig metrics_config(const IniFile& ini) {
  MetricsConfig m;
  m.quantiles = int(ini.get_int("metrics", "quantiles", 10));
  m.min_names = int(ini.get_int("metrics", "min_names", 10));
  m.leg_fraction = ini.get_double("metrics", "leg_fraction", 0.5);
  return m;
}

GrammarBudget grammar_budget(const IniFile& ini) {
  GrammarBudget b;
  b.max_depth = int(ini.get_int("grammar", "max_depth", 6));
  b.max_nodes = int(ini.get_int("grammar", "max_nodes", 24));
  return b;
}

GbdtParams gbdt_params(const IniFile& ini) {
  GbdtParams p;
  p.rounds = int(ini.get_int("aggregation", "gbdt_rounds", 200));
  p.learning_rate = ini.get_double("aggregation", "gbdt_learning_rate", 0.05);
  p.max_leaves = int(ini.get_int("aggregation", "gbdt_max_leaves", 31));
  p.max_depth = int(ini.get_int("aggregation", "gbdt_max_depth", 6));
  p.lambda_l2 = ini.get_double("aggregation", "gbdt_lambda", 1.0);
  p.gamma = ini.get_double("aggregation", "gbdt_gamma", 0.0);
  return p;
}

// screened + primitive-augmented panel for all evaluation work
Panel prepared_panel(const Context& ctx, ScreenReport* report_out = nullptr) {
  const std::string screened = ctx.ini.get("paths", "screened", "");
  if (!screened.empty() && fs::exists(screened)) {
    IngestResult r = ingest_panel_file(screened, column_mapping(ctx.ini),
                                       ctx.ini.get("panel", "delimiter", ",")[0]);
    return build_primitives(r.panel);
  }
  const std::string raw = ctx.ini.get("paths", "panel", "");
  if (raw.empty()) throw ConfigError("config [paths] panel is required");
  IngestResult r =
      ingest_panel_file(raw, column_mapping(ctx.ini), ctx.ini.get("panel", "delimiter", ",")[0]);
  auto [panel, report] = apply_screens(r.panel, screen_config(ctx.ini));
  if (report_out) *report_out = report;
  return build_primitives(panel);
}

struct LibraryEntry {
  std::string id;
  std::string expr;
  std::string rationale;
};

std::vector<LibraryEntry> load_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open factor library: " + path);
  std::vector<LibraryEntry> out;
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    json j;
    in >> j;
    for (const auto& f : j.at("factors")) {
      out.push_back({f.at("id").get<std::string>(), f.at("expr").get<std::string>(),
                     f.value("rationale", "")});
    }
  } else {
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const std::string t = line.substr(0, line.find('#'));
      std::string expr;
      for (char c : t) {
        if (!std::isspace(static_cast<unsigned char>(c))) expr += c;
      }
      if (expr.empty()) continue;
      ++n;
      out.push_back({"f" + std::to_string(n), expr, ""});
    }
  }
  if (out.empty()) throw ConfigError("factor library is empty: " + path);
  return out;
}

void save_library(const std::string& path, const std::vector<PromotedFactor>& library,
                  const OutputStamp& stamp) {
  json j;
  j["schema"] = "alphaloom.library.v1";
  j["config_hash"] = stamp.config_hash;
  j["seed"] = stamp.seed;
  json factors = json::array();
  int n = 0;
  for (const auto& f : library) {
    ++n;
    factors.push_back({{"id", "f" + std::to_string(n)},
                       {"expr", f.expr},
                       {"rationale", f.rationale},
                       {"round", f.round}});
  }
  j["factors"] = factors;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write library: " + path);
  out << j.dump(2) << '\n';
}

int window_indices(const Panel& panel, Date start, Date end, int& d0, int& d1) {
  const auto& dates = panel.dates();
  auto lo = std::lower_bound(dates.begin(), dates.end(), start);
  auto hi = std::upper_bound(dates.begin(), dates.end(), end);
  if (lo == dates.end() || lo == hi) return -1;
  d0 = int(lo - dates.begin());
  d1 = int(hi - dates.begin()) - 1;
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_synth(const CliOptions& opt, const std::string& mode, int stocks, int days,
              double noise, double coef) {
  SynthParams params;
  params.mode = mode;
  params.stocks = stocks;
  params.days = days;
  params.seed = opt.seed_given ? opt.seed : 42;
  if (noise > 0.0) {
    params.noise_sigma = noise;
    params.interaction_noise = params.mode == "interaction" ? noise : params.interaction_noise;
  }
  if (coef > 0.0) {
    params.signal_coef = coef;
    params.interaction_coef = params.mode == "interaction" ? coef : params.interaction_coef;
  }
  const fs::path out = opt.out_dir.empty() ? "fixture" : opt.out_dir;
  fs::create_directories(out);

  const SynthResult res = synth_panel(params);
  {
    std::ofstream f(out / "panel.csv");
    write_panel_csv(f, res.observations);
  }
  {
    std::ofstream f(out / "benchmark.csv");
    write_benchmark_csv(f, res.dates, params.seed);
  }
  {
    json truth;
    truth["mode"] = params.mode;
    truth["hidden_expr"] = res.hidden_expr;
    truth["stocks"] = params.stocks;
    truth["days"] = params.days;
    truth["seed"] = params.seed;
    truth["signal_coef"] = params.signal_coef;
    truth["noise_sigma"] = params.noise_sigma;
    truth["interaction_coef"] = params.interaction_coef;
    truth["interaction_noise"] = params.interaction_noise;
    std::ofstream f(out / "truth.json");
    f << truth.dump(2) << '\n';
  }
  {
    const std::size_t is_len = std::size_t(double(res.dates.size()) * 0.6);
    std::ofstream f(out / "fixture.ini");
    f << "# generated fixture configuration\n";
    f << "[paths]\npanel = " << (out / "panel.csv").string() << "\nbenchmark = "
      << (out / "benchmark.csv").string() << "\nscreened = " << (out / "panel_screened.csv").string()
      << "\nlibrary = " << (out / "library.json").string() << "\nout_dir = "
      << (out / "runs").string() << "\n\n";
    f << "[run]\nseed = " << params.seed << "\n\n";
    f << "[panel]\neligible_exchanges = 1,2,3\ncommon_share_codes = 10,11\nmin_price = 0\n"
         "min_history_days = 40\n\n";
    f << "[split]\nis_start = " << format_date(res.dates.front()) << "\nis_end = "
      << format_date(res.dates[is_len - 1]) << "\noos_start = " << format_date(res.dates[is_len])
      << "\noos_end = " << format_date(res.dates.back()) << "\n\n";
    f << "[campaign]\nrounds = 5\nbatch_size = 16\nhold_max_rounds = 3\n\n";
    f << "[generator]\nkind = baseline\np_exploit = 0.6\n\n";
    f << "[gate]\ntau_sig = 3.0\ntau_econ = 1.0\ntau_fail = 1.0\nhurdle_t = 3.0\n"
         "max_abs_corr = 0.8\nredundancy_min_overlap = 60\n\n";
    f << "[metrics]\nquantiles = 10\nmin_names = 10\n\n";
    f << "[grammar]\nmax_depth = 6\nmax_nodes = 24\n\n";
    f << "[aggregation]\nmodel = linear\nridge_lambda = 0.000001\ntrain_window = 120\n"
         "refit_every = 40\nembargo = 1\ngbdt_rounds = 60\ngbdt_learning_rate = 0.1\n"
         "gbdt_max_leaves = 15\ngbdt_max_depth = 4\ngbdt_lambda = 1.0\ngbdt_gamma = 0\n\n";
    f << "[costs]\none_way_bps = 3\n\n";
    f << "[attribution]\nnw_lags = 5\nbenchmark_percent = true\n";
  }
  std::cout << "fixture written to " << out.string() << " (mode " << params.mode
            << ", hidden expr: " << (res.hidden_expr.empty() ? "none" : res.hidden_expr) << ")\n";
  return 0;
}

int cmd_ingest(const CliOptions& opt) {
  Context ctx = make_context(opt);
  const std::string raw = ctx.ini.get("paths", "panel", "");
  if (raw.empty()) throw ConfigError("config [paths] panel is required");
  IngestResult r =
      ingest_panel_file(raw, column_mapping(ctx.ini), ctx.ini.get("panel", "delimiter", ",")[0]);
  auto [panel, report] = apply_screens(r.panel, screen_config(ctx.ini));

  write_screen_report_csv(ctx.out_file("screen_report.csv"), report, ctx.stamp());

  // canonical screened panel artifact
  std::vector<RawObservation> obs;
  const std::size_t T = panel.n_dates();
  for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
    for (int t : panel.history(s)) {
      RawObservation o;
      o.date = panel.dates()[std::size_t(t)];
      o.stock_id = panel.stock_ids()[s];
      const std::size_t i = s * T + std::size_t(t);
      o.ret = panel.column("ret")[i];
      o.price = panel.column("price")[i];
      o.volume = panel.column("volume")[i];
      o.bid = panel.column("bid")[i];
      o.ask = panel.column("ask")[i];
      const double ex = panel.column("exchange_code")[i];
      const double sh = panel.column("share_code")[i];
      o.exchange_code = is_missing(ex) ? -1 : int(ex);
      o.share_code = is_missing(sh) ? -1 : int(sh);
      o.market_ret_vw = panel.market_vw()[std::size_t(t)];
      o.market_ret_sp = panel.market_sp()[std::size_t(t)];
      obs.push_back(std::move(o));
    }
  }
  std::sort(obs.begin(), obs.end(), [](const RawObservation& a, const RawObservation& b) {
    return a.date != b.date ? a.date < b.date : a.stock_id < b.stock_id;
  });
  const std::string screened = ctx.ini.get("paths", "screened", ctx.out_file("panel_screened.csv"));
  {
    std::ofstream f(screened);
    if (!f) throw ConfigError("cannot write screened panel: " + screened);
    write_panel_csv(f, obs);
  }

  std::cout << "rows total " << r.report.rows_total << ", loaded " << r.report.rows_loaded
            << ", rejected " << r.report.rows_rejected << ", negative-coded prices "
            << r.report.negative_prices << '\n';
  for (const auto& row : report.rows) {
    std::cout << row.name << ": obs " << row.remaining_observations << ", stocks "
              << row.remaining_stocks << '\n';
  }
  std::cout << "screened panel: " << screened << '\n';
  return 0;
}

int cmd_discover(const CliOptions& opt) {
  Context ctx = make_context(opt);
  const Panel panel = prepared_panel(ctx);
  const SplitSpec split = split_spec(ctx.ini);

  CampaignConfig cfg;
  cfg.rounds = int(ctx.ini.get_int("campaign", "rounds", 5));
  cfg.batch = int(ctx.ini.get_int("campaign", "batch_size", 16));
  cfg.hold_max_rounds = int(ctx.ini.get_int("campaign", "hold_max_rounds", 3));
  cfg.metrics = metrics_config(ctx.ini);
  cfg.gate = gate_thresholds(ctx.ini);
  cfg.budget = grammar_budget(ctx.ini);
  cfg.decay_check = ctx.ini.get_bool("gate", "decay_check", false);
  cfg.run_config_hash = ctx.config_hash;

  AgentState state;
  const std::string resume = ctx.ini.get("campaign", "resume_state", "");
  if (!resume.empty()) {
    state = AgentState::load(resume);
  } else {
    state.seed = ctx.seed;
  }

  const std::string kind = ctx.ini.get("generator", "kind", "baseline");
  const double p_exploit = ctx.ini.get_double("generator", "p_exploit", 0.6);
  std::unique_ptr<HypothesisGenerator> gen;
  if (kind == "baseline") {
    gen = std::make_unique<BaselineGenerator>(p_exploit, cfg.budget);
  } else if (kind == "llm") {
    LlmConfig lc;
    lc.endpoint = ctx.ini.get("generator", "llm_endpoint", "");
    lc.timeout_ms = int(ctx.ini.get_int("generator", "llm_timeout_ms", 10000));
    gen = std::make_unique<LlmGenerator>(lc, p_exploit, cfg.budget);
  } else if (kind == "replay") {
    gen = std::make_unique<ReplayGenerator>(ctx.ini.get("generator", "replay_log", ""));
  } else {
    throw ConfigError("generator kind must be baseline | llm | replay");
  }

  CampaignResult res = run_campaign(std::move(state), *gen, panel, split, cfg);

  write_experiment_log(ctx.out_file("experiments.ndjson"), res.records, ctx.config_hash, ctx.seed,
                       res.events);
  save_library(ctx.ini.get("paths", "library", ctx.out_file("library.json")), res.state.library,
               ctx.stamp());
  res.state.save(ctx.out_file("state.json"));

  // blind out-of-sample report, written after the library freeze
  int d0 = 0, d1 = 0;
  if (window_indices(panel, split.oos_start, split.oos_end, d0, d1) == 0 && d1 > d0) {
    std::vector<std::pair<std::string, EvalMetrics>> rows;
    int n = 0;
    for (const auto& f : res.state.library) {
      ++n;
      const FactorSeries series =
          normalized_series(FactorExpr::parse(f.expr, cfg.budget), panel, d0, d1);
      rows.emplace_back("f" + std::to_string(n),
                        compute_eval_metrics(series, panel, d0, d1, cfg.metrics));
    }
    write_factor_metrics_csv(ctx.out_file("oos_report.csv"), rows, ctx.stamp());
  }

  std::cout << "campaign complete: " << res.state.library.size() << " promoted, "
            << res.state.held.size() << " held, " << res.state.retired_hashes.size()
            << " retired over " << res.state.round << " rounds\n";
  for (const auto& e : res.events) std::cout << "event: " << e << '\n';
  return 0;
}

int cmd_backtest(const CliOptions& opt, const std::string& window) {
  Context ctx = make_context(opt);
  const Panel panel = prepared_panel(ctx);
  const SplitSpec split = split_spec(ctx.ini);
  const MetricsConfig mcfg = metrics_config(ctx.ini);
  const GrammarBudget budget = grammar_budget(ctx.ini);
  const auto library = load_library(ctx.ini.get("paths", "library", ctx.out_file("library.json")));

  Date w0 = split.oos_start, w1 = split.oos_end;
  if (window == "is") {
    w0 = split.is_start;
    w1 = split.is_end;
  } else if (window == "full") {
    w0 = split.is_start;
    w1 = split.oos_end;
  }
  int d0 = 0, d1 = 0;
  if (window_indices(panel, w0, w1, d0, d1) != 0) throw ConfigError("panel does not cover window");

  std::vector<std::pair<std::string, EvalMetrics>> table3;
  std::vector<std::pair<std::string, std::vector<HorizonStats>>> table8;
  for (const auto& f : library) {
    const FactorSeries series = normalized_series(FactorExpr::parse(f.expr, budget), panel, d0, d1);
    table3.emplace_back(f.id, compute_eval_metrics(series, panel, d0, d1, mcfg));
    const BacktestReport rep = decile_backtest(series.values, panel, d0, d1, mcfg.quantiles);
    write_decile_csv(ctx.out_file("table7_" + f.id + ".csv"), rep, ctx.stamp());
    write_series_csv(ctx.out_file(f.id + "_spread.csv"), rep.dates, rep.spread, ctx.stamp());
    std::vector<SeriesRef> chart;
    std::vector<std::vector<double>> decile_series(std::size_t(rep.Q));
    for (int q = 0; q < rep.Q; ++q) {
      for (const auto& row : rep.decile_returns) decile_series[std::size_t(q)].push_back(row[std::size_t(q)]);
      chart.push_back({"D" + std::to_string(q + 1), &decile_series[std::size_t(q)]});
    }
    write_svg_chart(ctx.out_file(f.id + "_deciles.svg"), f.id + " decile cumulative returns",
                    rep.dates, chart, ctx.stamp());
    table8.emplace_back(f.id, multi_horizon(series.values, panel, d0, d1, 7, mcfg.quantiles));
  }
  write_factor_metrics_csv(ctx.out_file("table3.csv"), table3, ctx.stamp());
  write_horizon_csv(ctx.out_file("table8.csv"), table8, ctx.stamp());
  std::cout << "backtest reports for " << library.size() << " factors in " << ctx.out.string()
            << '\n';
  return 0;
}

struct CompositeRun {
  std::vector<Date> dates;
  std::vector<double> gross;
  std::vector<double> net;
  std::vector<double> turnover_series;
  BacktestReport report;
};

CompositeRun composite_pipeline(const Context& ctx, const Panel& panel, const SplitSpec& split,
                                const std::vector<LibraryEntry>& library, ModelKind kind) {
  const GrammarBudget budget = grammar_budget(ctx.ini);
  const MetricsConfig mcfg = metrics_config(ctx.ini);

  std::vector<FactorSeries> series;
  std::vector<std::string> names;
  for (const auto& f : library) {
    series.push_back(evaluate(FactorExpr::parse(f.expr, budget), panel));
    names.push_back(f.id);
  }
  const FeatureMatrix fm =
      build_feature_matrix(panel, series, names, 0, int(panel.n_dates()) - 1);

  WalkForwardPlan plan;
  plan.train_window = int(ctx.ini.get_int("aggregation", "train_window", 250));
  plan.refit_every = int(ctx.ini.get_int("aggregation", "refit_every", 60));
  plan.embargo = int(ctx.ini.get_int("aggregation", "embargo", 1));
  const double ridge = ctx.ini.get_double("aggregation", "ridge_lambda", 1e-6);

  const WalkForwardResult wf = walk_forward(fm, plan, kind, ridge, gbdt_params(ctx.ini));
  const ScoreGrid grid = score_grid_from_rows(panel, fm.row_date, fm.row_stock, wf.scores);

  int d0 = 0, d1 = 0;
  if (window_indices(panel, split.oos_start, split.oos_end, d0, d1) != 0) {
    throw ConfigError("panel does not cover the out-of-sample window");
  }
  CompositeRun run;
  run.report = decile_backtest(grid, panel, d0, d1, mcfg.quantiles);
  run.dates = run.report.dates;
  run.gross = run.report.spread;
  run.turnover_series = turnover(run.report.weights, panel);
  CostModel cost;
  cost.one_way_bps = ctx.ini.get_double("costs", "one_way_bps", 3.0);
  run.net = apply_costs(run.gross, run.turnover_series, cost).net;
  return run;
}

int cmd_aggregate(const CliOptions& opt, const std::string& baseline_path) {
  Context ctx = make_context(opt);
  const Panel panel = prepared_panel(ctx);
  const SplitSpec split = split_spec(ctx.ini);
  const auto library = load_library(ctx.ini.get("paths", "library", ctx.out_file("library.json")));

  const std::string model_name = ctx.ini.get("aggregation", "model", "linear");
  ModelKind kind = ModelKind::Linear;
  if (model_name == "gbdt") kind = ModelKind::Gbdt;
  else if (model_name == "equal") kind = ModelKind::Equal;
  else if (model_name != "linear") throw ConfigError("aggregation model must be linear|gbdt|equal");

  CompositeRun run = composite_pipeline(ctx, panel, split, library, kind);

  write_composite_performance_csv(ctx.out_file("table5.csv"), "Long-Short", run.dates, run.gross,
                                  ctx.stamp());
  write_decile_csv(ctx.out_file("table7_composite.csv"), run.report, ctx.stamp());
  write_cost_turnover_csv(ctx.out_file("table9.csv"), run.dates, run.gross, run.net,
                          run.turnover_series, ctx.stamp());
  write_series_csv(ctx.out_file("composite_spread_gross.csv"), run.dates, run.gross, ctx.stamp());
  write_series_csv(ctx.out_file("composite_spread_net.csv"), run.dates, run.net, ctx.stamp());
  std::vector<double> d10;
  for (const auto& row : run.report.decile_returns) d10.push_back(row[std::size_t(run.report.Q - 1)]);
  write_series_csv(ctx.out_file("composite_d10.csv"), run.dates, d10, ctx.stamp());
  write_svg_chart(ctx.out_file("composite_gross_net.svg"), "Composite long-short: gross vs net",
                  run.dates, {{"gross", &run.gross}, {"net", &run.net}}, ctx.stamp());

  // frozen in-sample model artifact + importance table
  {
    int i0 = 0, i1 = 0;
    if (window_indices(panel, split.is_start, split.is_end, i0, i1) == 0) {
      const GrammarBudget budget = grammar_budget(ctx.ini);
      std::vector<FactorSeries> series;
      std::vector<std::string> names;
      for (const auto& f : library) {
        series.push_back(evaluate(FactorExpr::parse(f.expr, budget), panel, 0, i1));
        names.push_back(f.id);
      }
      const FeatureMatrix fm = build_feature_matrix(panel, series, names, i0, i1);
      if (kind == ModelKind::Gbdt) {
        const GbdtModel m = fit_gbdt(fm, gbdt_params(ctx.ini));
        std::ofstream f(ctx.out_file("model.json"));
        f << gbdt_model_to_json(m) << '\n';
        std::ofstream imp(ctx.out_file("feature_importance.csv"));
        imp << "# config_hash=" << ctx.config_hash << " seed=" << ctx.seed << '\n';
        imp << "Factor,Gain,Frequency\n";
        for (const auto& fi : feature_importance(m)) {
          imp << fi.name << ',' << format_double(fi.gain) << ',' << fi.frequency << '\n';
        }
      } else if (kind == ModelKind::Linear) {
        const LinearModel m = fit_linear(fm, ctx.ini.get_double("aggregation", "ridge_lambda", 1e-6));
        std::ofstream f(ctx.out_file("model.json"));
        f << linear_model_to_json(m) << '\n';
      }
    }
  }

  if (!baseline_path.empty()) {
    const auto baseline = load_library(baseline_path);
    CompositeRun base = composite_pipeline(ctx, panel, split, baseline, kind);
    const PerfSummary agentic = perf_summary(run.gross);
    const PerfSummary trad = perf_summary(base.gross);
    char label_a[96], label_b[96];
    std::snprintf(label_a, sizeof(label_a), "library (ann. %.1f%%)", agentic.ann_return * 100.0);
    std::snprintf(label_b, sizeof(label_b), "baseline (ann. %.1f%%)", trad.ann_return * 100.0);
    // align on common dates
    std::vector<double> a, b;
    std::vector<Date> common;
    std::size_t i = 0, j = 0;
    while (i < run.dates.size() && j < base.dates.size()) {
      if (run.dates[i] < base.dates[j]) ++i;
      else if (base.dates[j] < run.dates[i]) ++j;
      else {
        common.push_back(run.dates[i]);
        a.push_back(run.gross[i]);
        b.push_back(base.gross[j]);
        ++i;
        ++j;
      }
    }
    write_svg_chart(ctx.out_file("comparison.svg"), "Library vs baseline long-short (gross)",
                    common, {{label_a, &a}, {label_b, &b}}, ctx.stamp());
    write_series_csv(ctx.out_file("comparison_baseline_spread.csv"), base.dates, base.gross,
                     ctx.stamp());
  }

  std::cout << "composite (" << model_name << "): OOS Sharpe "
            << format_double(run.report.spread_perf.sharpe) << ", period return "
            << format_double(run.report.spread_period_return) << ", monotonicity "
            << format_double(run.report.monotonicity) << '\n';
  return 0;
}

int cmd_attribute(const CliOptions& opt, const std::vector<std::string>& series_paths,
                  const std::vector<std::string>& labels, const std::vector<std::string>& kinds) {
  Context ctx = make_context(opt);
  const std::string bench_path = ctx.ini.get("paths", "benchmark", "");
  if (bench_path.empty()) throw ConfigError("config [paths] benchmark is required");
  const BenchmarkReturns bench = ingest_factor_returns_file(
      bench_path, ctx.ini.get_bool("attribution", "benchmark_percent", true));
  int nw_lags = int(ctx.ini.get_int("attribution", "nw_lags", 5));

  std::vector<std::string> paths = series_paths;
  if (paths.empty()) {
    const std::string fallback = ctx.ini.get("attribution", "series", "");
    if (fallback.empty()) throw ConfigError("no portfolio series given (--series or [attribution] series)");
    paths.push_back(fallback);
  }

  std::vector<std::pair<std::string, std::vector<AlphaEstimate>>> rows;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto [dates, values] = read_series_csv(paths[i]);
    const std::string label = i < labels.size() ? labels[i] : fs::path(paths[i]).stem().string();
    const bool long_only = i < kinds.size() && kinds[i] == "lo";
    std::vector<AlphaEstimate> estimates;
    for (BenchmarkSpec spec :
         {BenchmarkSpec::CAPM, BenchmarkSpec::FF3, BenchmarkSpec::FF5, BenchmarkSpec::FF6}) {
      estimates.push_back(alpha_regression(dates, values, bench, spec, nw_lags, long_only));
    }
    rows.emplace_back(label, std::move(estimates));
  }
  write_alpha_csv(ctx.out_file("alpha_report.csv"), rows, ctx.stamp());
  std::cout << "alpha report for " << rows.size() << " portfolios in "
            << ctx.out_file("alpha_report.csv") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-loop factor discovery, evaluation, and backtesting"};
  app.require_subcommand(1);

  CliOptions opt;

  auto add_common = [&](CLI::App* sub, bool config_required = true) {
    auto* c = sub->add_option("--config", opt.config_path, "run configuration file");
    if (config_required) c->required();
    sub->add_option("--seed", opt.seed, "rng seed")->each([&](std::string) { opt.seed_given = true; });
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--split", opt.split, "split preset (paper2021|paper2023) or is0:is1:oos0:oos1");
    sub->add_option("--cost-bps", opt.cost_bps, "one-way cost in basis points");
    sub->add_option("--model", opt.model, "aggregation model: linear|gbdt|equal");
    sub->add_option("--llm-endpoint", opt.llm_endpoint, "hypothesis generator endpoint URL");
  };

  std::string synth_mode = "planted";
  int synth_stocks = 100, synth_days = 500;
  double synth_noise = -1.0, synth_coef = -1.0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic fixture panel");
  synth->add_option("--mode", synth_mode, "planted | interaction | null");
  synth->add_option("--stocks", synth_stocks, "number of stocks");
  synth->add_option("--days", synth_days, "number of trading days");
  synth->add_option("--noise", synth_noise, "per-stock daily noise sigma");
  synth->add_option("--coef", synth_coef, "signal coefficient");
  synth->add_option("--seed", opt.seed, "rng seed")->each([&](std::string) { opt.seed_given = true; });
  synth->add_option("--out", opt.out_dir, "output directory");

  auto* ingest = app.add_subcommand("ingest", "ingest and screen a raw panel");
  add_common(ingest);
  auto* discover = app.add_subcommand("discover", "run the closed-loop factor campaign");
  add_common(discover);
  std::string bt_window = "oos";
  auto* backtest = app.add_subcommand("backtest", "single-factor reports for a library");
  add_common(backtest);
  backtest->add_option("--window", bt_window, "evaluation window: is|oos|full");
  std::string baseline_path;
  auto* aggregate = app.add_subcommand("aggregate", "composite portfolio reports");
  add_common(aggregate);
  aggregate->add_option("--baseline", baseline_path, "baseline factor file for comparison");
  std::vector<std::string> at_series, at_labels, at_kinds;
  auto* attribute = app.add_subcommand("attribute", "risk-adjusted alpha reports");
  add_common(attribute);
  attribute->add_option("--series", at_series, "portfolio series csv (repeatable)");
  attribute->add_option("--label", at_labels, "portfolio label (repeatable)");
  attribute->add_option("--kind", at_kinds, "ls | lo per series (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(opt, synth_mode, synth_stocks, synth_days, synth_noise, synth_coef);
    if (ingest->parsed()) return cmd_ingest(opt);
    if (discover->parsed()) return cmd_discover(opt);
    if (backtest->parsed()) return cmd_backtest(opt, bt_window);
    if (aggregate->parsed()) return cmd_aggregate(opt, baseline_path);
    if (attribute->parsed()) return cmd_attribute(opt, at_series, at_labels, at_kinds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include "tracefix/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tracefix/baselines.hpp"
#include "tracefix/consensus.hpp"
#include "tracefix/corpus.hpp"
#include "tracefix/executor.hpp"
#include "tracefix/verifier.hpp"
#include "text_util.hpp"

namespace tracefix {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const std::set<std::string> kKnownMethods = {"direct", "self_refine", "self_reflection",
                                             std::string(kCausalRepairMethod)};

// ---------------------------------------------------------------- config io

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "' expects a boolean, got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof() || value.empty()) throw ConfigError("key '" + key + "' expects a number, got '" + value + "'");
  if constexpr (std::is_unsigned_v<T>)
    if (value.find('-') != std::string::npos) throw ConfigError("key '" + key + "' must not be negative");
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (auto t = detail::trim(item); !t.empty()) out.emplace_back(t);
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) out += (out.empty() ? "" : ",") + item;
  return out;
}

std::string mix_text(const std::map<FaultKind, unsigned>& mix) {
  std::vector<std::string> items;
  for (const auto& [kind, weight] : mix) items.push_back(std::string(to_string(kind)) + "=" + std::to_string(weight));
  return join(items);
}

std::string format_real(double value) { return detail::format_double(value); }

// --------------------------------------------------------------- records

json verdict_json(const Verdict& v) {
  json doc;
  doc["success"] = v.success;
  doc["detail"] = v.detail;
  doc["mode"] = std::string(to_string(v.mode));
  return doc;
}

json critique_json(const Critique& c) {
  json doc;
  doc["agent"] = std::string(to_string(c.agent));
  doc["label"] = std::string(to_string(c.label));
  doc["confidence"] = c.confidence;
  doc["parse_warning"] = c.parse_warning;
  return doc;
}

struct PendingPair {
  Intervention intervention;
  MinimalityScore minimality;
  std::optional<double> consensus;
};

struct ItemResult {
  json record;
  std::string log_line;
  std::optional<PendingPair> pair;
  const Trace* trace = nullptr;
};

// ------------------------------------------------------------- context

struct Context {
  const RunConfig& config;
  ModelGateway* gateway = nullptr;
  PromptLibrary prompts;
  std::unique_ptr<Verifier> verifier;
  std::map<std::string, RepairHint> hints;

  explicit Context(const RunConfig& c) : config(c) {}

  ModelGateway& need_gateway(const char* why) const {
    if (!gateway) throw ConfigError(std::string(why) + " needs a model gateway (set a stub directory or endpoint)");
    return *gateway;
  }
};

ItemResult process_causal(const Trace& trace, const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  ItemResult result;
  json& rec = result.record;
  rec["method"] = std::string(kCausalRepairMethod);
  rec["trace_id"] = trace.trace_id;

  const Verdict initial = (*ctx.verifier)(trace);
  rec["initial_verdict"] = verdict_json(initial);
  if (initial.success) {
    rec["status"] = "passed";
    result.log_line = "passed";
    return result;
  }

  std::unique_ptr<StepExecutor> executor;
  if (trace.task.verifier_kind == VerifierKind::predictive)
    executor = std::make_unique<PredictiveExecutor>(ctx.need_gateway("predictive re-execution"),
                                                    PredictiveSettings{cfg.gateway.model, 0.0, &ctx.prompts});
  else
    executor = std::make_unique<ToolExecutor>(cfg.sandbox, cfg.limits);

  std::unique_ptr<Proposer> proposer;
  if (cfg.proposer == "gateway")
    proposer = std::make_unique<GatewayProposer>(
        ctx.need_gateway("the gateway proposer"), cfg.prompt_variant,
        ProposalSettings{cfg.gateway.model, cfg.gateway.temperature, &ctx.prompts});
  else
    proposer = std::make_unique<RuleMutatorProposer>(ctx.hints);

  bool first_call = true;
  TraceVerifier verify_fn = [&](const Trace& t) {
    if (first_call && t == trace) {
      first_call = false;
      return initial;
    }
    return (*ctx.verifier)(t);
  };

  ScoringOptions options{cfg.k, cfg.early_break, cfg.stop_after_first_causal_step, cfg.evaluation_cap};
  TraceScoring scoring = score_trace(trace, *proposer, *executor, verify_fn, options);

  ConsensusSettings consensus_settings{cfg.tau_c, cfg.gateway.model, 0.0, &ctx.prompts};
  if (cfg.attribution_flags) {
    ModelGateway& gw = ctx.need_gateway("attribution flagging");
    for (auto& step : scoring.scores)
      if (!step.skipped) step.attribution_flag = attribution_flags_step(trace, step.step_index, initial.detail, gw,
                                                                       consensus_settings);
  }

  rec["exhaustive"] = scoring.exhaustive;
  rec["budget_truncated"] = scoring.budget_truncated;
  json steps = json::array();
  std::size_t flagged = 0, validated = 0;
  for (const auto& step : scoring.scores) {
    json s;
    s["step_index"] = step.step_index;
    s["crs"] = step.crs;
    s["attempts"] = step.attempts;
    s["skipped"] = step.skipped ? json(*step.skipped) : json(nullptr);
    json ids = json::array();
    for (const auto& iv : step.successful_interventions) ids.push_back(iv.proposal.id());
    s["successful"] = std::move(ids);
    s["notes"] = step.notes;
    s["attribution_flag"] = step.attribution_flag ? json(*step.attribution_flag) : json(nullptr);
    steps.push_back(std::move(s));
    const bool is_flagged = cfg.attribution_flags ? step.attribution_flag.value_or(false) : step.crs == 1;
    if (is_flagged) {
      ++flagged;
      validated += step.crs == 1;
    }
  }
  rec["steps"] = std::move(steps);
  rec["causal_steps"] = scoring.causal_steps();
  rec["flag_source"] = cfg.attribution_flags ? "attribution_prompt" : "crs";
  rec["flagged"] = flagged;
  rec["validated"] = validated;

  json checks = json::array();
  json repair = nullptr;
  for (const auto& step : scoring.scores) {
    if (step.crs != 1) continue;
    const auto selected = select_repair(step, trace.steps[step.step_index].payload, cfg.metric);
    if (!selected) continue;
    const Intervention& chosen = step.successful_interventions[selected->intervention_index];
    std::optional<double> consensus;
    const bool gate = chosen.verdict.mode == VerdictMode::predictive || cfg.force_consensus;
    if (gate) {
      const ConsensusResult cr = validate_attribution(trace, step.step_index, step.crs, selected->proposal.payload,
                                                      initial.detail, ctx.need_gateway("consensus validation"),
                                                      consensus_settings);
      json check;
      check["step_index"] = step.step_index;
      check["score"] = cr.score;
      check["retained"] = cr.retained;
      json critiques = json::array();
      for (const auto& c : cr.critiques) critiques.push_back(critique_json(c));
      check["critiques"] = std::move(critiques);
      checks.push_back(std::move(check));
      if (!cr.retained) continue;
      consensus = cr.score;
    }
    repair = json::object();
    repair["step_index"] = step.step_index;
    repair["proposal_id"] = selected->proposal.id();
    repair["payload"] = selected->proposal.payload;
    repair["minimality_lexical"] = selected->minimality.lexical;
    repair["minimality_edit"] = selected->minimality.edit;
    repair["consensus"] = consensus ? json(*consensus) : json(nullptr);
    result.pair = PendingPair{chosen, selected->minimality, consensus};
    break;
  }
  rec["consensus_checks"] = std::move(checks);
  rec["repair"] = repair;
  rec["status"] = repair.is_null() ? "failed" : "repaired";
  result.log_line = repair.is_null() ? "failed, no validated repair"
                                     : "repaired at step " + std::to_string(repair["step_index"].get<std::size_t>());
  result.trace = &trace;
  return result;
}

ItemResult process_baseline(BaselineMethod method, const Trace& trace, const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  ItemResult result;
  json& rec = result.record;
  rec["method"] = std::string(to_string(method));
  rec["trace_id"] = trace.trace_id;

  const Verdict initial = (*ctx.verifier)(trace);
  rec["initial_verdict"] = verdict_json(initial);
  if (initial.success) {
    rec["status"] = "passed";
    result.log_line = "passed";
    return result;
  }
  if (method == BaselineMethod::direct) {
    // Direct performs no refinement: the failed answer stands.
    rec["final_verdict"] = verdict_json(initial);
    rec["iterations_used"] = 0;
    rec["status"] = "failed";
    result.log_line = "failed, no refinement";
    return result;
  }

  ModelGateway& gateway = ctx.need_gateway("refinement baselines");
  BaselineSettings settings{cfg.gateway.model, cfg.gateway.temperature,
                            cfg.baseline_max_iters ? cfg.baseline_max_iters
                                                   : default_max_iters(trace.task.verifier_kind),
                            &ctx.prompts};
  const std::string initial_solution = final_answer_of(trace).value_or("");
  AnswerJudge judge = [&](std::string_view answer, const TaskSpec& task) {
    return ctx.verifier->check_answer(answer, task);
  };
  RefinementOutcome outcome = method == BaselineMethod::self_refine
                                  ? self_refine(trace.task, gateway, settings, initial_solution)
                                  : self_reflection(trace.task, gateway, initial_solution, judge, settings);
  const Verdict final_verdict = ctx.verifier->check_answer(outcome.final_answer, trace.task);
  const MinimalityScore m = score_minimality(outcome.initial_solution, outcome.final_solution);
  const bool repaired = counts_as_repair(method, initial, final_verdict);

  rec["final_verdict"] = verdict_json(final_verdict);
  rec["iterations_used"] = outcome.iterations_used;
  rec["calls"] = outcome.transcript.size();
  rec["truncated"] = outcome.truncated;
  rec["error"] = outcome.error ? json(*outcome.error) : json(nullptr);
  rec["minimality_lexical"] = m.lexical;
  rec["minimality_edit"] = m.edit;
  rec["status"] = repaired ? "repaired" : "failed";
  result.log_line = std::string(repaired ? "repaired" : "failed") + " after " +
                    std::to_string(outcome.iterations_used) + " iteration(s)";
  return result;
}

// ------------------------------------------------------------ gateway

struct OwnedGateway {
  std::unique_ptr<ModelGateway> upstream;
  std::unique_ptr<ModelGateway> front;
  ModelGateway* get() const { return front ? front.get() : upstream.get(); }
};

OwnedGateway build_gateway(const RunConfig& cfg, const fs::path& run_dir) {
  OwnedGateway owned;
  if (!cfg.stub_dir.empty()) {
    if (!fs::is_directory(cfg.stub_dir)) throw ConfigError("stub directory not found: " + cfg.stub_dir.string());
    owned.upstream = std::make_unique<ScriptedGateway>(cfg.stub_dir);
    return owned;
  }
  if (!cfg.gateway.endpoint.empty()) {
    GatewayConfig gc = cfg.gateway;
    if (gc.cache_dir.empty()) gc.cache_dir = run_dir / "cache";
    owned.upstream = std::make_unique<HttpGateway>(gc);
    owned.front = std::make_unique<CachingGateway>(*owned.upstream, gc);
  }
  return owned;
}

std::string key_of(const std::string& method, const std::string& trace_id) { return method + "\n" + trace_id; }

// Last record per (method, trace) in file order.
std::vector<nlohmann::json> read_records(const fs::path& scores) {
  std::vector<nlohmann::json> records;
  std::map<std::string, std::size_t> index;
  std::ifstream in(scores);
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      continue;
    }
    const auto key = key_of(rec.value("method", ""), rec.value("trace_id", ""));
    if (auto it = index.find(key); it != index.end()) {
      records[it->second] = std::move(rec);
    } else {
      index[key] = records.size();
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace

// ------------------------------------------------------------------ config

void RunConfig::validate() const {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (evaluation_cap == 0) throw ConfigError("evaluation_cap must be at least 1");
  if (!(tau_c >= 0.0 && tau_c <= 1.0)) throw ConfigError("tau_c must lie in [0, 1]");
  if (proposer != "rule_mutator" && proposer != "gateway")
    throw ConfigError("proposer must be rule_mutator or gateway, got '" + proposer + "'");
  if (methods.empty()) throw ConfigError("no methods selected");
  for (const auto& m : methods)
    if (!kKnownMethods.count(m)) throw ConfigError("unknown method '" + m + "'");
  if (judge_precision && !(*judge_precision >= 0.0 && *judge_precision <= 1.0))
    throw ConfigError("judge_precision must lie in [0, 1]");
  gateway.validate();
}

RunConfig load_run_config(const fs::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }

  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string v = node.data();
      const std::string full = section + "." + key;
      if (section == "run") {
        if (key == "corpus") c.corpus = v;
        else if (key == "faults") c.faults = v;
        else if (key == "benchmark") c.benchmark = v;
        else if (key == "methods") c.methods = split_list(v);
        else if (key == "emit_pairs") c.emit_pairs = parse_bool(full, v);
        else if (key == "k") c.k = parse_number<std::size_t>(full, v);
        else if (key == "early_break") c.early_break = parse_bool(full, v);
        else if (key == "stop_after_first_causal_step") c.stop_after_first_causal_step = parse_bool(full, v);
        else if (key == "evaluation_cap") c.evaluation_cap = parse_number<std::size_t>(full, v);
        else if (key == "metric") {
          auto m = parse_minimality_metric(v);
          if (!m) throw ConfigError("metric must be lexical or edit");
          c.metric = *m;
        } else if (key == "prompt_variant") {
          if (v == "with_gold") c.prompt_variant = PromptVariant::with_gold;
          else if (v == "no_gold") c.prompt_variant = PromptVariant::no_gold;
          else throw ConfigError("prompt_variant must be with_gold or no_gold");
        } else if (key == "proposer") c.proposer = v;
        else if (key == "tau_c") c.tau_c = parse_number<double>(full, v);
        else if (key == "force_consensus") c.force_consensus = parse_bool(full, v);
        else if (key == "attribution_flags") c.attribution_flags = parse_bool(full, v);
        else if (key == "judge_precision") c.judge_precision = parse_number<double>(full, v);
        else if (key == "baseline_max_iters") c.baseline_max_iters = parse_number<std::size_t>(full, v);
        else if (key == "output") c.output = v;
        else if (key == "workers") c.workers = parse_number<std::size_t>(full, v);
        else if (key == "seed") c.seed = parse_number<std::uint64_t>(full, v);
        else throw ConfigError("unknown config key '" + full + "'");
      } else if (section == "synthetic") {
        if (key == "count") c.synthetic.count = parse_number<std::size_t>(full, v);
        else if (key == "min_depth") c.synthetic.min_depth = parse_number<std::size_t>(full, v);
        else if (key == "max_depth") c.synthetic.max_depth = parse_number<std::size_t>(full, v);
        else if (key == "mix") c.synthetic.mix = parse_fault_mix(v);
        else throw ConfigError("unknown config key '" + full + "'");
      } else if (section == "gateway") {
        if (key == "endpoint") c.gateway.endpoint = v;
        else if (key == "model") c.gateway.model = v;
        else if (key == "temperature") c.gateway.temperature = parse_number<double>(full, v);
        else if (key == "max_retries") c.gateway.max_retries = parse_number<int>(full, v);
        else if (key == "timeout_ms") c.gateway.timeout = std::chrono::milliseconds(parse_number<long>(full, v));
        else if (key == "cache_dir") c.gateway.cache_dir = v;
        else if (key == "requests_per_minute") c.gateway.requests_per_minute = parse_number<double>(full, v);
        else if (key == "stub_dir") c.stub_dir = v;
        else throw ConfigError("unknown config key '" + full + "'");
      } else if (section == "sandbox") {
        if (key == "backend") c.sandbox.backend = v;
        else if (key == "interpreter") c.sandbox.interpreter = v;
        else if (key == "container_runtime") c.sandbox.container_runtime = v;
        else if (key == "container_image") c.sandbox.container_image = v;
        else if (key == "workers") c.sandbox.workers = parse_number<std::size_t>(full, v);
        else if (key == "wall_time_ms") c.limits.wall_time = std::chrono::milliseconds(parse_number<long>(full, v));
        else if (key == "memory_mb") c.limits.memory_bytes = parse_number<std::size_t>(full, v) << 20;
        else throw ConfigError("unknown config key '" + full + "'");
      } else if (section == "prompts") {
        c.prompt_files[key] = v;
      } else {
        throw ConfigError("unknown config section '" + section + "'");
      }
    }
  }
  c.synthetic.seed = c.seed;
  return c;
}

std::string render_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "[run]\n";
  out << "corpus = " << c.corpus.string() << "\n";
  out << "faults = " << c.faults.string() << "\n";
  out << "benchmark = " << c.benchmark << "\n";
  out << "methods = " << join(c.methods) << "\n";
  out << "emit_pairs = " << (c.emit_pairs ? "true" : "false") << "\n";
  out << "k = " << c.k << "\n";
  out << "early_break = " << (c.early_break ? "true" : "false") << "\n";
  out << "stop_after_first_causal_step = " << (c.stop_after_first_causal_step ? "true" : "false") << "\n";
  out << "evaluation_cap = " << c.evaluation_cap << "\n";
  out << "metric = " << to_string(c.metric) << "\n";
  out << "prompt_variant = " << to_string(c.prompt_variant) << "\n";
  out << "proposer = " << c.proposer << "\n";
  out << "tau_c = " << format_real(c.tau_c) << "\n";
  out << "force_consensus = " << (c.force_consensus ? "true" : "false") << "\n";
  out << "attribution_flags = " << (c.attribution_flags ? "true" : "false") << "\n";
  if (c.judge_precision) out << "judge_precision = " << format_real(*c.judge_precision) << "\n";
  out << "baseline_max_iters = " << c.baseline_max_iters << "\n";
  out << "output = " << c.output.string() << "\n";
  out << "workers = " << c.workers << "\n";
  out << "seed = " << c.seed << "\n";
  out << "\n[synthetic]\n";
  out << "count = " << c.synthetic.count << "\n";
  out << "min_depth = " << c.synthetic.min_depth << "\n";
  out << "max_depth = " << c.synthetic.max_depth << "\n";
  out << "mix = " << mix_text(c.synthetic.mix) << "\n";
  out << "\n[gateway]\n";
  out << "endpoint = " << c.gateway.endpoint << "\n";
  out << "model = " << c.gateway.model << "\n";
  out << "temperature = " << format_real(c.gateway.temperature) << "\n";
  out << "max_retries = " << c.gateway.max_retries << "\n";
  out << "timeout_ms = " << c.gateway.timeout.count() << "\n";
  out << "cache_dir = " << c.gateway.cache_dir.string() << "\n";
  out << "requests_per_minute = " << format_real(c.gateway.requests_per_minute) << "\n";
  out << "stub_dir = " << c.stub_dir.string() << "\n";
  out << "\n[sandbox]\n";
  out << "backend = " << c.sandbox.backend << "\n";
  out << "interpreter = " << c.sandbox.interpreter << "\n";
  out << "container_runtime = " << c.sandbox.container_runtime << "\n";
  out << "container_image = " << c.sandbox.container_image << "\n";
  out << "workers = " << c.sandbox.workers << "\n";
  out << "wall_time_ms = " << c.limits.wall_time.count() << "\n";
  out << "memory_mb = " << (c.limits.memory_bytes >> 20) << "\n";
  if (!c.prompt_files.empty()) {
    out << "\n[prompts]\n";
    for (const auto& [name, file] : c.prompt_files) out << name << " = " << file.string() << "\n";
  }
  return out.str();
}

// --------------------------------------------------------------- summaries

std::vector<RunSummary> summarize_scores(const fs::path& scores, const std::string& benchmark,
                                         std::optional<double> judge_precision) {
  struct Tally {
    std::size_t total = 0, passed = 0, repaired = 0;
    double minimality_sum = 0;
    std::size_t minimality_n = 0;
    std::size_t flagged = 0, validated = 0;
    std::size_t checks = 0, retained = 0;
  };
  std::map<std::string, Tally> tallies;
  for (const auto& rec : read_records(scores)) {
    Tally& t = tallies[rec.value("method", "")];
    ++t.total;
    const std::string status = rec.value("status", "");
    if (status == "passed") ++t.passed;
    if (status == "repaired") {
      ++t.repaired;
      const nlohmann::json* m = nullptr;
      if (rec.contains("repair") && rec["repair"].is_object()) m = &rec["repair"]["minimality_lexical"];
      else if (rec.contains("minimality_lexical")) m = &rec["minimality_lexical"];
      if (m && m->is_number()) {
        t.minimality_sum += m->get<double>();
        ++t.minimality_n;
      }
    }
    t.flagged += rec.value("flagged", std::size_t{0});
    t.validated += rec.value("validated", std::size_t{0});
    if (rec.contains("consensus_checks"))
      for (const auto& check : rec["consensus_checks"]) {
        ++t.checks;
        t.retained += check.value("retained", false);
      }
  }

  std::vector<RunSummary> out;
  for (const auto& [method, t] : tallies) {
    RunSummary s = make_summary(benchmark, method, t.total, t.passed, t.repaired);
    if (t.minimality_n) s.minimality_mean = t.minimality_sum / static_cast<double>(t.minimality_n);
    if (t.flagged) s.crs_precision = static_cast<double>(t.validated) / static_cast<double>(t.flagged);
    if (t.checks) s.consensus_rate = static_cast<double>(t.retained) / static_cast<double>(t.checks);
    if (judge_precision && s.failed) s.adjusted_repair_rate = adjusted_repair_rate(s.repair_rate, *judge_precision);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const RunSummary& a, const RunSummary& b) {
    return method_rank(a.method) != method_rank(b.method) ? method_rank(a.method) < method_rank(b.method)
                                                          : a.method < b.method;
  });
  return out;
}

// ----------------------------------------------------------------- run

RunResult run_pipeline(const RunConfig& input, ModelGateway* gateway) {
  RunConfig config = input;
  config.validate();
  const fs::path run_dir = config.output;
  fs::create_directories(run_dir);

  std::ofstream log(run_dir / "run.log", std::ios::app | std::ios::binary);
  auto log_line = [&](const std::string& line) {
    log << line << "\n";
    log.flush();
  };

  const std::string snapshot = render_run_config(config);
  if (const fs::path cfg_path = run_dir / "config.ini"; fs::exists(cfg_path)) {
    std::ifstream in(cfg_path, std::ios::binary);
    std::ostringstream previous;
    previous << in.rdbuf();
    if (previous.str() != snapshot) log_line("note: configuration differs from the one recorded in config.ini");
  } else {
    std::ofstream(cfg_path, std::ios::binary) << snapshot;
  }

  if (config.corpus.empty()) {
    config.synthetic.seed = config.seed;
    config.corpus = run_dir / "corpus";
    write_corpus(config.corpus, generate_synthetic_suite(config.synthetic));
    if (config.benchmark.empty()) config.benchmark = "synthetic";
  }
  if (config.benchmark.empty()) config.benchmark = fs::absolute(config.corpus).lexically_normal().filename().string();
  if (config.faults.empty() && fs::exists(config.corpus / "faults.jsonl")) config.faults = config.corpus / "faults.jsonl";

  const Corpus corpus = ingest_corpus(config.corpus);
  for (const auto& issue : corpus.issues) log_line("invalid document " + issue.file.filename().string() + ": " + issue.reason);

  Context ctx(config);
  OwnedGateway owned;
  if (!gateway) {
    owned = build_gateway(config, run_dir);
    gateway = owned.get();
  }
  ctx.gateway = gateway;
  for (const auto& [name, file] : config.prompt_files) ctx.prompts.load_file(name, file);
  VerifierOptions vopts;
  vopts.sandbox = config.sandbox;
  vopts.limits = config.limits;
  vopts.grader = GraderSettings{config.gateway.model, 0.0, &ctx.prompts};
  ctx.verifier = std::make_unique<Verifier>(gateway, vopts);
  if (!config.faults.empty())
    for (const auto& record : read_faults(config.faults)) ctx.hints[record.trace_id] = record.hint();

  // Up-front checks for stages that cannot run without a model.
  const bool has_predictive = corpus.by_kind().count(VerifierKind::predictive) > 0;
  for (const auto& m : config.methods) {
    if (m == "self_refine" || m == "self_reflection") ctx.need_gateway("refinement baselines");
    if (m == kCausalRepairMethod) {
      if (config.proposer == "gateway") ctx.need_gateway("the gateway proposer");
      if (has_predictive) ctx.need_gateway("predictive verification");
      if (config.force_consensus || config.attribution_flags) ctx.need_gateway("consensus and attribution prompts");
    }
  }

  std::vector<std::string> methods = config.methods;
  std::stable_sort(methods.begin(), methods.end(),
                   [](const std::string& a, const std::string& b) { return method_rank(a) < method_rank(b); });
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());

  const fs::path scores_path = run_dir / "scores.jsonl";
  std::set<std::string> done;
  for (const auto& rec : read_records(scores_path))
    if (rec.value("status", "") != "error") done.insert(key_of(rec.value("method", ""), rec.value("trace_id", "")));

  struct Item {
    std::string method;
    const Trace* trace;
  };
  std::vector<Item> items;
  RunResult result;
  result.run_dir = run_dir;
  result.invalid_documents = corpus.issues.size();
  for (const auto& m : methods)
    for (const auto& trace : corpus.traces) {
      if (done.count(key_of(m, trace.trace_id)))
        ++result.resumed;
      else
        items.push_back({m, &trace});
    }

  auto process = [&](const Item& item) -> ItemResult {
    try {
      if (item.method == kCausalRepairMethod) return process_causal(*item.trace, ctx);
      return process_baseline(*parse_baseline_method(item.method), *item.trace, ctx);
    } catch (const std::exception& e) {
      ItemResult failed;
      failed.record["method"] = item.method;
      failed.record["trace_id"] = item.trace->trace_id;
      failed.record["status"] = "error";
      failed.record["error"] = e.what();
      failed.log_line = std::string("error: ") + e.what();
      return failed;
    }
  };

  std::unique_ptr<PairWriter> pairs;
  if (config.emit_pairs) pairs = std::make_unique<PairWriter>(run_dir / "pairs.jsonl");
  detail::drop_torn_tail(scores_path);
  std::ofstream scores(scores_path, std::ios::app | std::ios::binary);
  if (!scores) throw Error("cannot open " + scores_path.string());

  std::vector<std::optional<ItemResult>> slots(items.size());
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      ItemResult r = process(items[i]);
      std::lock_guard lock(mutex);
      slots[i] = std::move(r);
      ready.notify_all();
    }
  };
  std::vector<std::jthread> pool;
  const std::size_t threads = std::min(config.workers, std::max<std::size_t>(items.size(), 1));
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);

  // Sequencer: records leave in item order so output bytes never depend on
  // thread scheduling.
  for (std::size_t i = 0; i < items.size(); ++i) {
    ItemResult r;
    {
      std::unique_lock lock(mutex);
      ready.wait(lock, [&] { return slots[i].has_value(); });
      r = std::move(*slots[i]);
      slots[i].reset();
    }
    if (r.pair && pairs) {
      const std::size_t before = pairs->size();
      emit_pair(*r.trace, r.pair->intervention, r.pair->minimality, r.pair->consensus, *pairs);
      result.pairs_written += pairs->size() - before;
    }
    scores << r.record.dump() << "\n";
    scores.flush();
    log_line(items[i].method + " " + items[i].trace->trace_id + ": " + r.log_line);
    ++result.processed;
    if (r.record.value("status", "") == "error") ++result.failures;
  }
  pool.clear();
  scores.close();

  result.summaries = summarize_scores(scores_path, config.benchmark, config.judge_precision);
  const Report report = render_report(result.summaries);
  std::ofstream(run_dir / "summary.csv", std::ios::binary) << report.csv;
  std::ofstream(run_dir / "summary.md", std::ios::binary) << report.markdown;
  log_line("run complete: " + std::to_string(result.processed) + " processed, " + std::to_string(result.resumed) +
           " resumed, " + std::to_string(result.failures) + " failed, " + std::to_string(result.pairs_written) +
           " pairs written");
  return result;
}

}  // namespace tracefix

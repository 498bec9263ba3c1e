// tracefix: command-line front end for scoring, repairing and reporting on
// agent execution traces.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tracefix/corpus.hpp"
#include "tracefix/error.hpp"
#include "tracefix/metrics.hpp"
#include "tracefix/pipeline.hpp"
#include "tracefix/synthetic.hpp"

namespace {

using namespace tracefix;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kUsage = 1, kPartial = 2, kFatal = 3 };

// Flag values as parsed; only options that were given override the config file.
struct Flags {
  std::string config;
  std::string corpus, faults, benchmark, output, stub_dir, endpoint, model;
  std::vector<std::string> methods;
  std::size_t k = 0, workers = 0, evaluation_cap = 0, max_iters = 0;
  bool no_early_break = false, stop_first = false, no_gold = false, no_pairs = false;
  bool force_consensus = false, attribution_flags = false;
  std::string metric, proposer, mix;
  double tau_c = 0, judge_precision = 0;
  std::uint64_t seed = 0;
  std::size_t count = 0, min_depth = 0, max_depth = 0;
};

struct Registered {
  std::map<std::string, CLI::Option*> options;
  bool given(const std::string& name) const {
    auto it = options.find(name);
    return it != options.end() && it->second->count() > 0;
  }
};

void add_common(CLI::App& app, Flags& f, Registered& r) {
  r.options["config"] = app.add_option("--config", f.config, "INI run configuration")->check(CLI::ExistingFile);
  r.options["corpus"] = app.add_option("--corpus", f.corpus, "trace corpus directory (synthetic suite when omitted)");
  r.options["faults"] = app.add_option("--faults", f.faults, "fault records feeding the rule mutator");
  r.options["benchmark"] = app.add_option("--benchmark", f.benchmark, "benchmark name in reports");
  r.options["output"] = app.add_option("--output,-o", f.output, "run directory");
  r.options["stub-dir"] = app.add_option("--stub-dir", f.stub_dir, "scripted reply directory (offline gateway)");
  r.options["endpoint"] = app.add_option("--endpoint", f.endpoint, "chat completion endpoint URL");
  r.options["model"] = app.add_option("--model", f.model, "model name sent to the gateway");
  r.options["workers"] = app.add_option("--workers", f.workers, "trace-level worker count")->check(CLI::PositiveNumber);
  r.options["seed"] = app.add_option("--seed", f.seed, "seed for all harness-side randomness");
  r.options["count"] = app.add_option("--count", f.count, "synthetic trace count")->check(CLI::PositiveNumber);
  r.options["min-depth"] = app.add_option("--min-depth", f.min_depth, "synthetic minimum depth");
  r.options["max-depth"] = app.add_option("--max-depth", f.max_depth, "synthetic maximum depth");
  r.options["mix"] = app.add_option("--mix", f.mix, "fault mix, e.g. wrong_operand=2,wrong_operator=1");
  r.options["judge-precision"] =
      app.add_option("--judge-precision", f.judge_precision, "judge precision for adjusted repair rates")
          ->check(CLI::Range(0.0, 1.0));
}

void add_scoring(CLI::App& app, Flags& f, Registered& r) {
  r.options["k"] = app.add_option("--k", f.k, "interventions per step")->check(CLI::PositiveNumber);
  r.options["no-early-break"] = app.add_flag("--no-early-break", f.no_early_break, "evaluate all K proposals");
  r.options["stop-after-first"] =
      app.add_flag("--stop-after-first-causal-step", f.stop_first, "stop scoring at the first causal step");
  r.options["evaluation-cap"] =
      app.add_option("--evaluation-cap", f.evaluation_cap, "per-trace intervention budget")->check(CLI::PositiveNumber);
  r.options["metric"] =
      app.add_option("--metric", f.metric, "minimality metric")->check(CLI::IsMember({"lexical", "edit"}));
  r.options["no-gold"] = app.add_flag("--no-gold", f.no_gold, "withhold the gold answer from proposal prompts");
  r.options["proposer"] =
      app.add_option("--proposer", f.proposer, "proposal source")->check(CLI::IsMember({"rule_mutator", "gateway"}));
  r.options["tau-c"] = app.add_option("--tau-c", f.tau_c, "consensus threshold")->check(CLI::Range(0.0, 1.0));
  r.options["force-consensus"] =
      app.add_flag("--force-consensus", f.force_consensus, "run the consensus gate for deterministic verdicts too");
  r.options["attribution-flags"] =
      app.add_flag("--attribution-flags", f.attribution_flags, "flag steps with the attribution prompt");
}

RunConfig build_config(const Flags& f, const Registered& r) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (r.given("corpus")) c.corpus = f.corpus;
  if (r.given("faults")) c.faults = f.faults;
  if (r.given("benchmark")) c.benchmark = f.benchmark;
  if (r.given("output")) c.output = f.output;
  if (r.given("stub-dir")) c.stub_dir = f.stub_dir;
  if (r.given("endpoint")) c.gateway.endpoint = f.endpoint;
  if (r.given("model")) c.gateway.model = f.model;
  if (r.given("workers")) c.workers = f.workers;
  if (r.given("seed")) c.seed = f.seed;
  if (r.given("count")) c.synthetic.count = f.count;
  if (r.given("min-depth")) c.synthetic.min_depth = f.min_depth;
  if (r.given("max-depth")) c.synthetic.max_depth = f.max_depth;
  if (r.given("mix")) c.synthetic.mix = parse_fault_mix(f.mix);
  if (r.given("judge-precision")) c.judge_precision = f.judge_precision;
  if (r.given("k")) c.k = f.k;
  if (r.given("no-early-break")) c.early_break = false;
  if (r.given("stop-after-first")) c.stop_after_first_causal_step = true;
  if (r.given("evaluation-cap")) c.evaluation_cap = f.evaluation_cap;
  if (r.given("metric")) c.metric = *parse_minimality_metric(f.metric);
  if (r.given("no-gold")) c.prompt_variant = PromptVariant::no_gold;
  if (r.given("proposer")) c.proposer = f.proposer;
  if (r.given("tau-c")) c.tau_c = f.tau_c;
  if (r.given("force-consensus")) c.force_consensus = true;
  if (r.given("attribution-flags")) c.attribution_flags = true;
  if (r.given("methods")) c.methods = f.methods;
  if (r.given("max-iters")) c.baseline_max_iters = f.max_iters;
  c.synthetic.seed = c.seed;
  return c;
}

int print_run(const RunResult& result) {
  std::cout << "run directory: " << result.run_dir.string() << "\n"
            << "processed " << result.processed << ", resumed " << result.resumed << ", failed "
            << result.failures << ", pairs written " << result.pairs_written;
  if (result.invalid_documents) std::cout << ", invalid documents " << result.invalid_documents;
  std::cout << "\n\n" << render_report(result.summaries).markdown;
  return result.failures > 0 || result.invalid_documents > 0 ? kPartial : kOk;
}

int run_validate(const std::string& corpus_dir) {
  const Corpus corpus = ingest_corpus(corpus_dir);
  for (const auto& [kind, indices] : corpus.by_kind())
    std::cout << to_string(kind) << ": " << indices.size() << " trace(s)\n";
  for (const auto& issue : corpus.issues) std::cout << "invalid " << issue.file.string() << ": " << issue.reason << "\n";
  std::cout << corpus.traces.size() << " valid, " << corpus.issues.size() << " invalid\n";
  return corpus.issues.empty() ? kOk : kPartial;
}

int run_report(const std::string& source, const std::string& benchmark, std::optional<double> judge_precision,
               bool csv) {
  std::vector<RunSummary> summaries;
  const fs::path path = source;
  if (fs::is_directory(path)) {
    summaries = summarize_scores(path / "scores.jsonl", benchmark.empty() ? path.filename().string() : benchmark,
                                 judge_precision);
  } else if (path.extension() == ".jsonl") {
    summaries = summarize_scores(path, benchmark, judge_precision);
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    summaries = parse_report_csv(text.str());
  }
  const Report report = render_report(summaries);
  std::cout << (csv ? report.csv : report.markdown);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal attribution and counterfactual repair for agent execution traces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tracefix 0.3.0");

  // One flag set per subcommand: CLI11 options are owned by their subcommand.
  std::map<CLI::App*, std::pair<Flags, Registered>> per_command;

  auto* score = app.add_subcommand("score", "score every step of each failed trace; no pairs are written");
  auto* repair = app.add_subcommand("repair", "score, select minimal repairs and write contrastive pairs");
  auto* baseline = app.add_subcommand("baseline", "run refinement baselines over the corpus");
  auto* synth = app.add_subcommand("synth", "write a seeded fault-injected arithmetic corpus");
  auto* report = app.add_subcommand("report", "render a summary from a run directory, scores.jsonl or summary.csv");
  auto* validate = app.add_subcommand("validate", "parse and validate every trace in a corpus");

  for (auto* sub : {score, repair, baseline, synth}) {
    auto& [f, r] = per_command[sub];
    add_common(*sub, f, r);
  }
  for (auto* sub : {score, repair}) {
    auto& [f, r] = per_command[sub];
    add_scoring(*sub, f, r);
  }
  {
    auto& [f, r] = per_command[baseline];
    r.options["methods"] = baseline->add_option("--methods", f.methods, "comma-separated baseline methods")
                               ->delimiter(',')
                               ->check(CLI::IsMember({"direct", "self_refine", "self_reflection"}));
    r.options["max-iters"] = baseline->add_option("--max-iters", f.max_iters, "iteration cap (0: per-kind default)");
  }
  repair->add_flag("--no-pairs", per_command[repair].first.no_pairs, "skip writing pairs.jsonl");

  std::string report_source, report_benchmark;
  double report_precision = -1;
  bool report_csv = false;
  report->add_option("source", report_source, "run directory, scores.jsonl or summary.csv")->required();
  report->add_option("--benchmark", report_benchmark, "benchmark name");
  report->add_option("--judge-precision", report_precision, "judge precision")->check(CLI::Range(0.0, 1.0));
  report->add_flag("--csv", report_csv, "print CSV instead of markdown");

  std::string validate_corpus;
  validate->add_option("corpus", validate_corpus, "corpus directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return run_validate(validate_corpus);
    if (*report)
      return run_report(report_source, report_benchmark,
                        report_precision >= 0 ? std::optional<double>(report_precision) : std::nullopt, report_csv);

    CLI::App* chosen = app.get_subcommands().front();
    const auto& [flags, reg] = per_command.at(chosen);
    RunConfig config = build_config(flags, reg);
    if (*synth) {
      config.validate();
      const fs::path out = reg.given("output") ? config.output : fs::path("corpus");
      const SyntheticSuite suite = generate_synthetic_suite(config.synthetic);
      write_corpus(out, suite);
      std::cout << "wrote " << suite.traces.size() << " traces and faults.jsonl to " << out.string() << "\n";
      return kOk;
    }
    if (*score) {
      config.methods = {std::string(kCausalRepairMethod)};
      config.emit_pairs = false;
    } else if (*repair) {
      config.methods = {std::string(kCausalRepairMethod)};
      config.emit_pairs = !flags.no_pairs;
    } else if (*baseline) {
      std::erase(config.methods, std::string(kCausalRepairMethod));
      if (config.methods.empty()) config.methods = {"direct", "self_refine", "self_reflection"};
      config.emit_pairs = false;
    }
    return print_run(run_pipeline(config));
  } catch (const ConfigError& e) {
    std::cerr << "tracefix: configuration error: " << e.what() << "\n";
    return kFatal;
  } catch (const std::exception& e) {
    std::cerr << "tracefix: " << e.what() << "\n";
    return kFatal;
  }
}

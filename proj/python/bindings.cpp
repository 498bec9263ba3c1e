// Python bindings. Traces cross the boundary as JSON text so that Python
// callers can use plain dicts (see tracefix/__init__.py).

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tracefix/consensus.hpp"
#include "tracefix/crs.hpp"
#include "tracefix/executor.hpp"
#include "tracefix/expression.hpp"
#include "tracefix/metrics.hpp"
#include "tracefix/pipeline.hpp"
#include "tracefix/repair.hpp"
#include "tracefix/synthetic.hpp"
#include "tracefix/verifier.hpp"

namespace py = pybind11;
using namespace tracefix;

namespace {

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  d["benchmark"] = s.benchmark;
  d["method"] = s.method;
  d["total"] = s.total;
  d["passed"] = s.passed;
  d["failed"] = s.failed;
  d["repaired"] = s.repaired;
  d["regressed"] = s.regressed;
  d["repair_rate"] = s.repair_rate;
  d["accuracy_before"] = s.accuracy_before;
  d["accuracy_after"] = s.accuracy_after;
  d["delta"] = s.delta;
  d["minimality_mean"] = s.minimality_mean;
  d["crs_precision"] = s.crs_precision;
  d["consensus_rate"] = s.consensus_rate;
  d["adjusted_repair_rate"] = s.adjusted_repair_rate;
  return d;
}

py::dict verdict_dict(const Verdict& v) {
  py::dict d;
  d["success"] = v.success;
  d["detail"] = v.detail;
  d["mode"] = std::string(to_string(v.mode));
  return d;
}

AgreementLabel label_from(const std::string& text) { return parse_agreement_label(text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Causal attribution and counterfactual repair for agent execution traces";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<TraceError>(m, "TraceError", PyExc_ValueError);
  py::register_exception<ExpressionError>(m, "ExpressionError", PyExc_ValueError);

  m.def("canonicalize_trace", [](const std::string& doc) { return serialize_trace(parse_trace(doc)); },
        py::arg("document"), "Parse and validate a trace document; return its canonical serialization.");
  m.def(
      "validate_trace",
      [](const std::string& doc) {
        std::vector<std::string> out;
        for (const auto& v : validate_trace(trace_from_json(nlohmann::json::parse(doc)))) out.push_back(v.describe());
        return out;
      },
      py::arg("document"), "Invariant violations of a trace document (empty when valid).");
  m.def(
      "substitute_step",
      [](const std::string& doc, std::size_t index, std::string payload) {
        return serialize_trace(substitute_step(parse_trace(doc), index, std::move(payload)));
      },
      py::arg("document"), py::arg("index"), py::arg("payload"));
  m.def(
      "reexecute",
      [](const std::string& original, const std::string& prefix) {
        ToolExecutor executor;
        const auto result = reexecute_suffix(parse_trace(original), trace_from_json(nlohmann::json::parse(prefix)),
                                             executor);
        if (result.error) throw ConfigError(*result.error);
        return serialize_trace(result.trace);
      },
      py::arg("original"), py::arg("prefix"), "Regenerate the suffix of a prefix with the deterministic executor.");
  m.def(
      "verify_trace",
      [](const std::string& doc) {
        Verifier verifier;
        return verdict_dict(verifier(parse_trace(doc)));
      },
      py::arg("document"), "Deterministic verdict (numeric or program tests) for a trace.");

  m.def("evaluate", [](const std::string& expr) { return format_number(evaluate_expression(expr)); },
        py::arg("expression"), "Exact arithmetic; the result is formatted like calculator observations.");
  m.def("extract_number", [](const std::string& text) { return extract_number(text); }, py::arg("text"));

  m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));
  m.def("minimality_lexical", [](const std::string& a, const std::string& b) {
    return minimality_lexical(tokenize(a), tokenize(b));
  });
  m.def("minimality_edit",
        [](const std::string& a, const std::string& b) { return minimality_edit(tokenize(a), tokenize(b)); });
  m.def("levenshtein_tokens",
        [](const std::vector<std::string>& a, const std::vector<std::string>& b) { return levenshtein_tokens(a, b); });

  m.def(
      "consensus_score",
      [](int crs, const std::string& label_b, double conf_b, const std::string& label_c, double conf_c) {
        return consensus_score(crs, {Critique{CriticAgent::B, label_from(label_b), conf_b, {}, false},
                                     Critique{CriticAgent::C, label_from(label_c), conf_c, {}, false}});
      },
      py::arg("crs"), py::arg("label_b"), py::arg("confidence_b"), py::arg("label_c"), py::arg("confidence_c"));
  m.def(
      "parse_critique",
      [](const std::string& agent, const std::string& reply) {
        const Critique c = parse_critique(agent == "C" ? CriticAgent::C : CriticAgent::B, reply);
        py::dict d;
        d["label"] = std::string(to_string(c.label));
        d["confidence"] = c.confidence;
        d["parse_warning"] = c.parse_warning;
        return d;
      },
      py::arg("agent"), py::arg("reply"));

  m.def("repair_rate", &repair_rate, py::arg("failed"), py::arg("repaired"));
  m.def(
      "accuracy_delta",
      [](std::size_t total, std::size_t passed, std::size_t repaired, std::size_t regressed) {
        const auto a = accuracy_delta(total, passed, repaired, regressed);
        return py::make_tuple(a.before, a.after, a.delta);
      },
      py::arg("total"), py::arg("passed"), py::arg("repaired"), py::arg("regressed") = 0);
  m.def(
      "wilson_interval",
      [](std::size_t successes, std::size_t n, double confidence) {
        const auto i = wilson_interval(successes, n, confidence);
        return py::make_tuple(i.low, i.high);
      },
      py::arg("successes"), py::arg("n"), py::arg("confidence") = 0.95);
  m.def(
      "render_report",
      [](const std::string& csv) {
        const auto r = render_report(parse_report_csv(csv));
        return py::make_tuple(r.csv, r.markdown);
      },
      py::arg("summary_csv"), "Re-render a summary.csv as (csv, markdown).");

  m.def(
      "generate_synthetic_suite",
      [](std::size_t count, std::size_t min_depth, std::size_t max_depth, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.count = count;
        spec.min_depth = min_depth;
        spec.max_depth = max_depth;
        spec.seed = seed;
        const auto suite = generate_synthetic_suite(spec);
        py::list traces, faults;
        for (const auto& t : suite.traces) traces.append(serialize_trace(t));
        for (const auto& f : suite.faults) faults.append(fault_to_json(f).dump());
        return py::make_tuple(traces, faults);
      },
      py::arg("count") = 200, py::arg("min_depth") = 5, py::arg("max_depth") = 9, py::arg("seed") = 7,
      "Returns (trace documents, fault record documents) as JSON text.");

  m.def(
      "score_trace",
      [](const std::string& doc, std::size_t injected_step, const std::string& true_payload, std::size_t k,
         bool early_break) {
        const Trace trace = parse_trace(doc);
        RuleMutatorProposer proposer({{trace.trace_id, RepairHint{injected_step, true_payload}}});
        ToolExecutor executor;
        Verifier verifier;
        const TraceScoring scoring =
            score_trace(trace, proposer, executor, [&](const Trace& t) { return verifier(t); },
                        ScoringOptions{k, early_break, false, 150});
        py::list steps;
        for (const auto& s : scoring.scores) {
          py::dict d;
          d["step_index"] = s.step_index;
          d["crs"] = s.crs;
          d["attempts"] = s.attempts;
          d["skipped"] = s.skipped;
          steps.append(d);
        }
        py::dict out;
        out["trace_id"] = scoring.trace_id;
        out["causal_steps"] = scoring.causal_steps();
        out["steps"] = steps;
        return out;
      },
      py::arg("document"), py::arg("injected_step"), py::arg("true_payload"), py::arg("k") = 3,
      py::arg("early_break") = true, "Score every step of a failed deterministic trace with the rule mutator.");

  m.def(
      "run_pipeline",
      [](std::optional<std::filesystem::path> config_path, std::optional<std::filesystem::path> corpus,
         std::filesystem::path output, std::vector<std::string> methods, std::size_t workers, std::uint64_t seed,
         std::size_t count, std::optional<std::filesystem::path> stub_dir) {
        RunConfig c = config_path ? load_run_config(*config_path) : RunConfig{};
        if (corpus) c.corpus = *corpus;
        if (stub_dir) c.stub_dir = *stub_dir;
        if (!methods.empty()) c.methods = std::move(methods);
        c.output = std::move(output);
        c.workers = workers;
        c.seed = seed;
        c.synthetic.count = count;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(c);
        }
        py::dict d;
        d["run_dir"] = r.run_dir.string();
        d["processed"] = r.processed;
        d["resumed"] = r.resumed;
        d["failures"] = r.failures;
        d["pairs_written"] = r.pairs_written;
        py::list summaries;
        for (const auto& s : r.summaries) summaries.append(summary_dict(s));
        d["summaries"] = summaries;
        return d;
      },
      py::arg("config") = py::none(), py::arg("corpus") = py::none(), py::arg("output") = "run",
      py::arg("methods") = std::vector<std::string>{}, py::arg("workers") = 4, py::arg("seed") = 7,
      py::arg("count") = 200, py::arg("stub_dir") = py::none(),
      "Run the pipeline; without a corpus a seeded synthetic suite is generated.");
}

#include "tracefix/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "tracefix/executor.hpp"
#include "tracefix/verifier.hpp"
#include "text_util.hpp"

namespace tracefix {

namespace {

// Covers the whole mutator schedule for the literals a generated call holds.
constexpr std::size_t kIdentifiabilityEdits = 16;

constexpr std::pair<FaultKind, std::string_view> kFaultNames[] = {
    {FaultKind::wrong_operand, "wrong_operand"},
    {FaultKind::wrong_operator, "wrong_operator"},
    {FaultKind::dropped_constraint, "dropped_constraint"},
    {FaultKind::wrong_tool_arg, "wrong_tool_arg"},
};

constexpr std::string_view kPurposes[] = {
    "combine the running total with the next quantity from the problem",
    "apply the next adjustment described in the problem statement to the total",
    "update the intermediate result using the rule given for this stage",
    "scale the current amount and account for the extra items mentioned",
};

constexpr std::string_view kReasoning[] = {
    "Break the problem into a chain of calculator steps and track each result.",
    "The previous result feeds the next stage, so carry it forward carefully.",
    "Check which quantity the next stage of the problem refers to before computing.",
};

// Raw engine output reduced with modulo: the standard distributions are
// implementation-defined, and corpora must match across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  long between(long lo, long hi) { return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  bool coin() { return below(2) == 1; }

 private:
  std::mt19937_64 engine_;
};

struct Term {
  char op;
  long value;
};

// One calculator call: either `base op1 c1 [op2 c2]` or `#ref op1 c1 [op2 c2]`.
struct Op {
  std::optional<long> base;
  std::size_t ref_op = 0;
  Term first{'*', 2};
  std::optional<Term> second;
  std::string purpose;
};

std::string op_symbol(char op) { return std::string(1, op); }

std::string render_expression(const Op& op, const std::vector<std::size_t>& response_ids) {
  std::string out = op.base ? std::to_string(*op.base) : "#" + std::to_string(response_ids.at(op.ref_op));
  out += " " + op_symbol(op.first.op) + " " + std::to_string(op.first.value);
  if (op.second) out += " " + op_symbol(op.second->op) + " " + std::to_string(op.second->value);
  return out;
}

std::string render_call(const Op& op, const std::vector<std::size_t>& response_ids) {
  return "calculator\npurpose: " + op.purpose + "\nexpression: " + render_expression(op, response_ids);
}

std::string describe(const Op& op) {
  auto words = [](const Term& t) {
    switch (t.op) {
      case '*':
        return "multiply by " + std::to_string(t.value);
      case '+':
        return "add " + std::to_string(t.value);
      default:
        return "subtract " + std::to_string(t.value);
    }
  };
  std::string out = op.base ? "start from " + std::to_string(*op.base) + ", " : std::string();
  out += words(op.first);
  if (op.second) out += ", then " + words(*op.second);
  return out;
}

Op random_op(Rng& rng, std::size_t index) {
  Op op;
  op.purpose = std::string(kPurposes[rng.below(std::size(kPurposes))]);
  if (index == 0) {
    op.base = rng.between(2, 40);
    op.first.op = rng.coin() ? '*' : '+';
  } else {
    op.ref_op = index - 1;
    const char ops[] = {'*', '+', '-'};
    op.first.op = ops[rng.below(3)];
  }
  op.first.value = op.first.op == '*' ? rng.between(2, 9) : rng.between(1, 30);
  if (rng.coin()) op.second = Term{rng.coin() ? '+' : '-', rng.between(1, 20)};
  return op;
}

bool feasible(FaultKind kind, const Op& op, std::size_t index) {
  switch (kind) {
    case FaultKind::wrong_operand:
    case FaultKind::wrong_operator:
      return true;
    case FaultKind::dropped_constraint:
      return op.second.has_value();
    case FaultKind::wrong_tool_arg:
      return index >= 2;
  }
  return false;
}

char flipped(char op) { return op == '+' ? '-' : '+'; }

Op inject(Op op, FaultKind kind, Rng& rng) {
  switch (kind) {
    case FaultKind::wrong_operand: {
      std::vector<long*> slots{&op.first.value};
      if (op.base) slots.push_back(&*op.base);
      if (op.second) slots.push_back(&op.second->value);
      long& slot = *slots[rng.below(slots.size())];
      const long delta = rng.between(2, 9);
      slot = (rng.coin() && slot - delta >= 1) ? slot - delta : slot + delta;
      break;
    }
    case FaultKind::wrong_operator:
      if (op.second && rng.coin())
        op.second->op = flipped(op.second->op);
      else
        op.first.op = flipped(op.first.op);
      break;
    case FaultKind::dropped_constraint:
      op.second.reset();
      break;
    case FaultKind::wrong_tool_arg:
      op.ref_op = static_cast<std::size_t>(rng.below(op.ref_op));
      break;
  }
  return op;
}

Step make_step(std::size_t id, StepType type, std::string payload, std::vector<std::size_t> deps = {}) {
  Step step;
  step.id = id;
  step.type = type;
  step.payload = std::move(payload);
  step.deps = std::move(deps);
  return step;
}

struct Attempt {
  Trace faulty;
  FaultRecord record;
};

std::optional<Attempt> try_generate(Rng& rng, std::size_t depth, const std::map<FaultKind, unsigned>& mix,
                                    const std::string& trace_id, ToolExecutor& executor) {
  const std::size_t ops = depth >= 4 ? (depth - 2) / 2 : 1;
  const std::size_t extra_reasoning = depth - 1 - 2 * ops;

  // How many reasoning steps precede each tool call; the first always
  // opens the trace.
  std::vector<std::size_t> reasoning_before(ops, 0);
  if (extra_reasoning >= 1) reasoning_before[0] = 1;
  for (std::size_t r = 1; r < extra_reasoning; ++r) ++reasoning_before[rng.below(ops)];

  std::vector<Op> plan;
  for (std::size_t j = 0; j < ops; ++j) plan.push_back(random_op(rng, j));

  // Step ids of each call and response, fixed by the layout.
  std::vector<std::size_t> call_ids, response_ids;
  std::size_t next = 0;
  for (std::size_t j = 0; j < ops; ++j) {
    next += reasoning_before[j];
    call_ids.push_back(next++);
    response_ids.push_back(next++);
  }

  std::vector<std::pair<FaultKind, unsigned>> weights;
  unsigned total_weight = 0;
  for (const auto& [kind, weight] : mix) {
    if (weight == 0) continue;
    bool any = false;
    for (std::size_t j = 0; j < ops; ++j) any = any || feasible(kind, plan[j], j);
    if (!any) continue;
    weights.emplace_back(kind, weight);
    total_weight += weight;
  }
  if (total_weight == 0) return std::nullopt;
  auto pick = rng.below(total_weight);
  FaultKind kind = weights.front().first;
  for (const auto& [k, w] : weights) {
    if (pick < w) {
      kind = k;
      break;
    }
    pick -= w;
  }
  std::vector<std::size_t> eligible;
  for (std::size_t j = 0; j < ops; ++j)
    if (feasible(kind, plan[j], j)) eligible.push_back(j);
  const std::size_t fault_op = eligible[rng.below(eligible.size())];
  const Op faulty_op = inject(plan[fault_op], kind, rng);

  Trace truth;
  truth.trace_id = trace_id;
  truth.task.verifier_kind = VerifierKind::numeric;
  std::string statement = "Work through the chain of operations:";
  for (std::size_t j = 0; j < ops; ++j) statement += (j ? "; " : " ") + describe(plan[j]);
  truth.task.problem_statement = statement + ". What is the final result?";

  for (std::size_t j = 0; j < ops; ++j) {
    for (std::size_t r = 0; r < reasoning_before[j]; ++r)
      truth.steps.push_back(make_step(truth.steps.size(), StepType::reasoning,
                                      std::string(kReasoning[rng.below(std::size(kReasoning))])));
    std::vector<std::size_t> deps;
    if (!plan[j].base) deps.push_back(response_ids[plan[j].ref_op]);
    truth.steps.push_back(make_step(call_ids[j], StepType::tool_call, render_call(plan[j], response_ids), deps));
    Step response = make_step(response_ids[j], StepType::tool_response, "", {call_ids[j]});
    response.payload = executor.run_tool(truth.steps.back(), truth);
    truth.steps.push_back(std::move(response));
  }
  const std::size_t last_response = response_ids.back();
  Step final_step = make_step(truth.steps.size(), StepType::final_answer, truth.steps[last_response].payload,
                              {last_response});
  final_step.meta["answer_from"] = std::to_string(last_response);
  truth.steps.push_back(std::move(final_step));
  truth.task.gold_answer = truth.steps.back().payload;

  const std::size_t fault_step = call_ids[fault_op];
  const std::string true_payload = truth.steps[fault_step].payload;
  const std::string faulty_payload = render_call(faulty_op, response_ids);
  if (faulty_payload == true_payload) return std::nullopt;

  Trace prefix = truth;
  prefix.steps.resize(fault_step + 1);
  prefix.steps.back().payload = faulty_payload;
  if (!faulty_op.base) prefix.steps.back().deps = {response_ids[faulty_op.ref_op]};
  Trace faulty = executor.continue_trace(truth, prefix);

  const auto final_payload = final_answer_of(faulty);
  if (!final_payload || final_payload->rfind("error", 0) == 0) return std::nullopt;
  if (verify(*final_payload, faulty.task, nullptr).success) return std::nullopt;
  if (!verify(*final_answer_of(truth), truth.task, nullptr).success) return std::nullopt;

  // The repair the hint describes must restore success on the faulty trace.
  Trace repaired_prefix = faulty;
  repaired_prefix.steps.resize(fault_step + 1);
  repaired_prefix.steps.back().payload = true_payload;
  const Trace repaired = executor.continue_trace(faulty, repaired_prefix);
  if (!verify(*final_answer_of(repaired), repaired.task, nullptr).success) return std::nullopt;

  // The fault must be identifiable: no single-literal edit from the mutator
  // schedule at another tool_call may also reach the gold answer.
  for (std::size_t j = 0; j < faulty.steps.size(); ++j) {
    if (j == fault_step || faulty.steps[j].type != StepType::tool_call) continue;
    for (const auto& proposal : mutate_numeric(faulty, j, kIdentifiabilityEdits)) {
      Trace edited = faulty;
      edited.steps.resize(j + 1);
      edited.steps.back().payload = proposal.payload;
      try {
        const Trace rerun = executor.continue_trace(faulty, edited);
        const auto answer = final_answer_of(rerun);
        if (answer && verify(*answer, rerun.task, nullptr).success) return std::nullopt;
      } catch (const Error&) {
      }
    }
  }

  return Attempt{std::move(faulty), FaultRecord{trace_id, fault_step, kind, true_payload}};
}

}  // namespace

std::string_view to_string(FaultKind kind) {
  for (const auto& [k, name] : kFaultNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<FaultKind> parse_fault_kind(std::string_view text) {
  for (const auto& [k, name] : kFaultNames)
    if (name == text) return k;
  return std::nullopt;
}

nlohmann::ordered_json fault_to_json(const FaultRecord& record) {
  nlohmann::ordered_json doc;
  doc["trace_id"] = record.trace_id;
  doc["injected_step"] = record.injected_step;
  doc["fault_kind"] = std::string(to_string(record.fault_kind));
  doc["true_payload"] = record.true_payload;
  return doc;
}

FaultRecord fault_from_json(const nlohmann::json& doc) {
  FaultRecord record;
  record.trace_id = doc.at("trace_id").get<std::string>();
  record.injected_step = doc.at("injected_step").get<std::size_t>();
  const auto kind_text = doc.at("fault_kind").get<std::string>();
  auto kind = parse_fault_kind(kind_text);
  if (!kind) throw ConfigError("unknown fault kind '" + kind_text + "'");
  record.fault_kind = *kind;
  record.true_payload = doc.at("true_payload").get<std::string>();
  return record;
}

std::map<FaultKind, unsigned> parse_fault_mix(std::string_view text) {
  std::map<FaultKind, unsigned> mix;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const auto item = detail::trim(text.substr(start, end - start));
    start = end + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    const auto name = detail::trim(item.substr(0, eq));
    auto kind = parse_fault_kind(name);
    if (!kind) throw ConfigError("unknown fault kind '" + std::string(name) + "'");
    unsigned weight = 1;
    if (eq != std::string_view::npos) {
      const std::string w(detail::trim(item.substr(eq + 1)));
      try {
        std::size_t pos = 0;
        const unsigned long parsed = std::stoul(w, &pos);
        if (pos != w.size()) throw std::invalid_argument(w);
        weight = static_cast<unsigned>(parsed);
      } catch (const std::exception&) {
        throw ConfigError("bad fault weight '" + w + "'");
      }
    }
    mix[*kind] = weight;
  }
  if (mix.empty()) throw ConfigError("empty fault mix");
  return mix;
}

SyntheticSuite generate_synthetic_suite(const SyntheticSpec& spec) {
  if (spec.count == 0) throw ConfigError("synthetic suite needs count >= 1");
  if (spec.min_depth < 3 || spec.max_depth < spec.min_depth) throw ConfigError("synthetic depths must be >= 3");
  Rng rng(spec.seed);
  ToolExecutor executor;
  SyntheticSuite suite;
  constexpr int kMaxAttempts = 1000;
  for (std::size_t n = 0; n < spec.count; ++n) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%04zu", n);
    std::optional<Attempt> attempt;
    for (int tries = 0; tries < kMaxAttempts && !attempt; ++tries) {
      const auto depth = static_cast<std::size_t>(
          rng.between(static_cast<long>(spec.min_depth), static_cast<long>(spec.max_depth)));
      attempt = try_generate(rng, depth, spec.mix, id, executor);
    }
    if (!attempt) throw ConfigError("the fault mix cannot be injected at the requested depths");
    suite.traces.push_back(std::move(attempt->faulty));
    suite.faults.push_back(std::move(attempt->record));
  }
  return suite;
}

void write_corpus(const std::filesystem::path& directory, const SyntheticSuite& suite) {
  std::filesystem::create_directories(directory);
  for (const auto& trace : suite.traces) {
    std::ofstream out(directory / (trace.trace_id + ".json"), std::ios::binary);
    out << serialize_trace(trace);
    if (!out) throw Error("cannot write " + (directory / (trace.trace_id + ".json")).string());
  }
  std::ofstream faults(directory / "faults.jsonl", std::ios::binary);
  for (const auto& record : suite.faults) faults << fault_to_json(record).dump() << "\n";
  if (!faults) throw Error("cannot write " + (directory / "faults.jsonl").string());
}

std::vector<FaultRecord> read_faults(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read fault records: " + path.string());
  std::vector<FaultRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!detail::trim(line).empty()) out.push_back(fault_from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace tracefix

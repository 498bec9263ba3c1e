import csv
import json
import os
import subprocess

import pytest

import tracefix

CLI = os.environ.get("TRACEFIX_CLI", "")


def calculator_trace(expression="6*13", observation="78", gold="72"):
    return {
        "trace_id": "py-calc",
        "task": {"problem_statement": "p", "gold_answer": gold, "verifier_kind": "numeric"},
        "steps": [
            {"id": 0, "type": "reasoning", "payload": "Multiply."},
            {"id": 1, "type": "tool_call", "payload": "calculator\nexpression: " + expression, "deps": [0]},
            {"id": 2, "type": "tool_response", "payload": observation, "deps": [1]},
            {"id": 3, "type": "final_answer", "payload": observation, "deps": [2],
             "meta": {"answer_from": "2"}},
        ],
    }


def test_trace_round_trip_and_validation():
    doc = calculator_trace()
    loaded = tracefix.load_trace(doc)
    assert tracefix.load_trace(tracefix.dump_trace(loaded)) == loaded
    assert tracefix.validate_trace(doc) == []
    doc["steps"][2]["id"] = 1
    assert tracefix.validate_trace(doc)
    with pytest.raises(tracefix.TraceError):
        tracefix.load_trace(doc)


def test_substitute_reexecute_verify():
    doc = calculator_trace()
    assert not tracefix.verify_trace(doc)["success"]
    prefix = tracefix.substitute_step(doc, 1, "calculator\nexpression: 6*12")
    assert len(prefix["steps"]) == 2
    fixed = tracefix.reexecute(doc, prefix)
    assert fixed["steps"][-1]["payload"] == "72"
    assert tracefix.verify_trace(fixed)["success"]


def test_scoring_finds_the_injected_step():
    traces, faults = tracefix.synthetic_suite(count=5, seed=3)
    assert [t["trace_id"] for t in traces] == ["synth-%04d" % i for i in range(5)]
    for trace, fault in zip(traces, faults):
        result = tracefix.score_trace(trace, fault["injected_step"], fault["true_payload"])
        assert result["causal_steps"] == [fault["injected_step"]]
    with pytest.raises(tracefix.PreconditionError):
        tracefix.score_trace(calculator_trace("6*12", "72"), 1, "calculator\nexpression: 6*12")


def test_formulas():
    assert tracefix.minimality_lexical("a b c", "a b d") == pytest.approx(2 / 3, abs=1e-12)
    assert tracefix.minimality_lexical("a b c d", "a b") == pytest.approx(0.375, abs=1e-12)
    assert tracefix.minimality_edit("a b c", "a x c") == pytest.approx(2 / 3)
    assert tracefix.levenshtein_tokens(list("kitten"), list("sitting")) == 3
    assert tracefix.tokenize("6 * 12 = 72") == ["6", "*", "12", "=", "72"]
    assert tracefix.consensus_score(1, "AGREE", 0.8, "DISAGREE", 0.7) == pytest.approx(0.6, abs=1e-12)
    assert tracefix.parse_critique("B", "no labels")["parse_warning"]
    assert tracefix.evaluate("2 * (3 + 4)") == "14"
    assert tracefix.extract_number("the answer is 1,234.5.") == pytest.approx(1234.5)
    with pytest.raises(tracefix.ExpressionError):
        tracefix.evaluate("1 / 0")


def test_metrics_match_reference_counts():
    assert round(100 * tracefix.repair_rate(330, 173), 1) == 52.4
    before, after, delta = tracefix.accuracy_delta(1319, 989, 173)
    assert (round(before, 3), round(after, 3), round(delta, 3)) == (0.750, 0.881, 0.131)
    low, high = tracefix.wilson_interval(20, 22)
    assert abs(100 * low - 72.2) <= 0.2 and abs(100 * high - 97.5) <= 0.2
    with pytest.raises(tracefix.ConfigError):
        tracefix.repair_rate(0, 0)


def test_pipeline_and_report(tmp_path):
    out = tmp_path / "run"
    result = tracefix.run_pipeline(output=str(out), count=12, workers=2)
    assert result["processed"] == 12
    assert result["pairs_written"] == 12
    summary = result["summaries"][0]
    assert summary["repaired"] == 12
    again = tracefix.run_pipeline(output=str(out), count=12, workers=2)
    assert again["processed"] == 0 and again["resumed"] == 12
    csv_text = (out / "summary.csv").read_text()
    rendered_csv, markdown = tracefix.render_report(csv_text)
    assert rendered_csv == csv_text
    assert "| causal_repair | 12 |" in markdown


def run_cli(*args, cwd=None):
    return subprocess.run([CLI, *args], cwd=cwd, capture_output=True, text=True, timeout=120)


needs_cli = pytest.mark.skipif(not CLI, reason="command-line tool not built")


@needs_cli
def test_cli_repair_and_report(tmp_path):
    proc = run_cli("repair", "--output", str(tmp_path / "r"), "--count", "10", "--workers", "2")
    assert proc.returncode == 0, proc.stderr
    rows = list(csv.DictReader(open(tmp_path / "r" / "summary.csv")))
    assert rows[0]["method"] == "causal_repair" and rows[0]["repaired"] == "10"
    pairs = [json.loads(line) for line in open(tmp_path / "r" / "pairs.jsonl")]
    assert len(pairs) == 10
    report = run_cli("report", str(tmp_path / "r"))
    assert report.returncode == 0 and "causal_repair" in report.stdout


@needs_cli
def test_cli_exit_codes(tmp_path):
    assert run_cli("repair", "--no-such-flag").returncode == 1
    assert run_cli("--help").returncode == 0
    assert run_cli("repair", "--config", str(tmp_path / "missing.ini")).returncode == 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nunknown_key = 1\n")
    assert run_cli("repair", "--config", str(bad), "--output", str(tmp_path / "x")).returncode == 3

    corpus = tmp_path / "corpus"
    assert run_cli("synth", "--output", str(corpus), "--count", "3").returncode == 0
    assert run_cli("validate", str(corpus)).returncode == 0
    (corpus / "broken.json").write_text("{\"trace_id\": ")
    assert run_cli("validate", str(corpus)).returncode == 2

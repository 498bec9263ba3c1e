"""Causal attribution and counterfactual repair for agent execution traces.

Trace documents are exchanged as JSON text; the helpers below accept and
return dicts as well.
"""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    ExpressionError,
    PreconditionError,
    TraceError,
    accuracy_delta,
    consensus_score,
    evaluate,
    extract_number,
    levenshtein_tokens,
    minimality_edit,
    minimality_lexical,
    parse_critique,
    render_report,
    repair_rate,
    run_pipeline,
    tokenize,
    wilson_interval,
)

__all__ = [
    "ConfigError", "ExpressionError", "PreconditionError", "TraceError",
    "accuracy_delta", "consensus_score", "evaluate", "extract_number",
    "levenshtein_tokens", "minimality_edit", "minimality_lexical",
    "parse_critique", "render_report", "repair_rate", "run_pipeline",
    "tokenize", "wilson_interval",
    "load_trace", "dump_trace", "validate_trace", "substitute_step",
    "reexecute", "verify_trace", "score_trace", "synthetic_suite",
]


def _text(trace):
    return trace if isinstance(trace, str) else _json.dumps(trace)


def load_trace(document):
    """Parse and validate a trace; returns its canonical dict form."""
    return _json.loads(_core.canonicalize_trace(_text(document)))


def dump_trace(trace):
    return _core.canonicalize_trace(_text(trace))


def validate_trace(trace):
    return _core.validate_trace(_text(trace))


def substitute_step(trace, index, payload):
    return _json.loads(_core.substitute_step(_text(trace), index, payload))


def reexecute(original, prefix):
    return _json.loads(_core.reexecute(_text(original), _text(prefix)))


def verify_trace(trace):
    return _core.verify_trace(_text(trace))


def score_trace(trace, injected_step, true_payload, k=3, early_break=True):
    return _core.score_trace(_text(trace), injected_step, true_payload, k, early_break)


def synthetic_suite(count=200, min_depth=5, max_depth=9, seed=7):
    """Returns (traces, faults) as lists of dicts."""
    traces, faults = _core.generate_synthetic_suite(count, min_depth, max_depth, seed)
    return [_json.loads(t) for t in traces], [_json.loads(f) for f in faults]

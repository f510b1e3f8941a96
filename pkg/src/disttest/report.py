"""Tester reports and their JSON schema."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_ID = "disttest/1"

STAGES = (
    "variance-bound",
    "support-check",
    "poisson-overflow",
    "no-samples",
    "norm-check",
    "sparsity-check",
    "projection",
    "moment-infeasible",
    "geometry",
    "mle-failure",
    "mle-variance",
    "final-statistic",
)

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "disttest report",
    "type": "object",
    "required": ["schema", "tester", "verdict", "stage", "samples", "seed", "stats", "ledger", "rng"],
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "tester": {"type": "string"},
        "verdict": {"enum": ["accept", "reject"]},
        "stage": {"enum": [None, *STAGES]},
        "samples": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "params": {"type": "object"},
        "stats": {"type": "object"},
        "hypothesis": {"type": ["object", "null"]},
        "ledger": {"type": "object"},
        "rng": {"type": "object"},
        "timings_ms": {"type": "object"},
    },
    "allOf": [
        {
            "if": {"properties": {"verdict": {"const": "accept"}}},
            "then": {"properties": {"stage": {"const": None}}},
            "else": {"properties": {"stage": {"enum": list(STAGES)}}},
        }
    ],
    "additionalProperties": False,
}


def _clean(obj):
    """Plain JSON types; non-finite floats become strings so that ``allow_nan`` stays off."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


@dataclass
class TestReport:
    """Outcome of one tester invocation."""

    __test__ = False

    tester: str
    verdict: str
    stage: str | None
    samples: int
    seed: int
    params: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    hypothesis: dict | None = None
    ledger: dict = field(default_factory=dict)
    rng: dict = field(default_factory=dict)
    timings_ms: dict | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_dict(self, include_timings: bool = False) -> dict:
        d = {
            "schema": SCHEMA_ID,
            "tester": self.tester,
            "verdict": self.verdict,
            "stage": self.stage,
            "samples": int(self.samples),
            "seed": int(self.seed),
            "params": self.params,
            "stats": self.stats,
            "hypothesis": self.hypothesis,
            "ledger": self.ledger,
            "rng": self.rng,
        }
        if include_timings and self.timings_ms is not None:
            d["timings_ms"] = self.timings_ms
        return _clean(d)

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), sort_keys=True, indent=1, allow_nan=False)


def validate_report(data: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``data`` is not a valid report."""
    import jsonschema

    jsonschema.validate(data, REPORT_SCHEMA)


def make_report(tester, stage, samples, streams, ledger, params, stats, hypothesis=None) -> TestReport:
    return TestReport(
        tester=tester,
        verdict="accept" if stage is None else "reject",
        stage=stage,
        samples=int(samples),
        seed=streams.seed,
        params=params,
        stats=stats,
        hypothesis=hypothesis if stage is None else None,
        ledger=ledger.to_dict(),
        rng=streams.split_map(),
    )

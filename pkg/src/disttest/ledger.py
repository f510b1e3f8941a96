"""Pinned universal constants.

Every tester reads its constants from a :class:`Ledger`, and every report
carries a snapshot of the ledger it ran with.  ``DISTTEST_LEDGER`` may point
to a JSON file whose keys override the defaults.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError

ENV_VAR = "DISTTEST_LEDGER"


@dataclass(frozen=True)
class Ledger:
    # tolerant L2 identity tester
    l2_c: float = 61.0
    # Fourier effective-support tests (1-D and lattice)
    fourier_C: float = 2000.0
    # sparse frequency set: radius multiplier and delta denominator
    siirv_C1: float = 2.0
    siirv_C2: float = 10.0
    # empirical learning in the small-variance branch: N = C_emp |S| / eps^2
    emp_C: float = 20000.0
    # effective-support check: m = ceil(c_sup / eps)
    c_sup: float = 2400.0
    moment_samples_per_k: int = 800
    # projection
    cover_budget: int = 4000
    polish_types: int = 3
    polish_restarts: int = 3
    pbd_fit_C: float = 40.0
    # PMD
    pmd_c0: float = 50.0
    pmd_C: float = 4.0
    pmd_support_c: float = 10.0
    pmd_support_count_based: bool = False
    # log-concave
    lc_moment_samples: int = 200
    lc_M_C: float = 3.0
    lc_S_C: float = 1.0
    lc_mle_c: float = 10.0
    lc_final_C: float = 100.0
    lc_tail_theta: float = 10.132118364233778  # 100 / pi^2
    # framework demo plugin
    demo_accept_frac: float = 0.45

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, overrides: dict) -> "Ledger":
        known = {f.name: f.type for f in fields(self)}
        bad = sorted(set(overrides) - set(known))
        if bad:
            raise ConfigError(f"unknown ledger keys: {', '.join(bad)}")
        clean = {}
        for key, value in overrides.items():
            current = getattr(self, key)
            if isinstance(current, bool):
                if not isinstance(value, bool):
                    raise ConfigError(f"ledger key {key} expects a boolean")
                clean[key] = value
            elif isinstance(current, int):
                if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                    raise ConfigError(f"ledger key {key} expects a positive integer")
                clean[key] = value
            else:
                if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                    raise ConfigError(f"ledger key {key} expects a positive number")
                clean[key] = float(value)
        return replace(self, **clean)


def load_ledger(path: str | None = None) -> Ledger:
    """Default ledger, overridden by ``path`` or the environment variable."""
    path = path or os.environ.get(ENV_VAR)
    base = Ledger()
    if not path:
        return base
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read ledger overrides from {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("ledger override file must hold a JSON object")
    return base.with_overrides(data)

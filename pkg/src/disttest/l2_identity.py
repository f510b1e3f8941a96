"""Tolerant L2 identity testing under Poissonized sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist_core import Pmf, poisson_draw, window_counts
from .errors import DomainError
from .ledger import Ledger


@dataclass(frozen=True)
class L2Statistic:
    """``Z = sum_i (X_i - m P*(i))^2 - X_i``; unbiased for ``m^2 ||P - P*||^2``."""

    Z: float
    m: int
    m_prime: int
    counts: np.ndarray


def compute_statistic(counts, m: int, pstar: Pmf, outside_counts=()) -> L2Statistic:
    """Statistic from counts aligned with ``pstar``'s window.

    ``outside_counts`` holds counts of symbols where ``pstar`` is zero and
    that lie outside its window.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != pstar.weights.shape:
        raise DomainError("counts and pstar are not aligned on one window")
    mp = m * pstar.weights
    z = float(np.sum((counts - mp) ** 2 - counts))
    oc = np.asarray(outside_counts, dtype=np.int64)
    z += float(np.sum(oc * oc - oc))
    return L2Statistic(z, int(m), int(counts.sum() + oc.sum()), counts)


def rejects(stat: L2Statistic, eps: float) -> bool:
    # sqrt(Z)/m > sqrt(3) eps, written without the square root
    return stat.Z > 3.0 * stat.m**2 * eps**2


def tolerant_l2_test(sampler, pstar: Pmf, eps: float, b: float, rng, ledger: Ledger | None = None):
    """Accept when ``||P-P*|| <= eps``, reject when ``||P-P*|| >= 2 eps`` (each w.p. 3/4).

    Returns ``(verdict, statistic)`` with verdict ``"accept"`` or ``"reject"``.
    """
    if b <= 0:
        raise DomainError("b must be positive")
    if eps <= 0:
        raise DomainError("eps must be positive")
    ledger = ledger or Ledger()
    m = math.ceil(ledger.l2_c * math.sqrt(b) / eps**2)
    mp = poisson_draw(m, rng)
    counts, _, oc = window_counts(sampler, rng, mp, pstar.lo, pstar.hi)
    stat = compute_statistic(counts, m, pstar, oc)
    return ("reject" if rejects(stat, eps) else "accept"), stat


def strong_thresholds(stat: L2Statistic, eps: float) -> tuple[bool, bool]:
    scale = stat.m**2 * eps**2
    return stat.Z <= 2.9 * scale, stat.Z >= 3.1 * scale

"""Testing that a distribution's DFT mass concentrates on a prescribed set."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dft import (
    DualSet,
    FourierCoeffs,
    LatticeBasis,
    LatticeFourierCoeffs,
    conj_symmetric,
    dft_1d,
    fundamental_reduce,
    inverse_dft_1d,
    lattice_dft,
)
from .dist_core import MultiPmf, Pmf, exact_law, modular_counts, poisson_draw
from .errors import DomainError
from .ledger import Ledger


@dataclass(frozen=True)
class SparsityOutcome:
    """``stage`` is ``None`` when coefficients were returned."""

    stage: str | None
    coeffs: FourierCoeffs | LatticeFourierCoeffs | None
    stats: dict = field(default_factory=dict)

    @property
    def rejected(self) -> bool:
        return self.stage is not None


def sample_budget_1d(M: int, n_freqs: int, eps: float, b: float, C: float) -> int:
    return math.ceil(C * (math.sqrt(b) / eps**2 + n_freqs / (M * eps**2) + math.sqrt(M)))


def sample_budget_lattice(det: int, eps: float, b: float, C: float) -> int:
    return math.ceil(C * (math.sqrt(b) / eps**2 + math.sqrt(det)))


def test_fourier_support_1d(
    sampler,
    M: int,
    S,
    eps: float,
    b: float,
    rng,
    anchor: int | None = None,
    ledger: Ledger | None = None,
) -> SparsityOutcome:
    """One run of the 1-D Fourier effective-support test.

    With ``anchor=None`` the sampler must emit values in ``[0, M-1]``;
    otherwise draws are reduced modulo ``M`` onto ``[anchor, anchor+M-1]``.
    ``b`` may exceed 1 (callers pass L2 bounds of the form ``16k/sigma``).
    """
    ledger = ledger or Ledger()
    S = np.unique(np.asarray(list(S), dtype=np.int64))
    if S.size == 0 or S[0] != 0:
        raise DomainError("S must contain 0")
    if np.any((S < 0) | (S >= M)):
        raise DomainError("S must lie in [M]")
    if not conj_symmetric(S, M):
        raise DomainError("S must be conjugate-symmetric")
    if eps <= 0 or b <= 0:
        raise DomainError("eps and b must be positive")
    if anchor is None:
        law = exact_law(sampler)
        if isinstance(law, Pmf) and (law.lo < 0 or law.hi >= M):
            raise DomainError("sampler emits values outside [M]")
    m = sample_budget_1d(M, S.size, eps, b, ledger.fourier_C)
    mp = poisson_draw(m, rng)
    stats = {"m": m, "m_prime": mp, "M": M, "S_size": int(S.size), "b": b, "eps": eps}
    if mp > 2 * m:
        return SparsityOutcome("poisson-overflow", None, stats)
    if mp == 0:
        return SparsityOutcome("no-samples", None, stats)
    if anchor is None:
        counts = _checked_counts(sampler, rng, mp, M)
        anchor = 0
    else:
        counts = modular_counts(sampler, rng, mp, M, anchor)
    return _decide_1d(counts, m, M, S, eps, b, anchor, stats)


def _checked_counts(sampler, rng, size, M):
    law = exact_law(sampler)
    if isinstance(law, Pmf):
        return modular_counts(sampler, rng, size, M, 0)
    x = np.asarray(sampler.draw_many(rng, size), dtype=np.int64)
    if x.size and (x.min() < 0 or x.max() >= M):
        raise DomainError("sampler emits values outside [M]")
    return np.bincount(x, minlength=M)


def _decide_1d(counts, m, M, S, eps, b, anchor, stats) -> SparsityOutcome:
    counts = np.asarray(counts, dtype=np.int64)
    mp = int(counts.sum())
    sq = float(np.sum(counts.astype(float) ** 2))
    l2_emp = sq / mp**2
    coeffs = dft_1d(Pmf(anchor, counts / mp, normalized=False), M, S)
    in_s = coeffs.energy()
    norm_lhs = sq - mp
    norm_thr = 1.5 * b * m**2
    sp_lhs = l2_emp - in_s / M
    sp_thr = 3 * eps**2 * (mp / m) ** 2 + 1 / mp
    stats.update(
        l2_emp=l2_emp,
        inS_energy=in_s,
        norm_lhs=norm_lhs,
        norm_threshold=norm_thr,
        sparsity_lhs=sp_lhs,
        sparsity_threshold=sp_thr,
        anchor=int(anchor),
    )
    if norm_lhs > norm_thr:
        return SparsityOutcome("norm-check", None, stats)
    if sp_lhs >= sp_thr:
        return SparsityOutcome("sparsity-check", None, stats)
    return SparsityOutcome(None, coeffs, stats)


def decide_from_counts_1d(counts, m, M, S, eps, b, anchor=0) -> SparsityOutcome:
    """The decision rule on given counts; exposed for threshold tests."""
    S = np.unique(np.asarray(list(S), dtype=np.int64))
    stats = {"m": m, "m_prime": int(np.sum(counts)), "M": M, "S_size": int(S.size), "b": b, "eps": eps}
    return _decide_1d(counts, m, M, S, eps, b, anchor, stats)


def lattice_counts(sampler, rng, size: int, basis: LatticeBasis, center) -> tuple[np.ndarray, np.ndarray]:
    """Draws reduced into ``center + M(-1/2,1/2]^k``; returns ``(points, counts)``."""
    law = exact_law(sampler)
    if isinstance(law, MultiPmf):
        red = fundamental_reduce(law.points, basis, center)
        pts, inv = np.unique(red, axis=0, return_inverse=True)
        probs = np.bincount(inv.ravel(), weights=law.probs)
        counts = rng.multinomial(int(size), probs / probs.sum())
        return pts, counts.astype(np.int64)
    x = np.asarray(sampler.draw_many(rng, int(size)), dtype=np.int64)
    red = fundamental_reduce(x, basis, center)
    pts, counts = np.unique(red, axis=0, return_counts=True)
    return pts, counts.astype(np.int64)


def test_fourier_support_lattice(
    sampler,
    basis: LatticeBasis,
    S: DualSet,
    eps: float,
    b: float,
    rng,
    center=None,
    ledger: Ledger | None = None,
) -> SparsityOutcome:
    """Lattice version; the fundamental domain has ``|det M|`` points.

    The second threshold compares ``||Q'||^2 - ||Q'_hat 1_S||^2 / det``
    with ``3 eps^2 + 1/m'``.
    """
    ledger = ledger or Ledger()
    k = basis.k
    center = np.zeros(k) if center is None else np.asarray(center, dtype=float)
    if not np.any(np.all(S.keys == 0, axis=1)):
        raise DomainError("S must contain 0")
    if eps <= 0 or b <= 0:
        raise DomainError("eps and b must be positive")
    D = basis.abs_det
    m = sample_budget_lattice(D, eps, b, ledger.fourier_C)
    mp = poisson_draw(m, rng)
    stats = {"m": m, "m_prime": mp, "det": D, "S_size": len(S), "b": b, "eps": eps}
    if mp > 2 * m:
        return SparsityOutcome("poisson-overflow", None, stats)
    if mp == 0:
        return SparsityOutcome("no-samples", None, stats)
    pts, counts = lattice_counts(sampler, rng, mp, basis, center)
    return decide_from_counts_lattice(pts, counts, m, S, eps, b, stats)


def decide_from_counts_lattice(pts, counts, m, S: DualSet, eps, b, stats=None) -> SparsityOutcome:
    counts = np.asarray(counts, dtype=np.int64)
    mp = int(counts.sum())
    D = S.basis.abs_det
    stats = dict(stats or {"m": m, "m_prime": mp, "det": D, "S_size": len(S), "b": b, "eps": eps})
    sq = float(np.sum(counts.astype(float) ** 2))
    l2_emp = sq / mp**2
    coeffs = lattice_dft(pts, counts / mp, S)
    in_s = coeffs.energy()
    norm_lhs = sq - mp
    norm_thr = 1.5 * b * m**2
    sp_lhs = l2_emp - in_s / D
    sp_thr = 3 * eps**2 + 1 / mp
    stats.update(
        l2_emp=l2_emp,
        inS_energy=in_s,
        norm_lhs=norm_lhs,
        norm_threshold=norm_thr,
        sparsity_lhs=sp_lhs,
        sparsity_threshold=sp_thr,
    )
    if norm_lhs > norm_thr:
        return SparsityOutcome("norm-check", None, stats)
    if sp_lhs >= sp_thr:
        return SparsityOutcome("sparsity-check", None, stats)
    return SparsityOutcome(None, coeffs, stats)


@dataclass(frozen=True)
class PlancherelSplit:
    learn_err: float
    outside_energy: float
    residual: float


def plancherel_decomposition(q_emp: Pmf, S, M: int, q_exact: Pmf | None = None) -> PlancherelSplit:
    """Split ``||Q' - H||^2`` into a learning term and the out-of-S energy of ``Q'``.

    ``H`` is the inverse DFT of ``Q_hat 1_S``.  Without ``q_exact`` only the
    out-of-S energy is available and the other fields are NaN.
    """
    S = np.unique(np.asarray(list(S), dtype=np.int64) % M)
    qh = dft_1d(q_emp, M, S)
    outside = float(np.sum(q_emp.weights**2)) - qh.energy() / M
    if q_exact is None:
        return PlancherelSplit(math.nan, outside, math.nan)
    ex = dft_1d(q_exact, M, S)
    learn = float(np.sum(np.abs(ex.values - qh.values) ** 2)) / M
    H = inverse_dft_1d(ex, q_emp.lo).pmf
    lhs = float(np.sum((q_emp.on_window(q_emp.lo, q_emp.lo + M - 1) - H.weights) ** 2))
    return PlancherelSplit(learn, outside, abs(lhs - (learn + outside)))


test_fourier_support_1d.__test__ = False
test_fourier_support_lattice.__test__ = False

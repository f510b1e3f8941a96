"""Discrete Fourier transforms modulo an integer and modulo an integer lattice.

Convention: ``F_hat(xi) = sum_j e(xi * j / M) F(j)`` with ``e(x) = exp(-2 i pi x)``.
Phases are computed from exact integer products reduced modulo ``M`` (or
``det``) so that large arguments never lose precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dist_core import MultiPmf, Pmf
from .errors import DegenerateGeometryError, DomainError, ResourceError

KAHAN_THRESHOLD = 10**5
_CHUNK = 2**22


@dataclass(frozen=True)
class FourierCoeffs:
    """Sparse DFT: ``values[i]`` is the coefficient at frequency ``freqs[i]``."""

    modulus: int
    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=np.int64) % int(self.modulus)
        order = np.argsort(f, kind="stable")
        f = f[order]
        if f.size and np.any(np.diff(f) == 0):
            raise DomainError("duplicate frequencies")
        v = np.asarray(self.values, dtype=complex)[order]
        f.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "modulus", int(self.modulus))
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", v)

    @property
    def entries(self) -> dict:
        return {int(f): complex(v) for f, v in zip(self.freqs, self.values)}

    def get(self, xi: int, default: complex = 0.0) -> complex:
        i = np.searchsorted(self.freqs, int(xi) % self.modulus)
        if i < self.freqs.size and self.freqs[i] == int(xi) % self.modulus:
            return complex(self.values[i])
        return default

    def on(self, freqs) -> np.ndarray:
        """Values at ``freqs`` (0 where absent)."""
        f = np.asarray(freqs, dtype=np.int64) % self.modulus
        out = np.zeros(f.size, dtype=complex)
        if self.freqs.size:
            i = np.clip(np.searchsorted(self.freqs, f), 0, self.freqs.size - 1)
            ok = self.freqs[i] == f
            out[ok] = self.values[i[ok]]
        return out

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


def _phase(num: np.ndarray, den: int) -> np.ndarray:
    return np.exp(-2j * np.pi * (num % den) / den)


def _sum_rows(terms: np.ndarray) -> np.ndarray:
    """Row sums; exactly rounded (fsum) for very long rows."""
    if terms.shape[1] <= KAHAN_THRESHOLD:
        return terms.sum(axis=1)
    return np.array([complex(math.fsum(r.real), math.fsum(r.imag)) for r in terms])


def dft_1d(p: Pmf, M: int, S=None) -> FourierCoeffs:
    """DFT of ``p`` modulo ``M`` at the frequencies ``S`` (default: all of [M])."""
    if M < 1:
        raise DomainError("modulus must be positive")
    freqs = np.arange(M) if S is None else np.unique(np.asarray(list(S), dtype=np.int64) % M)
    x = p.support.astype(np.int64)
    w = p.weights
    nz = w != 0
    x, w = x[nz], w[nz]
    out = np.empty(freqs.size, dtype=complex)
    step = max(1, _CHUNK // max(x.size, 1))
    for s in range(0, freqs.size, step):
        f = freqs[s : s + step]
        terms = _phase(np.outer(f, x % M), M) * w
        out[s : s + step] = _sum_rows(terms)
    return FourierCoeffs(M, freqs, out)


def dft_counts(counts: np.ndarray, anchor: int, M: int, S) -> FourierCoeffs:
    """DFT of a count vector on ``[anchor, anchor+M-1]`` divided by its total."""
    counts = np.asarray(counts)
    total = counts.sum()
    if total == 0:
        raise DomainError("no samples")
    w = counts / total
    return dft_1d(Pmf(anchor, w, normalized=False), M, S)


class Inversion(NamedTuple):
    pmf: Pmf
    imag_residue: float
    flagged: bool


def inverse_dft_1d(c: FourierCoeffs, window_start: int) -> Inversion:
    """Inverse DFT onto ``[window_start, window_start + M - 1]``; absent entries are 0."""
    M = c.modulus
    j = np.arange(window_start, window_start + M, dtype=np.int64)
    # e(-xi j / M) = exp(+2 i pi xi j / M)
    phase = np.exp(2j * np.pi * (np.outer(j % M, c.freqs) % M) / M)
    vals = phase @ c.values / M
    resid = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    return Inversion(Pmf(window_start, vals.real, normalized=False), resid, resid >= 1e-6)


def plancherel_residual(p: Pmf, M: int) -> float:
    if p.weights.size > M:
        raise DomainError("window longer than the modulus")
    c = dft_1d(p, M)
    return abs(float(np.sum(p.weights**2)) - c.energy() / M)


def conj_symmetric(freqs, M: int) -> bool:
    f = set(int(x) % M for x in freqs)
    return all((-x) % M in f for x in f)


def dft_piecewise_exponential(pieces, M: int, S) -> FourierCoeffs:
    """DFT of ``j -> exp(alpha + beta j)`` summed over pieces ``((a, b), (alpha, beta))``.

    Each piece is a geometric series with ratio ``r = e^beta e(xi/M)``.
    """
    freqs = np.unique(np.asarray(list(S), dtype=np.int64) % M)
    out = np.zeros(freqs.size, dtype=complex)
    for (a, b), (alpha, beta) in pieces:
        a, b = int(a), int(b)
        L = b - a + 1
        if L <= 0:
            continue
        head = np.exp(alpha + beta * a) * _phase(freqs * (a % M), M)
        r = np.exp(beta) * _phase(freqs, M)
        rL = np.exp(beta * L) * _phase(freqs * (L % M), M)
        denom = 1 - r
        close = np.abs(denom) < 1e-8
        safe = np.where(close, 1.0, denom)
        geo = (1 - rL) / safe
        if np.any(close):
            jj = np.arange(L)
            for i in np.flatnonzero(close):
                geo[i] = np.sum(np.exp(beta * jj) * _phase(freqs[i] * jj, M))
        out += head * geo
    return FourierCoeffs(M, freqs, out)


# ---------------------------------------------------------------- lattices


def _int_det(A: list[list[int]]) -> int:
    """Bareiss fraction-free determinant on Python integers."""
    a = [row[:] for row in A]
    n = len(a)
    sign, prev = 1, 1
    for i in range(n - 1):
        if a[i][i] == 0:
            for r in range(i + 1, n):
                if a[r][i] != 0:
                    a[i], a[r] = a[r], a[i]
                    sign = -sign
                    break
            else:
                return 0
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                a[r][c] = (a[r][c] * a[i][i] - a[r][i] * a[i][c]) // prev
        prev = a[i][i]
    return sign * a[n - 1][n - 1]


def _int_adj(A: list[list[int]]) -> list[list[int]]:
    n = len(A)
    if n == 1:
        return [[1]]
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1 :] for r, row in enumerate(A) if r != i]
            adj[j][i] = (-1) ** (i + j) * _int_det(minor)
    return adj


@dataclass(frozen=True)
class LatticeBasis:
    """Integer basis ``M`` (columns) of the lattice ``M Z^k``."""

    M: np.ndarray

    def __post_init__(self):
        m = np.array(np.atleast_2d(self.M), dtype=np.int64)
        if m.shape[0] != m.shape[1]:
            raise DomainError("basis must be square")
        rows = [[int(v) for v in r] for r in m]
        det = _int_det(rows)
        if det == 0:
            raise DegenerateGeometryError("singular lattice basis")
        adj = np.array(_int_adj(rows), dtype=np.int64)
        m.flags.writeable = False
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "det", int(det))
        object.__setattr__(self, "adj", adj)
        object.__setattr__(self, "M_inv", adj / det)

    @property
    def k(self) -> int:
        return self.M.shape[0]

    @property
    def abs_det(self) -> int:
        return abs(self.det)

    def dual_key(self, v) -> np.ndarray:
        """Integer ``w`` with ``(M^T)^{-1} v = w / |det| (mod 1)``."""
        v = np.atleast_2d(np.asarray(v, dtype=np.int64))
        sgn = 1 if self.det > 0 else -1
        # (M^T)^{-1} = adj(M)^T / det
        return (sgn * v @ self.adj) % self.abs_det


def fundamental_reduce(x, basis: LatticeBasis, center) -> np.ndarray:
    """Representative of ``x`` modulo the lattice in ``center + M(-1/2, 1/2]^k``.

    Works on a single vector or on an array of row vectors.
    """
    x = np.asarray(x, dtype=np.int64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    c = np.asarray(center, dtype=float)
    t = (X - c) @ basis.M_inv.T
    # exact numerators when the centre is integral
    if np.allclose(c, np.round(c)):
        num = (X - np.round(c).astype(np.int64)) @ basis.adj.T
        b = np.floor_divide(
            basis.abs_det - 2 * np.sign(basis.det) * num, 2 * basis.abs_det
        )
    else:
        b = np.floor(0.5 - t).astype(np.int64)
    out = X + b @ basis.M.T
    return out[0] if single else out


def fundamental_domain(basis: LatticeBasis, center) -> np.ndarray:
    """All integer points of ``center + M(-1/2, 1/2]^k``; exactly ``|det|`` of them."""
    k = basis.k
    c = np.asarray(center, dtype=float)
    half = 0.5 * np.abs(basis.M).sum(axis=1)
    lo = np.floor(c - half).astype(int) - 1
    hi = np.ceil(c + half).astype(int) + 1
    vol = int(np.prod(hi - lo + 1))
    if vol > 5 * 10**7:
        raise ResourceError("fundamental domain bounding box too large")
    grids = np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    red = fundamental_reduce(pts, basis, c)
    keep = np.all(red == pts, axis=1)
    dom = pts[keep]
    if dom.shape[0] != basis.abs_det:
        raise DegenerateGeometryError("fundamental domain enumeration mismatch")
    return dom


@dataclass(frozen=True)
class DualSet:
    """Points of ``L* / Z^k``: representatives ``vs`` and their exact keys."""

    basis: LatticeBasis
    vs: np.ndarray
    keys: np.ndarray

    def __len__(self) -> int:
        return self.vs.shape[0]


def _dedup(basis: LatticeBasis, vs: np.ndarray) -> DualSet:
    keys = basis.dual_key(vs)
    norms = (vs.astype(float) ** 2).sum(axis=1)
    order = np.lexsort(tuple(vs.T[::-1]) + (norms,))
    vs, keys = vs[order], keys[order]
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    return DualSet(basis, vs[first], keys[first])


def lattice_dual_ball(basis: LatticeBasis, radius: float, max_points: int = 5 * 10**6) -> DualSet:
    """Integer vectors with norm at most ``radius``, deduplicated mod ``M^T Z^k``."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    k = basis.k
    R = int(math.floor(radius + 1e-12))
    # when the ball contains a whole centred cell of M^T Z^k every class is hit
    cell_radius = 0.5 * np.linalg.norm(basis.M.T.astype(float), axis=0).sum()
    if radius >= cell_radius:
        Mt = LatticeBasis(basis.M.T.copy())
        reps = fundamental_domain(Mt, np.zeros(k))
        return _dedup(basis, reps)
    count = (2 * R + 1) ** k
    if count > max_points:
        raise ResourceError(f"dual ball enumeration of {count} points exceeds budget")
    axes = [np.arange(-R, R + 1)] * k
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    grid = grid[(grid.astype(float) ** 2).sum(axis=1) <= radius**2 + 1e-9]
    return _dedup(basis, grid)


@dataclass(frozen=True)
class LatticeFourierCoeffs:
    dual: DualSet
    values: np.ndarray

    @property
    def basis(self) -> LatticeBasis:
        return self.dual.basis

    @property
    def entries(self) -> dict:
        return {tuple(int(a) for a in v): complex(c) for v, c in zip(self.dual.vs, self.values)}

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


def lattice_dft(points: np.ndarray, weights: np.ndarray, dual: DualSet) -> LatticeFourierCoeffs:
    """``sum_x e(xi . x) w(x)`` for each dual point of ``dual``."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
    w = np.asarray(weights, dtype=float)
    D = dual.basis.abs_det
    keys = dual.keys
    out = np.empty(keys.shape[0], dtype=complex)
    step = max(1, _CHUNK // max(pts.shape[0], 1))
    for s in range(0, keys.shape[0], step):
        num = keys[s : s + step] @ (pts % D).T
        out[s : s + step] = _sum_rows(_phase(num, D) * w)
    return LatticeFourierCoeffs(dual, out)


def lattice_dft_pmf(p: MultiPmf, dual: DualSet) -> LatticeFourierCoeffs:
    return lattice_dft(p.points, p.probs, dual)


def full_dual(basis: LatticeBasis) -> DualSet:
    """Every element of ``L* / Z^k`` (``|det|`` of them)."""
    Mt = LatticeBasis(basis.M.T.copy())
    return _dedup(basis, fundamental_domain(Mt, np.zeros(basis.k)))


def ball_size_bound(radius: float, k: int) -> int:
    return (1 + 2 * int(math.floor(radius))) ** k


__all__ = [
    "FourierCoeffs",
    "Inversion",
    "LatticeBasis",
    "LatticeFourierCoeffs",
    "DualSet",
    "dft_1d",
    "dft_counts",
    "inverse_dft_1d",
    "plancherel_residual",
    "conj_symmetric",
    "dft_piecewise_exponential",
    "fundamental_reduce",
    "fundamental_domain",
    "lattice_dual_ball",
    "lattice_dft",
    "lattice_dft_pmf",
    "full_dual",
    "ball_size_bound",
]

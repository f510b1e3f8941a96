"""Exact and sampled representations of the distribution families."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.stats import binom

from .errors import DomainError, ResourceError

CONVOLVE_GUARD = 10**7
PMD_SUPPORT_GUARD = 10**7


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Pmf:
    """Dense mass function on the window ``[offset, offset + len(weights) - 1]``.

    With ``normalized=False`` the weights may be negative or fail to sum to
    one (pseudo-distributions).
    """

    offset: int
    weights: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        w = _frozen(np.atleast_1d(self.weights))
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        if self.normalized:
            if np.any(w < -1e-15):
                raise DomainError("normalized pmf has a negative weight")
            if abs(w.sum() - 1.0) > 1e-9:
                raise DomainError(f"weights sum to {w.sum()!r}, not 1")
            w = _frozen(np.clip(w, 0.0, None))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + self.weights.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def at(self, x: int) -> float:
        i = int(x) - self.offset
        return float(self.weights[i]) if 0 <= i < self.weights.size else 0.0

    def on_window(self, lo: int, hi: int) -> np.ndarray:
        """Weights re-indexed onto ``[lo, hi]`` (zeros where undefined)."""
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo : b - lo + 1] = self.weights[a - self.lo : b - self.lo + 1]
        return out

    def trimmed(self, tol: float = 0.0) -> "Pmf":
        nz = np.flatnonzero(np.abs(self.weights) > tol)
        if nz.size == 0:
            return self
        return Pmf(self.offset + nz[0], self.weights[nz[0] : nz[-1] + 1], self.normalized)


@dataclass(frozen=True)
class SiirvSpec:
    """Sum of ``n`` independent variables, each a pmf on ``{0..k-1}``."""

    summands: np.ndarray

    def __post_init__(self):
        s = _frozen(np.atleast_2d(self.summands))
        n, k = s.shape
        if n < 1 or k < 2:
            raise DomainError("SIIRV needs n >= 1 summands and k >= 2")
        if np.any(s < 0) or np.any(np.abs(s.sum(axis=1) - 1) > 1e-12):
            raise DomainError("each summand must be a pmf on {0..k-1}")
        object.__setattr__(self, "summands", s)

    @property
    def n(self) -> int:
        return self.summands.shape[0]

    @property
    def k(self) -> int:
        return self.summands.shape[1]

    @classmethod
    def bernoulli(cls, ps) -> "SiirvSpec":
        ps = np.asarray(ps, dtype=float)
        return cls(np.column_stack([1 - ps, ps]))

    @classmethod
    def binomial(cls, n: int, p: float) -> "SiirvSpec":
        return cls.bernoulli(np.full(n, p))

    @classmethod
    def iid(cls, n: int, summand) -> "SiirvSpec":
        return cls(np.tile(np.asarray(summand, dtype=float), (n, 1)))

    def mean_var(self) -> tuple[float, float]:
        vals = np.arange(self.k)
        mu = self.summands @ vals
        var = self.summands @ vals**2 - mu**2
        return float(mu.sum()), float(var.sum())


@dataclass(frozen=True)
class PmdSpec:
    """Sum of ``n`` independent random standard basis vectors of R^k."""

    summands: np.ndarray

    def __post_init__(self):
        s = _frozen(np.atleast_2d(self.summands))
        n, k = s.shape
        if n < 1 or k < 2:
            raise DomainError("PMD needs n >= 1 summands and k >= 2")
        if np.any(s < 0) or np.any(np.abs(s.sum(axis=1) - 1) > 1e-12):
            raise DomainError("each summand must be a probability vector")
        object.__setattr__(self, "summands", s)

    @property
    def n(self) -> int:
        return self.summands.shape[0]

    @property
    def k(self) -> int:
        return self.summands.shape[1]

    def mean_cov(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.summands
        mu = p.sum(axis=0)
        cov = np.diag(mu) - p.T @ p
        return mu, cov


@dataclass(frozen=True)
class MultiPmf:
    """Sparse pmf over Z^k, stored as parallel point / probability arrays."""

    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        pts = np.array(np.atleast_2d(self.points), dtype=np.int64)
        pr = _frozen(self.probs)
        if pts.shape[0] != pr.size:
            raise DomainError("points and probs differ in length")
        if np.any(pr < -1e-15) or abs(pr.sum() - 1) > 1e-9:
            raise DomainError("MultiPmf probabilities must be a distribution")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    @property
    def k(self) -> int:
        return self.points.shape[1]

    @property
    def entries(self) -> dict:
        return {tuple(int(v) for v in p): float(q) for p, q in zip(self.points, self.probs)}

    def at(self, x) -> float:
        hit = np.all(self.points == np.asarray(x, dtype=np.int64), axis=1)
        return float(self.probs[hit].sum())


# ---------------------------------------------------------------- exact laws


def convolve_exact(spec: SiirvSpec) -> Pmf:
    """Exact pmf of a SIIRV by sequential convolution."""
    if spec.n * spec.k > CONVOLVE_GUARD:
        raise ResourceError(f"n*k = {spec.n * spec.k} exceeds {CONVOLVE_GUARD}")
    # equal summands are grouped and raised by repeated squaring
    uniq, counts = np.unique(spec.summands, axis=0, return_counts=True)
    out = np.ones(1)
    for row, c in zip(uniq, counts):
        out = np.convolve(out, _power(row, int(c)))
    out = np.clip(out, 0.0, None)
    return Pmf(0, out / out.sum())


def _power(row: np.ndarray, e: int) -> np.ndarray:
    result = np.ones(1)
    base = row.copy()
    while e:
        if e & 1:
            result = np.convolve(result, base)
        e >>= 1
        if e:
            base = np.convolve(base, base)
    return result


def convolve_exact_pmd(spec: PmdSpec) -> MultiPmf:
    """Exact pmf of a PMD over the compositions of ``n``."""
    n, k = spec.n, spec.k
    if math.comb(n + k - 1, k - 1) > PMD_SUPPORT_GUARD:
        raise ResourceError("PMD support exceeds the size guard")
    radix = np.int64(n + 1)
    weights = radix ** np.arange(k, dtype=np.int64)
    keys = np.zeros(1, dtype=np.int64)
    probs = np.ones(1)
    for row in spec.summands:
        nz = np.flatnonzero(row > 0)
        new_keys = np.concatenate([keys + weights[a] for a in nz])
        new_probs = np.concatenate([probs * row[a] for a in nz])
        keys, inv = np.unique(new_keys, return_inverse=True)
        probs = np.bincount(inv.ravel(), weights=new_probs)
    pts = (keys[:, None] // weights[None, :]) % radix
    return MultiPmf(pts, probs / probs.sum())


# ---------------------------------------------------------------- sampling


class Sampler(Protocol):
    """Sample access to an unknown distribution."""

    def draw(self, rng: np.random.Generator): ...

    def draw_many(self, rng: np.random.Generator, size: int) -> np.ndarray: ...


@dataclass
class PmfSampler:
    """Inverse-CDF sampler for an explicit pmf."""

    pmf: Pmf
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cdf = np.cumsum(self.pmf.weights)
        self._cdf = cdf / cdf[-1]

    def law(self) -> Pmf:
        return self.pmf

    def draw(self, rng) -> int:
        return int(self.draw_many(rng, 1)[0])

    def draw_many(self, rng, size: int) -> np.ndarray:
        u = rng.random(int(size))
        idx = np.searchsorted(self._cdf, u, side="right")
        return self.pmf.offset + np.minimum(idx, self._cdf.size - 1)


@dataclass
class SiirvSampler:
    """Draws sums of per-summand categorical draws.

    Bulk draws go through the exact law, which has the same distribution.
    """

    spec: SiirvSpec
    _law: PmfSampler | None = field(init=False, default=None, repr=False)

    def law(self) -> Pmf:
        if self._law is None:
            self._law = PmfSampler(convolve_exact(self.spec))
        return self._law.pmf

    def draw(self, rng) -> int:
        cdf = np.cumsum(self.spec.summands, axis=1)
        u = rng.random(self.spec.n)
        vals = (u[:, None] >= cdf).sum(axis=1)
        return int(np.minimum(vals, self.spec.k - 1).sum())

    def draw_many(self, rng, size: int) -> np.ndarray:
        self.law()
        return self._law.draw_many(rng, size)


@dataclass
class PmdSampler:
    spec: PmdSpec
    _law: MultiPmf | None = field(init=False, default=None, repr=False)

    def law(self) -> MultiPmf:
        if self._law is None:
            self._law = convolve_exact_pmd(self.spec)
        return self._law

    def draw(self, rng) -> np.ndarray:
        return self.draw_many(rng, 1)[0]

    def draw_many(self, rng, size: int) -> np.ndarray:
        law = self.law()
        cdf = np.cumsum(law.probs)
        idx = np.searchsorted(cdf / cdf[-1], rng.random(int(size)), side="right")
        return law.points[np.minimum(idx, cdf.size - 1)]


@dataclass
class MultiPmfSampler:
    law_: MultiPmf

    def law(self) -> MultiPmf:
        return self.law_

    def draw(self, rng) -> np.ndarray:
        return self.draw_many(rng, 1)[0]

    def draw_many(self, rng, size: int) -> np.ndarray:
        cdf = np.cumsum(self.law_.probs)
        idx = np.searchsorted(cdf / cdf[-1], rng.random(int(size)), side="right")
        return self.law_.points[np.minimum(idx, cdf.size - 1)]


def empirical_sampler(samples) -> PmfSampler | MultiPmfSampler:
    """Bootstrap sampler that resamples a fixed data set."""
    arr = np.asarray(samples, dtype=np.int64)
    if arr.size == 0:
        raise DomainError("cannot resample an empty data set")
    if arr.ndim == 1:
        return PmfSampler(empirical(arr, (int(arr.min()), int(arr.max()))))
    pts, counts = np.unique(arr, axis=0, return_counts=True)
    return MultiPmfSampler(MultiPmf(pts, counts / counts.sum()))


def sampler_for(spec) -> Sampler:
    if isinstance(spec, SiirvSpec):
        return SiirvSampler(spec)
    if isinstance(spec, PmdSpec):
        return PmdSampler(spec)
    if isinstance(spec, Pmf):
        return PmfSampler(spec)
    if isinstance(spec, MultiPmf):
        return MultiPmfSampler(spec)
    raise DomainError(f"no sampler for {type(spec).__name__}")


def sample(spec, rng):
    """One draw from ``spec``."""
    return sampler_for(spec).draw(rng)


def exact_law(sampler):
    """The sampler's exact law when it exposes one, else ``None``."""
    law = getattr(sampler, "law", None)
    if law is None:
        return None
    try:
        return law()
    except ResourceError:
        return None


def poisson_draw(m: float, rng) -> int:
    if m <= 0:
        raise DomainError("Poisson mean must be positive")
    return int(rng.poisson(m))


def window_counts(sampler, rng, size: int, lo: int, hi: int) -> tuple[np.ndarray, int, np.ndarray]:
    """Counts of ``size`` draws on ``[lo, hi]``.

    Returns ``(counts, outside, outside_counts)`` where ``outside_counts``
    lists the per-value counts of draws outside the window.
    """
    law = exact_law(sampler)
    size = int(size)
    if isinstance(law, Pmf):
        inside = law.on_window(lo, hi)
        mask = (law.support < lo) | (law.support > hi)
        out_w = law.weights[mask]
        probs = np.concatenate([inside, out_w])
        probs = np.clip(probs, 0, None)
        drawn = rng.multinomial(size, probs / probs.sum()) if size else np.zeros(probs.size, int)
        counts = drawn[: inside.size]
        oc = drawn[inside.size :]
        return counts.astype(np.int64), int(oc.sum()), oc[oc > 0].astype(np.int64)
    x = np.asarray(sampler.draw_many(rng, size), dtype=np.int64)
    ins = (x >= lo) & (x <= hi)
    counts = np.bincount(x[ins] - lo, minlength=hi - lo + 1)
    _, oc = np.unique(x[~ins], return_counts=True)
    return counts.astype(np.int64), int((~ins).sum()), oc.astype(np.int64)


def modular_counts(sampler, rng, size: int, M: int, anchor: int) -> np.ndarray:
    """Counts of ``size`` draws reduced mod ``M`` onto ``[anchor, anchor+M-1]``."""
    law = exact_law(sampler)
    size = int(size)
    if isinstance(law, Pmf):
        red = mod_reduce(law, M, anchor).weights
        if size == 0:
            return np.zeros(M, dtype=np.int64)
        return rng.multinomial(size, red / red.sum()).astype(np.int64)
    x = np.asarray(sampler.draw_many(rng, size), dtype=np.int64)
    return np.bincount((x - anchor) % M, minlength=M).astype(np.int64)


# ---------------------------------------------------------------- utilities


def mod_reduce(p: Pmf, M: int, anchor: int = 0) -> Pmf:
    if M < 1:
        raise DomainError("modulus must be positive")
    idx = (p.support - anchor) % M
    w = np.bincount(idx, weights=p.weights, minlength=M)
    return Pmf(anchor, w, normalized=p.normalized)


def distances(p: Pmf, q: Pmf) -> tuple[float, float, float, float]:
    """``(tv, l1, l2, hellinger)`` between two pmfs on aligned windows."""
    lo, hi = min(p.lo, q.lo), max(p.hi, q.hi)
    a, b = p.on_window(lo, hi), q.on_window(lo, hi)
    l1 = float(np.abs(a - b).sum())
    l2 = float(np.sqrt(((a - b) ** 2).sum()))
    hel = float(np.sqrt(((np.sqrt(np.clip(a, 0, None)) - np.sqrt(np.clip(b, 0, None))) ** 2).sum() / 2))
    return l1 / 2, l1, l2, min(hel, 1.0)


def empirical(samples, window: tuple[int, int]) -> Pmf:
    x = np.asarray(samples, dtype=np.int64)
    if x.size == 0:
        raise DomainError("empirical distribution of an empty sample set")
    lo, hi = int(window[0]), int(window[1])
    if x.min() < lo or x.max() > hi:
        raise DomainError("samples fall outside the window")
    counts = np.bincount(x - lo, minlength=hi - lo + 1)
    return Pmf(lo, counts / x.size)


def is_logconcave(p: Pmf, tol: float = 1e-12) -> bool:
    w = p.weights
    nz = np.flatnonzero(w > 0)
    if nz.size == 0:
        return False
    if np.any(w[nz[0] : nz[-1] + 1] <= 0):
        return False
    if w.size < 3:
        return True
    return bool(np.all(w[1:-1] ** 2 >= w[:-2] * w[2:] - tol))


def is_unimodal(p: Pmf, tol: float = 1e-12) -> bool:
    d = np.diff(p.weights)
    d = d[np.abs(d) > tol]
    signs = np.sign(d)
    return int(np.count_nonzero(np.diff(signs) > 0)) == 0


def moments(p: Pmf) -> tuple[float, float]:
    x = p.support.astype(float)
    mu = float(p.weights @ x)
    var = float(p.weights @ (x - mu) ** 2)
    return mu, var


def binomial_pmf(n: int, p: float, shift: int = 0) -> Pmf:
    w = binom.pmf(np.arange(n + 1), n, p)
    return Pmf(shift, w / w.sum())


# ---------------------------------------------------------------- DistSpec JSON

SPEC_TYPES = ("siirv", "pmd", "pmf", "logconcave")


def _field(obj: dict, name: str, errors):
    if name not in obj:
        raise errors(f"spec field '{name}' is missing")
    return obj[name]


def _matrix(value, name: str, errors) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise errors(f"spec field '{name}' must be a list of numeric rows") from exc
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        raise errors(f"spec field '{name}' must be a list of numeric rows")
    return arr


def spec_from_dict(obj, errors=DomainError):
    """Parse a DistSpec object; errors name the offending field."""
    if not isinstance(obj, dict):
        raise errors("spec must be a JSON object")
    kind = _field(obj, "type", errors)
    if kind not in SPEC_TYPES:
        raise errors(f"spec field 'type' must be one of {', '.join(SPEC_TYPES)}")
    if kind in ("siirv", "pmd"):
        rows = _matrix(_field(obj, "summands", errors), "summands", errors)
        for name, axis in (("n", 0), ("k", 1)):
            if name in obj and obj[name] != rows.shape[axis]:
                raise errors(f"spec field '{name}' disagrees with the shape of 'summands'")
        try:
            return SiirvSpec(rows) if kind == "siirv" else PmdSpec(rows)
        except DomainError as exc:
            raise errors(f"spec field 'summands': {exc}") from exc
    offset = _field(obj, "offset", errors)
    if isinstance(offset, bool) or not isinstance(offset, int):
        raise errors("spec field 'offset' must be an integer")
    try:
        w = np.asarray(_field(obj, "weights", errors), dtype=float)
    except (TypeError, ValueError) as exc:
        raise errors("spec field 'weights' must be a list of numbers") from exc
    if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)):
        raise errors("spec field 'weights' must be a nonempty list of numbers")
    try:
        p = Pmf(offset, w)
    except DomainError as exc:
        raise errors(f"spec field 'weights': {exc}") from exc
    if kind == "logconcave" and not is_logconcave(p, 1e-9):
        raise errors("spec field 'weights' is not log-concave")
    return p


def spec_to_dict(spec) -> dict:
    """Inverse of :func:`spec_from_dict`; floats keep their shortest round-trip form."""
    if isinstance(spec, SiirvSpec):
        return {"type": "siirv", "n": spec.n, "k": spec.k, "summands": spec.summands.tolist()}
    if isinstance(spec, PmdSpec):
        return {"type": "pmd", "n": spec.n, "k": spec.k, "summands": spec.summands.tolist()}
    if isinstance(spec, Pmf):
        kind = "logconcave" if is_logconcave(spec, 1e-9) else "pmf"
        return {"type": kind, "offset": int(spec.offset), "weights": spec.weights.tolist()}
    raise DomainError(f"cannot serialize {type(spec).__name__}")

"""Projection of a learned Fourier hypothesis onto SIIRV and PBD classes.

The class is represented at desk scale by an enumerated cover (i.i.d.-summand
SIIRVs on a simplex grid and shifted binomials).  When no cover member passes,
a local search over SIIRVs with a few summand types ("polish") looks for a
class member directly; anything it returns is a genuine class member, so an
accept from it is as sound as an accept from the cover.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dft import FourierCoeffs, dft_counts
from .dist_core import SiirvSpec
from .errors import ConfigError, DomainError, ResourceError


def _omega(freqs: np.ndarray, values: np.ndarray, M: int) -> np.ndarray:
    """``e(xi * v / M)`` for every (xi, v) pair, shape ``(len(freqs), len(values))``."""
    num = np.outer(np.asarray(freqs, dtype=np.int64), np.asarray(values, dtype=np.int64)) % M
    return np.exp(-2j * np.pi * num / M)


@dataclass(frozen=True)
class CoverMember:
    """``shift + sum of count_g i.i.d. copies of summand_g``."""

    n: int
    k: int
    groups: tuple
    shift: int = 0

    @property
    def mean(self) -> float:
        vals = np.arange(self.k)
        return self.shift + sum(c * float(s @ vals) for c, s in self.groups)

    @property
    def var(self) -> float:
        vals = np.arange(self.k)
        out = 0.0
        for c, s in self.groups:
            mu = float(s @ vals)
            out += c * (float(s @ vals**2) - mu * mu)
        return max(out, 0.0)

    def fourier(self, M: int, freqs) -> np.ndarray:
        freqs = np.asarray(freqs, dtype=np.int64)
        out = np.exp(-2j * np.pi * ((freqs * self.shift) % M) / M)
        w = _omega(freqs, np.arange(self.k), M)
        for c, s in self.groups:
            out = out * (w @ np.asarray(s)) ** c
        return out

    def spec(self) -> SiirvSpec:
        """Materialize as an explicit ``(n, k)`` SIIRV."""
        rows = []
        for c, s in self.groups:
            rows.extend([np.asarray(s, dtype=float)] * c)
        free = self.n - len(rows)
        if free < 0:
            raise DomainError("member has more summands than n")
        rows.extend([np.eye(self.k)[0]] * free)
        rows = [r.copy() for r in rows]
        left = self.shift
        # push the shift into summands with headroom, constants first
        order = list(range(len(rows) - free, len(rows))) + list(range(len(rows) - free))
        for i in order:
            if left <= 0:
                break
            top = int(np.flatnonzero(rows[i] > 0).max())
            room = min(self.k - 1 - top, left)
            if room > 0:
                rows[i] = np.roll(rows[i], room)
                left -= room
        if left > 0:
            raise DomainError("shift is not realizable by an (n, k)-SIIRV")
        return SiirvSpec(np.array(rows))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "shift": self.shift,
            "groups": [[c, [float(x) for x in s]] for c, s in self.groups],
        }


@dataclass(frozen=True)
class ShiftedBinomial:
    shift: int
    trials: int
    p: float

    def member(self, n: int, k: int = 2) -> CoverMember:
        return CoverMember(n, k, ((self.trials, np.array([1 - self.p, self.p] + [0.0] * (k - 2))),), self.shift)

    def fourier(self, M: int, freqs) -> np.ndarray:
        freqs = np.asarray(freqs, dtype=np.int64)
        z = 1 - self.p + self.p * np.exp(-2j * np.pi * (freqs % M) / M)
        return np.exp(-2j * np.pi * ((freqs * self.shift) % M) / M) * z**self.trials


@dataclass
class Cover:
    """Enumerated desk-scale cover.

    ``certified`` refers to the enumerated subfamily only (i.i.d.-summand
    SIIRVs and shifted binomials), never to the whole class.
    """

    gamma: float
    n: int
    k: int
    iid_summands: np.ndarray
    binomials: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    certified: bool = True
    note: str = "radius certified over i.i.d.-summand SIIRVs and shifted binomials only"

    def __len__(self) -> int:
        return self.iid_summands.shape[0] + self.binomials.shape[0]

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        vals = np.arange(self.k)
        s = self.iid_summands
        mu_s = s @ vals
        var_s = s @ vals**2 - mu_s**2
        sh, t, p = self.binomials.T if self.binomials.size else (np.zeros(0),) * 3
        mean = np.concatenate([self.n * mu_s, sh + t * p])
        var = np.concatenate([self.n * var_s, t * p * (1 - p)])
        return mean, np.clip(var, 0, None)

    def member(self, i: int) -> CoverMember:
        m = self.iid_summands.shape[0]
        if i < m:
            return CoverMember(self.n, self.k, ((self.n, self.iid_summands[i].copy()),))
        sh, t, p = self.binomials[i - m]
        return ShiftedBinomial(int(sh), int(t), float(p)).member(self.n, self.k)

    def members(self):
        for i in range(len(self)):
            yield self.member(i)

    def fourier(self, idx: np.ndarray, M: int, freqs) -> np.ndarray:
        """Exact DFT rows for the members ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        freqs = np.asarray(freqs, dtype=np.int64)
        m = self.iid_summands.shape[0]
        out = np.empty((idx.size, freqs.size), dtype=complex)
        a = idx < m
        if np.any(a):
            w = _omega(freqs, np.arange(self.k), M)
            out[a] = (self.iid_summands[idx[a]] @ w.T) ** self.n
        if np.any(~a):
            sh, t, p = self.binomials[idx[~a] - m].T
            e1 = np.exp(-2j * np.pi * (freqs % M) / M)
            z = (1 - p)[:, None] + p[:, None] * e1[None, :]
            ph = np.exp(-2j * np.pi * (np.outer(sh.astype(np.int64), freqs) % M) / M)
            out[~a] = ph * z ** t[:, None]
        return out

    def to_specs(self) -> list[dict]:
        return [m.to_dict() for m in self.members()]


def simplex_grid(k: int, r: int) -> np.ndarray:
    """All probability vectors of length ``k`` with entries in ``{0, 1/r, ..., 1}``."""
    pts = [c for c in itertools.combinations(range(r + k - 1), k - 1)]
    out = np.empty((len(pts), k))
    for i, bars in enumerate(pts):
        edges = (-1,) + bars + (r + k - 1,)
        out[i] = [edges[j + 1] - edges[j] - 1 for j in range(k)]
    return out / r


def build_cover_desk(n: int, k: int, gamma: float, budget: int) -> Cover:
    """Grid cover: i.i.d. summands with coordinate mesh ``gamma/(2n)`` and
    shifted binomials with p-mesh ``gamma/(4n)``."""
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    if gamma >= 1:
        return Cover(gamma, n, k, np.eye(k)[:1].copy())
    r = math.ceil(2 * n / gamma)
    n_iid = math.comb(r + k - 1, k - 1)
    rp = math.ceil(4 * n / gamma)
    n_bin = 0
    for t in range(1, n + 1):
        n_bin += (_max_shift(n, k, t) + 1) * (rp + 1)
    if n_iid + n_bin > budget:
        raise ResourceError(f"cover of size {n_iid + n_bin} exceeds budget {budget}")
    iid = simplex_grid(k, r)
    rows = []
    ps = np.arange(rp + 1) / rp
    for t in range(1, n + 1):
        for sh in range(_max_shift(n, k, t) + 1):
            rows.append(np.column_stack([np.full(ps.size, sh), np.full(ps.size, t), ps]))
    bins = np.concatenate(rows) if rows else np.zeros((0, 3))
    # rounding each coordinate moves a summand by at most (k-1) mesh/2 in TV
    certified_radius = n * (k - 1) * (gamma / (2 * n)) / 2
    return Cover(max(certified_radius, gamma / 4), n, k, iid, bins)


def _max_shift(n: int, k: int, trials: int) -> int:
    return (n - trials) * (k - 1) + trials * (k - 2)


def moment_filter(mean_q, var_q, mu_tilde: float, sigma_tilde: float):
    """Members whose moments are compatible with the estimates."""
    sq = np.sqrt(np.asarray(var_q, dtype=float))
    mean_ok = np.abs(mu_tilde - np.asarray(mean_q)) <= sigma_tilde
    var_ok = (2 * (sq + 1) >= sigma_tilde + 1) & (sigma_tilde + 1 >= (sq + 1) / 2)
    return mean_ok & var_ok


@dataclass(frozen=True)
class ProjectionResult:
    accepted: bool
    distance: float
    threshold: float
    member: CoverMember | None
    source: str
    scanned: int

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "distance": self.distance,
            "threshold": self.threshold,
            "member": None if self.member is None else self.member.to_dict(),
            "source": self.source,
            "scanned": self.scanned,
        }


def _scan(h: FourierCoeffs, cover: Cover, mu, sigma, chunk=512):
    mean, var = cover.moments()
    ok = np.flatnonzero(moment_filter(mean, var, mu, sigma))
    best_d, best_i = math.inf, -1
    order_d = []
    for s in range(0, ok.size, chunk):
        idx = ok[s : s + chunk]
        q = cover.fourier(idx, h.modulus, h.freqs)
        d = np.sum(np.abs(q - h.values[None, :]) ** 2, axis=1)
        order_d.append(np.column_stack([d, idx]))
        j = int(np.argmin(d))
        if d[j] < best_d:
            best_d, best_i = float(d[j]), int(idx[j])
    ranked = np.concatenate(order_d) if order_d else np.zeros((0, 2))
    ranked = ranked[np.argsort(ranked[:, 0], kind="stable")]
    return best_d, best_i, ranked, int(ok.size)


def project_siirv(
    h: FourierCoeffs,
    cover: Cover,
    mu_tilde: float,
    sigma_tilde: float,
    epsilon: float,
    polish: "PolishConfig | None" = None,
    rng=None,
    threshold: float | None = None,
) -> ProjectionResult:
    """Accept iff some moment-compatible class member ``Q`` has
    ``sum_S |H_hat - Q_hat|^2 <= threshold`` (default ``epsilon^2 / 5``)."""
    if len(cover) == 0:
        raise ConfigError("empty cover")
    thr = epsilon**2 / 5 if threshold is None else threshold
    best_d, best_i, ranked, scanned = _scan(h, cover, mu_tilde, sigma_tilde)
    if best_i >= 0 and best_d <= thr:
        return ProjectionResult(True, best_d, thr, cover.member(best_i), "cover", scanned)
    if polish is None:
        member = cover.member(best_i) if best_i >= 0 else None
        return ProjectionResult(False, best_d, thr, member, "cover", scanned)
    starts = [cover.member(int(i)) for i in ranked[: polish.restarts, 1]]
    res = polish_siirv(h, cover.n, cover.k, mu_tilde, sigma_tilde, starts, polish, rng, thr)
    if res is not None and res[1] <= thr:
        return ProjectionResult(True, res[1], thr, res[0], "polish", scanned)
    d = min(best_d, res[1]) if res is not None else best_d
    member = res[0] if res is not None else (cover.member(best_i) if best_i >= 0 else None)
    return ProjectionResult(False, d, thr, member, "polish", scanned)


@dataclass(frozen=True)
class PolishConfig:
    types: int = 3
    restarts: int = 3
    maxiter: int = 300


def _split(n: int, g: int) -> list[int]:
    base, extra = divmod(n, g)
    return [base + (1 if i < extra else 0) for i in range(g) if base + (1 if i < extra else 0) > 0]


def _softmax(theta: np.ndarray) -> np.ndarray:
    z = theta - theta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit_typed_product(w, target, counts, inits, accept_fn, thr, rng, restarts=3, maxiter=300):
    """Minimize ``sum |prod_g (p_g . w)^{counts_g} - target|^2`` over summand types ``p_g``.

    ``w`` has one row per frequency and one column per summand value.  Each
    start in ``inits`` is a ``(G, k)`` array of logits.  ``accept_fn(p)``
    filters candidates; returns ``(p, distance)`` or ``None``.
    """
    counts = np.asarray(counts)
    G, k = counts.size, w.shape[1]

    def fun(theta):
        p = _softmax(theta.reshape(G, k))
        z = p @ w.T
        logs = counts[:, None] * np.log(np.where(np.abs(z) > 1e-300, z, 1e-300))
        total = logs.sum(axis=0)
        r = np.exp(total) - target
        grad_p = np.empty((G, k))
        for g in range(G):
            dz = counts[g] * z[g] ** (counts[g] - 1) * np.exp(total - logs[g])
            grad_p[g] = 2 * np.real(np.conj(r) * dz @ w)
        gt = p * (grad_p - np.sum(grad_p * p, axis=1, keepdims=True))
        return float(np.sum(np.abs(r) ** 2)), gt.ravel()

    best = None
    for t0 in inits:
        for _ in range(restarts if G > 1 else 1):
            theta0 = t0 + rng.normal(scale=0.5, size=t0.shape)
            res = minimize(fun, theta0.ravel(), jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
            p = _softmax(res.x.reshape(G, k))
            if not accept_fn(p):
                continue
            d = fun(np.log(np.clip(p, 1e-300, None)).ravel())[0]
            if best is None or d < best[1]:
                best = (p, d)
            if d <= thr:
                return best
    return best


def polish_siirv(h, n, k, mu, sigma, starts, cfg: PolishConfig, rng, thr):
    """Local search over SIIRVs with ``cfg.types`` summand types of fixed sizes.

    Returns ``(member, distance)`` for the best moment-compatible result, or
    ``None`` when nothing compatible was found.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    counts = np.array(_split(n, min(cfg.types, n)))
    G = counts.size
    w = _omega(h.freqs, np.arange(k), h.modulus)
    inits = []
    for st in starts:
        if st.shift == 0 and len(st.groups) == 1:
            base = np.asarray(st.groups[0][1], dtype=float)
            inits.append(np.log(np.clip(np.tile(base, (G, 1)), 1e-6, None)))
    # moment-matched start: each summand splits its mean mu/n over two adjacent values
    a = min(max(mu / n, 0.0), k - 1.0)
    lo = min(int(math.floor(a)), k - 2)
    base = np.full(k, 1e-3)
    base[lo] += 1 - (a - lo)
    base[lo + 1] += a - lo
    inits.append(np.log(np.tile(base / base.sum(), (G, 1))))

    def member_of(p):
        return CoverMember(n, k, tuple((int(c), p[g]) for g, c in enumerate(counts)))

    def ok(p):
        m = member_of(p)
        return bool(moment_filter([m.mean], [m.var], mu, sigma)[0])

    res = fit_typed_product(w, h.values, counts, inits, ok, thr, rng, cfg.restarts, cfg.maxiter)
    if res is None:
        return None
    return member_of(res[0]), res[1]


# ---------------------------------------------------------------- covers for the tester


def moment_targeted_cover(n: int, k: int, mu: float, sigma: float, budget: int) -> Cover:
    """Moment-targeted cover used inside the tester."""
    r = 1
    while math.comb(r + 1 + k - 1, k - 1) <= budget // 2:
        r += 1
    iid = simplex_grid(k, r)
    rows = []
    lo_sd = max((sigma + 1) / 2 - 1, 0.0)
    hi_sd = 2 * sigma + 1
    for t in range(1, n + 1):
        vmax = min(hi_sd**2, t / 4)
        vmin = lo_sd**2
        if vmin > vmax:
            continue
        for v in np.linspace(vmin, vmax, 9):
            disc = max(1 - 4 * v / t, 0.0)
            for p in {(1 - math.sqrt(disc)) / 2, (1 + math.sqrt(disc)) / 2}:
                sh = int(round(mu - t * p))
                if 0 <= sh <= _max_shift(n, k, t):
                    rows.append((sh, t, p))
    bins = np.array(sorted(set(rows))) if rows else np.zeros((0, 3))
    if bins.shape[0] > budget // 2:
        keep = np.linspace(0, bins.shape[0] - 1, budget // 2).astype(int)
        bins = bins[keep]
    return Cover(1.0 / r, n, k, iid, bins, certified=False, note="moment-targeted desk cover")


# ---------------------------------------------------------------- PBD special cases


def pbd_project_small_variance(h: FourierCoeffs, mu_tilde, sigma_tilde, n, epsilon, max_candidates=2 * 10**6):
    """Candidate search over PBDs with at most ``ceil(log(1/eps))`` distinct
    parameters from a grid of mesh ``eps^2``.  Accepts at ``eps^2 / 4``."""
    M = h.modulus
    B = max(1, math.ceil(math.log(1 / epsilon)))
    grid = np.round(np.arange(0, 1 + 1e-12, epsilon**2), 12)
    grid = np.unique(np.clip(grid, 0, 1))
    thr = epsilon**2 / 4
    e1 = np.exp(-2j * np.pi * (h.freqs % M) / M)
    zs = (1 - grid)[:, None] + grid[:, None] * e1[None, :]  # (P, F)
    logz = np.log(np.where(np.abs(zs) > 1e-300, zs, 1e-300))
    var_hi = (2 * sigma_tilde + 1) ** 2
    best = (math.inf, None)
    seen = 0

    def rec(start, left, buckets, mean, var, logq):
        nonlocal best, seen
        if buckets:
            # the remaining summands are deterministic (p = 0)
            sd = math.sqrt(var)
            if abs(mu_tilde - mean) <= sigma_tilde and 2 * (sd + 1) >= sigma_tilde + 1 >= (sd + 1) / 2:
                seen += 1
                if seen > max_candidates:
                    raise ResourceError("PBD candidate search exceeded its budget")
                d = float(np.sum(np.abs(np.exp(logq) - h.values) ** 2))
                if d < best[0]:
                    best = (d, list(buckets))
                if d <= thr:
                    return True
        if len(buckets) == B or left == 0:
            return False
        for i in range(start, grid.size):
            p = grid[i]
            if p == 0:
                continue
            for c in range(1, left + 1):
                nv = var + c * p * (1 - p)
                nm = mean + c * p
                if nv > var_hi or nm - sigma_tilde > mu_tilde:
                    break
                if rec(i + 1, left - c, buckets + [(c, float(p))], nm, nv, logq + c * logz[i]):
                    return True
        return False

    found = rec(0, n, [], 0.0, 0.0, np.zeros(h.freqs.size, dtype=complex))
    return {"accepted": bool(found), "distance": best[0], "threshold": thr, "buckets": best[1]}


def pbd_fit_shifted_binomial(sampler, M: int, freqs, epsilon: float, rng, C: float = 40.0, h: FourierCoeffs | None = None):
    """Moment-matched shifted binomial from ``ceil(C |S| / eps^2)`` fresh samples.

    Returns ``(ShiftedBinomial | None, result dict)``.
    """
    freqs = np.unique(np.asarray(list(freqs), dtype=np.int64) % M)
    N = math.ceil(C * freqs.size / epsilon**2)
    x = np.asarray(sampler.draw_many(rng, N), dtype=np.int64)
    mu, v = float(x.mean()), float(x.var(ddof=1))
    lo_x, hi_x = int(x.min()), int(x.max())
    thr = epsilon**2 / 5
    out = {"samples": N, "mean": mu, "var": v, "threshold": thr}
    if v <= 0:
        sb = ShiftedBinomial(int(round(mu)), 0, 0.5)
    elif v > mu * 1.05 + 1e-9 or mu < 0:
        out.update(accepted=False, stage="moment-infeasible", distance=math.inf)
        return None, out
    else:
        sb = None
    if h is None:
        counts = np.bincount(((x - lo_x) % M), minlength=M)
        h = dft_counts(counts, lo_x, M, freqs)
    if sb is None:
        t_lo = max(1, math.ceil(4 * v))
        t_hi = max(t_lo + 1, t_lo + 4 * (hi_x - lo_x + 1))
        ts = np.arange(t_lo, t_hi + 1)
        disc = np.clip(1 - 4 * v / ts, 0, 1)
        cands = []
        for sign in (-1, 1):
            p = np.clip((1 + sign * np.sqrt(disc)) / 2, 1e-9, 1 - 1e-9)
            sh = np.round(mu - ts * p).astype(np.int64)
            cands.append(np.column_stack([sh, ts, p]))
        cand = np.concatenate(cands)
        cand = cand[cand[:, 0] >= 0]
        if cand.size == 0:
            out.update(accepted=False, stage="moment-infeasible", distance=math.inf)
            return None, out
        e1 = np.exp(-2j * np.pi * (freqs % M) / M)
        best = (math.inf, None)
        for s in range(0, cand.shape[0], 256):
            c = cand[s : s + 256]
            z = (1 - c[:, 2])[:, None] + c[:, 2][:, None] * e1[None, :]
            q = np.exp(-2j * np.pi * (np.outer(c[:, 0].astype(np.int64), freqs) % M) / M) * z ** c[:, 1][:, None]
            d = np.sum(np.abs(q - h.on(freqs)[None, :]) ** 2, axis=1)
            j = int(np.argmin(d))
            if d[j] < best[0]:
                best = (float(d[j]), c[j])
        sb = ShiftedBinomial(int(best[1][0]), int(best[1][1]), float(best[1][2]))
    d = float(np.sum(np.abs(sb.fourier(M, freqs) - h.on(freqs)) ** 2))
    out.update(accepted=d <= thr, stage=None if d <= thr else "projection", distance=d)
    return sb, out


__all__ = [
    "CoverMember",
    "ShiftedBinomial",
    "Cover",
    "PolishConfig",
    "ProjectionResult",
    "build_cover_desk",
    "moment_targeted_cover",
    "moment_filter",
    "project_siirv",
    "polish_siirv",
    "simplex_grid",
    "pbd_project_small_variance",
    "pbd_fit_shifted_binomial",
]

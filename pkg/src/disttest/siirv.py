"""End-to-end membership testing for sums of independent integer random variables."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dft import dft_1d, dft_counts
from .dist_core import SiirvSpec, convolve_exact, mod_reduce, modular_counts, window_counts
from .errors import DomainError
from .fourier_sparsity import test_fourier_support_1d
from .ledger import Ledger
from .projection import PolishConfig, project_siirv, moment_targeted_cover
from .report import TestReport, make_report
from .rng import as_streams


@dataclass(frozen=True)
class MomentEstimates:
    mu_tilde: float
    sigma_tilde_sq: float
    m_used: int

    @property
    def sigma_tilde(self) -> float:
        return math.sqrt(self.sigma_tilde_sq)


def estimate_moments(sampler, k: int, rng, per_k: int = 800) -> MomentEstimates:
    """Sample mean and (unbiased sample variance + 1) from ``per_k * k`` draws."""
    if k < 2:
        raise DomainError("k must be at least 2")
    m = per_k * k
    x = np.asarray(sampler.draw_many(rng, m), dtype=float)
    return MomentEstimates(float(x.mean()), float(x.var(ddof=1)) + 1.0, m)


@dataclass(frozen=True)
class SparseFreqSet:
    M: int
    delta: float
    radius: float
    freqs: np.ndarray

    def __len__(self) -> int:
        return int(self.freqs.size)


def sparse_set_delta(k: int, eps: float, C2: float) -> float:
    return eps / (C2 * math.sqrt(k * math.log(k / eps)))


def build_sparse_set(M: int, sigma_tilde: float, k: int, eps: float, C1: float = 2.0, C2: float = 10.0) -> SparseFreqSet:
    """Frequencies within ``C1 sqrt(ln 1/delta) / (4 sigma)`` (wrap-around) of some
    ``a/b`` with ``1 <= b < k`` and ``0 <= a <= b``, plus 0."""
    if M < 3 or M % 2 == 0:
        raise DomainError("M must be odd and at least 3")
    if sigma_tilde <= 0:
        raise DomainError("sigma_tilde must be positive")
    delta = sparse_set_delta(k, eps, C2)
    radius = C1 * math.sqrt(math.log(1 / delta)) / (4 * sigma_tilde)
    xi = np.arange(M) / M
    keep = xi == 0
    for b in range(1, k):
        for a in range(0, b + 1):
            d = np.abs(xi - a / b)
            keep |= np.minimum(d, 1 - d) <= radius
    return SparseFreqSet(M, delta, radius, np.flatnonzero(keep))


def sparse_set_size_bound(k: int, eps: float, C2: float) -> float:
    return C2 * k**2 * math.log(k / eps) ** 2


def effective_support_samples(eps: float, c_sup: float) -> int:
    return math.ceil(c_sup / eps)


def check_effective_support(sampler, lo: int, hi: int, eps: float, rng, c_sup: float = 2400.0, m: int | None = None):
    """``(passed, outside_count, m)``; fails iff at least ``(9/40) eps m`` draws leave ``[lo, hi]``."""
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    m = effective_support_samples(eps, c_sup) if m is None else m
    _, outside, _ = window_counts(sampler, rng, m, lo, hi)
    return outside < 9 / 40 * eps * m, outside, m


def small_branch(sigma_tilde: float, k: int, eps: float) -> bool:
    return sigma_tilde <= 2 * k * math.sqrt(math.log(10 / eps))


def small_branch_modulus(k: int, eps: float) -> int:
    return 1 + 2 * math.ceil(15 * k * math.log(10 / eps))


def big_branch_modulus(sigma_tilde: float, eps: float) -> int:
    return 1 + 2 * math.ceil(4 * sigma_tilde * math.sqrt(math.log(4 / eps)))


def interval_for(mu_tilde: float, M: int) -> tuple[int, int]:
    c = math.floor(mu_tilde)
    h = (M - 1) // 2
    return c - h, c + h


def test_siirv(sampler, n: int, k: int, epsilon: float, rng, ledger: Ledger | None = None, polish: bool = True) -> TestReport:
    """Membership test for (n, k)-SIIRVs; accepts with a proper hypothesis."""
    if n < 1 or k < 2 or not 0 < epsilon <= 1:
        raise DomainError("need n >= 1, k >= 2 and eps in (0, 1]")
    ledger = ledger or Ledger()
    streams = as_streams(rng)
    eps = epsilon
    params = {"n": n, "k": k, "epsilon": eps}
    stats: dict = {}
    samples = 0

    def done(stage, hyp=None):
        return make_report("siirv", stage, samples, streams, ledger, params, stats, hyp)

    est = estimate_moments(sampler, k, streams["moments"], ledger.moment_samples_per_k)
    samples += est.m_used
    sig = est.sigma_tilde
    stats.update(mu_tilde=est.mu_tilde, sigma_tilde=sig, moment_samples=est.m_used)
    if sig > 2 * k * math.sqrt(n):
        return done("variance-bound")

    small = small_branch(sig, k, eps)
    M = small_branch_modulus(k, eps) if small else big_branch_modulus(sig, eps)
    lo, hi = interval_for(est.mu_tilde, M)
    stats.update(branch="small" if small else "big", M=M, I=[lo, hi])
    ok, outside, m_sup = check_effective_support(sampler, lo, hi, eps, streams["support"], ledger.c_sup)
    samples += m_sup
    stats.update(support_samples=m_sup, support_outside=outside)
    if not ok:
        return done("support-check")

    if small:
        S = np.arange(M)
        N = math.ceil(ledger.emp_C * S.size / eps**2)
        counts = modular_counts(sampler, streams["empirical"], N, M, lo)
        samples += N
        h = dft_counts(counts, lo, M, S)
        stats.update(S_size=int(S.size), empirical_samples=N)
    else:
        sset = build_sparse_set(M, sig, k, eps, ledger.siirv_C1, ledger.siirv_C2)
        b = 16 * k / sig
        out = test_fourier_support_1d(
            sampler, M, sset.freqs, eps / (5 * math.sqrt(M)), b, streams["fourier"], anchor=lo, ledger=ledger
        )
        samples += out.stats["m_prime"]
        stats.update(S_size=len(sset), delta=sset.delta, b=b, fourier=out.stats)
        if out.rejected:
            return done(out.stage)
        h = out.coeffs

    cover = moment_targeted_cover(n, k, est.mu_tilde, sig, ledger.cover_budget)
    cfg = PolishConfig(types=ledger.polish_types, restarts=ledger.polish_restarts) if polish else None
    res = project_siirv(h, cover, est.mu_tilde, sig, eps, cfg, streams["projection"])
    stats.update(projection=res.to_dict(), cover_size=len(cover))
    if not res.accepted:
        return done("projection")
    hyp = {
        "kind": "siirv",
        "member": res.member.to_dict(),
        "fourier": {
            "modulus": M,
            "anchor": lo,
            "coeffs": [[int(f), float(v.real), float(v.imag)] for f, v in zip(h.freqs, h.values)],
        },
    }
    return done(None, hyp)


test_siirv.__test__ = False


# ---------------------------------------------------------------- structural checks


def lemma_set(M: int, k: int, s: float, delta: float) -> np.ndarray:
    """Frequencies strictly within ``sqrt(ln(1/delta)) / (2 s)`` of some ``a/b``, ``0 <= a <= b < k``."""
    xi = np.arange(M) / M
    keep = np.zeros(M, dtype=bool)
    r = math.sqrt(math.log(1 / delta)) / (2 * s)
    for b in range(1, k):
        for a in range(0, b + 1):
            d = np.abs(xi - a / b)
            keep |= np.minimum(d, 1 - d) < r
    keep[0] = True
    return np.flatnonzero(keep)


def siirv_fourier_tail_bound(spec: SiirvSpec, M: int, delta: float):
    """``(L, violations, large_count)`` for the exact DFT of ``spec`` mod ``M``."""
    _, var = spec.mean_var()
    s = math.sqrt(var)
    if s <= 0:
        raise DomainError("requires positive standard deviation")
    L = lemma_set(M, spec.k, s, delta)
    c = dft_1d(convolve_exact(spec), M)
    mags = np.abs(c.values)
    outside = np.setdiff1d(np.arange(M), L)
    viol = outside[mags[outside] > delta]
    return L, viol, int(np.count_nonzero(mags > delta))


def large_count_bound(M: int, k: int, s: float, delta: float) -> float:
    return 4 * M * k * math.sqrt(math.log(1 / delta)) / s


def siirv_l2_bound_check(spec: SiirvSpec, M: int) -> tuple[float, float]:
    _, var = spec.mean_var()
    s = math.sqrt(var)
    if s <= 0:
        raise DomainError("requires positive standard deviation")
    red = mod_reduce(convolve_exact(spec), M, 0)
    return float(np.sum(red.weights**2)), 8 * spec.k / s


def brute_force_sparse_set(M: int, sigma_tilde: float, k: int, eps: float, C1: float = 2.0, C2: float = 10.0) -> set:
    """Slow reference enumeration with exact rational distances where possible."""
    delta = sparse_set_delta(k, eps, C2)
    radius = C1 * math.sqrt(math.log(1 / delta)) / (4 * sigma_tilde)
    out = {0}
    for xi in range(M):
        for b in range(1, k):
            for a in range(b + 1):
                d = abs(Fraction(xi, M) - Fraction(a, b))
                d = min(d, 1 - d)
                if float(d) <= radius:
                    out.add(xi)
    return out

"""Membership testing for Poisson multinomial distributions, plus the
uniform-categorical hard instance and its norms."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dft import (
    DegenerateGeometryError,
    LatticeBasis,
    LatticeFourierCoeffs,
    full_dual,
    fundamental_reduce,
    lattice_dft_pmf,
    lattice_dual_ball,
)
from .dist_core import MultiPmf, PmdSpec, convolve_exact_pmd
from .errors import DomainError, NumericalError
from .fourier_sparsity import test_fourier_support_lattice
from .ledger import Ledger
from .projection import _split, fit_typed_product, simplex_grid
from .report import TestReport, make_report
from .rng import as_streams


def jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    as columns.
    """
    A = np.array(a, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("matrix must be square")
    A = (A + A.T) / 2
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.abs(A).max(), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off < tol * scale or off == 0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
    else:
        raise NumericalError("Jacobi sweeps did not converge", {"off": off})
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


@dataclass(frozen=True)
class CovEstimates:
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    m_used: int


def estimate_mean_cov(sampler, k: int, rng, c0: float = 50.0) -> CovEstimates:
    if k < 2:
        raise DomainError("k must be at least 2")
    m0 = math.ceil(c0 * k**4)
    x = np.asarray(sampler.draw_many(rng, m0), dtype=float)
    mu = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1)
    cov = (cov + cov.T) / 2
    lam, vec = jacobi_eigh(cov)
    return CovEstimates(mu, cov, lam, vec, m0)


def round_half_away(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def lattice_factors(eigvals, k: int, eps: float, C: float) -> np.ndarray:
    L = math.log(k / eps)
    return C * np.sqrt(k * L * np.clip(eigvals, 0, None) + k * k * L * L)


def build_lattice(est: CovEstimates, k: int, eps: float, C: float = 4.0) -> LatticeBasis:
    """Column ``i`` is the nearest integer point to ``factor_i * v_i``."""
    f = lattice_factors(est.eigvals, k, eps, C)
    cols = round_half_away(est.eigvecs * f[None, :])
    return LatticeBasis(cols)


def psd_order(a: np.ndarray, b: np.ndarray, tol: float = -1e-8) -> bool:
    """``a - b`` is positive semidefinite up to eigenvalue tolerance."""
    lam, _ = jacobi_eigh(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return bool(lam.min() >= tol)


def pmd_moments(types: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = counts @ types
    cov = np.diag(mu) - (types * counts[:, None]).T @ types
    return mu, cov


def pmd_moment_ok(mu_q, cov_q, mu_hat, sigma_hat) -> bool:
    k = mu_hat.size
    eye = np.eye(k)
    d = mu_hat - mu_q
    if float(d @ np.linalg.solve(sigma_hat + eye, d)) > 1:
        return False
    return psd_order(2 * (cov_q + eye), sigma_hat + eye) and psd_order(sigma_hat + eye, (cov_q + eye) / 2)


def _dual_omega(keys: np.ndarray, D: int) -> np.ndarray:
    """``e(xi . e_a)`` for each dual key (rows) and basis vector (columns)."""
    return np.exp(-2j * np.pi * (keys % D) / D)


@dataclass(frozen=True)
class PmdProjection:
    accepted: bool
    distance: float
    threshold: float
    types: list | None
    counts: list | None
    source: str

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "distance": self.distance,
            "threshold": self.threshold,
            "types": self.types,
            "counts": self.counts,
            "source": self.source,
        }


def project_pmd(h: LatticeFourierCoeffs, n: int, k: int, mu_hat, sigma_hat, eps: float, rng, ledger: Ledger) -> PmdProjection:
    """i.i.d.-categorical grid scan, then a typed local search; accept at ``eps^2/16``."""
    thr = eps**2 / 16
    D = h.basis.abs_det
    w = _dual_omega(h.dual.keys, D)
    target = h.values
    r = 1
    while math.comb(r + 1 + k - 1, k - 1) <= ledger.cover_budget:
        r += 1
    grid = simplex_grid(k, r)
    best = (math.inf, None)
    ranked = []
    for p in grid:
        mu_q, cov_q = pmd_moments(p[None, :], np.array([n]))
        if not pmd_moment_ok(mu_q, cov_q, mu_hat, sigma_hat):
            continue
        d = float(np.sum(np.abs((w @ p) ** n - target) ** 2))
        ranked.append((d, p))
        if d < best[0]:
            best = (d, p)
    if best[1] is not None and best[0] <= thr:
        return PmdProjection(True, best[0], thr, [best[1].tolist()], [n], "cover")
    counts = np.array(_split(n, min(ledger.polish_types, n)))
    G = counts.size
    ranked.sort(key=lambda t: t[0])
    inits = [np.log(np.clip(np.tile(p, (G, 1)), 1e-6, None)) for _, p in ranked[: ledger.polish_restarts]]
    inits.append(np.log(np.tile(np.clip(mu_hat / n, 1e-3, None), (G, 1))))

    def ok(p):
        mu_q, cov_q = pmd_moments(p, counts)
        return pmd_moment_ok(mu_q, cov_q, mu_hat, sigma_hat)

    res = fit_typed_product(w, target, counts, inits, ok, thr, rng, ledger.polish_restarts)
    if res is not None and res[1] < best[0]:
        best = (res[1], res[0])
        src_types, src_counts = res[0].tolist(), counts.tolist()
    elif best[1] is not None:
        src_types, src_counts = [best[1].tolist()], [n]
    else:
        src_types = src_counts = None
    return PmdProjection(bool(best[0] <= thr), best[0], thr, src_types, src_counts, "polish")


def support_samples(eps: float, c: float) -> int:
    return math.ceil(c / eps)


def dual_radius(k: int, eps: float, C: float) -> float:
    return C * C * k * k * math.log(k / eps)


def test_pmd(sampler, n: int, k: int, epsilon: float, rng, ledger: Ledger | None = None) -> TestReport:
    """Membership test for (n, k)-PMDs at desk scale."""
    if n < 1 or k < 2 or not 0 < epsilon <= 1:
        raise DomainError("need n >= 1, k >= 2 and eps in (0, 1]")
    ledger = ledger or Ledger()
    streams = as_streams(rng)
    eps = epsilon
    params = {"n": n, "k": k, "epsilon": eps}
    stats: dict = {}
    samples = 0

    def done(stage, hyp=None):
        return make_report("pmd", stage, samples, streams, ledger, params, stats, hyp)

    est = estimate_mean_cov(sampler, k, streams["moments"], ledger.pmd_c0)
    samples += est.m_used
    stats.update(mu_hat=est.mu_hat, sigma_hat=est.sigma_hat, eigvals=est.eigvals, moment_samples=est.m_used)
    try:
        basis = build_lattice(est, k, eps, ledger.pmd_C)
    except DegenerateGeometryError:
        return done("geometry")
    D = basis.abs_det
    stats.update(lattice=basis.M, det=D)

    m_sup = support_samples(eps, ledger.pmd_support_c)
    x = np.asarray(sampler.draw_many(streams["support"], m_sup), dtype=np.int64)
    samples += m_sup
    outside = int(np.count_nonzero(np.any(fundamental_reduce(x, basis, est.mu_hat) != x, axis=1)))
    stats.update(support_samples=m_sup, support_outside=outside)
    if ledger.pmd_support_count_based:
        failed = outside >= 9 / 40 * eps * m_sup
    else:
        failed = outside > 0
    if failed:
        return done("support-check")

    S = lattice_dual_ball(basis, dual_radius(k, eps, ledger.pmd_C))
    b = (len(S) + 1) / D
    out = test_fourier_support_lattice(
        sampler, basis, S, eps / (5 * math.sqrt(D)), b, streams["fourier"], center=est.mu_hat, ledger=ledger
    )
    samples += out.stats["m_prime"]
    stats.update(S_size=len(S), b=b, fourier=out.stats)
    if out.rejected:
        return done(out.stage)
    proj = project_pmd(out.coeffs, n, k, est.mu_hat, est.sigma_hat, eps, streams["projection"], ledger)
    stats.update(projection=proj.to_dict())
    if not proj.accepted:
        return done("projection")
    return done(None, {"kind": "pmd", "types": proj.types, "counts": proj.counts})


test_pmd.__test__ = False


# ---------------------------------------------------------------- structural checks


def out_of_set_mass(p: MultiPmf, basis: LatticeBasis, S, center) -> tuple[float, float]:
    """``(L1, L2^2)`` of the exact lattice DFT of ``p`` outside ``S``."""
    red = fundamental_reduce(p.points, basis, center)
    pts, inv = np.unique(red, axis=0, return_inverse=True)
    probs = np.bincount(inv.ravel(), weights=p.probs)
    reduced = MultiPmf(pts, probs / probs.sum())
    full = lattice_dft_pmf(reduced, full_dual(basis))
    in_s = {tuple(int(v) for v in key) for key in S.keys}
    mask = np.array([tuple(int(v) for v in key) not in in_s for key in full.dual.keys])
    vals = np.abs(full.values[mask])
    return float(vals.sum()), float(np.sum(vals**2))


def hard_instance(n: int, k: int) -> PmdSpec:
    """Sum of ``n`` i.i.d. uniform draws from ``{e_1..e_k}``."""
    return PmdSpec(np.full((n, k), 1.0 / k))


def norms_for_lb(spec: PmdSpec) -> tuple[float, float]:
    """Exact ``(||P||_2^2, ||P||_{2/3})``; asserts the Holder bound."""
    p = convolve_exact_pmd(spec).probs
    l2 = float(np.sum(p**2))
    two_thirds = float(np.sum(p ** (2 / 3)) ** 1.5)
    if two_thirds < 1 / math.sqrt(l2) * (1 - 1e-12):
        raise NumericalError("Holder bound violated", {"l2_sq": l2, "two_thirds": two_thirds})
    return l2, two_thirds


def richmond_shallit(n: int, k: int) -> float:
    return k ** (k / 2) / (4 * math.pi * n) ** ((k - 1) / 2)


__all__ = [
    "jacobi_eigh",
    "CovEstimates",
    "estimate_mean_cov",
    "build_lattice",
    "lattice_factors",
    "round_half_away",
    "psd_order",
    "project_pmd",
    "test_pmd",
    "out_of_set_mass",
    "hard_instance",
    "norms_for_lb",
    "richmond_shallit",
]

"""Discrete log-concave MLE and the log-concavity membership tester."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dft import dft_1d, dft_counts, dft_piecewise_exponential
from .dist_core import Pmf, modular_counts, poisson_draw, window_counts
from .errors import DomainError, NumericalError
from .ledger import Ledger
from .report import TestReport, make_report
from .rng import as_streams
from .siirv import interval_for


@dataclass(frozen=True)
class MleResult:
    pmf: Pmf
    pieces: list
    loglik: float
    iterations: int = 0

    def pieces_dict(self) -> list:
        return [[int(a), int(b), float(al), float(be)] for (a, b), (al, be) in self.pieces]


def _features(L: int, knots: list[int]) -> np.ndarray:
    x = np.arange(L, dtype=float)
    cols = [x] + [np.maximum(x - t, 0.0) for t in knots]
    return np.column_stack(cols)


def _phi(F: np.ndarray, theta: np.ndarray) -> np.ndarray:
    # phi = beta x - sum_t u_t (x - t)_+ ; theta = (beta, u...)
    sign = np.ones(theta.size)
    sign[1:] = -1
    return F @ (sign * theta)


def _objective(F, theta, w):
    phi = _phi(F, theta)
    lse = logsumexp(phi)
    return float(w @ phi - lse), phi - lse


def logconcave_mle(counts, lo: int = 0, tol: float = 1e-8, max_iter: int = 10**5) -> MleResult:
    """Maximum-likelihood log-concave pmf for a histogram on ``[lo, lo + len - 1]``.

    The log-pmf is written as ``beta x - sum_t u_t (x - t)_+`` with
    ``u_t >= 0``, which parameterizes exactly the concave sequences.  The
    concave likelihood is maximized by a primal active-set method with
    Newton steps on the free knots.
    """
    c = np.asarray(counts, dtype=float)
    if c.ndim != 1 or c.size == 0 or np.any(c < 0) or c.sum() <= 0:
        raise DomainError("need a nonempty nonnegative histogram")
    nz = np.flatnonzero(c > 0)
    a0, b0 = int(nz[0]), int(nz[-1])
    core = c[a0 : b0 + 1]
    L = core.size
    w = core / core.sum()
    if L == 1:
        weights = np.zeros(c.size)
        weights[a0] = 1.0
        pmf = Pmf(lo, weights)
        return MleResult(pmf, [((lo + a0, lo + a0), (0.0, 0.0))], 0.0, 0)

    knots: list[int] = []
    theta = np.array([0.0])
    it = 0
    while True:
        theta, knots, it = _newton_on_active(w, L, knots, theta, tol, it, max_iter)
        F_all = _features(L, list(range(1, L - 1)))
        _, logp = _objective(_features(L, knots), theta, w)
        p = np.exp(logp)
        # d loglik / d u_t = E_p[(x-t)_+] - E_w[(x-t)_+]
        g = (p - w) @ F_all[:, 1:]
        if knots:
            g[np.array(knots) - 1] = -np.inf
        if g.size == 0 or g.max() <= tol:
            break
        t_new = int(np.argmax(g)) + 1
        knots = sorted(knots + [t_new])
        theta = np.insert(theta, 1 + knots.index(t_new), 0.0)
        it += 1
        if it > max_iter:
            raise NumericalError("MLE iteration cap reached", {"knots": len(knots), "grad": float(g.max())})

    ll, logp = _objective(_features(L, knots), theta, w)
    weights = np.zeros(c.size)
    weights[a0 : b0 + 1] = np.exp(logp)
    weights /= weights.sum()
    pmf = Pmf(lo, weights)
    pieces = _pieces(logp, knots, lo + a0)
    return MleResult(pmf, pieces, ll * core.sum(), it)


def _newton_on_active(w, L, knots, theta, tol, it, max_iter):
    while True:
        F = _features(L, knots)
        sign = np.ones(theta.size)
        sign[1:] = -1
        _, logp = _objective(F, theta, w)
        p = np.exp(logp)
        Ew, Ep = w @ F, p @ F
        grad = sign * (Ew - Ep)
        cov = (F * p[:, None]).T @ F - np.outer(Ep, Ep)
        H = sign[:, None] * cov * sign[None, :]
        if np.max(np.abs(grad)) <= tol * 1e-2:
            return theta, knots, it
        try:
            step = np.linalg.solve(H + 1e-14 * np.eye(H.shape[0]) * max(1.0, np.trace(H)), grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        # stay in u >= 0: clip the step at the first knot that would go negative
        alpha = 1.0
        hit = None
        for j in range(1, theta.size):
            if step[j] < 0 and theta[j] + step[j] < 0:
                a = theta[j] / -step[j]
                if a < alpha:
                    alpha, hit = a, j
        f0, _ = _objective(F, theta, w)
        slope = float(grad @ step)
        while True:
            cand = theta + alpha * step
            cand[1:] = np.maximum(cand[1:], 0.0)
            f1, _ = _objective(F, cand, w)
            if f1 >= f0 + 1e-4 * alpha * slope or alpha < 1e-12:
                break
            alpha *= 0.5
            hit = None
        theta = cand
        it += 1
        if hit is not None or np.any(theta[1:] <= 0):
            keep = [i for i in range(1, theta.size) if theta[i] > 0]
            knots = [knots[i - 1] for i in keep]
            theta = np.concatenate([theta[:1], theta[keep]])
        if it > max_iter:
            raise NumericalError("MLE iteration cap reached", {"knots": len(knots)})
        if alpha * np.max(np.abs(step)) < 1e-15 and hit is None:
            return theta, knots, it


def _pieces(logp: np.ndarray, knots: list[int], start: int) -> list:
    """Maximal linear runs of ``logp``, as ``((a, b), (alpha, beta))`` in absolute positions."""
    L = logp.size
    bounds = [0] + [t + 1 for t in knots] + [L]
    out = []
    for s, e in zip(bounds[:-1], bounds[1:]):
        if e <= s:
            continue
        beta = 0.0 if e - s == 1 else float(logp[s + 1] - logp[s])
        a = start + s
        alpha = float(logp[s]) - beta * a
        out.append(((a, start + e - 1), (alpha, beta)))
    return out


def expand_pieces(pieces, lo: int, hi: int) -> np.ndarray:
    out = np.zeros(hi - lo + 1)
    for (a, b), (al, be) in pieces:
        x = np.arange(a, b + 1)
        out[a - lo : b - lo + 1] = np.exp(al + be * x)
    return out


# ---------------------------------------------------------------- tester


def final_statistic(q_counts, m: int, M: int, anchor: int, h: MleResult, S, eps: float):
    """``(value, threshold, printed_threshold, rejected)``.

    value = ``||Q'||^2 - ||Q'_hat 1_S||^2 / M + ||Q'_hat 1_S - H_hat 1_S||^2 / M``.
    The verdict uses ``3 (eps/sqrt M)^2 (m'/m)^2 + 1/m'``.
    """
    q_counts = np.asarray(q_counts, dtype=np.int64)
    mp = int(q_counts.sum())
    S = np.unique(np.asarray(list(S), dtype=np.int64) % M)
    qh = dft_counts(q_counts, anchor, M, S)
    hh = dft_piecewise_exponential(h.pieces, M, S)
    l2 = float(np.sum(q_counts.astype(float) ** 2)) / mp**2
    value = l2 - qh.energy() / M + float(np.sum(np.abs(qh.values - hh.values) ** 2)) / M
    thr = 3 * eps**2 / M * (mp / m) ** 2 + 1 / mp
    printed = 3 * m**2 * eps**2
    return value, thr, printed, value > thr


def low_frequency_set(M: int, eps: float, C: float = 1.0) -> np.ndarray:
    r = C * math.log(1 / eps) ** 2 / eps**2
    xi = np.arange(M)
    return xi[np.minimum(xi, M - xi) <= r]


def test_logconcave(sampler, n: int, epsilon: float, rng, ledger: Ledger | None = None) -> TestReport:
    """Membership test for discrete log-concave distributions."""
    if not 0 < epsilon < 1:
        raise DomainError("eps must lie in (0, 1)")
    ledger = ledger or Ledger()
    streams = as_streams(rng)
    eps = epsilon
    params = {"n": n, "epsilon": eps}
    stats: dict = {}
    samples = 0

    def done(stage, hyp=None):
        return make_report("logconcave", stage, samples, streams, ledger, params, stats, hyp)

    x = np.asarray(sampler.draw_many(streams["moments"], ledger.lc_moment_samples), dtype=float)
    samples += x.size
    mu = float(x.mean())
    sig = 1.0 + float(x.std(ddof=1))
    M = 1 + 2 * math.ceil(ledger.lc_M_C * sig * math.log(1 / eps))
    lo, hi = interval_for(mu, M)
    stats.update(mu_tilde=mu, sigma_tilde=sig, M=M, I=[lo, hi])

    m_sup = math.ceil(ledger.c_sup / eps**2)
    _, outside, _ = window_counts(sampler, streams["support"], m_sup, lo, hi)
    samples += m_sup
    stats.update(support_samples=m_sup, support_outside=outside)
    if outside >= 9 / 40 * eps**2 * m_sup:
        return done("support-check")

    N = math.ceil(ledger.lc_mle_c * math.log(M / eps) / eps**2.5)
    counts, _, _ = window_counts(sampler, streams["mle"], N, lo, hi)
    samples += N
    stats.update(mle_samples=N, mle_kept=int(counts.sum()))
    try:
        if counts.sum() == 0:
            raise NumericalError("no samples inside I")
        h = logconcave_mle(counts, lo)
    except NumericalError as exc:
        stats.update(mle_error=str(exc))
        return done("mle-failure")
    _, var_h = _moments(h.pmf)
    sd_h = math.sqrt(var_h)
    stats.update(sigma_H=sd_h)
    if 1 + sd_h <= sig / 2 or sd_h >= 2 * sig:
        return done("mle-variance")

    S = low_frequency_set(M, eps, ledger.lc_S_C)
    m = math.ceil(ledger.lc_final_C * math.sqrt(sig) * math.log(1 / eps) / eps**2)
    mp = poisson_draw(m, streams["final"])
    samples += mp
    stats.update(S_size=int(S.size), m=m, m_prime=mp)
    if mp == 0:
        return done("no-samples")
    q = modular_counts(sampler, streams["final"], mp, M, lo)
    value, thr, printed, rej = final_statistic(q, m, M, lo, h, S, eps)
    stats.update(final_value=value, final_threshold=thr, printed_threshold=printed)
    if rej:
        return done("final-statistic")
    return done(None, {"kind": "logconcave", "pieces": h.pieces_dict()})


test_logconcave.__test__ = False


def _moments(p: Pmf) -> tuple[float, float]:
    x = p.support.astype(float)
    mu = float(p.weights @ x)
    return mu, float(p.weights @ (x - mu) ** 2)


def logconcave_fourier_tail(p: Pmf, M: int, eps: float, theta: float = 100 / math.pi**2) -> tuple[float, float]:
    """``(tail, ell)``: exact ``sum_{|xi| > ell} |P_hat(xi)|^2`` with ``ell = theta P_max^2 M^2 / eps^2``."""
    ell = theta * float(p.weights.max()) ** 2 * M**2 / eps**2
    c = dft_1d(p, M)
    xi = c.freqs
    far = np.minimum(xi, M - xi) > ell
    return float(np.sum(np.abs(c.values[far]) ** 2)), ell

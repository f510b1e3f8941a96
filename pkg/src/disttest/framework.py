"""Generic three-stage tester: effective support, Fourier effective support, projection.

A class is described by a :class:`ClassPlugin`.  The framework owns all
randomness and sample accounting; plugins are pure functions.  Plugin
callbacks receive an ``info`` dict produced by ``identify_interval`` so that
the modulus and frequency set may depend on statistics gathered there;
``project`` also receives the projection stream for any randomized search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dft import FourierCoeffs, conj_symmetric, dft_1d, inverse_dft_1d
from .dist_core import Pmf, mod_reduce
from .errors import ConfigError
from .fourier_sparsity import test_fourier_support_1d
from .ledger import Ledger
from .projection import PolishConfig, project_siirv, moment_targeted_cover
from .report import TestReport, make_report
from .rng import as_streams
from .siirv import big_branch_modulus, build_sparse_set, check_effective_support, interval_for


@dataclass(frozen=True)
class ClassPlugin:
    name: str
    q_I: Callable[[float], int]
    identify_interval: Callable[[np.ndarray, float], tuple[int, int, dict]]
    M_of: Callable[[float, dict], int]
    S_of: Callable[[float, dict], np.ndarray]
    project: Callable[[float, FourierCoeffs, dict, np.random.Generator], tuple[bool, dict]]
    b_opt: Callable[[float, dict], float] | None = None


def _validate_static(plugin: ClassPlugin, eps: float) -> int:
    for field_name in ("q_I", "identify_interval", "M_of", "S_of", "project"):
        if not callable(getattr(plugin, field_name)):
            raise ConfigError(f"plugin {plugin.name}: {field_name} is not callable")
    if plugin.b_opt is not None and not callable(plugin.b_opt):
        raise ConfigError(f"plugin {plugin.name}: b_opt is not callable")
    q = plugin.q_I(eps)
    if not isinstance(q, (int, np.integer)) or q < 1:
        raise ConfigError(f"plugin {plugin.name}: q_I must be a positive integer")
    return int(q)


def _validate_fourier(plugin: ClassPlugin, M, S) -> None:
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise ConfigError(f"plugin {plugin.name}: M must be a positive integer")
    if S.size == 0 or 0 not in set(S.tolist()):
        raise ConfigError(f"plugin {plugin.name}: S must contain 0")
    if np.any((S < 0) | (S >= M)):
        raise ConfigError(f"plugin {plugin.name}: S must lie in [M]")
    if not conj_symmetric(S, M):
        raise ConfigError(f"plugin {plugin.name}: S must be conjugate-symmetric")
    if M < S.size:
        raise ConfigError(f"plugin {plugin.name}: M smaller than |S|")


def test_class(sampler, plugin: ClassPlugin, epsilon: float, rng, ledger: Ledger | None = None) -> TestReport:
    """Run the generic tester with ``plugin``."""
    ledger = ledger or Ledger()
    eps = epsilon
    q = _validate_static(plugin, eps)
    streams = as_streams(rng)
    params = {"plugin": plugin.name, "epsilon": eps}
    stats: dict = {"stages_run": []}
    samples = 0

    def done(stage, hyp=None):
        return make_report(f"plugin:{plugin.name}", stage, samples, streams, ledger, params, stats, hyp)

    x = np.asarray(sampler.draw_many(streams["moments"], q))
    samples += q
    lo, hi, info = plugin.identify_interval(x, eps)
    stats["stages_run"].append("identify")
    stats.update(I=[int(lo), int(hi)], info=info, q_I=q)

    ok, outside, m_sup = check_effective_support(sampler, lo, hi, eps, streams["support"], ledger.c_sup)
    samples += m_sup
    stats["stages_run"].append("support")
    stats.update(support_samples=m_sup, support_outside=outside)
    if not ok:
        return done("support-check")

    M = plugin.M_of(eps, info)
    S = np.unique(np.asarray(plugin.S_of(eps, info), dtype=np.int64))
    _validate_fourier(plugin, M, S)
    b = plugin.b_opt(eps, info) if plugin.b_opt is not None else (S.size + 1) / M
    out = test_fourier_support_1d(sampler, int(M), S, eps / (5 * math.sqrt(M)), b, streams["fourier"], anchor=lo, ledger=ledger)
    samples += out.stats["m_prime"]
    stats["stages_run"].append("fourier")
    stats.update(M=int(M), S_size=int(S.size), b=b, anchor=int(lo), fourier=out.stats)
    if out.rejected:
        return done(out.stage)

    accepted, details = plugin.project(eps, out.coeffs, info, streams["projection"])
    stats["stages_run"].append("projection")
    stats.update(projection=details)
    if not accepted:
        return done("projection")
    return done(None, {"kind": "plugin", "name": plugin.name, "details": details})


test_class.__test__ = False


# ---------------------------------------------------------------- demo plugin


def dirichlet_tail(ell: int, M: int, r: int) -> float:
    """Exact out-of-S energy of the uniform pmf on ``ell`` points mod ``M`` for ``S = {|xi| <= r}``."""
    c = dft_1d(Pmf(0, np.full(ell, 1.0 / ell)), M)
    xi = c.freqs
    far = np.minimum(xi, M - xi) > r
    return float(np.sum(np.abs(c.values[far]) ** 2))


def demo_radius(L_min: int, L: int, eps: float) -> int:
    """Smallest ``r`` whose raw tail is at most ``eps^2/100`` for every length in ``[L_min, L]``."""
    M = 2 * L + 1
    for r in range(0, L + 1):
        if all(dirichlet_tail(ell, M, r) <= eps**2 / 100 for ell in range(L_min, L + 1)):
            return r
    return L


def uniform_interval_plugin(L: int = 20, L_min: int = 10, accept_frac: float = 0.45) -> ClassPlugin:
    """Uniform distributions on ``{s, ..., s + ell - 1}`` with ``L_min <= ell <= L`` and unknown ``s``."""
    if not 1 <= L_min <= L:
        raise ConfigError("need 1 <= L_min <= L")
    M = 2 * L + 1
    radius_cache: dict = {}

    def q_I(eps):
        return max(1, math.ceil(4 / eps))

    def identify(x, eps):
        s = int(np.min(x))
        return s - L, s + L, {"start": s}

    def S_of(eps, info):
        if eps not in radius_cache:
            radius_cache[eps] = demo_radius(L_min, L, eps)
        r = radius_cache[eps]
        xi = np.arange(M)
        return xi[np.minimum(xi, M - xi) <= r]

    def project(eps, h, info, rng):
        lo = info["start"] - L
        H = inverse_dft_1d(h, lo).pmf.weights
        best = (math.inf, None)
        for ell in range(L_min, L + 1):
            for s in range(lo, lo + M - ell + 1):
                q = np.zeros(M)
                q[s - lo : s - lo + ell] = 1.0 / ell
                tv = 0.5 * float(np.abs(H - q).sum())
                if tv < best[0]:
                    best = (tv, (s, ell))
        acc = best[0] <= accept_frac * eps
        return acc, {"tv": best[0], "start": best[1][0], "length": best[1][1], "cutoff": accept_frac * eps}

    return ClassPlugin("uniform-interval", q_I, identify, lambda eps, info: M, S_of, project)


# ---------------------------------------------------------------- SIIRV plugin


def siirv_plugin(n: int, k: int, ledger: Ledger | None = None, polish: bool = True) -> ClassPlugin:
    """Big-variance branch of the SIIRV tester expressed as a plugin."""
    ledger = ledger or Ledger()

    def q_I(eps):
        return ledger.moment_samples_per_k * k

    def identify(x, eps):
        x = np.asarray(x, dtype=float)
        mu = float(x.mean())
        sig = math.sqrt(float(x.var(ddof=1)) + 1.0)
        M = big_branch_modulus(sig, eps)
        lo, hi = interval_for(mu, M)
        return lo, hi, {"mu_tilde": mu, "sigma_tilde": sig, "M": M}

    def S_of(eps, info):
        return build_sparse_set(info["M"], info["sigma_tilde"], k, eps, ledger.siirv_C1, ledger.siirv_C2).freqs

    def b_opt(eps, info):
        return 16 * k / info["sigma_tilde"]

    def project(eps, h, info, rng):
        cover = moment_targeted_cover(n, k, info["mu_tilde"], info["sigma_tilde"], ledger.cover_budget)
        cfg = PolishConfig(types=ledger.polish_types, restarts=ledger.polish_restarts) if polish else None
        res = project_siirv(h, cover, info["mu_tilde"], info["sigma_tilde"], eps, cfg, rng)
        return res.accepted, res.to_dict()

    return ClassPlugin(f"siirv-{n}-{k}", q_I, identify, lambda eps, info: info["M"], S_of, project, b_opt)


def default_b_holds(p: Pmf, M: int, S, eps: float, anchor: int = 0) -> tuple[bool, float, float]:
    """``||P mod M||^2 <= (|S| + eps^2/100) / M``."""
    red = mod_reduce(p, M, anchor)
    lhs = float(np.sum(red.weights**2))
    rhs = (len(S) + eps**2 / 100) / M
    return lhs <= rhs, lhs, rhs


# factories take (n, k, ledger); the demo plugin reads its interval lengths from n, k when given
PLUGINS: dict[str, Callable[..., ClassPlugin]] = {
    "uniform-interval": lambda n=None, k=None, ledger=None: uniform_interval_plugin(
        L=n or 20, L_min=k or max(1, (n or 20) // 2), accept_frac=(ledger or Ledger()).demo_accept_frac
    ),
    "siirv": lambda n, k, ledger=None: siirv_plugin(n, k, ledger),
}


def get_plugin(name: str, n: int | None = None, k: int | None = None, ledger: Ledger | None = None) -> ClassPlugin:
    if name not in PLUGINS:
        raise ConfigError(f"unknown plugin {name!r}; known: {sorted(PLUGINS)}")
    if name == "siirv" and (n is None or k is None):
        raise ConfigError("plugin siirv needs --n and --k")
    return PLUGINS[name](n=n, k=k, ledger=ledger)

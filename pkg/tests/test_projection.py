import math

import numpy as np
import pytest

from disttest.dft import FourierCoeffs, dft_1d
from disttest.dist_core import (
    Pmf,
    PmfSampler,
    SiirvSpec,
    binomial_pmf,
    convolve_exact,
    distances,
    sampler_for,
)
from disttest.errors import ConfigError, ResourceError
from disttest.projection import (
    Cover,
    CoverMember,
    PolishConfig,
    ShiftedBinomial,
    build_cover_desk,
    moment_filter,
    pbd_fit_shifted_binomial,
    pbd_project_small_variance,
    project_siirv,
    moment_targeted_cover,
)
from disttest.siirv import build_sparse_set


def coeffs_of(p, M, S):
    return dft_1d(p, M, S)


def test_member_coefficients_accept():
    n, k, M = 20, 2, 41
    S = np.array([0, 1, 2, 39, 40])
    cover = build_cover_desk(n, k, 0.5, 10**5)
    i = len(cover) // 3
    mem = cover.member(i)
    h = FourierCoeffs(M, S, mem.fourier(M, S))
    res = project_siirv(h, cover, mem.mean, math.sqrt(mem.var + 1), 0.1)
    assert res.accepted and res.distance <= 1e-20


def test_uniform_rejected_against_pbd_cover():
    n, M, eps = 20, 41, 0.1
    S = np.array([0, 1, 2, 3, 38, 39, 40])
    cover = build_cover_desk(n, 2, 0.5, 10**5)
    h = coeffs_of(Pmf(0, np.full(M, 1 / M)), M, S)
    res = project_siirv(h, cover, 10.0, math.sqrt(6), eps)
    # independent oracle: exact distance to every moment-compatible member
    mean, var = cover.moments()
    ok = moment_filter(mean, var, 10.0, math.sqrt(6))
    d = min(
        float(np.sum(np.abs(dft_1d(convolve_exact(cover.member(i).spec()), M, S).values - h.values) ** 2))
        for i in np.flatnonzero(ok)[::25]
    )
    assert d > eps**2 / 5
    assert not res.accepted and res.distance > eps**2 / 5


def test_moment_filter_skips():
    assert not moment_filter(np.array([0.0]), np.array([100.0]), 0.0, 30.0)[0]
    assert moment_filter(np.array([0.0]), np.array([100.0]), 0.0, 15.0)[0]


def test_empty_cover():
    c = Cover(0.1, 3, 2, np.zeros((0, 2)))
    with pytest.raises(ConfigError):
        project_siirv(FourierCoeffs(5, np.array([0]), np.array([1.0 + 0j])), c, 0, 1, 0.1)


def test_cover_bernoulli_grid():
    cover = build_cover_desk(1, 2, 0.1, 10**4)
    target = Pmf(0, [0.69, 0.31])
    tv = min(distances(convolve_exact(m.spec()), target)[0] for m in cover.members())
    assert tv <= 0.05


def test_cover_contains_binomial():
    gamma = 0.5
    cover = build_cover_desk(20, 2, gamma, 10**5)
    target = binomial_pmf(20, 0.5)
    tv = min(distances(convolve_exact(cover.member(i).spec()), target)[0] for i in range(0, len(cover), 7))
    assert tv <= gamma


def test_cover_trivial_radius():
    assert len(build_cover_desk(50, 3, 1.0, 10)) == 1


def test_cover_budget():
    with pytest.raises(ResourceError):
        build_cover_desk(200, 3, 0.01, 1000)


def test_cached_fourier_matches_exact(rng):
    n, k, M = 6, 3, 17
    cover = build_cover_desk(n, k, 0.9, 10**6)
    S = np.arange(M)
    idx = rng.choice(len(cover), 30, replace=False)
    rows = cover.fourier(idx, M, S)
    for i, row in zip(idx, rows):
        ref = dft_1d(convolve_exact(cover.member(int(i)).spec()), M, S).values
        assert np.max(np.abs(row - ref)) < 1e-10


def test_member_spec_realizes_shift():
    mem = ShiftedBinomial(7, 5, 0.3).member(12, 2)
    p = convolve_exact(mem.spec())
    assert p.at(7) == pytest.approx(0.7**5) and p.hi == 12


def test_shifted_binomial_closed_form(rng):
    for _ in range(50):
        sh, t, p = int(rng.integers(0, 60)), int(rng.integers(0, 501)), float(rng.uniform())
        M = int(rng.integers(3, 200))
        S = np.arange(M)
        ref = dft_1d(binomial_pmf(t, p, sh), M, S).values
        assert np.max(np.abs(ShiftedBinomial(sh, t, p).fourier(M, S) - ref)) < 1e-9


def test_monotone_in_threshold(rng):
    n, M = 20, 41
    S = np.array([0, 1, 2, 39, 40])
    cover = build_cover_desk(n, 2, 0.5, 10**5)
    for _ in range(10):
        w = rng.dirichlet(np.ones(M))
        h = coeffs_of(Pmf(0, w), M, S)
        verdicts = [project_siirv(h, cover, 10, 3, e).accepted for e in (0.05, 0.1, 0.2, 0.4, 0.8)]
        assert verdicts == sorted(verdicts)


def test_polish_returns_class_member():
    spec = SiirvSpec(np.array([[0.5, 0.3, 0.2]] * 20 + [[0.1, 0.1, 0.8]] * 20 + [[0.3, 0.6, 0.1]] * 20))
    M = 61
    S = np.arange(M)
    law = convolve_exact(spec)
    h = dft_1d(law, M, S)
    mu, var = spec.mean_var()
    cover = moment_targeted_cover(60, 3, mu, math.sqrt(var + 1), 4000)
    res = project_siirv(h, cover, mu, math.sqrt(var + 1), 0.1, PolishConfig(), np.random.default_rng(0))
    assert res.accepted
    q = convolve_exact(res.member.spec())
    assert float(np.sum(np.abs(dft_1d(q, M, S).values - h.values) ** 2)) == pytest.approx(res.distance, abs=1e-9)


EPS_GRID = math.sqrt(0.1)  # grid mesh 0.1 contains p = 0.5


def _pbd_setup(p):
    M = 21
    S = np.arange(M)
    return dft_1d(p, M, S)


def test_small_variance_exact_member():
    h = _pbd_setup(binomial_pmf(10, 0.5))
    out = pbd_project_small_variance(h, 5.0, math.sqrt(3.5), 10, EPS_GRID)
    assert out["accepted"]


def test_small_variance_uniform_rejected():
    M = 21
    h = _pbd_setup(Pmf(0, np.full(M, 1 / M)))
    out = pbd_project_small_variance(h, 10.0, math.sqrt(37), 20, 0.3)
    assert not out["accepted"] and out["distance"] > 0.3**2 / 4


def test_small_variance_noise_rejected(rng):
    h = _pbd_setup(binomial_pmf(10, 0.5))
    eps = EPS_GRID
    noise = rng.normal(size=h.values.size) + 1j * rng.normal(size=h.values.size)
    noise *= 3 * eps / np.linalg.norm(noise)
    noisy = FourierCoeffs(h.modulus, h.freqs, h.values + noise)
    assert not pbd_project_small_variance(noisy, 5.0, math.sqrt(3.5), 10, eps)["accepted"]


def _big_branch(sigma, eps):
    M = 1 + 2 * math.ceil(4 * sigma * math.sqrt(math.log(4 / eps)))
    return M, build_sparse_set(M, sigma, 2, eps).freqs


def test_shifted_binomial_fit_binomial():
    eps = 0.25
    s = sampler_for(SiirvSpec.binomial(400, 0.5))
    M, S = _big_branch(math.sqrt(101), eps)
    res = [pbd_fit_shifted_binomial(s, M, S, eps, np.random.default_rng(i)) for i in range(100)]
    assert np.mean([o["accepted"] for _, o in res]) >= 0.9
    trials = np.array([sb.trials for sb, _ in res])
    assert np.median(np.abs(trials - 400) / 400) <= 0.1


def test_shifted_binomial_fit_uniform():
    eps = 0.25
    s = PmfSampler(Pmf(0, np.full(101, 1 / 101)))
    M, S = _big_branch(math.sqrt(851), eps)
    res = [pbd_fit_shifted_binomial(s, M, S, eps, np.random.default_rng(i)) for i in range(100)]
    assert np.mean([not o["accepted"] for _, o in res]) >= 0.9
    assert all(o["stage"] == "moment-infeasible" for _, o in res)


def test_shifted_binomial_fit_shift():
    eps = 0.25
    s = PmfSampler(binomial_pmf(100, 0.3, 50))
    M, S = _big_branch(math.sqrt(22), eps)
    sb, out = pbd_fit_shifted_binomial(s, M, S, eps, np.random.default_rng(1))
    assert out["accepted"] and abs(sb.shift - 50) <= 10

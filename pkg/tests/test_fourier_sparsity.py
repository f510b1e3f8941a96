import numpy as np
import pytest

from disttest.dft import LatticeBasis, dft_1d, fundamental_domain, lattice_dual_ball
from disttest.dist_core import MultiPmf, MultiPmfSampler, Pmf, PmfSampler, sampler_for
from disttest.errors import DomainError
from disttest.fourier_sparsity import (
    decide_from_counts_1d,
    decide_from_counts_lattice,
    plancherel_decomposition,
    sample_budget_1d,
)
from disttest import fourier_sparsity as fs


def rate(fn, trials, seed=0):
    r = np.random.default_rng(seed)
    return np.mean([fn(r) for _ in range(trials)])


def test_uniform_dc_only_not_rejected():
    M = 16
    s = PmfSampler(Pmf(0, np.full(M, 1 / M)))
    r = rate(lambda g: not fs.test_fourier_support_1d(s, M, [0], 0.1, 1 / M, g).rejected, 200)
    assert r >= 0.7


def test_point_mass_norm_rejected():
    s = PmfSampler(Pmf(0, [1.0]))
    outs = [fs.test_fourier_support_1d(s, 64, [0], 0.1, 0.01, np.random.default_rng(i)) for i in range(50)]
    assert np.mean([o.stage == "norm-check" for o in outs]) >= 0.7


def test_norm_threshold_arithmetic():
    # m = m' = 100, b = 0.1, ||Q'||^2 = 0.02: 100^2 * 0.02 - 100 = 100 <= 1500
    counts = np.zeros(50, dtype=int)
    counts[:50] = 2
    out = decide_from_counts_1d(counts, 100, 50, np.arange(50), 0.1, 0.1)
    assert out.stats["l2_emp"] == pytest.approx(0.02)
    assert out.stats["norm_lhs"] == pytest.approx(100) and out.stats["norm_threshold"] == pytest.approx(1500)
    assert out.stage is None


def test_input_validation(rng):
    s = PmfSampler(Pmf(0, [1.0]))
    with pytest.raises(DomainError):
        fs.test_fourier_support_1d(s, 8, [1, 7], 0.1, 0.5, rng)
    with pytest.raises(DomainError):
        fs.test_fourier_support_1d(s, 8, [0, 1], 0.1, 0.5, rng)
    with pytest.raises(DomainError):
        fs.test_fourier_support_1d(PmfSampler(Pmf(5, [1.0])), 4, [0], 0.1, 0.5, rng)


def test_returned_coefficients_are_empirical_dft():
    M = 11
    law = Pmf(0, np.full(M, 1 / M))
    out = fs.test_fourier_support_1d(PmfSampler(law), M, [0, 1, 10], 0.2, 1 / M, np.random.default_rng(3))
    assert out.stage is None
    assert out.coeffs.get(0) == pytest.approx(1, abs=1 / out.stats["m_prime"] + 1e-9)
    # coefficients equal the DFT of the drawn counts; recompute from the same stream
    g = np.random.default_rng(3)
    mp = g.poisson(out.stats["m"])
    counts = g.multinomial(mp, law.weights)
    ref = dft_1d(Pmf(0, counts / mp, normalized=False), M, [0, 1, 10])
    assert np.allclose(out.coeffs.values, ref.values, atol=1e-12)


def test_sample_budget_formula():
    assert sample_budget_1d(100, 5, 0.1, 0.04, 2000) == int(np.ceil(2000 * (0.2 / 0.01 + 5 / 1.0 + 10)))


def test_lattice_point_mass_rejected():
    b = LatticeBasis([[6, 0], [0, 6]])
    s = MultiPmfSampler(MultiPmf(np.array([[0, 0]]), np.array([1.0])))
    S = lattice_dual_ball(b, 0)
    outs = [fs.test_fourier_support_lattice(s, b, S, 0.1, 0.01, np.random.default_rng(i)) for i in range(30)]
    assert np.mean([o.rejected for o in outs]) >= 0.7


def test_lattice_uniform_domain_accepted():
    b = LatticeBasis([[2, 0], [0, 2]])
    dom = fundamental_domain(b, np.zeros(2))
    s = MultiPmfSampler(MultiPmf(dom, np.full(4, 0.25)))
    S = lattice_dual_ball(b, 0)
    r = rate(lambda g: not fs.test_fourier_support_lattice(s, b, S, 0.1, 0.25, g).rejected, 100)
    assert r >= 0.7


def test_lattice_k1_agrees_with_1d(rng):
    M = 21
    basis = LatticeBasis([[M]])
    S1 = np.array([0, 1, 2, 19, 20])
    S = lattice_dual_ball(basis, 2)
    assert sorted(int(v) % M for v in S.vs[:, 0]) == S1.tolist()
    for law in (Pmf(0, np.full(M, 1 / M)), Pmf(0, np.eye(M)[4]), Pmf(0, 0.5 * np.eye(M)[0] + 0.5 * np.eye(M)[10])):
        counts = rng.multinomial(4000, law.weights)
        a = decide_from_counts_1d(counts, 4000, M, S1, 0.05, 1.0)
        pts = np.flatnonzero(counts)
        red = np.where(pts > M // 2, pts - M, pts)[:, None]
        b = decide_from_counts_lattice(red, counts[pts], 4000, S, 0.05, 1.0)
        assert a.stats["l2_emp"] == pytest.approx(b.stats["l2_emp"])
        assert a.stats["inS_energy"] == pytest.approx(b.stats["inS_energy"])
        assert a.rejected == b.rejected  # m' = m here, so the thresholds coincide


def test_plancherel_cases(rng):
    M = 12
    q = Pmf(0, rng.dirichlet(np.ones(M)))
    assert abs(plancherel_decomposition(q, np.arange(M), M).outside_energy) < 1e-12
    assert abs(plancherel_decomposition(Pmf(0, np.full(M, 1 / M)), [0], M).outside_energy) < 1e-12
    S = [0, 1, 2, 3, 9, 10, 11]
    exact = Pmf(0, rng.dirichlet(np.ones(M)))
    split = plancherel_decomposition(q, S, M, exact)
    assert split.residual < 1e-9 and split.outside_energy >= -1e-9

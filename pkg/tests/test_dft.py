import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import pmf_weights
from disttest.dft import (
    FourierCoeffs,
    LatticeBasis,
    dft_1d,
    dft_piecewise_exponential,
    full_dual,
    fundamental_domain,
    fundamental_reduce,
    inverse_dft_1d,
    lattice_dft,
    lattice_dft_pmf,
    lattice_dual_ball,
    plancherel_residual,
)
from disttest.dist_core import MultiPmf, Pmf, mod_reduce
from disttest.errors import DegenerateGeometryError


def e(x):
    return cmath.exp(-2j * math.pi * x)


def naive_dft(p, M, xi):
    return sum(w * e(xi * j / M) for j, w in zip(p.support, p.weights))


def test_point_mass_all_ones():
    c = dft_1d(Pmf(0, [1.0]), 7)
    assert np.allclose(c.values, 1)


def test_uniform_cancels():
    c = dft_1d(Pmf(0, np.full(9, 1 / 9)), 9)
    assert c.get(0) == pytest.approx(1)
    assert np.max(np.abs(c.values[1:])) < 1e-12


def test_half_half_at_nyquist():
    assert abs(dft_1d(Pmf(0, [0.5, 0.5]), 2, [1]).get(1)) < 1e-15


@given(pmf_weights(max_size=20), st.integers(-40, 40), st.integers(1, 25))
def test_matches_defining_sum(w, off, M):
    p = Pmf(off, w)
    c = dft_1d(p, M)
    for xi in range(M):
        assert abs(c.get(xi) - naive_dft(p, M, xi)) < 1e-12


@given(pmf_weights(), pmf_weights(), st.floats(0, 1), st.integers(2, 40))
def test_linearity(a, b, t, M):
    n = max(a.size, b.size)
    A, B = np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size))
    mix = Pmf(0, t * A + (1 - t) * B)
    lhs = dft_1d(mix, M).values
    rhs = t * dft_1d(Pmf(0, A), M).values + (1 - t) * dft_1d(Pmf(0, B), M).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@given(pmf_weights(max_size=60), st.integers(-30, 30), st.integers(1, 30))
def test_periodicity(w, off, M):
    p = Pmf(off, w)
    assert np.max(np.abs(dft_1d(p, M).values - dft_1d(mod_reduce(p, M, 0), M).values)) < 1e-12


@given(pmf_weights(), st.integers(2, 40))
def test_conjugate_symmetry(w, M):
    c = dft_1d(Pmf(0, w), M)
    for xi in range(1, M):
        assert abs(c.get(M - xi) - np.conj(c.get(xi))) < 1e-12


def test_inverse_cases():
    inv = inverse_dft_1d(FourierCoeffs(5, np.arange(5), np.ones(5, complex)), 0)
    assert np.allclose(inv.pmf.weights, [1, 0, 0, 0, 0])
    inv = inverse_dft_1d(FourierCoeffs(4, np.array([0]), np.array([1.0 + 0j])), 0)
    assert np.allclose(inv.pmf.weights, 0.25)


def test_inverse_flags_asymmetric_sets():
    c = FourierCoeffs(8, np.array([0, 1]), np.array([1.0, 0.5j]))
    assert inverse_dft_1d(c, 0).flagged


@given(pmf_weights(min_size=16, max_size=16), st.integers(-10, 10))
def test_round_trip(w, start):
    p = Pmf(start, w)
    inv = inverse_dft_1d(dft_1d(p, 16), start)
    assert np.max(np.abs(inv.pmf.weights - w)) < 1e-10 and not inv.flagged


def test_plancherel_cases(rng):
    assert plancherel_residual(Pmf(3, [1.0]), 8) < 1e-12
    assert plancherel_residual(Pmf(0, np.full(8, 1 / 8)), 8) < 1e-12
    assert plancherel_residual(Pmf(0, rng.dirichlet(np.ones(32))), 32) < 1e-10


def _pieces(rng, M):
    cuts = np.sort(rng.choice(np.arange(1, M - 1), 2, replace=False))
    bounds = [(0, cuts[0] - 1), (cuts[0], cuts[1] - 1), (cuts[1], M - 1)]
    return [((a, b), (rng.normal(-3, 1), rng.normal(0, 0.3))) for a, b in bounds]


def test_piecewise_matches_naive(rng):
    for _ in range(20):
        pieces = _pieces(rng, 64)
        x = np.arange(64)
        w = np.zeros(64)
        for (a, b), (al, be) in pieces:
            w[a : b + 1] = np.exp(al + be * x[a : b + 1])
        # normalize so the comparison is on a pmf
        shift = math.log(w.sum())
        pieces = [(ab, (al - shift, be)) for ab, (al, be) in pieces]
        w = w / w.sum()
        ref = dft_1d(Pmf(0, w, normalized=False), 64)
        got = dft_piecewise_exponential(pieces, 64, np.arange(64))
        assert np.max(np.abs(ref.values - got.values)) < 1e-9


def test_piecewise_simple_cases():
    M = 12
    c = dft_piecewise_exponential([((0, M - 1), (math.log(1 / M), 0.0))], M, np.arange(M))
    assert c.get(0) == pytest.approx(1) and np.max(np.abs(c.values[1:])) < 1e-12
    c = dft_piecewise_exponential([((5, 5), (0.3, 0.0))], M, [3])
    assert c.get(3) == pytest.approx(math.exp(0.3) * e(3 * 5 / M))


def test_fundamental_reduce_cases():
    assert fundamental_reduce(np.array([[7]]), LatticeBasis([[5]]), [0.0]).tolist() == [[2]]
    b = LatticeBasis([[4, 0], [0, 4]])
    assert fundamental_reduce(np.array([[5, -3]]), b, [0.0, 0.0]).tolist() == [[1, 1]]
    assert fundamental_reduce(np.array([[1, 2]]), b, [0.0, 0.0]).tolist() == [[1, 2]]


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3), st.integers(0, 2**31))
def test_fundamental_reduce_invariants(a, b, c, d, seed):
    Mx = np.array([[a, b], [c, d]])
    if round(np.linalg.det(Mx)) == 0:
        return
    basis = LatticeBasis(Mx)
    r = np.random.default_rng(seed)
    x = r.integers(-50, 50, size=(20, 2))
    center = r.normal(0, 3, size=2)
    y = fundamental_reduce(x, basis, center)
    coef = np.linalg.solve(Mx.astype(float), (y - x).T)
    assert np.allclose(coef, np.round(coef), atol=1e-9)  # same lattice coset
    t = np.linalg.solve(Mx.astype(float), (y - center).T)
    assert np.all(t > -0.5 - 1e-9) and np.all(t <= 0.5 + 1e-9)
    assert np.array_equal(fundamental_reduce(y, basis, center), y)  # idempotent


def test_fundamental_domain_size():
    b = LatticeBasis([[7, 2], [-3, 9]])
    dom = fundamental_domain(b, np.array([1.3, -0.4]))
    assert dom.shape[0] == abs(7 * 9 + 6)


def test_singular_basis():
    with pytest.raises(DegenerateGeometryError):
        LatticeBasis([[1, 2], [2, 4]])


def test_dual_ball_sizes():
    b = LatticeBasis([[11, 3], [-2, 13]])
    assert len(lattice_dual_ball(b, 0)) == 1
    assert len(lattice_dual_ball(b, 1)) <= 5
    assert len(lattice_dual_ball(b, 1.5)) <= 9
    assert len(lattice_dual_ball(b, 1e6)) == b.abs_det


def test_lattice_point_mass_and_example():
    b = LatticeBasis([[2, 0], [0, 2]])
    dual = full_dual(b)
    c = lattice_dft(np.array([[0, 0]]), np.array([1.0]), dual)
    assert np.allclose(c.values, 1)
    p = MultiPmf(np.array([[1, 0], [0, 1]]), np.array([0.5, 0.5]))
    ball = lattice_dual_ball(b, 1)
    c = lattice_dft_pmf(p, ball)
    # both nonzero classes of L*/Z^2 hit by the unit ball give 0.5 e(1/2) + 0.5 = 0
    hits = [val for v, val in zip(c.dual.vs, c.values) if np.any(v % 2)]
    assert len(hits) == 2 and max(abs(h) for h in hits) < 1e-15


@given(pmf_weights(min_size=2, max_size=30), st.integers(2, 30))
def test_lattice_k1_matches_1d(w, M):
    p = Pmf(0, w)
    basis = LatticeBasis([[M]])
    pts = fundamental_reduce(p.support[:, None], basis, [0.0])
    c = lattice_dft(pts, p.weights, full_dual(basis))
    ref = dft_1d(p, M)
    for v, val in zip(c.dual.vs[:, 0], c.values):
        assert abs(val - ref.get(int(v) % M)) < 1e-12


def test_lattice_plancherel(rng):
    b = LatticeBasis([[5, 1], [-2, 4]])
    dom = fundamental_domain(b, np.zeros(2))
    w = rng.dirichlet(np.ones(dom.shape[0]))
    c = lattice_dft(dom, w, full_dual(b))
    assert abs(np.sum(w**2) - c.energy() / b.abs_det) < 1e-12

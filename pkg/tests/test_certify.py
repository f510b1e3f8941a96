import numpy as np
import pytest

from disttest.certify import siirv_far_certificate, support_gap, tv_lower_bound, tv_to_bounded_variance, tv_to_unimodal
from disttest.dist_core import Pmf, SiirvSpec, binomial_pmf, convolve_exact
from disttest.errors import DomainError


def test_in_class_is_zero():
    assert tv_to_unimodal(binomial_pmf(20, 0.5), 0, 20) == pytest.approx(0, abs=1e-9)
    assert tv_to_bounded_variance(binomial_pmf(20, 0.5), 0, 20, 5.0) == pytest.approx(0, abs=1e-9)


def test_two_point_unimodal_oracle():
    # p = (1/2, 0, 1/2): the best unimodal q moves 1/4 into the gap, TV 1/4
    p = Pmf(0, [0.5, 0.0, 0.5])
    assert tv_to_unimodal(p, 0, 2) == pytest.approx(0.25, abs=1e-9)


def test_support_gap_and_monotone_relaxation():
    p = Pmf(0, np.full(10, 0.1))
    assert support_gap(p, 0, 4) == pytest.approx(0.5)
    # dropping the variance constraint can only shrink the bound
    assert tv_lower_bound(p, 0, 9, unimodal=True, var_max=1.0) >= tv_to_unimodal(p, 0, 9) - 1e-9


def test_brute_force_variance_oracle():
    # on 3 points with var <= 0 only point masses remain: TV = 1 - max p
    p = Pmf(0, [0.2, 0.5, 0.3])
    got = tv_to_bounded_variance(p, 0, 2, 1e-9, cell=1e-3)
    assert got == pytest.approx(0.5, abs=2e-3)


def test_far_certificates():
    u = Pmf(0, np.full(401, 1 / 401))
    assert siirv_far_certificate(u, 100, 2) > 0.8
    assert siirv_far_certificate(convolve_exact(SiirvSpec.binomial(100, 0.5)), 100, 2) < 1e-6


def test_bad_args():
    with pytest.raises(DomainError):
        tv_lower_bound(Pmf(0, [1.0]), 3, 2)
    with pytest.raises(DomainError):
        tv_lower_bound(Pmf(0, [1.0]), 0, 2, var_max=1.0, full_mass=False)

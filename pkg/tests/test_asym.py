import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chiralcp import asym
from chiralcp.asym import ScalingParams
from chiralcp.errors import DomainError
from chiralcp.quad import integrate_interval
from chiralcp.specfun import bessel_i, bessel_j

from conftest import rel


def test_inverse_cp_limit_examples():
    assert abs(asym.inverse_cp_limit(1, 1e-6) - 1 / math.sqrt(2 * math.pi)) < 1e-4
    assert rel(asym.inverse_cp_limit(0, 1.0),
               math.sqrt(2 / math.pi) * float(mp.besselk(0, 2))) < 1e-12
    for l in (0, 1, 2):
        assert asym.inverse_cp_limit(l, 4.0) < asym.inverse_cp_limit(l, 1.0)


def test_cp_limit_examples():
    assert abs(asym.cp_limit(0, 1e-12) - math.sqrt(2 * math.pi)) < 1e-10
    assert rel(asym.cp_limit(1, 1.0), -math.sqrt(2 * math.pi) * bessel_i(1, 2.0)) < 1e-13
    for xi in (0.3, 2.0):
        signs = [math.copysign(1, asym.cp_limit(l, xi)) for l in range(4)]
        assert signs == [1, -1, 1, -1]


def test_kernel_limit_examples():
    a, b = 1.0, 4.0
    direct = integrate_interval(lambda t: bessel_j(0, 2 * np.sqrt(a * t)) * bessel_j(0, 2 * np.sqrt(b * t)),
                                0.0, 1.0, 96).real
    assert rel(asym.kernel_limit(0, a, b), direct) <= 1e-10
    for l in (0, 1, 3):
        x = 1.7
        assert rel(asym.kernel_limit(l, x, x), asym.kernel_limit(l, x, x * (1 + 1e-6))) <= 1e-5


def test_kernel_limit_counting_is_linear_in_sqrt():
    # K(a, a) ~ 1/(pi sqrt(a)) for large a, so the count up to Lambda ~ 2 sqrt(Lambda)/pi
    def count(lam):
        return integrate_interval(lambda s: np.array([asym.kernel_limit(0, t, t) for t in s]),
                                  1e-9, lam, 200).real

    big = count(400.0)
    assert abs(big / (2 * math.sqrt(400.0) / math.pi) - 1) < 0.05
    assert count(100.0) < count(200.0) < big


@pytest.mark.parametrize("l", range(5))
@pytest.mark.parametrize("a,b", [(0.5, 1.0), (1.0, 3.0), (2.0, 5.0), (0.5, 5.0)])
def test_kernel_routes_agree(l, a, b):
    c = asym.kernel_limit(l, a, b, method="closed")
    q = asym.kernel_limit(l, a, b, method="quadrature")
    s = asym.kernel_limit(l, a, b, method="subtracted")
    assert rel(q, c) <= 1e-9 and rel(s, c) <= 1e-9


def test_identity_examples():
    assert asym.kernel_identity_check(0, 1.0, 2.0)[2] <= 1e-12
    assert asym.kernel_identity_check(2, 1.0, 3.0)[2] <= 1e-10
    assert asym.kernel_identity_check(4, 0.5, 5.0)[2] <= 1e-9
    with pytest.raises(DomainError):
        asym.kernel_identity_check(1, 2.0, 2.0)


@given(st.integers(0, 4), st.floats(0.2, 6.0), st.floats(0.2, 6.0))
def test_identity_property(l, a, b):
    if abs(a - b) < 1e-3:
        return
    assert asym.kernel_identity_check(l, a, b)[2] <= 1e-9


def test_g_limit_example():
    assert rel(asym.g_limit(1, 0.5, 1.0), math.exp(-0.75) * 0.75) < 1e-14
    assert abs(asym.g_limit(1, 0.5, 1.0) - 0.35427) < 1e-5


def test_scaling_params():
    sc = ScalingParams(r=0.3)
    assert sc.r + sc.r_star == 1
    with pytest.raises(DomainError, match="R < 1"):
        ScalingParams(r=1.2)
    with pytest.raises(DomainError):
        ScalingParams(r=0.0)


def test_inverse_cp_sweep_example():
    t = asym.convergence_sweep("inverse_cp", 0, ScalingParams(r=0.5, xi=1.0), [20, 40, 80])
    assert t.decreasing and t.final_rel_err <= 0.05
    assert [r.n for r in t.rows] == [20, 40, 80]


def test_g_sweep_example():
    t = asym.convergence_sweep("g", 1, ScalingParams(r=0.5, w=math.sqrt(0.5), a=2.0), [10, 30, 100])
    assert t.decreasing


def test_cp_sweep_conventions_consistent():
    sc = ScalingParams(r=0.5, xi=1.0)
    stmt = asym.convergence_sweep("cp", 0, sc, [20, 40])
    proof = asym.convergence_sweep("cp", 0, ScalingParams(r=0.5, xi=1.0 / sc.r_star), [20, 40],
                                   convention="proof")
    for a, b in zip(stmt.rows, proof.rows):
        assert rel(a.finite, b.finite) < 1e-12 and rel(a.limit, b.limit) < 1e-12


def test_sweep_validation():
    sc = ScalingParams()
    with pytest.raises(DomainError):
        asym.convergence_sweep("cp", 1, sc, [10])
    with pytest.raises(DomainError):
        asym.convergence_sweep("kernel", 0, sc, [10, 100])
    with pytest.raises(DomainError):
        asym.convergence_sweep("g", 0, sc, [10])
    with pytest.raises(DomainError):
        asym.convergence_sweep("inverse_cp", 0, sc, [40, 20])
    with pytest.raises(DomainError):
        asym.convergence_sweep("moment", 0, sc, [10])

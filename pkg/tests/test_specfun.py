import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chiralcp.errors import DomainError
from chiralcp.specfun import (
    bessel_i,
    bessel_j,
    bessel_k,
    gamma_lower,
    gamma_upper,
    hermite_monic,
    hyp0f1,
    laguerre,
    laguerre_monic,
    log_gamma_upper,
    log_laguerre_monic,
    log_vandermonde,
    macdonald_integral,
    vandermonde,
)
from chiralcp.quad import gauss_hermite_rule, integrate_interval

from conftest import rel


def test_hyp0f1_examples():
    assert hyp0f1(1, 0.0) == 1.0
    assert rel(hyp0f1(1, 1.0), 2.2795853023360673) < 1e-14
    assert rel(hyp0f1(1, -4.0), bessel_j(0, 4.0)) < 1e-12


@pytest.mark.parametrize("b,x", [(1, 0.3), (2, -7.5), (3, 40.0), (5, -250.0), (1, 1e4), (4, -1e4)])
def test_hyp0f1_against_mpmath(b, x):
    ref = mp.hyp0f1(b, x)
    assert rel(hyp0f1(b, x), float(ref)) < 1e-12


@given(st.floats(0.0, 100.0))
def test_hyp0f1_is_bessel_i(x):
    assert rel(hyp0f1(1, x), bessel_i(0, 2 * math.sqrt(x))) <= 1e-11


@given(st.floats(0.0, 100.0))
def test_hyp0f1_negative_is_bessel_j(y):
    a, b = hyp0f1(1, -y), bessel_j(0, 2 * math.sqrt(y))
    # near zeros of J_0 compare absolutely
    assert abs(a - b) <= 1e-10 * max(abs(b), 1e-3)


def test_hyp0f1_range():
    with pytest.raises(DomainError):
        hyp0f1(1, 2e6)
    with pytest.raises(DomainError):
        hyp0f1(0, 1.0)


def test_bessel_examples():
    assert bessel_i(0, 0.0) == 1.0
    assert bessel_j(0, 0.0) == 1.0
    quad = macdonald_integral(0, 1.0)  # int e^{-1/a - a} da / a^0 ... L=1 form below
    val = float(mp.quad(lambda a: mp.exp(-1 / a - a), [0, 1, mp.inf]))
    assert rel(2 * bessel_k(1, 2.0), val) < 1e-12
    assert quad > 0
    x, l = 3.0, 2
    assert abs(bessel_j(l - 1, x) + bessel_j(l + 1, x) - 2 * l / x * bessel_j(l, x)) < 1e-11


@pytest.mark.parametrize("n", [0, 1, 2, 5, 16])
@pytest.mark.parametrize("x", [0.1, 1.0, 7.0, 30.0, 50.0])
def test_bessel_ij_against_mpmath(n, x):
    assert rel(bessel_i(n, x), float(mp.besseli(n, x))) < 1e-12
    ref = float(mp.besselj(n, x))
    assert abs(bessel_j(n, x) - ref) < 1e-12 * max(1.0, abs(ref)) * 10


@pytest.mark.parametrize("n", [0, 1, 2, 4])
@pytest.mark.parametrize("x", [0.05, 1.0, 2.0, 10.0])
def test_bessel_k_against_mpmath(n, x):
    assert rel(bessel_k(n, x), float(mp.besselk(n, x))) < 1e-12


def test_bessel_k_domain():
    with pytest.raises(DomainError):
        bessel_k(0, 0.0)
    with pytest.raises(DomainError):
        bessel_j(17, 1.0)


def test_laguerre_examples():
    assert laguerre(1, 3.0) == -2.0
    assert laguerre_monic(2, 1.0) == -1.0
    # e^{-x} L_n(x) = (1/n!) d^n/dx^n (e^{-x} x^n) at n=3, x=0.7 by central differences
    n, x, h = 3, 0.7, 2e-3
    g = lambda t: math.exp(-t) * t**n
    d3 = (g(x + 2 * h) - 2 * g(x + h) + 2 * g(x - h) - g(x - 2 * h)) / (2 * h**3)
    assert abs(math.exp(-x) * laguerre(n, x) - d3 / 6) < 2e-5 * abs(d3 / 6) + 1e-7


@pytest.mark.parametrize("n", [0, 3, 10, 25, 60])
@pytest.mark.parametrize("x", [-3.0, 0.5, 12.0])
def test_laguerre_against_mpmath(n, x):
    assert rel(laguerre(n, x), float(mp.laguerre(n, 0, x))) < 1e-10
    assert rel(laguerre(n, x, alpha=2), float(mp.laguerre(n, 2, x))) < 1e-10
    mon = (-1) ** n * mp.factorial(n) * mp.laguerre(n, 0, x)
    assert rel(laguerre_monic(n, x), float(mon)) < 1e-10
    lm, sg = log_laguerre_monic(n, x)
    assert abs(lm - float(mp.log(abs(mon)))) < 1e-10 * max(1.0, abs(lm))


@pytest.mark.parametrize("n", range(1, 6))
def test_laguerre_monic_is_monic(n):
    x = 1e4
    assert abs(laguerre_monic(n, x) / x**n - 1.0) < 1e-2 * n  # leading correction -n(n)/x
    x = 1e8
    assert abs(laguerre_monic(n, x) / x**n - 1.0) < 1e-6


def test_hermite_examples():
    assert hermite_monic(2, 0.0) == -1.0
    assert hermite_monic(3, 2.0) == 2.0
    rule = gauss_hermite_rule(10)
    val = np.sum(rule.weights * hermite_monic(2, rule.nodes) * hermite_monic(3, rule.nodes))
    assert abs(val) < 1e-10


def test_gamma_upper_examples():
    assert rel(gamma_upper(1, 2.0), math.exp(-2.0)) < 1e-15
    assert gamma_upper(3, 0.0) == 2.0
    ref = float(mp.quad(lambda t: t**3 * mp.exp(-t), [1.5, mp.inf]))
    assert abs(gamma_upper(4, 1.5) - ref) < 1e-10


@given(st.integers(1, 15), st.floats(0.0, 60.0))
def test_gamma_completeness(n, x):
    total = gamma_upper(n, x) + gamma_lower(n, x)
    assert rel(total, math.factorial(n - 1)) <= 1e-12


@pytest.mark.parametrize("n,x", [(40, 20.0), (80, 40.0), (150, 3.0)])
def test_log_gamma_upper_against_mpmath(n, x):
    ref = float(mp.log(mp.gammainc(n, x)))
    assert abs(log_gamma_upper(n, x) - ref) < 1e-12 * abs(ref)


def test_vandermonde_examples():
    assert vandermonde([5.0]) == 1.0
    assert vandermonde([1.0, 2.0, 4.0]) == 6.0
    assert vandermonde([2.0, 1.0, 4.0]) == -6.0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=7, unique=True))
def test_vandermonde_log_form(pts):
    v = vandermonde(pts)
    lm, sg = log_vandermonde(pts)
    if v != 0:
        assert np.sign(v) == np.sign(sg)
        assert abs(math.log(abs(v)) - lm) < 1e-10 * max(1.0, abs(lm))


@pytest.mark.parametrize("k", range(5))
@pytest.mark.parametrize("b", [0.5, 2.0, 5.0])
def test_one_minus_tau_moment_of_j0(k, b):
    f = lambda t: (1 - t) ** k * bessel_j(0, b * np.sqrt(t))
    lhs = integrate_interval(f, 0.0, 1.0, 96).real
    rhs = 2 * math.factorial(k) / b * (2 / b) ** k * bessel_j(k + 1, b)
    assert rel(lhs, rhs) <= 1e-9

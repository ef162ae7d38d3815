import math

import mpmath as mp
import numpy as np
import pytest

from chiralcp import exact, oracle
from chiralcp.errors import DomainError
from chiralcp.exact import Degenerate, Distinct, EnsembleParams
from chiralcp.oracle import OracleParams
from chiralcp.quad import gauss_laguerre_rule, integrate_semi_infinite
from chiralcp.specfun import hyp0f1, laguerre

from conftest import rel

E_E1_1 = float(mp.e * mp.e1(1))


def P(n, l, omegas):
    return EnsembleParams(n, l, Distinct(tuple(omegas)))


def D(n, l, z_sq):
    return EnsembleParams(n, l, Degenerate(z_sq, n))


def _gram_unscaled(params):
    gd = oracle.gram(params)
    return gd.g * np.exp(gd.log_scale)[:, None] * np.exp(params.omegas)[None, :]


def test_gram_trivial():
    assert np.allclose(oracle.gram(D(1, 0, 0.0)).g, [[1.0]])
    w = 0.9
    direct = integrate_semi_infinite(lambda x: hyp0f1(1, w * x), 1e-12, weighted=True).value
    assert rel(_gram_unscaled(P(1, 0, (w,)))[0, 0], direct) < 1e-10
    assert rel(direct, math.exp(w)) < 1e-10


def test_gram_against_quadrature():
    p = P(2, 1, (0.4, 1.7))
    g = _gram_unscaled(p)
    for i in range(2):
        for j, w in enumerate(p.omegas):
            direct = integrate_semi_infinite(
                lambda x: x ** (i + 1) * hyp0f1(1, w * x), 1e-12, weighted=True).value
            assert rel(g[i, j], direct) <= 1e-10


def test_gram_inverse():
    gd = oracle.gram(P(4, 2, (0.3, 0.9, 1.4, 2.2)))
    assert np.max(np.abs(gd.g @ gd.c - np.eye(4))) < 1e-8


def test_oracle_range():
    with pytest.raises(DomainError):
        oracle.gram(OracleParams(13, 0, Distinct(tuple(0.1 * k + 0.1 for k in range(13)))))
    # L = 4 is allowed for the oracle only
    assert oracle.gram(OracleParams(2, 4, Distinct((0.5, 1.0)))).g.shape == (2, 2)


def test_inverse_cp_oracle_examples():
    assert rel(oracle.inverse_cp_oracle(D(1, 0, 0.0), -1.0), -E_E1_1) < 1e-10


def test_last_column_closed_form():
    om = (0.3, 1.0, 2.0)
    got = oracle.last_column_coefficients(P(3, 0, om))
    want = [math.exp(-w) / math.prod(w - t for t in om if t != w) for w in om]
    assert np.allclose(got, want, rtol=1e-9, atol=0)


@pytest.mark.parametrize("p", [P(3, 0, (0.3, 1.0, 2.0)), D(4, 1, 0.6), P(2, 2, (0.5, 1.5)),
                               D(5, 2, 1.2)])
@pytest.mark.parametrize("y", [-0.5, -3.0, 1 + 2j])
def test_inverse_cp_oracle_vs_exact(p, y):
    assert rel(oracle.inverse_cp_oracle(p, y), exact.inverse_cp(p, y).value) <= 1e-6


def test_cp_oracle_examples():
    assert rel(oracle.cp_oracle(D(1, 0, 0.0), 5.0), 4.0) < 1e-12
    for p in (P(3, 1, (0.2, 1.0, 2.5)), D(4, 2, 0.7)):
        assert abs(oracle.cp_oracle(p, 1e6) / 1e6**p.n - 1) < 1e-4
        for z in (-0.5, 2 + 1j):
            assert rel(oracle.cp_oracle(p, z), exact.cp(p, z).value) <= 1e-8


def test_ratio_and_kernel_examples():
    p = P(2, 1, (0.5, 1.5))
    assert abs(oracle.ratio_oracle(p, -1.0 + 0.5j, -1.0 + 0.5j) - 1) < 1e-10
    for x, y in ((0.2, 0.9), (1.5, 0.4)):
        assert rel(complex(oracle.kernel_oracle(D(1, 0, 0.0), x, y)), math.exp(-y)) < 1e-12


def test_kernel_oracle_projection():
    p = P(3, 0, (0.2, 1.0, 2.5))
    rule = gauss_laguerre_rule(160)
    t = rule.nodes
    w = np.exp(rule.log_weights + t)
    x, y = 0.5, 1.2
    kx = np.array([complex(oracle.kernel_oracle(p, x, ti)) for ti in t])
    ky = np.array([complex(oracle.kernel_oracle(p, ti, y)) for ti in t])
    repro = np.sum(w * kx * ky)
    assert rel(repro, complex(oracle.kernel_oracle(p, x, y))) <= 1e-5
    for q in (p, D(3, 1, 0.8)):
        trace = np.sum(w * oracle.kernel_oracle(q, t, t))
        assert abs(trace - 3) < 1e-6


@pytest.mark.parametrize("x,y", [(0.5, 1.2), (2.0, 0.7)])
def test_kernel_is_jump_of_ratio(x, y):
    # the ratio average has a cut on [0, inf); its jump across the cut at z = y
    # is 2 pi i (x - y) K(x, y).  Linear-in-delta error removed by Richardson.
    p = P(2, 0, (0.5, 1.5))

    def jump(d):
        below = oracle.ratio_oracle(p, x, y - 1j * d)
        above = oracle.ratio_oracle(p, x, y + 1j * d)
        return (below - above) / (2j * math.pi)

    d = 1e-3
    est = 2 * jump(d / 2) - jump(d)
    assert rel(est, (x - y) * complex(oracle.kernel_oracle(p, x, y))) <= 1e-4


def test_f_integral_single():
    for l in range(4):
        for eps in (0.0, 0.3, 2.0):
            want = math.factorial(l) * math.exp(eps) * laguerre(l, -eps)
            assert rel(oracle.f_integral(l, [eps]), want) < 1e-12
            direct = integrate_semi_infinite(lambda y: y**l * hyp0f1(1, eps * y), 1e-12,
                                             weighted=True).value
            assert rel(direct, want) < 1e-10


@pytest.mark.parametrize("n", range(1, 6))
@pytest.mark.parametrize("l", range(3))
def test_appendix_b_vs_gram(n, l):
    p = P(n, l, [0.3 + 0.45 * j for j in range(n)])
    for y in (-0.5, -2.0, 1 + 2j):
        assert rel(oracle.inverse_cp_appendix_b(p, y), oracle.inverse_cp_oracle(p, y)) <= 1e-8


def test_appendix_b_source_symmetry():
    y = -0.8 + 0.3j
    a = oracle.inverse_cp_appendix_b(P(2, 1, (0.4, 1.9)), y)
    b = oracle.inverse_cp_appendix_b(P(2, 1, (1.9, 0.4)), y)
    assert abs(a - b) <= 1e-10 * abs(a)


@pytest.mark.parametrize("n,l", [(2, 0), (4, 1), (6, 2)])
def test_appendix_b_degenerate(n, l):
    p = D(n, l, 0.8)
    y = -2.0
    ref = oracle.inverse_cp_oracle(p, y)
    assert rel(oracle.inverse_cp_appendix_b(p, y), ref) <= 1e-8
    # the spread-and-extrapolate variant is far less accurate and needs a wide spread
    assert rel(oracle.inverse_cp_appendix_b(p, y, spread=0.8), ref) <= 1e-4


def test_jpdf_normalised():
    rule = gauss_laguerre_rule(60)
    w = np.exp(rule.log_weights + rule.nodes)
    p1 = P(1, 1, (0.7,))
    assert abs(np.sum(w * oracle.jpdf(p1, rule.nodes[:, None])) - 1) < 1e-10
    p2 = P(2, 0, (0.4, 1.3))
    pts = np.stack(np.meshgrid(rule.nodes, rule.nodes, indexing="ij"), axis=-1)
    total = np.sum(np.outer(w, w) * oracle.jpdf(p2, pts))
    assert abs(total - 1) < 1e-8

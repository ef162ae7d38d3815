"""Quadrature: Gauss rules via Golub-Welsch, circle rules, semi-infinite integration."""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError
from .linalg import tridiag_eigen
from .specfun import exp_e1


@dataclass(frozen=True)
class QuadRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    order: int
    log_weights: np.ndarray | None = None


@dataclass
class EvalResult:
    """A value with an absolute error estimate and evaluation metadata."""

    value: complex
    abs_err: float
    meta: dict = field(default_factory=dict)

    @property
    def real(self) -> float:
        return float(np.real(self.value))


# ---------------------------------------------------------------------------
# Gauss rules

def _laguerre_pair(n: int, x: np.ndarray):
    """Scaled (L_n, L_{n-1}) and the log scale, by forward recurrence."""
    prev = np.ones_like(x)
    cur = 1.0 - x
    log_scale = np.zeros_like(x)
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
        big = np.abs(cur) > 1e100
        if np.any(big):
            s = np.where(big, np.abs(cur), 1.0)
            cur, prev = cur / s, prev / s
            log_scale += np.log(s)
    return cur, prev, log_scale


def _hermite_pair(n: int, x: np.ndarray):
    prev = np.ones_like(x)
    cur = x.copy()
    log_scale = np.zeros_like(x)
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
        big = np.abs(cur) > 1e100
        if np.any(big):
            s = np.where(big, np.abs(cur), 1.0)
            cur, prev = cur / s, prev / s
            log_scale += np.log(s)
    return cur, prev, log_scale


def _legendre_pair(n: int, x: np.ndarray):
    prev = np.ones_like(x)
    cur = x.copy()
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1) * x * cur - k * prev) / (k + 1)
    return cur, prev


@functools.lru_cache(maxsize=None)
def gauss_laguerre_rule(n: int) -> QuadRule:
    """n-point rule for int_0^inf f(x) e^{-x} dx.

    Golub-Welsch gives nodes and weights; nodes are polished by Newton steps
    on L_n, and weights below 1e-8 are recomputed as x_i / (n L_{n-1}(x_i))^2
    in log form, which keeps relative accuracy for the tiny weights at large
    nodes where the eigenvector components only carry absolute accuracy.
    """
    if int(n) != n or not 1 <= n <= 512:
        raise DomainError("gauss_laguerre_rule supports 1 <= n <= 512")
    k = np.arange(n)
    x, w_gw = tridiag_eigen(2.0 * k + 1.0, np.arange(1, n, dtype=float))
    if n > 1:
        for _ in range(3):
            cur, prev, _ = _laguerre_pair(n, x)
            step = x * cur / (n * (cur - prev))
            x = x - step
        _, prev, log_scale = _laguerre_pair(n, x)
        log_w = np.log(x) - 2.0 * math.log(n) - 2.0 * (np.log(np.abs(prev)) + log_scale)
        # eigenvector weights are accurate in absolute terms, the formula in
        # relative terms; take each where it is better
        big = w_gw > 1e-8
        log_w[big] = np.log(w_gw[big])
    else:
        x = np.array([1.0])
        log_w = np.array([0.0])
    return QuadRule(x, np.exp(log_w), "laguerre", n, log_w)


@functools.lru_cache(maxsize=None)
def gauss_hermite_rule(n: int) -> QuadRule:
    """n-point rule for int f(x) e^{-x^2/2} dx (weights sum to sqrt(2 pi))."""
    if int(n) != n or not 1 <= n <= 512:
        raise DomainError("gauss_hermite_rule supports 1 <= n <= 512")
    x, _ = tridiag_eigen(np.zeros(n), np.sqrt(np.arange(1, n, dtype=float)))
    if n == 1:
        return QuadRule(np.array([0.0]), np.array([math.sqrt(2 * math.pi)]), "hermite", 1,
                        np.array([0.5 * math.log(2 * math.pi)]))
    for _ in range(3):
        cur, prev, _ = _hermite_pair(n, x)
        x = x - cur / (n * prev)
    _, prev, log_scale = _hermite_pair(n, x)
    log_w = (math.lgamma(n) + 0.5 * math.log(2 * math.pi) - math.log(n)
             - 2.0 * (np.log(np.abs(prev)) + log_scale))
    x = 0.5 * (x - x[::-1])  # enforce exact symmetry
    log_w = 0.5 * (log_w + log_w[::-1])
    return QuadRule(x, np.exp(log_w), "hermite", n, log_w)


@functools.lru_cache(maxsize=None)
def gauss_legendre_rule(n: int) -> QuadRule:
    """n-point rule for int_{-1}^{1} f(x) dx."""
    if int(n) != n or not 1 <= n <= 512:
        raise DomainError("gauss_legendre_rule supports 1 <= n <= 512")
    if n == 1:
        return QuadRule(np.array([0.0]), np.array([2.0]), "legendre", 1)
    k = np.arange(1, n, dtype=float)
    x, _ = tridiag_eigen(np.zeros(n), k / np.sqrt(4.0 * k * k - 1.0))
    for _ in range(3):
        cur, prev = _legendre_pair(n, x)
        deriv = n * (x * cur - prev) / (x * x - 1.0)
        x = x - cur / deriv
    cur, prev = _legendre_pair(n, x)
    deriv = n * (x * cur - prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * deriv * deriv)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadRule(x, w, "legendre", n)


# ---------------------------------------------------------------------------
# circle rules

def contour_nodes(center: complex, radius: float, order: int):
    """Points v_m and weights c_m with (1/2 pi i) closed-integral f ~ sum c_m f(v_m)."""
    if radius <= 0:
        raise DomainError("contour radius must be positive")
    theta = 2.0 * math.pi * (np.arange(order) + 0.5) / order
    e = np.exp(1j * theta)
    return center + radius * e, radius * e / order


def contour_residue(center: complex, radius: float, order: int | None,
                    f: Callable[[np.ndarray], np.ndarray], tol: float = 1e-10,
                    max_order: int = 8192) -> complex:
    """Trapezoid circle rule for (1/2 pi i) closed-integral f(v) dv.

    With an explicit order the rule is applied once.  With order=None the
    order starts at 64 and doubles until two consecutive values agree to tol.
    """
    if order is not None:
        pts, wts = contour_nodes(center, radius, order)
        return complex(np.sum(wts * f(pts)))
    m = 64
    pts, wts = contour_nodes(center, radius, m)
    prev = complex(np.sum(wts * f(pts)))
    while m < max_order:
        m *= 2
        pts, wts = contour_nodes(center, radius, m)
        val = complex(np.sum(wts * f(pts)))
        if abs(val - prev) <= tol * max(abs(val), 1e-300):
            return val
        prev = val
    raise ConvergenceError("contour rule did not converge")


# ---------------------------------------------------------------------------
# semi-infinite integrals

LAGUERRE_ORDERS = (64, 128, 256, 512)


def _laguerre_sum(f, n: int, weighted: bool, scale: float):
    rule = gauss_laguerre_rule(n)
    if weighted:
        keep = rule.log_weights > -700.0
        x = rule.nodes[keep]
        terms = rule.weights[keep] * f(x / scale) / scale
        return np.sum(terms), float(np.sum(np.abs(terms)))
    x = rule.nodes
    w = np.exp(rule.log_weights + x)
    terms = w * f(x / scale) / scale
    return np.sum(terms), float(np.sum(np.abs(terms)))


def integrate_semi_infinite(f, rel_tol: float = 1e-10, weighted: bool = False,
                            scale: float = 1.0, abs_floor: float = 0.0) -> EvalResult:
    """int_0^inf f(x) dx by Gauss-Laguerre at orders 64, 128, 256, 512.

    weighted=True means f excludes the factor e^{-x}: the result is
    int_0^inf e^{-x} f(x) dx.  `scale` rescales the variable, x -> t/scale,
    for integrands decaying like e^{-scale x}.
    """
    prev = None
    for n in LAGUERRE_ORDERS:
        val, mass = _laguerre_sum(f, n, weighted, scale)
        val = complex(val)
        # the high-order rules resolve the sum to about 1e-13 * sum |terms|
        floor = abs_floor + 1e-13 * mass
        if prev is not None:
            diff = abs(val - prev)
            if diff <= rel_tol * abs(val) + floor:
                return EvalResult(val, diff, {"laguerre_order": n})
        prev_diff = None if prev is None else abs(val - prev)
        prev = val
    if prev_diff > 10.0 * (rel_tol * abs(prev) + floor):
        raise ConvergenceError(
            f"semi-infinite quadrature not converged: 512 vs 256 differ by {prev_diff:.3e}")
    return EvalResult(prev, prev_diff, {"laguerre_order": 512})


def integrate_cauchy(g, y: complex, rel_tol: float = 1e-10,
                     abs_floor: float = 0.0) -> EvalResult:
    """int_0^inf e^{-u} g(u)/(y-u) du for g entire and y off [0, inf).

    For moderate |y| the pole is subtracted: the remainder (g(u)-g(y))/(y-u)
    is entire, and the subtracted piece is -g(y) e^{-y} E_1(-y).
    """
    y = complex(y)
    if abs(y) <= 60.0:
        gy = complex(np.asarray(g(np.array([y])))[0])

        def h(u):
            return (g(u) - gy) / (y - u)

        pole = -gy * exp_e1(-y)
        floor = max(abs_floor, rel_tol * abs(pole))
        res = integrate_semi_infinite(h, rel_tol, weighted=True, abs_floor=floor)
        res.value = res.value + pole
        res.meta["pole_subtracted"] = True
        return res

    def h(u):
        return g(u) / (y - u)

    res = integrate_semi_infinite(h, rel_tol, weighted=True, abs_floor=abs_floor)
    res.meta["pole_subtracted"] = False
    return res


# ---------------------------------------------------------------------------
# unit interval with a graded mesh toward 1

def integrate_unit_graded(f, rel_tol: float = 1e-12, panels: int = 60,
                          abs_floor: float = 0.0, left_panels: int = 0) -> EvalResult:
    """int_0^1 f(tau) dtau with panels [1-2^-k, 1-2^-(k+1)] refined toward tau=1.

    f is called as f(tau, one_minus_tau) so integrands with 1/(1-tau)
    factors keep full precision near the endpoint.  left_panels > 0 also
    grades [0, 1/2] geometrically toward tau=0.  Panel rules of order
    16, 32, 64 are compared for the error estimate.
    """
    edges = 2.0 ** -np.arange(panels + 1, dtype=float)
    # right panels in the variable s = 1 - tau
    s_hi, s_lo = edges[:-1], edges[1:]
    if left_panels > 0:
        s_hi, s_lo = s_hi[1:], s_lo[1:]
        ledges = np.concatenate([2.0 ** -np.arange(1, left_panels + 1, dtype=float), [0.0]])
        t_hi, t_lo = ledges[:-1], ledges[1:]
    else:
        t_hi = t_lo = np.zeros(0)
    prev = None
    for q in (16, 32, 64):
        rule = gauss_legendre_rule(q)
        x, wq = rule.nodes[None, :], rule.weights[None, :]
        s_r = (0.5 * (s_hi + s_lo)[:, None] + 0.5 * (s_hi - s_lo)[:, None] * x).ravel()
        t_l = (0.5 * (t_hi + t_lo)[:, None] + 0.5 * (t_hi - t_lo)[:, None] * x).ravel()
        w = np.concatenate([(0.5 * (t_hi - t_lo)[:, None] * wq).ravel(),
                            (0.5 * (s_hi - s_lo)[:, None] * wq).ravel()])
        tau = np.concatenate([t_l, 1.0 - s_r])
        s = np.concatenate([1.0 - t_l, s_r])
        vals = f(tau, s)
        val = complex(np.sum(w * vals))
        if prev is not None:
            diff = abs(val - prev)
            if diff <= rel_tol * abs(val) + abs_floor:
                return EvalResult(val, diff, {"legendre_order": q, "panels": panels,
                                              "left_panels": left_panels})
        prev = val
    raise ConvergenceError("graded unit-interval quadrature did not converge")


def integrate_interval(f, a: float, b: float, order: int = 64) -> float:
    rule = gauss_legendre_rule(order)
    x = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes
    return complex(0.5 * (b - a) * np.sum(rule.weights * f(x)))


# ---------------------------------------------------------------------------
# product cubature

TENSOR_ORDER = 48


@functools.lru_cache(maxsize=None)
def tensor_laguerre(l: int, order: int = TENSOR_ORDER):
    """Nodes (order^l, l) and weights of the l-fold product Laguerre rule."""
    if l < 1 or l > 3:
        raise DomainError("tensor cubature supports 1 <= L <= 3")
    rule = gauss_laguerre_rule(order)
    nodes = np.array(list(itertools.product(rule.nodes, repeat=l)))
    weights = np.array([math.prod(c) for c in itertools.product(rule.weights, repeat=l)])
    return nodes, weights


def cubature_laguerre(f, l: int, order: int = TENSOR_ORDER) -> complex:
    """int_{[0,inf)^l} e^{-sum t} f(t) dt; f receives an array of shape (M, l)."""
    nodes, weights = tensor_laguerre(l, order)
    return complex(np.sum(weights * f(nodes)))


def tensor_hermite(l: int, order: int):
    rule = gauss_hermite_rule(order)
    nodes = np.array(list(itertools.product(rule.nodes, repeat=l)))
    weights = np.array([math.prod(c) for c in itertools.product(rule.weights, repeat=l)])
    return nodes, weights

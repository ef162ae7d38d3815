"""Closed-form evaluators for the deformed chiral ensemble with a source.

The averages are written as nested integrals: an outer semi-infinite
integral, a contour integral around the source eigenvalues, and an L-fold
integral over auxiliary variables t with the weight Delta(t)^2 e^{-t}.

Numerical strategy (shared by all evaluators):

* The L-fold t-integral is reduced to an L x L determinant of one-variable
  moments (Andreief).  Where the integrand carries 1/(t+v), only the
  polynomial part [P(t) - P(-v)]/(t+v) is kept.  The discarded piece is a
  rank-one update proportional to prod_j (omega_j - v), which cancels the
  contour poles and so integrates to zero.  The remaining integrand is
  polynomial in v, so the contour radius is unconstrained by the points -t.
* Inner integrals of the form int e^{-s} 0F1(1;-a s) s^m ds are done exactly:
  they equal m! e^{-a} L_m(a).
* Outer Cauchy-type integrals use Gauss-Laguerre with pole subtraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ConvergenceError, DomainError
from .linalg import det_batch, logdet_lu
from .quad import (
    EvalResult,
    contour_nodes,
    integrate_cauchy,
    integrate_unit_graded,
    tensor_laguerre,
    TENSOR_ORDER,
)
from .specfun import hyp0f1, laguerre, log_gamma_upper

__all__ = [
    "Distinct",
    "Degenerate",
    "EnsembleParams",
    "EvalResult",
    "mehta_integral",
    "log_mehta_integral",
    "norm_tilde",
    "log_norm_tilde",
    "norm_tilde_moments",
    "inverse_cp",
    "inverse_cp_unnormalized",
    "cp",
    "log_cp_quadrature",
    "ratio_cp",
    "kernel",
    "kernel_values",
    "d_function",
    "d_general",
    "d_l0_closed",
    "d_l1_closed",
    "log_q_closed",
    "g_function",
]

MAX_N = 128
MAX_L = 3


# ---------------------------------------------------------------------------
# parameter types

@dataclass(frozen=True)
class Distinct:
    """Pairwise distinct squared singular values of the source."""

    omegas: tuple

    def __post_init__(self):
        om = tuple(float(w) for w in self.omegas)
        object.__setattr__(self, "omegas", om)
        if len(om) == 0:
            raise DomainError("Distinct needs at least one omega")
        if any(w < 0 or not math.isfinite(w) for w in om):
            raise DomainError("omegas must be finite and nonnegative")
        arr = np.sort(np.array(om))
        if arr.size > 1:
            gap = float(np.min(np.diff(arr)))
            if gap <= 1e-10 * float(arr[-1]):
                raise DomainError(
                    f"omegas nearly coincide (min gap {gap:.3g}); use Degenerate for a repeated value")


@dataclass(frozen=True)
class Degenerate:
    """Source proportional to the identity: every omega equals z_sq."""

    z_sq: float
    multiplicity: int

    def __post_init__(self):
        object.__setattr__(self, "z_sq", float(self.z_sq))
        if self.z_sq < 0 or not math.isfinite(self.z_sq):
            raise DomainError("z_sq must be finite and nonnegative")
        if int(self.multiplicity) != self.multiplicity or self.multiplicity < 1:
            raise DomainError("multiplicity must be a positive integer")


SourceSpectrum = Distinct | Degenerate


@dataclass(frozen=True)
class EnsembleParams:
    n: int
    l: int
    source: Distinct | Degenerate

    def __post_init__(self):
        if int(self.n) != self.n or not 1 <= self.n <= MAX_N:
            raise DomainError(f"N must be an integer in [1, {MAX_N}]")
        if int(self.l) != self.l or not 0 <= self.l <= MAX_L:
            raise DomainError(f"L must be an integer in [0, {MAX_L}]")
        if isinstance(self.source, Distinct):
            if len(self.source.omegas) != self.n:
                raise DomainError("number of omegas must equal N")
        elif isinstance(self.source, Degenerate):
            if self.source.multiplicity != self.n:
                raise DomainError("degenerate multiplicity must equal N")
        else:
            raise DomainError("source must be Distinct or Degenerate")

    @property
    def omegas(self) -> np.ndarray:
        if isinstance(self.source, Distinct):
            return np.array(self.source.omegas)
        return np.full(self.n, self.source.z_sq)

    @property
    def degenerate(self) -> bool:
        return isinstance(self.source, Degenerate)


def degenerate_params(n: int, l: int, z_sq: float) -> EnsembleParams:
    return EnsembleParams(n, l, Degenerate(z_sq, n))


# ---------------------------------------------------------------------------
# normalisations

def mehta_integral(l: int) -> int:
    """int Delta(t)^2 prod e^{-t_i} dt over [0,inf)^l = l! prod_{j<l} (j!)^2."""
    if int(l) != l or not 0 <= l <= 20:
        raise DomainError("mehta_integral supports 0 <= l <= 20")
    out = math.factorial(l)
    for j in range(1, l):
        out *= math.factorial(j) ** 2
    return out


def log_mehta_integral(l: int) -> float:
    return math.lgamma(l + 1) + 2.0 * sum(math.lgamma(j + 1) for j in range(1, l))


def source_polynomial(params: EnsembleParams) -> np.ndarray:
    """Ascending coefficients of Q(t) = prod_j (t + omega_j)."""
    return npoly.polyfromroots(-params.omegas).real


def _moments(coeffs: np.ndarray, kmax: int) -> np.ndarray:
    """M_k = int_0^inf t^k P(t) e^{-t} dt for k = 0..kmax."""
    deg = coeffs.size - 1
    fact = np.array([math.factorial(j) for j in range(deg + kmax + 1)], dtype=float)
    return np.array([np.sum(coeffs * fact[k:k + deg + 1]) for k in range(kmax + 1)])


def norm_tilde_moments(params: EnsembleParams) -> float:
    """Andreief form L! det[M_{i+j}] of the auxiliary normalisation (cross-check)."""
    l = params.l
    if l == 0:
        return 1.0
    mom = _moments(source_polynomial(params), 2 * l - 2)
    mat = np.array([[mom[i + j] for j in range(l)] for i in range(l)])
    logmag, phase = logdet_lu(mat)
    return float((phase * math.exp(logmag + math.lgamma(l + 1))).real)


def log_norm_tilde(params: EnsembleParams) -> float:
    """log of int prod_{i,j}(t_i + omega_j) Delta(t)^2 prod e^{-t_i} dt (tensor cubature)."""
    l = params.l
    if l == 0:
        return 0.0
    om = params.omegas
    order = max(TENSOR_ORDER, (params.n + 2 * l) // 2 + 1)
    if order > TENSOR_ORDER:
        # cubature would not be exact; fall back to the moment determinant
        return math.log(norm_tilde_moments(params))
    nodes, weights = tensor_laguerre(l, order)
    logq = np.sum(np.log(nodes[:, :, None] + om[None, None, :]), axis=(1, 2))
    logv = np.zeros(nodes.shape[0])
    with np.errstate(divide="ignore"):
        for i in range(l):
            for j in range(i + 1, l):
                logv += 2.0 * np.log(np.abs(nodes[:, j] - nodes[:, i]))
    terms = np.log(weights) + logq + logv
    top = float(np.max(terms))
    return top + math.log(float(np.sum(np.exp(terms - top))))


def norm_tilde(params: EnsembleParams) -> EvalResult:
    """Auxiliary normalisation N~_L by L-fold Gauss-Laguerre cubature."""
    if params.l == 0:
        return EvalResult(1.0, 0.0, {"method": "empty"})
    val = math.exp(log_norm_tilde(params))
    check = norm_tilde_moments(params)
    return EvalResult(val, abs(val - check), {"method": "tensor-cubature",
                                              "order": TENSOR_ORDER})


# ---------------------------------------------------------------------------
# polynomial helpers

def _synthetic_quotient(coeffs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Quotient of P(t) by (t - w), batched.

    coeffs: (..., d+1) ascending; w broadcastable to coeffs[..., 0].
    Returns (..., d) ascending coefficients of [P(t) - P(w)]/(t - w).
    """
    d = coeffs.shape[-1] - 1
    shape = np.broadcast_shapes(coeffs.shape[:-1], np.shape(w))
    q = np.zeros(shape + (max(d, 1),), dtype=complex)
    if d == 0:
        return q[..., :0]
    q[..., d - 1] = coeffs[..., d]
    for a in range(d - 1, 0, -1):
        q[..., a - 1] = coeffs[..., a] + w * q[..., a]
    return q


def _factorials(n: int) -> np.ndarray:
    return np.array([math.factorial(j) for j in range(n)], dtype=float)


def _poly_part_moments(qcoef: np.ndarray, w: np.ndarray, kmax: int) -> np.ndarray:
    """D_k(w) = int_0^inf [t^k Q(t) - w^k Q(w)]/(t - w) e^{-t} dt, k = 0..kmax.

    Returns array of shape (len(w), kmax+1).
    """
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape + (kmax + 1,), dtype=complex)
    for k in range(kmax + 1):
        pk = np.concatenate([np.zeros(k), qcoef])
        quo = _synthetic_quotient(pk, w)
        out[..., k] = quo @ _factorials(quo.shape[-1])
    return out


def _aux_determinant(mu: np.ndarray, l: int) -> np.ndarray:
    """L! det[mu_{i+j}]_{i,j<L} for a batch of moment sequences mu (..., 2L-1)."""
    batch = mu.shape[:-1]
    mats = np.empty(batch + (l, l), dtype=complex)
    for i in range(l):
        for j in range(l):
            mats[..., i, j] = mu[..., i + j]
    flat = mats.reshape((-1, l, l))
    return math.factorial(l) * det_batch(flat).reshape(batch)


def _laguerre_scaled(mmax: int, arg) -> np.ndarray:
    """lambda_m(arg) = m! L_m(arg) for m = 0..mmax; shape (mmax+1,) + shape(arg)."""
    a = np.asarray(arg, dtype=complex)
    out = np.empty((mmax + 1,) + a.shape, dtype=complex)
    out[0] = 1.0
    if mmax >= 1:
        out[1] = 1.0 - a
    for m in range(1, mmax):
        out[m + 1] = (2 * m + 1 - a) * out[m] - m * m * out[m - 1]
    return out


# ---------------------------------------------------------------------------
# contour selection

@dataclass(frozen=True)
class ContourSpec:
    center: float
    radius: float
    order: int


def _pole_layout(params: EnsembleParams):
    om = params.omegas
    center = 0.5 * (float(om.min()) + float(om.max()))
    half = 0.5 * (float(om.max()) - float(om.min()))
    if params.degenerate or half == 0.0:
        return center, 0.125
    return center, 2.0 * half


def choose_contour(params: EnsembleParams, probes: list[Callable], radius: float | None = None,
                   tol: float = 1e-12) -> ContourSpec:
    """Pick radius and order of the circle rule around the source eigenvalues.

    Radius: minimises sum over probes of log(max |f| * r) on the circle,
    i.e. the cancellation the trapezoid sum has to absorb.  Order: starts
    at max(64, 4N) and doubles until every probe agrees between consecutive
    orders to `tol` relative to its scale.
    """
    center, r_min = _pole_layout(params)
    if radius is None:
        best, best_score = None, math.inf
        for k in range(20):
            r = r_min * 2.0 ** (k / 2.0)
            pts, _ = contour_nodes(center, r, 64)
            score = 0.0
            for f in probes:
                try:
                    with np.errstate(over="ignore", invalid="ignore"):
                        mag = float(np.max(np.abs(f(pts))))
                except OverflowError:
                    mag = math.inf
                if not math.isfinite(mag) or mag == 0.0:
                    score = math.inf
                    break
                score += math.log(mag * r)
            if score < best_score:
                best, best_score = r, score
        if best is None:
            raise ConvergenceError("no usable contour radius found")
        radius = best
    order = max(64, 4 * params.n)
    while True:
        ok = True
        for f in probes:
            p1, w1 = contour_nodes(center, radius, order)
            p2, w2 = contour_nodes(center, radius, 2 * order)
            v1 = f(p1)
            v2 = f(p2)
            a, b = np.sum(w1 * v1), np.sum(w2 * v2)
            scale = radius * max(float(np.max(np.abs(v1))), 1e-300)
            if abs(a - b) > tol * max(abs(b), 1e-3 * scale):
                ok = False
                break
        if ok:
            return ContourSpec(center, radius, order)
        order *= 2
        if order > 16384:
            raise ConvergenceError("contour rule did not converge")


# ---------------------------------------------------------------------------
# inverse characteristic polynomial

def _source_ratio(params: EnsembleParams):
    """Return v -> T(v) / prod(v - omega), T the reduced auxiliary determinant."""
    l = params.l
    om = params.omegas
    qcoef = source_polynomial(params)

    def a_of_v(v):
        v = np.asarray(v, dtype=complex)
        val = 1.0 / np.prod(v[..., None] - om, axis=-1)
        if l > 0:
            mu = _poly_part_moments(qcoef, -v, 2 * l - 2)
            val = val * _aux_determinant(mu, l)
        return val

    return a_of_v


def _inverse_cp_weights(params: EnsembleParams):
    """Return a function v -> e^{-v} T(v) / prod(v - omega) on contour points."""
    ratio = _source_ratio(params)

    def a_of_v(v):
        v = np.asarray(v, dtype=complex)
        return np.exp(-v) * ratio(v)

    return a_of_v


def _check_off_support(y: complex, what: str = "y"):
    y = complex(y)
    dist = abs(y.imag) if y.real >= 0 else abs(y)
    if dist <= 1e-8 * (1.0 + abs(y)):
        raise DomainError(f"{what}={y} lies on the support [0, inf); no principal values")
    return y


def _laguerre_l(l: int, arg) -> np.ndarray:
    return _laguerre_scaled(l, arg)[l] / math.factorial(l)


_PHI_SERIES_TERMS = 48


def _phi_taylor(params: EnsembleParams):
    """Taylor data for Phi near tau = 0: Phi(tau) = e^{-c tau} sum_j h_j tau^j.

    With w = v - c the coefficients come from the contour moments
    nu_i = (1/2 pi i) closed-integral w^i T(c+w)/prod(c+w-omega) dw on a small
    circle.  Phi vanishes to order N-1 at tau = 0 (the vanishing moments
    behind the 1/y^N decay), so h_0..h_{N-2} are set to zero after checking
    that their computed values are at rounding level.
    Returns (c, r, h).
    """
    l, n = params.l, params.n
    ratio = _source_ratio(params)
    c, r = _pole_layout(params)
    jmax = n - 1 + _PHI_SERIES_TERMS
    imax = jmax + l
    order = 2 * (imax + n + 64)
    pts, wts = contour_nodes(c, r, order)
    a = ratio(pts)
    w = pts - c
    nu = np.array([np.sum(wts * w**i * a) for i in range(imax + 1)])
    mag = np.array([np.sum(np.abs(wts * w**i * a)) for i in range(imax + 1)])
    inv_fact = np.array([1.0 / math.factorial(j) for j in range(jmax + 1)])
    sgn = (-1.0) ** np.arange(jmax + 1)
    h = np.zeros(jmax + 1, dtype=complex)
    h_mag = np.zeros(jmax + 1)
    for k in range(l + 1):
        # (1/2 pi i) closed-integral (c+w)^k e^{-w tau} A dw as a series in tau
        sk = np.zeros(jmax + 1, dtype=complex)
        sk_mag = np.zeros(jmax + 1)
        for b in range(k + 1):
            cb = math.comb(k, b) * c ** (k - b)
            sk += cb * nu[b: b + jmax + 1]
            sk_mag += abs(cb) * mag[b: b + jmax + 1]
        sk *= sgn * inv_fact
        sk_mag *= inv_fact
        one_minus = np.array([math.comb(k, j) * (-1.0) ** j for j in range(k + 1)])
        ck = math.comb(l, k) / math.factorial(k)
        h += ck * np.convolve(one_minus, sk)[: jmax + 1]
        h_mag += abs(ck) * np.convolve(np.abs(one_minus), sk_mag)[: jmax + 1]
    if n > 1:
        leak = np.abs(h[: n - 1]) / np.maximum(h_mag[: n - 1], 1e-300)
        if np.any(leak > 1e-9):
            raise ConvergenceError("low-order Taylor coefficients of Phi do not vanish")
        h[: n - 1] = 0.0
    return c, r, h


def phi_values(params: EnsembleParams, taus, one_minus=None, tol: float = 1e-13) -> np.ndarray:
    """Phi(tau) = (1/2 pi i) closed-integral e^{-v tau} L_L(-v(1-tau)) T(v)/prod(v - omega) dv.

    For r tau <= 1 (r the radius enclosing the omegas) a Taylor series in
    tau is summed, which resolves the tau^(N-1) vanishing at the origin.
    Elsewhere a circle rule is used with radius picked per tau from a
    geometric ladder by minimising max |integrand| * r.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    om1 = 1.0 - taus if one_minus is None else np.atleast_1d(np.asarray(one_minus, dtype=float))
    l, n = params.l, params.n
    out = np.empty(taus.size, dtype=complex)
    c, r_ser, h = _phi_taylor(params)
    near = r_ser * taus <= 1.0
    if np.any(near):
        tn = taus[near]
        out[near] = np.exp(-c * tn) * npoly.polyval(tn, h)
    far = np.nonzero(~near)[0]
    if far.size == 0:
        return out

    ratio = _source_ratio(params)
    center, r0 = _pole_layout(params)
    radii = r0 * 2.0 ** (np.arange(48) / 2.0)

    def integrand(pts, idx):
        lag = _laguerre_l(l, -np.multiply.outer(pts, om1[idx])) if l else 1.0
        return np.exp(-np.multiply.outer(pts, taus[idx])) * lag * ratio(pts)[:, None]

    scores = np.full((radii.size, far.size), math.inf)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k, r in enumerate(radii):
            pts, _ = contour_nodes(center, r, 64)
            mag = np.max(np.abs(integrand(pts, far)), axis=0)
            ok = np.isfinite(mag) & (mag > 0)
            scores[k, ok] = np.log(mag[ok] * r)
    best = np.argmin(scores, axis=0)
    if np.any(~np.isfinite(scores[best, np.arange(far.size)])):
        raise ConvergenceError("no usable contour radius for Phi")
    for k in np.unique(best):
        idx = far[best == k]
        r = radii[k]
        order = max(64, 4 * n)
        pts, wts = contour_nodes(center, r, order)
        prev = wts @ integrand(pts, idx)
        while True:
            order *= 2
            if order > 16384:
                raise ConvergenceError("contour rule for Phi did not converge")
            pts, wts = contour_nodes(center, r, order)
            f = integrand(pts, idx)
            val = wts @ f
            scale = r * np.max(np.abs(f), axis=0)
            if np.all(np.abs(val - prev) <= tol * np.abs(val) + 1e-15 * scale):
                break
            prev = val
        out[idx] = val
    return out


def _inverse_cp_laplace(params: EnsembleParams, y: complex, rel_tol: float) -> EvalResult:
    """Unnormalised inverse average for Re y < 0 via 1/(y-u) = -int_0^inf e^{-s(u-y)} ds.

    The u-integral is then elementary (Kummer), and with tau = s/(1+s)
    I(y) = -L! int_0^1 (1-tau)^{L-1} e^{y tau/(1-tau)} Phi(tau) dtau.
    """
    l = params.l

    def f(tau, s):
        damp = np.exp(y * tau / s) * s ** (l - 1)
        out = np.zeros(tau.shape, dtype=complex)
        live = np.abs(damp) > 1e-300
        if np.any(live):
            out[live] = damp[live] * phi_values(params, tau[live], s[live])
        return out

    # the e^{y tau/(1-tau)} factor concentrates near tau ~ 1/|y|
    left = int(min(60, max(0, math.ceil(math.log2(max(abs(y), 1.0))) + 4)))
    res = integrate_unit_graded(f, rel_tol=rel_tol, left_panels=left)
    fac = -math.factorial(l)
    return EvalResult(fac * res.value, abs(fac) * res.abs_err, {**res.meta, "route": "laplace"})


def inverse_cp_unnormalized(params: EnsembleParams, y: complex, rel_tol: float = 1e-11,
                            radius: float | None = None, method: str = "auto") -> EvalResult:
    """N~_L times E[prod 1/(y - x_i)]: the nested integral before normalisation.

    method="laguerre" integrates the outer u-variable by Gauss-Laguerre with
    pole subtraction; this cancels to relative size ~|y|^-N for real y < 0.
    method="laplace" (Re y < 0) performs the u-integral analytically first
    and has no such cancellation.  "auto" picks laplace when y lies in the
    left sector |Im y| <= -Re y.
    """
    y = _check_off_support(y)
    if method == "auto":
        method = "laplace" if (y.real < 0 and abs(y.imag) <= -y.real and radius is None) else "laguerre"
    if method == "laplace":
        if y.real >= 0:
            raise DomainError("the Laplace route needs Re y < 0")
        return _inverse_cp_laplace(params, y, rel_tol)
    if method != "laguerre":
        raise DomainError(f"unknown inverse_cp method {method!r}")
    l = params.l
    a_of_v = _inverse_cp_weights(params)
    scale_u = float(params.n + l + 1)
    probes = [
        (lambda v, u=u: a_of_v(v) * hyp0f1(1, v * u))
        for u in (0.5, scale_u, 3.0 * scale_u)
    ]
    spec = choose_contour(params, probes, radius)
    pts, wts = contour_nodes(spec.center, spec.radius, spec.order)
    coef = wts * a_of_v(pts)

    def g(u):
        u = np.asarray(u)
        vals = hyp0f1(1, np.multiply.outer(u, pts)) @ coef
        return vals * u**l if l else vals

    res = integrate_cauchy(g, y, rel_tol)
    res.meta.update({"route": "laguerre", "contour_radius": spec.radius,
                     "contour_order": spec.order, "contour_center": spec.center})
    return res


def inverse_cp(params: EnsembleParams, y: complex, rel_tol: float = 1e-11,
               radius: float | None = None, method: str = "auto") -> EvalResult:
    """E[prod_i 1/(y - x_i)] from the contour/semi-infinite integral representation."""
    raw = inverse_cp_unnormalized(params, y, rel_tol, radius, method)
    nt = math.exp(log_norm_tilde(params))
    return EvalResult(raw.value / nt, raw.abs_err / nt, raw.meta)


# ---------------------------------------------------------------------------
# characteristic polynomial

def _cp_polynomial(params: EnsembleParams) -> np.ndarray:
    """Ascending coefficients of Q(y) W(y), W(y) = int prod(y - t_i) Q(t_i) Delta^2 e^{-t}."""
    qcoef = source_polynomial(params)
    l = params.l
    if l == 0:
        return qcoef
    # W is a degree-L polynomial in y; sample on roots of unity, then invert the DFT
    mom = _moments(qcoef, 2 * l)
    k = np.arange(l + 1)
    ys = np.exp(2j * math.pi * k / (l + 1))
    mu = ys[:, None] * mom[None, : 2 * l - 1] - mom[None, 1: 2 * l]
    wvals = _aux_determinant(mu, l)
    wcoef = np.array([np.mean(wvals * ys ** (-j)) for j in range(l + 1)]).real
    return npoly.polymul(qcoef, wcoef)


def cp(params: EnsembleParams, z_arg: complex, method: str = "moments") -> EvalResult:
    """E[prod_i (z - x_i)].

    The y-integral against e^{-y} 0F1(1;-z y) P(y) is done termwise:
    int y^m e^{-y} 0F1(1;-zy) dy = m! e^{-z} L_m(z), so the e^{z} prefactor
    cancels exactly.  method="quadrature" integrates in y numerically instead.
    """
    z = complex(z_arg)
    l, n = params.l, params.n
    if l >= 1 and z == 0:
        raise DomainError("cp with L >= 1 carries z^{-L}; z_arg must be nonzero")
    nt = math.exp(log_norm_tilde(params))
    pcoef = _cp_polynomial(params)
    sign = (-1) ** (n + l)
    if method == "moments":
        lam = _laguerre_scaled(pcoef.size - 1, z)
        total = complex(np.sum(pcoef * lam))
        terms = np.abs(pcoef * lam)
        val = sign * total / (z**l * nt)
        err = 1e-15 * float(np.sum(terms)) / (abs(z) ** l * nt)
        return EvalResult(val, err, {"method": "moments"})
    if method == "quadrature":
        logmag, phase = log_cp_quadrature(params, z, pcoef=pcoef)
        val = phase * math.exp(logmag)
        return EvalResult(val, 1e-10 * abs(val), {"method": "quadrature"})
    raise DomainError(f"unknown cp method {method!r}")


def log_cp_quadrature(params: EnsembleParams, z: complex, pcoef=None, orders=(256, 512)):
    """(log|E|, phase) of E[prod(z - x_i)] by direct y-quadrature in log form.

    E = (-1)^{N+L} e^{z} z^{-L} / N~ * int e^{-y} 0F1(1;-zy) Q(y) W(y) dy, with
    log Q(y) = sum log(y + omega_j) accumulated without overflow.
    """
    from .quad import gauss_laguerre_rule

    z = complex(z)
    l, n = params.l, params.n
    om = params.omegas
    if pcoef is None:
        pcoef = _cp_polynomial(params)
    wcoef = None
    if l:
        qcoef = source_polynomial(params)
        wcoef, rem = npoly.polydiv(pcoef, qcoef)
    results = []
    for order in orders:
        rule = gauss_laguerre_rule(order)
        keep = rule.log_weights > -740.0
        yk = rule.nodes[keep]
        logt = rule.log_weights[keep] + np.sum(np.log(yk[:, None] + om[None, :]), axis=1)
        f = hyp0f1(1, -z * yk).astype(complex)
        if wcoef is not None:
            f = f * npoly.polyval(yk, wcoef)
        top = float(np.max(logt))
        s = complex(np.sum(np.exp(logt - top) * f))
        results.append((top, s))
    top, s = results[-1]
    ptop, ps = results[-2]
    if abs(s - ps * math.exp(ptop - top)) > 1e-9 * abs(s):
        raise ConvergenceError("cp quadrature did not converge")
    sign = (-1) ** (n + l)
    logmag = top + math.log(abs(s)) + z.real - l * math.log(abs(z)) if l else top + math.log(abs(s)) + z.real
    logmag -= log_norm_tilde(params)
    phase = sign * (s / abs(s)) * complex(np.exp(1j * z.imag))
    if l:
        phase *= (abs(z) / z) ** l
    return logmag, complex(phase)


# ---------------------------------------------------------------------------
# ratio and kernel: shared inner structure

def _inner_quotient(params: EnsembleParams, u: np.ndarray) -> np.ndarray:
    """Coefficients q_m(u) of [H(s) - H(-u)]/(s + u), H(s) = Q(s) T(u, s).

    T(u, s) = L! det[s D_{i+j}(-u) - D_{i+j+1}(-u)] is the polynomial part of
    the t-integral with the insertion prod (s - t_i)/(u + t_i).
    Shape (len(u), N+L).
    """
    qcoef = source_polynomial(params)
    l = params.l
    u = np.asarray(u, dtype=complex)
    if l == 0:
        h = np.broadcast_to(qcoef.astype(complex), u.shape + qcoef.shape)
    else:
        dk = _poly_part_moments(qcoef, -u, 2 * l - 1)
        k = np.arange(l + 1)
        svals = np.exp(2j * math.pi * k / (l + 1))
        tv = np.empty(u.shape + (l + 1,), dtype=complex)
        for j, s in enumerate(svals):
            mu = s * dk[..., : 2 * l - 1] - dk[..., 1: 2 * l]
            tv[..., j] = _aux_determinant(mu, l)
        tcoef = np.stack([np.mean(tv * svals ** (-j), axis=-1) for j in range(l + 1)], axis=-1)
        h = np.zeros(u.shape + (qcoef.size + l,), dtype=complex)
        for a in range(qcoef.size):
            h[..., a: a + l + 1] += qcoef[a] * tcoef
    return _synthetic_quotient(np.asarray(h), -u)


def _ratio_inner(params: EnsembleParams, v: complex):
    """u -> e^{-u} R_v(u) / prod(u - omega), R_v(u) = sum_m q_m(u) m! L_m(v)."""
    om = params.omegas
    deg = params.n + params.l

    def a_of_u(u):
        u = np.asarray(u, dtype=complex)
        q = _inner_quotient(params, u)
        lam = _laguerre_scaled(deg - 1, v)
        r = q @ lam
        return np.exp(-u) * r / np.prod(u[..., None] - om, axis=-1)

    return a_of_u


def ratio_cp(params: EnsembleParams, v: complex, z: complex, rel_tol: float = 1e-11,
             radius: float | None = None) -> EvalResult:
    """E[prod_i (v - x_i)/(z - x_i)]."""
    z = _check_off_support(z, "z")
    v = complex(v)
    l, n = params.l, params.n
    if l >= 1 and v == 0:
        raise DomainError("ratio with L >= 1 carries v^{-L}; v must be nonzero")
    a_of_u = _ratio_inner(params, v)
    scale_x = float(n + l + 1)
    probes = [(lambda u, x=x: a_of_u(u) * hyp0f1(1, u * x)) for x in (0.5, scale_x, 3 * scale_x)]
    spec = choose_contour(params, probes, radius)
    pts, wts = contour_nodes(spec.center, spec.radius, spec.order)
    coef = wts * a_of_u(pts)

    def g(x):
        x = np.asarray(x)
        vals = hyp0f1(1, np.multiply.outer(x, pts)) @ coef
        return (v - x) * x**l * vals

    res = integrate_cauchy(g, z, rel_tol)
    pref = (-1) ** (n + l + 1) / (v**l * math.exp(log_norm_tilde(params)))
    res.meta.update({"contour_radius": spec.radius, "contour_order": spec.order})
    return EvalResult(pref * res.value, abs(pref) * res.abs_err, res.meta)


def kernel_values(params: EnsembleParams, xs, ys, radius: float | None = None) -> np.ndarray:
    """K_N(x_i, y_i) for paired arrays xs, ys (positive reals)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    xs, ys = np.broadcast_arrays(xs, ys)
    if np.any(xs < 0) or np.any(ys < 0):
        raise DomainError("kernel arguments must be nonnegative")
    l, n = params.l, params.n
    if l >= 1 and np.any(xs == 0):
        raise DomainError("kernel with L >= 1 needs x > 0")
    om = params.omegas
    deg = n + l

    def base(u):
        u = np.asarray(u, dtype=complex)
        return np.exp(-u) / np.prod(u[..., None] - om, axis=-1)

    xm, ym = float(np.mean(xs)), float(np.mean(ys))

    def probe(u):
        q = _inner_quotient(params, u)
        lam = _laguerre_scaled(deg - 1, xm)
        return base(u) * (q @ lam) * hyp0f1(1, u * ym)

    spec = choose_contour(params, [probe], radius)
    pts, wts = contour_nodes(spec.center, spec.radius, spec.order)
    q = _inner_quotient(params, pts)                      # (M, deg)
    lam = _laguerre_scaled(deg - 1, xs)                   # (deg, K)
    rx = q @ lam                                          # (M, K)
    fy = hyp0f1(1, np.multiply.outer(pts, ys))            # (M, K)
    vals = np.sum((wts * base(pts))[:, None] * rx * fy, axis=0)
    log_pref = -ys - log_norm_tilde(params)
    if l:
        log_pref = log_pref + l * (np.log(ys) - np.log(xs))
    return (-1) ** (n + l + 1) * np.exp(log_pref) * vals


def kernel(params: EnsembleParams, x: float, y: float, radius: float | None = None) -> EvalResult:
    """Correlation kernel K_N(x, y) of the squared singular values."""
    val = complex(kernel_values(params, [x], [y], radius)[0])
    r2 = None if radius is None else 1.5 * radius
    check = complex(kernel_values(params, [x], [y], r2)[0]) if radius is not None else None
    err = abs(val - check) if check is not None else 1e-12 * abs(val)
    return EvalResult(val, err, {})


# ---------------------------------------------------------------------------
# D and G connection functions (degenerate source)

def _log_integrate_unit(log_f: Callable, sign_f: Callable | None = None, rel_tol: float = 1e-13):
    """log int_0^1 exp(log_f(tau, 1-tau)) * sign dtau with a graded mesh toward 1."""
    from .quad import gauss_legendre_rule

    lo = 2.0 ** -np.arange(61, dtype=float)
    rule = gauss_legendre_rule(16)
    a, b = lo[:-1][:, None], lo[1:][:, None]
    s = (0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[None, :]).ravel()
    top = float(np.max(log_f(1.0 - s, s)))

    def f(tau, s):
        val = np.exp(log_f(tau, s) - top)
        if sign_f is not None:
            val = val * sign_f(tau, s)
        return val

    res = integrate_unit_graded(f, rel_tol=rel_tol)
    val = res.value.real
    if val <= 0:
        raise ConvergenceError("connection integral is not positive")
    return top + math.log(val), res.abs_err / val


def _log_g1_over_norm(n: int, rho: float):
    """Pieces of G^(1)/N~_1 = e^{-rho tau} tau^{N-1}/(N-1)! [1 - tau rho Gamma(N,rho)/Gamma(N+1,rho)]."""
    ratio = math.exp(log_gamma_upper(n, rho) - log_gamma_upper(n + 1, rho)) if rho > 0 else 1.0 / n
    lg = math.lgamma(n)

    def log_f(tau, s):
        return (n - 1) * np.log(tau) - rho * tau - lg + np.log(np.abs(1.0 - tau * rho * ratio))

    def sign_f(tau, s):
        return np.sign(1.0 - tau * rho * ratio)

    return log_f, sign_f


def log_q_closed(n: int, l: int, z_sq: float, p: float):
    """(log Q_N(p), rel_err) with Q_N(p) = E[prod 1/(p + x_i)], degenerate source, L in {0, 1}.

    L=0 uses the one-dimensional DL0 representation; L=1 uses the incomplete
    gamma closed form of G^(1) inside the tau-integral relation.
    """
    if p <= 0:
        raise DomainError("p must be positive")
    rho = float(z_sq)
    if l == 0:
        lg = math.lgamma(n)

        def log_f(tau, s):
            return (n - 1) * np.log(tau) - rho * tau - p * tau / s - np.log(s) - lg

        return _log_integrate_unit(log_f)
    if l == 1:
        base, sign_f = _log_g1_over_norm(n, rho)

        def log_f(tau, s):
            return base(tau, s) - p * tau / s

        return _log_integrate_unit(log_f, sign_f)
    raise DomainError("closed forms exist for L in {0, 1} only")


def d_l0_closed(n: int, z_sq: float, p: float) -> EvalResult:
    """D for L=0: (1/(N-1)!) int_0^inf e^{-pt - t rho/(1+t)} (t/(1+t))^{N-1} dt/(1+t)."""
    logv, rel = log_q_closed(n, 0, z_sq, p)
    val = math.exp(logv)
    return EvalResult(val, rel * val, {"method": "DL0"})


def d_l1_closed(n: int, z_sq: float, p: float) -> EvalResult:
    """D for L=1 from the incomplete-gamma closed form.

    (e^rho/(N-1)!) int_0^inf e^{-pt} e^{-t rho/(1+t)} (t/(1+t))^N
    [Gamma(N+1,rho) - t/(1+t) rho Gamma(N,rho)] dt/(t(1+t)),
    integrated in tau = t/(1+t).
    """
    logq, rel = log_q_closed(n, 1, z_sq, p)
    log_norm1 = z_sq + log_gamma_upper(n + 1, z_sq)
    val = math.exp(logq + log_norm1)
    return EvalResult(val, rel * val, {"method": "DL1"})


def d_general(n: int, l: int, z_sq: float, p: float, rel_tol: float = 1e-11) -> EvalResult:
    """D from the contour/cubature expression (any L <= 3).

    D = (-1)^{N-1}/(L! prod_{j<L} j!^2) * (1/2 pi i) int du e^{-u} u^L/(p+u) closed-integral ...,
    i.e. (-1)^N times the unnormalised inverse average at y = -p over the Mehta constant.
    """
    if p <= 0:
        raise DomainError("p must be positive")
    params = degenerate_params(n, l, z_sq)
    raw = inverse_cp_unnormalized(params, -p, rel_tol)
    mehta = mehta_integral(l)
    val = (-1) ** n * raw.value / mehta
    return EvalResult(val.real, raw.abs_err / mehta, {**raw.meta, "method": "contour"})


def d_function(n: int, l: int, z_sq: float, p: float) -> EvalResult:
    """Connection function D^(L)_N(z, p) for the degenerate source |z|^2 = z_sq."""
    if l not in (0, 1, 2, 3):
        raise DomainError("d_function supports L in {0,1,2,3}")
    if p <= 0:
        raise DomainError("p must be positive")
    if l == 0:
        return d_l0_closed(n, z_sq, p)
    if l == 1:
        return d_l1_closed(n, z_sq, p)
    return d_general(n, l, z_sq, p)


def _g_prefactor(l: int) -> float:
    """1 / prod_{j=1}^{L-1} (j!)^2."""
    return 1.0 / math.prod(math.factorial(j) ** 2 for j in range(1, l)) if l > 1 else 1.0


def _g_contour(n: int, l: int, rho: float, tau: float) -> EvalResult:
    params = degenerate_params(n, l, rho)
    qcoef = source_polynomial(params)

    def f(v):
        v = np.asarray(v, dtype=complex)
        val = np.exp(-v * tau) * laguerre(l, -v * (1.0 - tau)) / (v - rho) ** n
        if l > 0:
            mu = _poly_part_moments(qcoef, -v, 2 * l - 2)
            val = val * _aux_determinant(mu, l)
        return val

    spec = choose_contour(params, [f])
    pts, wts = contour_nodes(spec.center, spec.radius, spec.order)
    phi = complex(np.sum(wts * f(pts)))
    p2, w2 = contour_nodes(spec.center, spec.radius, 2 * spec.order)
    err = abs(complex(np.sum(w2 * f(p2))) - phi)
    val = (-1) ** (n - 1) * _g_prefactor(l) * phi
    return EvalResult(val.real, err * _g_prefactor(l),
                      {"method": "contour", "contour_radius": spec.radius,
                       "contour_order": spec.order})


def _taylor_mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (order + 1,))
    for i in range(order + 1):
        out[..., i:] += a[..., i: i + 1] * b[..., : order + 1 - i]
    return out


def _g_derivative(n: int, l: int, rho: float, tau: float) -> EvalResult:
    """Real form: (N-1)-th rho-derivative of e^{-rho tau} L_L(-rho(1-tau))/prod(t_k+rho).

    The derivative is taken exactly with truncated Taylor arithmetic in rho;
    the t-integral is a tensor Gauss-Laguerre cubature (exact: polynomial).
    """
    order = n - 1
    h = np.arange(order + 1)
    # e^{-(rho+h) tau} Taylor coefficients in h
    expo = np.exp(-rho * tau) * np.array([(-tau) ** k / math.factorial(k) for k in h])
    # L_L(-(rho+h)(1-tau)) as a polynomial in h
    lag_coef = np.zeros(order + 1)
    if l == 0:
        lag_coef[0] = 1.0
    else:
        base = npoly.Polynomial([-rho * (1.0 - tau), -(1.0 - tau)])
        poly = npoly.Polynomial([0.0])
        for k in range(l + 1):
            c = math.comb(l, k) * (-1) ** k / math.factorial(k)
            poly = poly + c * base**k
        cf = poly.coef
        lag_coef[: min(cf.size, order + 1)] = cf[: order + 1]
    front = _taylor_mul(expo, lag_coef, order)
    if l == 0:
        coef = front[order]
        val = (-1) ** (n - 1) * coef
        return EvalResult(val, 1e-15 * abs(val), {"method": "derivative"})
    nodes, weights = tensor_laguerre(l, max(TENSOR_ORDER, (n + 2 * l) // 2 + 1))
    series = np.broadcast_to(front, (nodes.shape[0], order + 1)).copy()
    for k in range(l):
        tk = nodes[:, k] + rho
        inv = np.stack([(-1.0) ** j / tk ** (j + 1) for j in h], axis=-1)
        series = _taylor_mul(series, inv, order)
    vand = np.ones(nodes.shape[0])
    for i in range(l):
        for j in range(i + 1, l):
            vand *= (nodes[:, j] - nodes[:, i]) ** 2
    weight_t = np.prod((nodes + rho) ** n, axis=1) * vand
    integral = float(np.sum(weights * weight_t * series[:, order]))
    val = (-1) ** (n - 1) * _g_prefactor(l) * integral
    return EvalResult(val, 1e-12 * abs(val), {"method": "derivative"})


def log_g1_closed(n: int, rho: float, tau: float) -> tuple[float, float]:
    """(log|G^(1)|, sign) of e^{rho(1-tau)} tau^{N-1}/(N-1)! [Gamma(N+1,rho) - tau rho Gamma(N,rho)]."""
    lg_n1 = log_gamma_upper(n + 1, rho)
    ratio = math.exp(log_gamma_upper(n, rho) - lg_n1) if rho > 0 else 0.0
    bracket = 1.0 - tau * rho * ratio
    logv = rho * (1.0 - tau) + (n - 1) * math.log(tau) - math.lgamma(n) + lg_n1
    if bracket == 0:
        return -math.inf, 0.0
    return logv + math.log(abs(bracket)), math.copysign(1.0, bracket)


def g_function(n: int, l: int, rho: float, tau: float, method: str = "auto") -> EvalResult:
    """Connection function G^(L)_N(rho, tau).

    Normalised so that D = int_0^1 dtau (1-tau)^{L-1} e^{-tau p/(1-tau)} G(rho, tau).
    method: "contour" (default for small N), "derivative" (N <= 8 cross-check),
    "closed" (L = 1 only), "auto".
    """
    if not 0.0 < tau < 1.0:
        raise DomainError("tau must lie in (0, 1)")
    if rho < 0:
        raise DomainError("rho must be nonnegative")
    if l not in (0, 1, 2, 3):
        raise DomainError("g_function supports L <= 3")
    if method == "auto":
        method = "closed" if (l == 1 and n > 8) else "contour"
    if method == "contour":
        return _g_contour(n, l, rho, tau)
    if method == "derivative":
        if n > 8:
            raise DomainError("derivative form is a cross-check for N <= 8")
        return _g_derivative(n, l, rho, tau)
    if method == "closed":
        if l != 1:
            raise DomainError("closed form exists for L = 1 only")
        logv, sign = log_g1_closed(n, rho, tau)
        val = sign * math.exp(logv)
        return EvalResult(val, 1e-14 * abs(val), {"method": "closed"})
    raise DomainError(f"unknown g_function method {method!r}")

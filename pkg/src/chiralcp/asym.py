"""Large-N limits in the degenerate case with |z|^2 = N R and arguments of order 1/N.

Limits are Bessel-function closed forms; `convergence_sweep` compares them
with finite-N values taken from numerically stable representations (all
prefactors handled in log form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError
from .exact import degenerate_params, g_function, kernel_values, log_cp_quadrature, log_q_closed
from .quad import integrate_interval
from .specfun import bessel_i, bessel_j, bessel_j_any, bessel_k

__all__ = [
    "ScalingParams",
    "SweepRow",
    "SweepTable",
    "inverse_cp_limit",
    "cp_limit",
    "kernel_limit",
    "kernel_identity_check",
    "g_limit",
    "convergence_sweep",
]

SWEEP_KINDS = ("inverse_cp", "cp", "kernel", "g")
# rows whose finite-N value is uncertain beyond this are dropped (10 of 16 digits lost)
INSTABILITY_REL = 1e-6
_QUAD_ORDER = 128


@dataclass(frozen=True)
class ScalingParams:
    """Scaled variables: |z|^2 = N r, CP argument xi/(N r_star), kernel arguments
    alpha/(N r_star), beta/(N r_star), tau = 1 - a/N and rho = N w^2 for G."""

    r: float = 0.5
    xi: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    a: float = 1.0
    w: float | None = None

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise DomainError(
                f"r = {self.r} is outside (0, 1); the limits need R < 1 so that the saddle "
                "point -(1 - R) lies on the negative real axis")
        for name in ("xi", "alpha", "beta", "a"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.w is not None and not 0.0 <= self.w < 1.0:
            raise DomainError("w must satisfy 0 <= w < 1")

    @property
    def r_star(self) -> float:
        return 1.0 - self.r

    @property
    def w_sq(self) -> float:
        return self.r if self.w is None else self.w * self.w


# ---------------------------------------------------------------------------
# limits

def _positive(x, name: str) -> float:
    x = float(x)
    if not x > 0:
        raise DomainError(f"{name} must be positive")
    return x


def inverse_cp_limit(l: int, xi: float) -> float:
    """sqrt(2/pi) xi^{L/2} K_L(2 sqrt(xi))."""
    xi = _positive(xi, "xi")
    return math.sqrt(2.0 / math.pi) * xi ** (l / 2.0) * bessel_k(l, 2.0 * math.sqrt(xi))


def cp_limit(l: int, xi: float) -> float:
    """(-1)^L sqrt(2 pi) xi^{-L/2} I_L(2 sqrt(xi))."""
    xi = _positive(xi, "xi")
    return (-1) ** l * math.sqrt(2.0 * math.pi) * xi ** (-l / 2.0) * float(bessel_i(l, 2.0 * math.sqrt(xi)))


def _bessel_j_signed(order: int, x: float) -> float:
    """J_n(x) for n >= -1 (J_{-1} = -J_1)."""
    if order == -1:
        return -float(bessel_j(1, x))
    return float(bessel_j(order, x))


def _jj_integral_closed(l: int, a: float, b: float) -> float:
    """int_0^1 J_L(a sqrt s) J_L(b sqrt s) ds for a != b."""
    ja, jb = float(bessel_j(l, a)), float(bessel_j(l, b))
    return 2.0 * (b * _bessel_j_signed(l - 1, b) * ja - a * _bessel_j_signed(l - 1, a) * jb) / (a * a - b * b)


def _jj_integral_quad(l: int, a: float, b: float) -> float:
    # J_L(c sqrt s) = s^{L/2} x entire, so the product is smooth on [0, 1]
    def f(s):
        rs = np.sqrt(s)
        return bessel_j(l, a * rs) * bessel_j(l, b * rs)

    return integrate_interval(f, 0.0, 1.0, _QUAD_ORDER).real


def _tail_series(l: int, a: float, s: np.ndarray, tol: float = 1e-17) -> np.ndarray:
    """J_0(a sqrt(tau)) minus its first L terms in powers of (1 - tau), with s = 1 - tau.

    Multiplication theorem: J_0(a sqrt(tau)) = sum_k (s a/2)^k / k! J_k(a); the
    tail k >= L is summed directly instead of subtracting.
    """
    out = np.zeros_like(s)
    half = 0.5 * a
    k = l
    coef = half**k / math.factorial(k)
    while True:
        jk = float(bessel_j_any(k, a))
        term = coef * jk * s**k
        out = out + term
        if k > l + 4 and coef * abs(jk) <= tol * max(float(np.max(np.abs(out))), 1e-300):
            return out
        k += 1
        coef *= half / k
        if k > 200:
            raise ConvergenceError("multiplication-theorem tail did not converge")


def _kernel_subtracted(l: int, a: float, b: float) -> float:
    """(b/a)^{2L} int_0^1 J_0(b sqrt tau) [J_0(a sqrt tau) - first L multiplication-theorem terms] dtau."""

    def f(s):
        return bessel_j(0, b * np.sqrt(1.0 - s)) * _tail_series(l, a, s)

    return (b / a) ** (2 * l) * integrate_interval(f, 0.0, 1.0, _QUAD_ORDER).real


def kernel_limit(l: int, alpha: float, beta: float, method: str = "closed") -> float:
    """(beta/alpha)^{L/2} int_0^1 J_L(2 sqrt(alpha tau)) J_L(2 sqrt(beta tau)) dtau.

    method: "closed" (falls back to quadrature when alpha == beta),
    "quadrature", or "subtracted" (J_0 form with the Laguerre-type tail removed).
    """
    alpha, beta = _positive(alpha, "alpha"), _positive(beta, "beta")
    a, b = 2.0 * math.sqrt(alpha), 2.0 * math.sqrt(beta)
    if method == "subtracted":
        return _kernel_subtracted(l, a, b)
    pref = (beta / alpha) ** (l / 2.0)
    if method == "quadrature" or (method == "closed" and alpha == beta):
        return pref * _jj_integral_quad(l, a, b)
    if method == "closed":
        return pref * _jj_integral_closed(l, a, b)
    raise DomainError(f"unknown kernel_limit method {method!r}")


def kernel_identity_check(l: int, a: float, b: float) -> tuple[float, float, float]:
    """(lhs, rhs, |lhs - rhs|) of the J_0-with-subtracted-tail identity.

    lhs by quadrature of the tail form, rhs = (b/a)^L int_0^1 J_L J_L in closed form.
    """
    a, b = _positive(a, "a"), _positive(b, "b")
    if a == b:
        raise DomainError("kernel_identity_check needs a != b")
    lhs = _kernel_subtracted(l, a, b)
    rhs = (b / a) ** l * _jj_integral_closed(l, a, b)
    return lhs, rhs, abs(lhs - rhs)


def g_limit(l: int, w: float, a: float) -> float:
    """(prod_{k<=L} k!) (2 pi)^{(L-1)/2} e^{-a(1-w^2)} (1-w^2)^L."""
    a = _positive(a, "a")
    one_minus = 1.0 - float(w) ** 2
    if one_minus <= 0:
        raise DomainError("g_limit needs w^2 < 1")
    fact = math.prod(math.factorial(k) for k in range(1, l + 1))
    return fact * (2.0 * math.pi) ** ((l - 1) / 2.0) * math.exp(-a * one_minus) * one_minus**l


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepRow:
    n: int
    finite: float
    limit: float
    rel_err: float


@dataclass
class SweepTable:
    kind: str
    l: int
    scaling: ScalingParams
    rows: list[SweepRow] = field(default_factory=list)
    dropped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def decreasing(self) -> bool:
        errs = [r.rel_err for r in self.rows]
        return all(b < a for a, b in zip(errs, errs[1:]))

    @property
    def final_rel_err(self) -> float:
        return self.rows[-1].rel_err if self.rows else math.inf


def _scaled_inverse_cp(n: int, l: int, sc: ScalingParams) -> float:
    rs = sc.r_star
    logq, rel = log_q_closed(n, l, n * sc.r, sc.xi / (n * rs))
    if rel > INSTABILITY_REL:
        raise ConvergenceError(f"Q_N relative error {rel:.1e}")
    return math.exp((n + l - 0.5) * math.log(n) - n * rs + logq)


def _scaled_cp(n: int, l: int, sc: ScalingParams, convention: str) -> float:
    rs = sc.r_star
    p = sc.xi / (n * rs) if convention == "statement" else sc.xi / n
    # E[prod(p + x_i)] = (-1)^N E[prod(z - x_i)] at z = -p
    logmag, phase = log_cp_quadrature(degenerate_params(n, l, n * sc.r), -p)
    if abs(phase.imag) > INSTABILITY_REL:
        raise ConvergenceError("characteristic polynomial has a spurious imaginary part")
    sign = (-1) ** n * math.copysign(1.0, phase.real)
    return sign * math.exp(n * rs - (n + l + 0.5) * math.log(n) + logmag)


def _scaled_kernel(n: int, l: int, sc: ScalingParams) -> float:
    scale = n * sc.r_star
    val = complex(kernel_values(degenerate_params(n, l, n * sc.r),
                                [sc.alpha / scale], [sc.beta / scale])[0]) / scale
    if abs(val.imag) > INSTABILITY_REL * abs(val.real):
        raise ConvergenceError(f"kernel contour lost accuracy (imaginary part {val.imag:.1e})")
    return val.real


def _scaled_g(n: int, l: int, sc: ScalingParams) -> float:
    if sc.a >= n:
        raise DomainError("tau = 1 - a/N must be positive")
    val = g_function(n, l, n * sc.w_sq, 1.0 - sc.a / n).value
    return float(np.real(val)) / n ** ((n - 0.5) * (l - 1) + 1)


def convergence_sweep(kind: str, l: int, scaling: ScalingParams, n_list,
                      convention: str = "statement",
                      require_decreasing: bool = False) -> SweepTable:
    """Table of (N, scaled finite-N value, limit, rel error) over n_list.

    kind "inverse_cp" and "g" take L in {0, 1} and {1} respectively; "cp" and
    "kernel" take L = 0.  For "cp", convention "proof" uses p = xi/N and the
    limit at xi r_star instead of p = xi/(N r_star).  Rows whose finite-N
    evaluation is unstable are dropped and listed in `dropped`.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("n_list must be nonempty and strictly ascending")
    if kind not in SWEEP_KINDS:
        raise DomainError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")
    if convention not in ("statement", "proof"):
        raise DomainError("convention must be 'statement' or 'proof'")
    if kind == "inverse_cp":
        if l not in (0, 1):
            raise DomainError("inverse_cp sweep needs L in {0, 1} (stable closed forms)")
        limit = inverse_cp_limit(l, scaling.xi)

        def finite(n):
            return _scaled_inverse_cp(n, l, scaling)
    elif kind == "cp":
        if l != 0 or max(n_list) > 80:
            raise DomainError("cp sweep needs L = 0 and N <= 80")
        xi_lim = scaling.xi if convention == "statement" else scaling.xi * scaling.r_star
        limit = cp_limit(l, xi_lim)

        def finite(n):
            return _scaled_cp(n, l, scaling, convention)
    elif kind == "kernel":
        if l != 0 or max(n_list) > 80:
            raise DomainError("kernel sweep needs L = 0 and N <= 80")
        limit = kernel_limit(l, scaling.alpha, scaling.beta)

        def finite(n):
            return _scaled_kernel(n, l, scaling)
    else:
        if l != 1:
            raise DomainError("g sweep needs L = 1 (stable closed form)")
        limit = g_limit(l, math.sqrt(scaling.w_sq), scaling.a)

        def finite(n):
            return _scaled_g(n, l, scaling)

    table = SweepTable(kind, l, scaling)
    for n in n_list:
        try:
            val = finite(n)
        except (ConvergenceError, OverflowError) as exc:
            table.dropped.append((n, str(exc)))
            continue
        table.rows.append(SweepRow(n, val, limit, abs(val / limit - 1.0)))
    if require_decreasing and not table.decreasing:
        errs = ", ".join(f"{r.n}: {r.rel_err:.3e}" for r in table.rows)
        raise ConvergenceError(f"relative error not strictly decreasing ({errs})")
    return table

"""Special functions written from scratch.

Everything here works on numpy arrays; complex arguments are accepted where
the underlying series make sense (the contour evaluators need them).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, DomainError

EULER_GAMMA = 0.57721566490153286061

MAX_POLY_ORDER = 200
MAX_BESSEL_ORDER = 16
_SERIES_MAX_TERMS = 500
_SERIES_RTOL = 1e-16


def _as_array(x):
    arr = np.asarray(x)
    if arr.dtype.kind not in "fc":
        arr = arr.astype(float)
    return arr


def _check_order(n: int, limit: int, what: str) -> int:
    if int(n) != n or n < 0:
        raise DomainError(f"{what} order must be a nonnegative integer, got {n}")
    if n > limit:
        raise DomainError(f"{what} order {n} exceeds validated limit {limit}")
    return int(n)


def _unwrap(result, like):
    if np.ndim(like) == 0:
        return result[()] if isinstance(result, np.ndarray) else result
    return result


# ---------------------------------------------------------------------------
# 0F1 and Bessel functions

def _hyp0f1_series(b: int, x: np.ndarray) -> np.ndarray:
    total = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(_SERIES_MAX_TERMS):
        term = term * x / ((b + k) * (k + 1.0))
        total = total + term
        small = np.abs(term) <= _SERIES_RTOL * np.abs(total)
        if np.all(small | (np.abs(term) < 1e-300)):
            break
    else:
        raise ConvergenceError("0F1 series did not converge within 500 terms")
    if not np.all(np.isfinite(total)):
        raise OverflowError("0F1 series overflowed; use a log-scaled evaluation")
    return total


def _miller_start(order: int, tmax: float) -> int:
    m = int(max(order, tmax)) + 20 + int(math.sqrt(40.0 * max(order, tmax, 1.0)))
    return m + (m % 2)


def _log_bessel_i_miller(order: int, t: np.ndarray):
    """Miller backward recurrence for I_order(t), Re t >= 0.

    Returns (scaled, log_factor) with I = scaled * exp(log_factor).
    Normalisation uses e^t = I_0(t) + 2 sum_k I_k(t).
    """
    t = np.asarray(t, dtype=complex)
    start = _miller_start(order, float(np.max(np.abs(t))))
    nxt = np.zeros_like(t)
    cur = np.full_like(t, 1e-280)
    norm = np.zeros_like(t)
    target = np.zeros_like(t)
    for k in range(start, 0, -1):
        prev = (2.0 * k / t) * cur + nxt
        nxt, cur = cur, prev
        # cur now holds I_{k-1} (scaled)
        if k - 1 == order:
            target = cur.copy()
        if k - 1 >= 1:
            norm = norm + 2.0 * cur
        else:
            norm = norm + cur
        big = np.abs(cur) > 1e200
        if np.any(big):
            scale = np.where(big, 1e-200, 1.0)
            cur = cur * scale
            nxt = nxt * scale
            norm = norm * scale
            target = target * scale
    # I_order = target / norm * e^t ; common scale factors cancel
    ratio = target / norm
    return ratio, t


def _hyp0f1_miller(b: int, x: np.ndarray) -> np.ndarray:
    zeta = np.sqrt(x.astype(complex))
    t = 2.0 * zeta
    ratio, tt = _log_bessel_i_miller(b - 1, t)
    log_pref = math.lgamma(b) - (b - 1) * np.log(zeta) + tt
    out = ratio * np.exp(log_pref)
    if not np.all(np.isfinite(out)):
        raise OverflowError("0F1 overflowed; use a log-scaled evaluation")
    return out


def hyp0f1(b: int, x):
    """Confluent limit function 0F1(;b;x) = sum x^k / ((b)_k k!).

    Uses the power series where it is free of cancellation and a Bessel
    backward recurrence elsewhere (large |x| away from the positive axis).
    """
    if int(b) != b or b < 1:
        raise DomainError("hyp0f1 needs an integer b >= 1")
    b = int(b)
    x_arr = _as_array(x)
    if np.any(np.abs(x_arr) > 1e6):
        raise DomainError("hyp0f1 argument outside |x| <= 1e6")
    flat = x_arr.reshape(-1)
    root = np.sqrt(flat.astype(complex))
    loss = 2.0 * (np.abs(root) - root.real)
    use_series = (np.abs(flat) <= 25.0) | ((loss <= 5.0) & (np.abs(flat) <= 4e4))
    out = np.empty(flat.shape, dtype=complex if x_arr.dtype.kind == "c" else float)
    if np.any(use_series):
        out[use_series] = _hyp0f1_series(b, flat[use_series])
    rest = ~use_series
    if np.any(rest):
        vals = _hyp0f1_miller(b, flat[rest])
        out[rest] = vals if out.dtype.kind == "c" else vals.real
    return _unwrap(out.reshape(x_arr.shape), x)


def _bessel_series(order: int, x: np.ndarray, sign: float) -> np.ndarray:
    half = x / 2.0
    term = half**order / math.factorial(order)
    total = term.copy()
    q = sign * half * half
    for k in range(1, _SERIES_MAX_TERMS):
        term = term * q / (k * (k + order))
        total = total + term
        if np.all((np.abs(term) <= _SERIES_RTOL * np.abs(total)) | (np.abs(term) < 1e-300)):
            return total
    raise ConvergenceError("Bessel series did not converge within 500 terms")


def _bessel_j_miller(order: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    start = _miller_start(order, float(np.max(x)))
    nxt = np.zeros_like(x)
    cur = np.full_like(x, 1e-280)
    norm = np.zeros_like(x)
    target = np.zeros_like(x)
    for k in range(start, 0, -1):
        prev = (2.0 * k / x) * cur - nxt
        nxt, cur = cur, prev
        if k - 1 == order:
            target = cur.copy()
        if k - 1 == 0:
            norm = norm + cur
        elif (k - 1) % 2 == 0:
            norm = norm + 2.0 * cur
        big = np.abs(cur) > 1e200
        if np.any(big):
            scale = np.where(big, 1e-200, 1.0)
            cur, nxt, norm, target = cur * scale, nxt * scale, norm * scale, target * scale
    return target / norm


def bessel_j_any(order: int, x):
    """J_order(x) for x >= 0 without the public order cap (internal use)."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise DomainError("bessel_j needs x >= 0")
    flat = x_arr.reshape(-1)
    out = np.empty_like(flat)
    small = flat <= 12.0
    if np.any(small):
        out[small] = _bessel_series(order, flat[small], -1.0)
    if np.any(~small):
        out[~small] = _bessel_j_miller(order, flat[~small])
    return _unwrap(out.reshape(x_arr.shape), x)


def bessel_j(order: int, x):
    """Bessel function of the first kind J_n(x), x >= 0."""
    order = _check_order(order, MAX_BESSEL_ORDER, "Bessel")
    return bessel_j_any(order, x)


def bessel_i(order: int, x):
    """Modified Bessel function I_n(x), x >= 0."""
    order = _check_order(order, MAX_BESSEL_ORDER, "Bessel")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise DomainError("bessel_i needs x >= 0")
    flat = x_arr.reshape(-1)
    out = np.empty_like(flat)
    small = flat <= 50.0
    if np.any(small):
        out[small] = _bessel_series(order, flat[small], 1.0)
    if np.any(~small):
        ratio, t = _log_bessel_i_miller(order, flat[~small])
        with np.errstate(over="raise"):
            out[~small] = (ratio * np.exp(t)).real
    return _unwrap(out.reshape(x_arr.shape), x)


def macdonald_integral(order: int, xi: float, r_star: float = 1.0) -> float:
    """int_0^inf a^(order-1) exp(-xi/a - a r_star) da by adaptive trapezoid in log a.

    Substituting a = e^s gives a double-exponentially decaying integrand on
    the real line, for which the trapezoid rule converges geometrically; the
    step is halved until two successive values agree to 1e-15.
    """
    if xi <= 0 or r_star <= 0:
        raise DomainError("macdonald_integral needs xi > 0 and r_star > 0")
    # peak of order*s - xi e^{-s} - r_star e^{s}
    peak = math.log((order + math.sqrt(order * order + 4.0 * xi * r_star)) / (2.0 * r_star))

    def log_f(s):
        return order * s - xi * np.exp(-s) - r_star * np.exp(s)

    f_peak = float(log_f(peak))
    lo = peak - 1.0
    while f_peak - float(log_f(lo)) < 60.0:
        lo -= 1.0
    hi = peak + 1.0
    while f_peak - float(log_f(hi)) < 60.0:
        hi += 1.0
    h = 0.5
    prev = None
    for _ in range(20):
        s = np.arange(lo, hi + h / 2, h)
        val = h * float(np.sum(np.exp(log_f(s) - f_peak)))
        if prev is not None and abs(val - prev) <= 1e-15 * abs(val):
            return val * math.exp(f_peak)
        prev = val
        h /= 2.0
    raise ConvergenceError("Macdonald integral did not converge")


def bessel_k(order: int, x: float) -> float:
    """Macdonald function K_n(x) from its integral representation.

    int_0^inf a^(n-1) e^{-xi/a - a} da = 2 xi^(n/2) K_n(2 sqrt(xi)), xi = x^2/4.
    """
    order = _check_order(order, MAX_BESSEL_ORDER, "Bessel")
    if np.ndim(x) != 0:
        return np.array([bessel_k(order, float(v)) for v in np.ravel(x)]).reshape(np.shape(x))
    if x <= 0:
        raise DomainError("bessel_k needs x > 0")
    xi = x * x / 4.0
    return 0.5 * xi ** (-order / 2.0) * macdonald_integral(order, xi)


# ---------------------------------------------------------------------------
# orthogonal polynomials

def _three_term(n: int, x, alpha_fn, beta_fn, p1_fn):
    """p_{k+1} = alpha_k(x) p_k - beta_k p_{k-1}; returns (scaled p_n, p_{n-1}, log scale)."""
    x = _as_array(x)
    prev = np.zeros_like(x, dtype=x.dtype) if n > 0 else None
    cur = np.ones_like(x)
    log_scale = np.zeros(x.shape)
    if n == 0:
        return cur, np.zeros_like(cur), log_scale
    prev, cur = cur, p1_fn(x)
    for k in range(1, n):
        prev, cur = cur, alpha_fn(k, x) * cur - beta_fn(k) * prev
        mag = np.abs(cur)
        big = mag > 1e150
        if np.any(big):
            s = np.where(big, mag, 1.0)
            cur = cur / s
            prev = prev / s
            log_scale = log_scale + np.log(s)
    return cur, prev, log_scale


def laguerre(n: int, x, alpha: float = 0.0):
    """Generalised Laguerre polynomial L_n^(alpha)(x) by the three-term recurrence."""
    n = _check_order(n, MAX_POLY_ORDER, "Laguerre")
    x_arr = _as_array(x)
    if n == 0:
        return _unwrap(np.ones_like(x_arr), x)
    prev = np.ones_like(x_arr)
    cur = 1.0 + alpha - x_arr
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x_arr) * cur - (k + alpha) * prev) / (k + 1)
    return _unwrap(cur, x)


def log_laguerre_monic(n: int, x, alpha: float = 0.0):
    """(log|pi_n(x)|, sign or phase) for the monic Laguerre polynomial.

    pi_n = (-1)^n n! L_n^(alpha); recurrence pi_{k+1} = (x-2k-1-alpha) pi_k - k(k+alpha) pi_{k-1}.
    """
    n = _check_order(n, MAX_POLY_ORDER, "Laguerre")
    cur, _, log_scale = _three_term(
        n, x,
        lambda k, t: t - 2 * k - 1 - alpha,
        lambda k: k * (k + alpha),
        lambda t: t - 1 - alpha,
    )
    mag = np.abs(cur)
    with np.errstate(divide="ignore"):
        logmag = np.log(mag) + log_scale
    phase = np.where(mag > 0, cur / np.where(mag > 0, mag, 1.0), 0.0)
    return _unwrap(logmag, x), _unwrap(phase, x)


def laguerre_monic(n: int, x, alpha: float = 0.0):
    """Monic Laguerre polynomial pi_n(x) = (-1)^n n! L_n(x)."""
    n = _check_order(n, MAX_POLY_ORDER, "Laguerre")
    if n <= 20:
        cur, _, log_scale = _three_term(
            n, x,
            lambda k, t: t - 2 * k - 1 - alpha,
            lambda k: k * (k + alpha),
            lambda t: t - 1 - alpha,
        )
        return _unwrap(cur * np.exp(log_scale), x)
    logmag, phase = log_laguerre_monic(n, x, alpha)
    return phase * np.exp(logmag)


def hermite_monic(n: int, x):
    """Monic (probabilists') Hermite polynomial: h_{n+1} = x h_n - n h_{n-1}."""
    n = _check_order(n, 100, "Hermite")
    x_arr = _as_array(x)
    if n == 0:
        return _unwrap(np.ones_like(x_arr), x)
    prev, cur = np.ones_like(x_arr), x_arr.copy()
    for k in range(1, n):
        prev, cur = cur, x_arr * cur - k * prev
    return _unwrap(cur, x)


# ---------------------------------------------------------------------------
# incomplete gamma, factorial-scale helpers

def _logsumexp(vals: np.ndarray) -> float:
    m = float(np.max(vals))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(vals - m))))


def log_gamma_upper(n: int, x: float) -> float:
    """log Gamma(n, x) for integer n >= 1 from the finite sum."""
    if int(n) != n or n < 1:
        raise DomainError("gamma_upper needs an integer n >= 1")
    if x < 0:
        raise DomainError("gamma_upper needs x >= 0")
    n = int(n)
    if x == 0:
        return math.lgamma(n)
    m = np.arange(n)
    terms = m * math.log(x) - np.array([math.lgamma(k + 1) for k in m])
    return math.lgamma(n) - x + _logsumexp(terms)


def gamma_upper(n: int, x: float) -> float:
    """Gamma(n, x) = (n-1)! e^{-x} sum_{m<n} x^m/m!."""
    if int(n) != n or n < 1:
        raise DomainError("gamma_upper needs an integer n >= 1")
    if x < 0:
        raise DomainError("gamma_upper needs x >= 0")
    n = int(n)
    if n > 20:
        return math.exp(log_gamma_upper(n, x))
    term, total = 1.0, 1.0
    for m in range(1, n):
        term *= x / m
        total += term
    return math.factorial(n - 1) * math.exp(-x) * total


def gamma_lower(n: int, x: float) -> float:
    """gamma(n, x) = (n-1)! e^{-x} sum_{m>=n} x^m/m!, summed directly."""
    if int(n) != n or n < 1:
        raise DomainError("gamma_lower needs an integer n >= 1")
    n = int(n)
    log_first = n * math.log(x) - math.lgamma(n + 1) if x > 0 else -math.inf
    if log_first == -math.inf:
        return 0.0
    term, total, m = 1.0, 1.0, n
    while True:
        m += 1
        term *= x / m
        total += term
        if term < 1e-17 * total:
            break
        if m > n + 10000:
            raise ConvergenceError("gamma_lower series did not converge")
    return math.exp(math.lgamma(n) - x + log_first) * total


def log_vandermonde(points):
    """(log|Delta|, sign) for Delta = prod_{i<j}(x_j - x_i); complex points give a phase."""
    pts = np.asarray(points)
    if pts.ndim != 1 or pts.size < 1:
        raise DomainError("vandermonde needs a nonempty list")
    logmag = 0.0
    phase = 1.0 + 0.0j if pts.dtype.kind == "c" else 1.0
    for i in range(pts.size):
        for j in range(i + 1, pts.size):
            d = pts[j] - pts[i]
            if d == 0:
                return -math.inf, 0.0
            logmag += math.log(abs(d))
            phase = phase * (d / abs(d))
    return logmag, phase


def vandermonde(points):
    """prod_{i<j}(x_j - x_i); a single point gives 1."""
    logmag, phase = log_vandermonde(points)
    if logmag == -math.inf:
        return 0.0 * phase
    return phase * math.exp(logmag)


# ---------------------------------------------------------------------------
# exponential integral (needed for pole subtraction in Cauchy-type integrals)

def _exp_e1_scalar(w: complex) -> complex:
    if w == 0:
        raise DomainError("exp_e1 is singular at 0")
    if w.real <= 0 and w.imag == 0:
        raise DomainError("exp_e1 has a branch cut on the negative real axis")
    r = abs(w)
    if r <= 4.0 or r + w.real <= 10.0:
        total = 0.0 + 0.0j
        term = 1.0 + 0.0j
        for k in range(1, 2000):
            term *= -w / k
            add = term / k
            total += add
            if abs(add) <= 1e-17 * max(abs(total), 1e-300):
                break
        else:
            raise ConvergenceError("E1 series did not converge")
        e1 = -EULER_GAMMA - np.log(w) - total
        return complex(np.exp(w) * e1)
    tiny = 1e-300
    b = w + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 20000):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return complex(h)
    raise ConvergenceError("E1 continued fraction did not converge")


def exp_e1(w):
    """e^w E_1(w) = int_0^inf e^{-u}/(u+w) du, for w off the closed negative axis."""
    if np.ndim(w) == 0:
        return _exp_e1_scalar(complex(w))
    arr = np.asarray(w, dtype=complex)
    return np.array([_exp_e1_scalar(complex(v)) for v in arr.ravel()]).reshape(arr.shape)


def log_factorial(n: int) -> float:
    return math.lgamma(n + 1.0)

"""Small-N determinantal oracle built on the Gram matrix of the bi-orthogonal system.

eta_i(x) = x^{i-1} and, for a distinct source, phi_j(x) = x^L e^{-x} e^{-omega_j}
0F1(1; omega_j x).  For a degenerate source the phi_j are replaced by the
confluent basis (1/k!) d^k/d omega^k [e^{-omega} 0F1(1; omega x)] x^L e^{-x} at
omega = z_sq, which spans the same space as the limit of distinct columns.

Gram entries are stored row-scaled: G~_{ij} = int eta_i phi_j / (i+L-1)!, i.e.
L_{i+L-1}(-omega_j) (distinct) or L^{(k)}_{i+L-1-k}(-z_sq)/k! (confluent).
Nothing here shares code with the contour evaluators in `exact`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, DomainError
from .exact import Distinct, EnsembleParams
from .linalg import det_lu, inverse_lu, logdet_lu
from .quad import EvalResult, integrate_cauchy
from .specfun import hyp0f1, laguerre, laguerre_monic

MAX_ORACLE_N = 12
MAX_ORACLE_L = 4
COND_LIMIT = 1e12


@dataclass(frozen=True)
class OracleParams:
    """Like EnsembleParams, but allows L up to 4 (oracle-only range)."""

    n: int
    l: int
    source: object

    @property
    def omegas(self) -> np.ndarray:
        return EnsembleParams.omegas.fget(self)

    @property
    def degenerate(self) -> bool:
        return not isinstance(self.source, Distinct)


@dataclass
class GramData:
    g: np.ndarray          # row-scaled Gram matrix G~
    c: np.ndarray          # inverse of G~
    log_scale: np.ndarray  # log (i+L-1)! removed from row i
    cond: float


def _check(params):
    if params.n > MAX_ORACLE_N or params.l > MAX_ORACLE_L:
        raise DomainError(f"oracle supports N <= {MAX_ORACLE_N}, L <= {MAX_ORACLE_L}")


def _gram_entries(params, rows: int) -> np.ndarray:
    n, l = params.n, params.l
    g = np.zeros((rows, n))
    if not params.degenerate:
        for i in range(rows):
            g[i] = laguerre(i + l, -params.omegas)
        return g
    rho = params.source.z_sq
    for i in range(rows):
        deg = i + l
        for k in range(min(n, deg + 1)):
            g[i, k] = float(laguerre(deg - k, -rho, alpha=k)) / math.factorial(k)
    return g


def gram(params) -> GramData:
    """Row-scaled Gram matrix and its inverse; raises if badly conditioned."""
    _check(params)
    g = _gram_entries(params, params.n)
    c = inverse_lu(g).real
    cond = float(np.max(np.sum(np.abs(g), axis=0)) * np.max(np.sum(np.abs(c), axis=0)))
    if not math.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(f"scaled Gram condition estimate {cond:.3g} exceeds {COND_LIMIT:g}")
    log_scale = np.array([math.lgamma(i + params.l + 1) for i in range(params.n)])
    return GramData(g, c, log_scale, cond)


def basis_functions(params, x) -> np.ndarray:
    """phi_j(x) for j = 1..N; shape (N,) + shape(x)."""
    x = np.asarray(x, dtype=float)
    n, l = params.n, params.l
    base = x**l * np.exp(-x)
    if not params.degenerate:
        om = params.omegas
        return np.stack([math.exp(-w) * hyp0f1(1, w * x) for w in om]) * base
    rho = params.source.z_sq
    pieces = [x**j * hyp0f1(1 + j, rho * x) / math.factorial(j) ** 2 for j in range(n)]
    out = []
    for k in range(n):
        acc = np.zeros_like(x)
        for j in range(k + 1):
            acc = acc + (-1.0) ** (k - j) / math.factorial(k - j) * pieces[j]
        out.append(math.exp(-rho) * acc)
    return np.stack(out) * base


def cauchy_transforms(params, y: complex, rel_tol: float = 1e-12) -> np.ndarray:
    """r_j = int_0^inf phi_j(u)/(y - u) du."""
    out = [integrate_cauchy(lambda u, j=j: _phi_no_exp(params, u, j), y, rel_tol).value
           for j in range(params.n)]
    return np.array(out)


def _phi_no_exp(params, u, j: int):
    """phi_j(u) e^{u}, for use against the Laguerre weight (u may be complex)."""
    l = params.l
    u = np.asarray(u)
    if not params.degenerate:
        w = params.omegas[j]
        return math.exp(-w) * hyp0f1(1, w * u) * u**l
    rho = params.source.z_sq
    acc = 0.0
    for i in range(j + 1):
        acc = acc + ((-1.0) ** (j - i) / math.factorial(j - i)
                     * u**i * hyp0f1(1 + i, rho * u) / math.factorial(i) ** 2)
    return math.exp(-rho) * acc * u**l


# ---------------------------------------------------------------------------
# averages

def inverse_cp_oracle(params, y: complex, check: bool = True) -> complex:
    """E[prod 1/(y - x_i)] by the last-column sum and by a bordered determinant.

    Both are computed; with check=True they must agree to 1e-9.
    """
    _check(params)
    y = complex(y)
    gd = gram(params)
    n, l = params.n, params.l
    r = cauchy_transforms(params, y)
    scale = math.exp(-gd.log_scale[-1])
    col = gd.c[:, n - 1] * scale
    via_sum = complex(np.sum(col * r))
    bordered = gd.g.astype(complex)
    bordered[n - 1] = r * scale
    via_det = det_lu(bordered) / det_lu(gd.g)
    if check and abs(via_sum - via_det) > 1e-9 * max(abs(via_det), 1e-300):
        raise ConditioningError(
            f"oracle routes disagree: sum {via_sum} vs bordered {via_det}")
    return via_det


def last_column_coefficients(params) -> np.ndarray:
    """c_{N,j}: the coefficients of the N-th dual function, for unscaled phi_j.

    For a distinct source the unscaled functions are x^L e^{-x} 0F1(1; omega_j x)
    (no e^{-omega_j}), matching the usual Gram normalisation.
    """
    gd = gram(params)
    col = gd.c[:, params.n - 1] * math.exp(-gd.log_scale[-1])
    if not params.degenerate:
        col = col * np.exp(-params.omegas)
    return col


def cp_oracle(params, z_arg: complex) -> complex:
    """E[prod (z - x_i)] = det[G_ext | z^{i-1}] / det G with one extra Gram row."""
    _check(params)
    z = complex(z_arg)
    n, l = params.n, params.l
    gd = gram(params)
    ext = np.zeros((n + 1, n + 1), dtype=complex)
    ext[:, :n] = _gram_entries(params, n + 1)
    logs = np.array([math.lgamma(i + l + 1) for i in range(n + 1)])
    # z^{i-1}/(i+L-1)! relative to the last row scale (N+L)!
    ext[:, n] = np.array([z**i for i in range(n + 1)]) * np.exp(logs[-1] - logs)
    lm_e, ph_e = logdet_lu(ext)
    lm_g, ph_g = logdet_lu(gd.g)
    if lm_e == -math.inf:
        return 0.0j
    return complex(ph_e / ph_g * math.exp(lm_e - lm_g))


def ratio_oracle(params, v: complex, z: complex) -> complex:
    """E[prod (v - x_i)/(z - x_i)] by a change of basis in the Gram determinant.

    span{x^{i-1}(v - x)/(z - x)} has the basis (v - x)x^{k-1}, k < N, plus
    (v - x)/(z - x).  The map from x^{i-1} to ((z - x)x^{k-1}, 1) has unit
    determinant, so the ratio is det B / det G with the rows below.
    """
    _check(params)
    v, z = complex(v), complex(z)
    n, l = params.n, params.l
    ge = _gram_entries(params, n)
    b = np.zeros((n, n), dtype=complex)
    for i in range(n - 1):
        # row i scaled by 1/(i+L)!; the x^{i+1} row carries the factor (i+L+1)
        b[i] = v * ge[i] - (i + l + 1) * ge[i + 1]
    r = cauchy_transforms(params, z)
    last_scale = math.exp(-math.lgamma(n + l))
    b[n - 1] = (math.factorial(l) * ge[0] + (v - z) * r) * last_scale
    return det_lu(b) / det_lu(ge)


def kernel_oracle(params, x, y) -> np.ndarray:
    """K_N(x, y) = sum_{i,l} x^{i-1}/(i+L-1)! (G~^{-1})_{l,i} phi_l(y)."""
    _check(params)
    gd = gram(params)
    n, l = params.n, params.l
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    powers = np.stack([x**i * math.exp(-gd.log_scale[i]) for i in range(n)])   # (n,...)
    phi = basis_functions(params, y)                                              # (n,...)
    # sum_i powers_i * sum_l C_{l,i} phi_l
    mixed = np.tensordot(gd.c.T, phi, axes=(1, 0))                                # (i,...)
    return np.sum(powers * mixed, axis=0)


def normalization_log(params) -> tuple[float, float]:
    """(log|N_L|, sign) with N_L = N! det G for the unscaled distinct basis.

    Unscaled: zeta_j(x) = x^L e^{-x} 0F1(1; omega_j x), eta_i = x^{i-1}.
    """
    if params.degenerate:
        raise DomainError("normalization_log needs a distinct source")
    gd = gram(params)
    lm, ph = logdet_lu(gd.g)
    total = lm + float(np.sum(gd.log_scale)) + float(np.sum(params.omegas)) + math.lgamma(params.n + 1)
    return total, float(np.sign(ph.real))


# ---------------------------------------------------------------------------
# third route: ratios of monic-Laguerre determinants

def _log_f_ratio_det(l: int, eps: np.ndarray):
    """(log|det|, sign) of det[pi_{L+i-1}(-eps_j)]_{i,j<=K}, pi monic Laguerre."""
    k = eps.size
    if k == 0:
        return 0.0, 1.0
    m = np.array([[laguerre_monic(l + i, -e) for e in eps] for i in range(k)])
    lm, ph = logdet_lu(m)
    return lm, float(np.sign(ph.real))


def _log_f(l: int, eps: np.ndarray):
    """log|F_K(eps)| and its sign.

    F_K(eps) = int ... det[0F1(1; eps_j y_i)] Delta(y) prod y^L e^{-y} dy
    = K! e^{sum eps} (-1)^{KL + K(K-1)/2} det[pi_{L+i-1}(-eps_j)].
    """
    k = eps.size
    lm, sg = _log_f_ratio_det(l, eps)
    sign = sg * (-1.0) ** (k * l + k * (k - 1) // 2)
    return math.lgamma(k + 1) + float(np.sum(eps)) + lm, sign


def f_integral(l: int, eps) -> float:
    """F_K(eps) in plain form (small K only)."""
    lm, sg = _log_f(l, np.asarray(eps, dtype=float))
    return sg * math.exp(lm)


def inverse_cp_appendix_b(params, y: complex, spread: float | None = None) -> complex:
    """E[prod 1/(y - x_i)] from ratios of F-integrals.

    Distinct source: N sum_i (-1)^{N+i} r_i F_{N-1}(omega without i) / F_N(omega)
    with r_i = int 0F1(1; omega_i u) u^L e^{-u}/(y - u) du.

    Degenerate source: the sum is a cofactor expansion of
    (-1)^{N+L-1} det[pi_{L+k-1}(-omega_j); e^{-omega_j} r_j] / det[pi_{L+k-1}(-omega_j)],
    whose coincident limit replaces column j by (1/j!) d^j/d omega^j at z_sq.
    Passing `spread` instead evaluates the distinct formula on the symmetric
    perturbation z_sq + h (i - (N+1)/2), h = spread * (1 - k/8), and
    extrapolates to h = 0 in h^2 (about 1e-5 at N = 6, with spread 0.8).
    """
    _check(params)
    y = complex(y)
    if not params.degenerate or params.n == 1:
        return _appendix_b_distinct(params.l, params.omegas, y)
    if spread is None:
        return _appendix_b_confluent(params.l, params.n, params.source.z_sq, y)
    n = params.n
    rho = params.source.z_sq
    offsets = np.arange(1, n + 1) - 0.5 * (n + 1)
    hs = [spread * (1.0 - k / 8.0) for k in range(6)]
    table = [_appendix_b_distinct(params.l, rho + h * offsets, y) for h in hs]
    # Neville in h^2
    for m in range(1, len(hs)):
        for i in range(len(hs) - m):
            a, b = hs[i] ** 2, hs[i + m] ** 2
            table[i] = (b * table[i] - a * table[i + 1]) / (b - a)
    return table[0]


def _monic_rows(l: int, n_rows: int, n_cols: int, rho: float) -> np.ndarray:
    """(1/k!) d^k/d omega^k pi_{L+i}(-omega) at rho = (-1)^k C(m, k) pi^{(k)}_{m-k}(-rho)."""
    m = np.zeros((n_rows, n_cols))
    for i in range(n_rows):
        deg = l + i
        for k in range(min(deg, n_cols - 1) + 1):
            m[i, k] = (-1) ** k * math.comb(deg, k) * laguerre_monic(deg - k, -rho, alpha=k)
    return m


def _appendix_b_confluent(l: int, n: int, rho: float, y: complex) -> complex:
    top = _monic_rows(l, n, n, rho)
    last = np.empty(n, dtype=complex)
    for k in range(n):

        def g(u, k=k):
            u = np.asarray(u)
            acc = np.zeros(u.shape, dtype=np.result_type(u, float))
            for j in range(k + 1):
                acc = acc + ((-1) ** (k - j) / math.factorial(k - j) / math.factorial(j) ** 2
                             * u ** j * hyp0f1(1 + j, rho * u))
            return acc * u ** l

        last[k] = integrate_cauchy(g, y, 1e-12).value
    bordered = top.astype(complex)
    bordered[n - 1] = last
    lm_b, ph_b = logdet_lu(bordered)
    lm_t, ph_t = logdet_lu(top)
    # e^{-rho} from the r-row; the common e^{-rho} factors of the columns cancel
    return (-1.0) ** (n + l - 1) * ph_b / ph_t * math.exp(lm_b - lm_t - rho)


def _appendix_b_distinct(l: int, omegas: np.ndarray, y: complex) -> complex:
    n = omegas.size
    lf_n, sg_n = _log_f(l, omegas)
    total = 0.0j
    for i in range(n):
        w = omegas[i]

        def g(u, w=w):
            return hyp0f1(1, w * np.asarray(u)) * np.asarray(u) ** l

        r_i = integrate_cauchy(g, y, 1e-12).value
        rest = np.delete(omegas, i)
        lf, sg = _log_f(l, rest)
        total += (-1.0) ** (n + i + 1) * r_i * sg * sg_n * math.exp(lf - lf_n)
    return n * total


# ---------------------------------------------------------------------------
# joint density

def jpdf(params, x) -> float:
    """Joint density of the squared singular values at the point x (length N).

    P(x) = det[x_j^{i-1}] det[phi_k(x_j)] / (N! det G), symmetric in x and
    normalised over [0, inf)^N.
    """
    _check(params)
    x = np.asarray(x, dtype=float)
    n = params.n
    if x.shape[-1] != n:
        raise DomainError("jpdf needs N coordinates")
    flat = x.reshape(-1, n)
    gd = gram(params)
    lm_g, ph_g = logdet_lu(gd.g)
    out = np.empty(flat.shape[0])
    for idx, pt in enumerate(flat):
        vand = np.array([[pt[j] ** i for j in range(n)] for i in range(n)])
        phi = basis_functions(params, pt)  # (k, j)
        dv = det_lu(vand).real
        dp = det_lu(phi).real
        out[idx] = dv * dp / (ph_g.real * math.exp(lm_g + float(np.sum(gd.log_scale))
                                                    + math.lgamma(n + 1)))
    return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])


def oracle_eval(params, kind: str, *args) -> EvalResult:
    """Dispatch helper used by the CLI verify suite."""
    fn = {"inverse-cp": inverse_cp_oracle, "cp": cp_oracle, "ratio": ratio_oracle,
          "kernel": kernel_oracle}[kind]
    val = complex(np.asarray(fn(params, *args)))
    return EvalResult(val, 0.0, {"route": "gram"})

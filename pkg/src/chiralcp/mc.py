"""Monte Carlo sampling of the deformed chiral ensemble.

Draws X = Omega^* + G with G iid complex Gaussian (Re, Im ~ N(0, 1/2)), which
is exact for L = 0.  For L >= 1 every draw carries the importance weight
det(X^* X)^L, stored as a logarithm.

Randomness is split into fixed-size chunks.  Chunk k always uses the k-th
child of SeedSequence(seed) with a Philox generator, and chunk sums are
reduced in chunk order, so results do not depend on the worker count.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .exact import EnsembleParams
from .linalg import svd_squared, svd_squared_batch

__all__ = [
    "MCEstimate",
    "SampleBatch",
    "WeightDegeneracyWarning",
    "source_matrix",
    "sample_batch",
    "estimate",
    "estimate_many",
    "functional_values",
    "validate_functional",
    "normalization_ratio",
]

CHUNK = 1 << 15
ESS_FLOOR = 0.01
FUNCTIONALS = ("inverse_cp", "cp", "ratio", "d_function")


class WeightDegeneracyWarning(RuntimeWarning):
    """Effective sample size fell below 1% of the draw count."""


@dataclass(frozen=True)
class MCEstimate:
    mean: complex
    stderr: float
    ess: float
    n_samples: int
    seed: int
    degenerate_weights: bool = False


@dataclass
class SampleBatch:
    """Squared singular values x (count, N) and log det(X^* X)^L per draw."""

    x: np.ndarray
    log_weight: np.ndarray

    def __len__(self):
        return self.x.shape[0]


def source_matrix(params: EnsembleParams) -> np.ndarray:
    """Diagonal Omega whose squared singular values are the source spectrum."""
    return np.diag(np.sqrt(params.omegas)).astype(complex)


def _check_source(params: EnsembleParams, omega_matrix) -> np.ndarray:
    om = np.asarray(omega_matrix, dtype=complex)
    n = params.n
    if om.shape != (n, n):
        raise DomainError(f"omega_matrix must be {n}x{n}")
    got = np.sort(svd_squared(om))
    want = np.sort(params.omegas)
    if np.max(np.abs(got - want)) > 1e-9 * max(1.0, float(np.max(want))):
        raise DomainError("squared singular values of omega_matrix do not match the source")
    return om


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("CHIRALCP_THREADS", "1") or 1)
    return max(1, int(threads))


def _chunk_sizes(count: int) -> list[int]:
    full, rest = divmod(count, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _draw_chunk(omega_star: np.ndarray, l: int, size: int, seq: np.random.SeedSequence):
    n = omega_star.shape[0]
    rng = np.random.Generator(np.random.Philox(seq))
    g = rng.standard_normal((size, n, n, 2)) * math.sqrt(0.5)
    mats = omega_star[None] + (g[..., 0] + 1j * g[..., 1])
    x = svd_squared_batch(mats)
    with np.errstate(divide="ignore"):
        logw = l * np.sum(np.log(x), axis=1) if l else np.zeros(size)
    return x, logw


def _map_chunks(params, omega_matrix, count, seed, threads, fn):
    """Apply fn(x, log_weight) to each chunk; results in chunk order."""
    if int(count) != count or count < 1:
        raise DomainError("count must be a positive integer")
    om = _check_source(params, omega_matrix)
    omega_star = om.conj().T
    sizes = _chunk_sizes(int(count))
    seqs = np.random.SeedSequence(int(seed)).spawn(len(sizes))

    def work(k):
        x, logw = _draw_chunk(omega_star, params.l, sizes[k], seqs[k])
        return fn(x, logw)

    nthreads = min(_resolve_threads(threads), len(sizes))
    if nthreads == 1:
        return [work(k) for k in range(len(sizes))]
    with ThreadPoolExecutor(nthreads) as pool:
        return list(pool.map(work, range(len(sizes))))


def sample_batch(params: EnsembleParams, omega_matrix, count: int, seed: int,
                 threads: int | None = None) -> SampleBatch:
    parts = _map_chunks(params, omega_matrix, count, seed, threads, lambda x, w: (x, w))
    return SampleBatch(np.concatenate([p[0] for p in parts]),
                       np.concatenate([p[1] for p in parts]))


def _off_support(w, what: str) -> complex:
    w = complex(w)
    if w.imag == 0 and w.real >= 0:
        raise DomainError(f"{what} must lie off [0, inf)")
    return w


def validate_functional(functional) -> tuple:
    """Normalise ("inverse_cp", y), ("cp", z), ("ratio", v, z) or ("d_function", p)."""
    kind, *args = functional
    arity = {"inverse_cp": 1, "cp": 1, "ratio": 2, "d_function": 1}
    if kind not in arity:
        raise DomainError(f"unknown functional {kind!r}; expected one of {FUNCTIONALS}")
    if len(args) != arity[kind]:
        raise DomainError(f"{kind} takes {arity[kind]} argument(s)")
    if kind == "inverse_cp":
        return (kind, _off_support(args[0], "y"))
    if kind == "cp":
        return (kind, complex(args[0]))
    if kind == "ratio":
        return (kind, complex(args[0]), _off_support(args[1], "z"))
    if float(args[0]) <= 0:
        raise DomainError("p must be positive")
    return (kind, float(args[0]))


def functional_values(functional, x: np.ndarray) -> np.ndarray:
    """prod_i f(x_i) for each draw (row of x)."""
    kind, *args = validate_functional(functional)
    if kind == "inverse_cp":
        return np.prod(1.0 / (args[0] - x), axis=1)
    if kind == "cp":
        return np.prod(args[0] - x, axis=1)
    if kind == "ratio":
        return np.prod((args[0] - x) / (args[1] - x), axis=1)
    return np.prod(1.0 / (args[0] + x), axis=1).astype(complex)


def _log_weight_shift(params: EnsembleParams) -> float:
    """Fixed reference for log weights, so every chunk uses the same scale."""
    return params.l * params.n * math.log(params.n + float(np.mean(params.omegas)) + 1.0)


def _chunk_stats(fvals: np.ndarray, logw: np.ndarray, shift: float):
    w = np.exp(logw - shift)
    return (float(np.sum(w)), float(np.sum(w * w)),
            complex(np.sum(w * fvals)), float(np.sum(w * w * (fvals.real**2 + fvals.imag**2))),
            complex(np.sum(w * w * fvals)))


def _finish(stats, count, seed, plain: bool, shift: float) -> MCEstimate:
    sw = sw2 = swf2 = 0.0
    swf = swwf = 0j
    for a, b, c, d, e in stats:
        sw += a
        sw2 += b
        swf += c
        swf2 += d
        swwf += e
    ess = sw * sw / sw2 if sw2 > 0 else 0.0
    if plain:
        # ordinary mean of w f, weights rescaled back by e^{shift}
        scale = math.exp(shift)
        mean = swf / count
        var = max(swf2 / count - abs(mean) ** 2, 0.0)
        return MCEstimate(mean * scale, math.sqrt(var / max(count - 1, 1)) * scale,
                          ess, count, seed, ess < ESS_FLOOR * count)
    mean = swf / sw
    # delta method: sum w^2 |f - mean|^2 / (sum w)^2
    num = swf2 - 2.0 * (mean.conjugate() * swwf).real + abs(mean) ** 2 * sw2
    stderr = math.sqrt(max(num, 0.0)) / sw
    return MCEstimate(mean, stderr, ess, count, seed, ess < ESS_FLOOR * count)


def estimate_many(params: EnsembleParams, omega_matrix, functionals, count: int, seed: int,
                  threads: int | None = None) -> list[MCEstimate]:
    """Estimates for several functionals from one set of draws.

    Averages are self-normalised by the weights det^L.  The d_function entry
    is instead the plain mean of det^L prod 1/(p + x_i) over the Gaussian
    draws, which carries the normalisation ratio N~_L / (L! prod j!^2).
    """
    functionals = [validate_functional(f) for f in functionals]
    if any(f[0] == "d_function" for f in functionals) and not params.degenerate:
        raise DomainError("d_function needs a degenerate source")
    shift = _log_weight_shift(params)

    def fn(x, logw):
        return [_chunk_stats(functional_values(f, x), logw, shift) for f in functionals]

    parts = _map_chunks(params, omega_matrix, count, seed, threads, fn)
    out = []
    for i, f in enumerate(functionals):
        est = _finish([p[i] for p in parts], int(count), int(seed), f[0] == "d_function", shift)
        if est.degenerate_weights:
            warnings.warn(f"effective sample size {est.ess:.1f} below 1% of {count}",
                          WeightDegeneracyWarning, stacklevel=2)
        out.append(est)
    return out


def estimate(params: EnsembleParams, omega_matrix, functional, count: int, seed: int,
             threads: int | None = None) -> MCEstimate:
    """MC estimate of one functional; see estimate_many."""
    return estimate_many(params, omega_matrix, [functional], count, seed, threads)[0]


def normalization_ratio(params: EnsembleParams, omega_matrix, count: int, seed: int,
                        threads: int | None = None) -> MCEstimate:
    """Plain mean of det(X^* X)^L over Gaussian draws, i.e. N~_L / (L! prod_{j<L} j!^2)."""
    shift = _log_weight_shift(params)

    def fn(x, logw):
        return _chunk_stats(np.ones(x.shape[0], dtype=complex), logw, shift)

    parts = _map_chunks(params, omega_matrix, count, seed, threads, fn)
    return _finish(parts, int(count), int(seed), True, shift)

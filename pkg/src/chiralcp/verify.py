"""Verification suites shared by the command line and the acceptance tests.

Each suite returns a list of Check records with the measured deviation and
the tolerance it was held to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import asym, exact, mc, oracle
from .exact import Degenerate, Distinct, EnsembleParams
from .quad import integrate_semi_infinite

__all__ = [
    "Check",
    "connection_l0_checks",
    "connection_l1_checks",
    "bessel_identity_checks",
    "identity_checks",
    "suite_passed",
    "inverse_cp_three_way",
    "cp_ratio_checks",
    "kernel_checks",
    "oracle_checks",
    "MC_GRID",
    "mc_checks",
]

CONNECTION_N = range(1, 9)
CONNECTION_P = (0.1, 1.0, 10.0)
CONNECTION_ZSQ = (0.0, 0.5, 2.0)
SMALL_Y = (-0.5, -2.0, 1 + 2j)


@dataclass(frozen=True)
class Check:
    suite: str
    case: str
    deviation: float
    tolerance: float
    required: bool = True

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tolerance)


def _rel(a, b) -> float:
    return abs(complex(a) - complex(b)) / abs(complex(b))


# ---------------------------------------------------------------------------
# identities

def connection_l0_checks(tol: float = 1e-8) -> list[Check]:
    """One-dimensional L=0 connection function vs the general contour route."""
    out = []
    for n in CONNECTION_N:
        for zsq in CONNECTION_ZSQ:
            for p in CONNECTION_P:
                a = exact.d_l0_closed(n, zsq, p).value
                b = exact.d_general(n, 0, zsq, p).value
                out.append(Check("connection-l0", f"N={n} z_sq={zsq} p={p}", _rel(b, a), tol))
    return out


def connection_l1_checks(tol: float = 1e-8) -> list[Check]:
    """Incomplete-gamma L=1 connection function vs the general contour route."""
    out = []
    for n in CONNECTION_N:
        for zsq in CONNECTION_ZSQ:
            for p in CONNECTION_P:
                a = exact.d_l1_closed(n, zsq, p).value
                b = exact.d_general(n, 1, zsq, p).value
                out.append(Check("connection-l1", f"N={n} z_sq={zsq} p={p}", _rel(b, a), tol))
    return out


def bessel_identity_checks(tol: float = 1e-9) -> list[Check]:
    """Subtracted J_0 form against (b/a)^L int J_L J_L, L <= 4."""
    grid = (0.5, 1.0, 2.0, 5.0)
    out = []
    for l in range(5):
        for a in grid:
            for b in grid:
                if a != b:
                    _, _, diff = asym.kernel_identity_check(l, a, b)
                    out.append(Check("bessel-identity", f"L={l} a={a} b={b}", diff, tol))
    return out


def suite_passed(checks: list[Check]) -> bool:
    return all(c.passed for c in checks if c.required)


def identity_checks() -> list[Check]:
    return connection_l0_checks() + connection_l1_checks() + bessel_identity_checks()


# ---------------------------------------------------------------------------
# exact evaluators against the determinantal oracles

def _small_sources(n: int):
    return (Distinct(tuple(0.3 + 0.45 * j for j in range(n))), Degenerate(0.8, n))


def _label(p: EnsembleParams) -> str:
    src = f"z_sq={p.source.z_sq}" if p.degenerate else "distinct"
    return f"N={p.n} L={p.l} {src}"


def inverse_cp_three_way(max_n: int = 6, tol: float = 1e-6) -> list[Check]:
    """Contour evaluator, Gram oracle and F-ratio route, pairwise."""
    out = []
    for n in range(1, max_n + 1):
        for l in (0, 1, 2):
            for src in _small_sources(n):
                p = EnsembleParams(n, l, src)
                for y in SMALL_Y:
                    a = exact.inverse_cp(p, y).value
                    b = oracle.inverse_cp_oracle(p, y)
                    c = oracle.inverse_cp_appendix_b(p, y)
                    dev = max(_rel(a, b), _rel(c, b), _rel(a, c))
                    out.append(Check("inverse-cp-three-way", f"{_label(p)} y={y}", dev, tol))
    return out


def cp_ratio_checks(max_n: int = 6, tol: float = 1e-6, unit_tol: float = 1e-8) -> list[Check]:
    out = []
    v = 0.7 + 0.2j
    for n in range(1, max_n + 1):
        for l in (0, 1, 2):
            for src in _small_sources(n):
                p = EnsembleParams(n, l, src)
                for z in SMALL_Y:
                    out.append(Check("cp-vs-oracle", f"{_label(p)} z={z}",
                                     _rel(exact.cp(p, z).value, oracle.cp_oracle(p, z)), tol))
                    out.append(Check("ratio-vs-oracle", f"{_label(p)} v={v} z={z}",
                                     _rel(exact.ratio_cp(p, v, z).value, oracle.ratio_oracle(p, v, z)), tol))
                    out.append(Check("ratio-unit", f"{_label(p)} v=z={z}",
                                     abs(exact.ratio_cp(p, z, z).value - 1.0), unit_tol))
    return out


KERNEL_POINTS = ((0.3, 0.7), (1.0, 2.5), (2.0, 0.4))


def kernel_trace(p: EnsembleParams) -> complex:
    """int_0^inf K_N(x, x) dx."""
    return integrate_semi_infinite(lambda x: exact.kernel_values(p, x, x) * np.exp(x),
                                   1e-10, weighted=True).value


def kernel_reproduce(p: EnsembleParams, x: float, y: float) -> complex:
    """int_0^inf K_N(x, t) K_N(t, y) dt."""

    def f(t):
        return exact.kernel_values(p, x, t) * exact.kernel_values(p, t, y) * np.exp(t)

    return integrate_semi_infinite(f, 1e-10, weighted=True).value


def kernel_checks(max_n: int = 5, tol: float = 1e-6, trace_tol: float = 1e-6,
                  reproduce_tol: float = 1e-5) -> list[Check]:
    out = []
    for n in range(1, max_n + 1):
        for l in (0, 1):
            for src in _small_sources(n):
                p = EnsembleParams(n, l, src)
                for x, y in KERNEL_POINTS:
                    a = exact.kernel(p, x, y).value
                    b = complex(oracle.kernel_oracle(p, x, y))
                    out.append(Check("kernel-vs-oracle", f"{_label(p)} x={x} y={y}", _rel(a, b), tol))
                out.append(Check("kernel-trace", _label(p), abs(kernel_trace(p) - n), trace_tol))
    p = EnsembleParams(3, 1, Distinct((0.2, 1.0, 2.5)))
    for x, y in KERNEL_POINTS:
        out.append(Check("kernel-reproducing", f"{_label(p)} x={x} y={y}",
                         _rel(kernel_reproduce(p, x, y), exact.kernel(p, x, y).value), reproduce_tol))
    return out


def oracle_checks(max_n: int = 6) -> list[Check]:
    return (inverse_cp_three_way(max_n) + cp_ratio_checks(max_n)
            + kernel_checks(min(max_n, 5)))


# ---------------------------------------------------------------------------
# Monte Carlo

MC_GRID = (
    EnsembleParams(1, 0, Distinct((0.8,))),
    EnsembleParams(2, 0, Distinct((0.5, 1.5))),
    EnsembleParams(2, 1, Degenerate(0.7, 2)),
    EnsembleParams(3, 0, Degenerate(1.0, 3)),
    EnsembleParams(3, 1, Distinct((0.3, 0.9, 1.6))),
    EnsembleParams(2, 2, Distinct((0.4, 1.2))),
    EnsembleParams(3, 2, Degenerate(0.5, 3)),
    EnsembleParams(1, 2, Distinct((1.3,))),
)
MC_FUNCTIONALS = (
    ("inverse_cp", -1.0),
    ("inverse_cp", 0.5 + 1.5j),
    ("cp", 2.0 + 1.0j),
    ("cp", -0.5),
    ("ratio", 1.5, -1.0),
)


def _exact_value(p: EnsembleParams, functional) -> complex:
    kind, *args = functional
    if kind == "inverse_cp":
        return exact.inverse_cp(p, args[0]).value
    if kind == "cp":
        return exact.cp(p, args[0]).value
    if kind == "ratio":
        return exact.ratio_cp(p, args[0], args[1]).value
    return exact.d_function(p.n, p.l, p.source.z_sq, args[0]).value


def mc_checks(samples: int = 10**6, seed: int = 7, threads: int | None = None,
              grid=MC_GRID, functionals=MC_FUNCTIONALS, coverage: float = 0.95) -> list[Check]:
    """|MC mean - exact| in units of stderr (tolerance 3) plus a coverage row.

    Single rows are informational; the coverage row, with deviation = 1 - fraction of points within 3 stderr and
    tolerance 1 - coverage, decides the suite.
    """
    out = []
    seq = np.random.SeedSequence(seed)
    seeds = seq.generate_state(len(grid), dtype=np.uint64)
    for p, s in zip(grid, seeds):
        ests = mc.estimate_many(p, mc.source_matrix(p), functionals, samples, int(s), threads)
        for f, est in zip(functionals, ests):
            ref = _exact_value(p, f)
            diff = abs(est.mean - ref)
            dev = diff / est.stderr if est.stderr > 0 else (0.0 if diff < 1e-12 else math.inf)
            out.append(Check("mc-3sigma", f"{_label(p)} {f[0]}{tuple(f[1:])}", dev, 3.0,
                             required=False))
    inside = sum(c.passed for c in out) / len(out)
    out.append(Check("mc-coverage", f"{len(out)} points", 1.0 - inside, 1.0 - coverage + 1e-12))
    return out

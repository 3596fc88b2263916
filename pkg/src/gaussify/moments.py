"""Normally ordered moments and their evolution under one protocol round.

For a filter diagonal in the Fock basis, sigma_{n+1} = tr_2[U (sigma_n (x) sigma_n) U^dag].
With U^dag a_1 U = (a_1 + a_2)/sqrt(2) on every party, the moments

    alpha^{x,y} = tr[prod_k (a_k^dag)^{x_k} prod_j a_j^{y_j} sigma]

obey a closed quadratic recursion with coefficients

    C^{x,y}_{u,v} = prod_j binom(x_j, u_j) binom(y_j, v_j) 2^{-(x_j + y_j)/2}.

Coefficients are carried as an exact integer numerator and a power of
sqrt(2) and converted to floating point once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .fock import FockOperator, _lower
from .gaussian import GaussianOperator, wick_moments

__all__ = [
    "MomentTable",
    "multi_indices",
    "coefficient_parts",
    "recursion_coefficient",
    "moment_step",
    "moments_from_fock",
    "moments_from_gaussian",
    "ConvergenceEntry",
    "StrongConvergenceReport",
    "strong_convergence_check",
]


def multi_indices(m: int, max_order: int) -> list[tuple[int, ...]]:
    """All x in N^m with sum(x) <= max_order, graded then lexicographic."""
    out = []
    for total in range(max_order + 1):
        for combo in itertools.product(range(total + 1), repeat=m):
            if sum(combo) == total:
                out.append(combo)
    return out


def _below(x: Sequence[int]) -> Iterator[tuple[int, ...]]:
    return itertools.product(*(range(k + 1) for k in x))


@dataclass(frozen=True, eq=False)
class MomentTable:
    """alpha^{x,y} for all |x|, |y| <= max_order."""

    mode_count: int
    max_order: int
    entries: dict

    def __post_init__(self):
        need = multi_indices(self.mode_count, self.max_order)
        missing = [(x, y) for x in need for y in need if (x, y) not in self.entries]
        if missing:
            raise ValueError(f"moment table not closed: missing {missing[:3]}...")

    def __getitem__(self, key) -> complex:
        x, y = key
        return self.entries[(tuple(x), tuple(y))]

    def keys(self):
        return self.entries.keys()

    def max_difference(self, other: "MomentTable") -> float:
        if (self.mode_count, self.max_order) != (other.mode_count, other.max_order):
            raise ValueError("tables have different shapes")
        return max(abs(self.entries[k] - other.entries[k]) for k in self.entries)


def coefficient_parts(x, y, u, v) -> tuple[int, int]:
    """(N, s) with C = N / sqrt(2)^s exactly."""
    x, y, u, v = map(tuple, (x, y, u, v))
    if not (len(x) == len(y) == len(u) == len(v)):
        raise ValueError("multi-indices must have equal length")
    if any(ui > xi or ui < 0 for ui, xi in zip(u, x)) or any(vi > yi or vi < 0 for vi, yi in zip(v, y)):
        raise ValueError(f"need u <= x and v <= y componentwise, got u={u}, x={x}, v={v}, y={y}")
    num = 1
    for xi, yi, ui, vi in zip(x, y, u, v):
        num *= math.comb(xi, ui) * math.comb(yi, vi)
    return num, sum(x) + sum(y)


def recursion_coefficient(x, y, u, v) -> float:
    num, s = coefficient_parts(x, y, u, v)
    return num / math.sqrt(2) ** s if s % 2 else num / 2 ** (s // 2)


def moment_step(table: MomentTable) -> MomentTable:
    """One round of the quadratic moment recursion."""
    old = table.entries
    idx = multi_indices(table.mode_count, table.max_order)
    new = {}
    for x in idx:
        for y in idx:
            acc = 0j
            for u in _below(x):
                xu = tuple(a - b for a, b in zip(x, u))
                for v in _below(y):
                    yv = tuple(a - b for a, b in zip(y, v))
                    acc += recursion_coefficient(x, y, u, v) * old[(u, v)] * old[(xu, yv)]
            new[(x, y)] = acc
    zero = (0,) * table.mode_count
    new[(zero, zero)] = old[(zero, zero)] ** 2
    return MomentTable(table.mode_count, table.max_order, new)


def moments_from_fock(sigma: FockOperator, max_order: int = 4) -> MomentTable:
    """Moments of ``sigma`` (normalized to unit trace) by direct matrix products."""
    dims = sigma.basis.dims
    if min(dims) <= max_order:
        raise ValueError(f"cutoff dimension {min(dims)} must exceed max_order {max_order}")
    tr = sigma.trace()
    if abs(tr) == 0:
        raise ValueError("sigma has zero trace")
    m = sigma.basis.mode_count
    t = (sigma.data / tr).reshape(dims + dims)
    powers = []
    for d in dims:
        a = _lower(d)
        ad = a.conj().T
        powers.append(
            {(xk, yk): np.linalg.matrix_power(ad, xk) @ np.linalg.matrix_power(a, yk)
             for xk in range(max_order + 1) for yk in range(max_order + 1)}
        )
    idx = multi_indices(m, max_order)
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows, cols = letters[:m], letters[m:2 * m]
    expr = ",".join(r + c for r, c in zip(rows, cols)) + "," + cols + rows + "->"
    entries = {}
    for x in idx:
        for y in idx:
            ops = [powers[j][(x[j], y[j])] for j in range(m)]
            entries[(x, y)] = complex(np.einsum(expr, *ops, t))
    return MomentTable(m, max_order, entries)


def moments_from_gaussian(g: GaussianOperator, max_order: int = 4) -> MomentTable:
    m = g.mode_count
    idx = multi_indices(m, max_order)
    return MomentTable(m, max_order, {(x, y): wick_moments(g, x, y) for x in idx for y in idx})


@dataclass(frozen=True)
class ConvergenceEntry:
    x: tuple
    y: tuple
    alpha0_abs: float
    alpha_inf: complex
    passed: bool


@dataclass(frozen=True)
class StrongConvergenceReport:
    max_order: int
    entries: tuple
    passed: bool

    @property
    def failures(self) -> tuple:
        return tuple(e for e in self.entries if not e.passed)

    @property
    def verdict(self) -> str:
        scope = f"orders <= {self.max_order} checked (truncated check; the hypothesis covers all orders)"
        if self.passed:
            return f"moment conditions hold up to order {self.max_order}: {scope}"
        e = self.failures[0]
        return (
            f"moment conditions fail at x={e.x}, y={e.y}: |alpha_0| = {e.alpha0_abs:.6g} "
            f"vs alpha_inf = {e.alpha_inf.real:.6g}{e.alpha_inf.imag:+.2g}j; {scope}"
        )


def strong_convergence_check(alpha0: MomentTable, sigma_inf: GaussianOperator,
                             max_order: int | None = None, tol: float = 1e-10) -> StrongConvergenceReport:
    """Check |alpha_0^{x,y}| <= alpha_inf^{x,y} with alpha_inf real and nonnegative.

    ``sigma_inf`` is the Gaussian limit of sigma_n, whose covariance equals
    that of sigma_0.  Only orders up to ``max_order`` can be checked.
    """
    k = alpha0.max_order if max_order is None else max_order
    if k > alpha0.max_order:
        raise ValueError("alpha0 table does not reach the requested order")
    idx = multi_indices(alpha0.mode_count, k)
    out = []
    for x in idx:
        for y in idx:
            a0 = abs(alpha0[(x, y)])
            ai = wick_moments(sigma_inf, x, y)
            scale = max(1.0, abs(ai))
            real_ok = abs(ai.imag) <= tol * scale and ai.real >= -tol * scale
            out.append(ConvergenceEntry(x, y, a0, ai, bool(real_ok and a0 <= ai.real + tol * scale)))
    return StrongConvergenceReport(k, tuple(out), all(e.passed for e in out))

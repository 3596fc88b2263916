"""Thermal-form Gaussian filters parameterized by Delta in (0, 1].

Delta = 1 is the vacuum projector and Delta -> 0 approaches the identity.
On mode j the filter is diag(q_j^n) with q = (1 - Delta)/(1 + Delta), scaled
so the largest diagonal entry is 1; its covariance is Delta^-1 times the
identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BasisError, FilterError
from .fock import BasisSpec, FockOperator

__all__ = [
    "FilterSpec",
    "filter_from_delta",
    "identity_filter",
    "filter_weights",
    "filter_fock",
    "filter_inverse_fock",
    "sigma_of",
    "ACCEPT_TOL",
]

ACCEPT_TOL = 1e-14


@dataclass(frozen=True)
class FilterSpec:
    """Per-mode filter parameters.

    ``identity`` marks the exact q = 1 limit (no postselection); it has no
    finite covariance so ``gamma_pi`` is None.
    """

    delta: tuple[float, ...]
    q: tuple[float, ...]
    identity: bool = False

    @property
    def mode_count(self) -> int:
        return len(self.q)

    @property
    def gamma_pi(self) -> Optional[np.ndarray]:
        if self.identity:
            return None
        return np.diag(np.repeat(1.0 / np.asarray(self.delta), 2))

    @property
    def is_vacuum_projector(self) -> bool:
        return all(q == 0.0 for q in self.q)


def filter_from_delta(delta, m: int) -> FilterSpec:
    """Filter with the given Delta (scalar or per mode) on ``m`` modes."""
    deltas = np.broadcast_to(np.asarray(delta, dtype=float), (m,)) if np.ndim(delta) == 0 \
        else np.asarray(delta, dtype=float)
    if deltas.shape != (m,):
        raise FilterError(f"expected {m} Delta values, got {deltas.shape}")
    if not np.all((deltas > 0) & (deltas <= 1)) or not np.all(np.isfinite(deltas)):
        raise FilterError(f"Delta must lie in (0, 1], got {deltas.tolist()}")
    q = (1 - deltas) / (1 + deltas)
    return FilterSpec(tuple(float(x) for x in deltas), tuple(float(x) for x in q))


def identity_filter(m: int) -> FilterSpec:
    return FilterSpec((0.0,) * m, (1.0,) * m, identity=True)


def _check(spec: FilterSpec, basis: BasisSpec):
    if spec.mode_count != basis.mode_count:
        raise BasisError(f"filter has {spec.mode_count} modes, basis has {basis.mode_count}")


def filter_weights(spec: FilterSpec, basis: BasisSpec) -> np.ndarray:
    """Diagonal of the filter, flattened in basis order."""
    _check(spec, basis)
    w = np.ones(1)
    for q, d in zip(spec.q, basis.dims):
        w = np.kron(w, np.float_power(q, np.arange(d)))
    return w


def filter_fock(spec: FilterSpec, basis: BasisSpec) -> FockOperator:
    return FockOperator(basis, np.diag(filter_weights(spec, basis)))


def filter_inverse_fock(spec: FilterSpec, basis: BasisSpec) -> FockOperator:
    """Diagonal q^-n; for q = 0 only defined when that mode keeps just the vacuum."""
    _check(spec, basis)
    w = np.ones(1)
    for q, d in zip(spec.q, basis.dims):
        if q == 0.0:
            if d > 1:
                raise FilterError("inverse of the vacuum projector exists only on the vacuum component")
            col = np.ones(1)
        else:
            col = np.float_power(q, -np.arange(d, dtype=float))
        w = np.kron(w, col)
    return FockOperator(basis, np.diag(w))


def sigma_of(rho: FockOperator, spec: FilterSpec, tol: float = ACCEPT_TOL) -> tuple[FockOperator, float]:
    """sigma = rho Pi / tr(rho Pi) and the acceptance tr(rho Pi)."""
    w = filter_weights(spec, rho.basis)
    product = rho.data * w[None, :]
    accept = complex(np.trace(product))
    if abs(accept) <= tol:
        raise FilterError(f"acceptance tr(rho Pi) = {abs(accept):.2e} vanishes")
    if abs(accept.imag) > 1e-10 * max(1.0, abs(accept)):
        raise FilterError(f"acceptance has imaginary part {accept.imag:.2e}")
    return FockOperator(rho.basis, product / accept), float(accept.real)

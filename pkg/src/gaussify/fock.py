"""Dense linear algebra on truncated multimode Fock spaces.

Flat indices are row-major over modes: mode 0 is the most significant
digit.  When two copies of an m-mode system are combined the modes are
ordered party-major, copy-minor, i.e. ``(0, 0), (0, 1), (1, 0), (1, 1), ...``
where a label ``(j, k)`` means party ``j``, copy ``k``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import BasisError, DisplacementAccuracyError

__all__ = [
    "BasisSpec",
    "FockOperator",
    "QuadratureMoments",
    "annihilation",
    "number_operator",
    "quadratures",
    "identity",
    "embed",
    "tensor",
    "permute_modes",
    "two_copies",
    "partial_trace",
    "partial_transpose",
    "beam_splitter_5050",
    "displacement",
    "single_mode_displacement",
    "char_fn",
    "char_fn_grid",
    "quadrature_moments",
    "logneg_fock",
    "trace_norm",
    "fidelity",
    "ket",
    "state_psi_lambda",
    "state_phi_mu",
    "state_from_terms",
    "state_from_amplitudes",
]


@dataclass(frozen=True)
class BasisSpec:
    """Truncated Fock basis: ``dims[j]`` levels (photon numbers 0..dims[j]-1) on mode j."""

    dims: tuple[int, ...]
    labels: Optional[tuple] = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise BasisError("basis needs at least one mode")
        if any(d < 1 for d in dims):
            raise BasisError(f"mode dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(dims):
                raise BasisError("one label per mode required")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def uniform(cls, mode_count: int, dim: int) -> "BasisSpec":
        return cls((dim,) * mode_count)

    @property
    def mode_count(self) -> int:
        return len(self.dims)

    @property
    def cutoffs(self) -> tuple[int, ...]:
        """Maximum photon number per mode."""
        return tuple(d - 1 for d in self.dims)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def index(self, occupation: Sequence[int]) -> int:
        occupation = tuple(occupation)
        if len(occupation) != self.mode_count:
            raise BasisError(f"occupation {occupation} has wrong length")
        if any(n < 0 or n >= d for n, d in zip(occupation, self.dims)):
            raise BasisError(f"occupation {occupation} outside basis {self.dims}")
        return int(np.ravel_multi_index(occupation, self.dims))

    def occupation(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.dim:
            raise BasisError(f"flat index {flat} outside basis of size {self.dim}")
        return tuple(int(n) for n in np.unravel_index(flat, self.dims))

    def _check_mode(self, mode: int) -> int:
        if not 0 <= mode < self.mode_count:
            raise BasisError(f"mode {mode} out of range for {self.mode_count} modes")
        return mode


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator on a truncated Fock basis.

    No Hermiticity or positivity is assumed; use the predicates.
    """

    basis: BasisSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        n = self.basis.dim
        if data.shape != (n, n):
            raise BasisError(f"data shape {data.shape} does not match basis dimension {n}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def dag(self) -> "FockOperator":
        return FockOperator(self.basis, self.data.conj().T)

    def normalized(self) -> "FockOperator":
        t = self.trace()
        if abs(t) == 0:
            raise ValueError("cannot normalize an operator with zero trace")
        return FockOperator(self.basis, self.data / t)

    def expect(self, op: "FockOperator | np.ndarray") -> complex:
        """tr(op @ self)."""
        m = op.data if isinstance(op, FockOperator) else op
        return complex(np.sum(m.T * self.data))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return self.hermiticity_defect() <= tol

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def is_positive(self, tol: float = 1e-10) -> bool:
        return self.is_hermitian(tol) and self.min_eigenvalue() >= -tol

    def element(self, row: Sequence[int], col: Sequence[int]) -> complex:
        return complex(self.data[self.basis.index(row), self.basis.index(col)])

    def _check_same_basis(self, other: "FockOperator"):
        if other.basis.dims != self.basis.dims:
            raise BasisError(f"basis mismatch {self.basis.dims} vs {other.basis.dims}")

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        self._check_same_basis(other)
        return FockOperator(self.basis, self.data @ other.data)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        self._check_same_basis(other)
        return FockOperator(self.basis, self.data + other.data)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        self._check_same_basis(other)
        return FockOperator(self.basis, self.data - other.data)

    def __mul__(self, scalar) -> "FockOperator":
        return FockOperator(self.basis, self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "FockOperator":
        return FockOperator(self.basis, self.data / scalar)


@dataclass(frozen=True, eq=False)
class QuadratureMoments:
    """First moments ``d`` and covariance ``gamma`` (vacuum -> identity)."""

    d: np.ndarray
    gamma: np.ndarray

    def is_real(self, tol: float = 1e-10) -> bool:
        return (
            np.max(np.abs(self.d.imag), initial=0.0) <= tol
            and np.max(np.abs(self.gamma.imag), initial=0.0) <= tol
        )


# --------------------------------------------------------------------------
# single-mode building blocks


@functools.lru_cache(maxsize=None)
def _lower(d: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)
    a.flags.writeable = False
    return a


def identity(basis: BasisSpec) -> FockOperator:
    return FockOperator(basis, np.eye(basis.dim))


def _kron_at(basis: BasisSpec, ops: dict) -> np.ndarray:
    """Kronecker product with ``ops[j]`` on mode j and identity elsewhere."""
    out = np.ones((1, 1), dtype=complex)
    for j, d in enumerate(basis.dims):
        out = np.kron(out, ops.get(j, np.eye(d)))
    return out


def annihilation(basis: BasisSpec, mode: int) -> FockOperator:
    """Lowering operator a_mode, identity on the other modes."""
    basis._check_mode(mode)
    return FockOperator(basis, _kron_at(basis, {mode: _lower(basis.dims[mode])}))


def number_operator(basis: BasisSpec, mode: int) -> FockOperator:
    basis._check_mode(mode)
    d = basis.dims[mode]
    return FockOperator(basis, _kron_at(basis, {mode: np.diag(np.arange(d, dtype=float))}))


def quadratures(basis: BasisSpec, mode: int) -> tuple[FockOperator, FockOperator]:
    """(X, P) with X = (a^dag + a)/sqrt(2) and P = i(a^dag - a)/sqrt(2)."""
    a = annihilation(basis, mode).data
    ad = a.conj().T
    return (
        FockOperator(basis, (ad + a) / np.sqrt(2)),
        FockOperator(basis, 1j * (ad - a) / np.sqrt(2)),
    )


# --------------------------------------------------------------------------
# composition


def embed(op: np.ndarray, basis: BasisSpec, modes: Sequence[int]) -> FockOperator:
    """Place ``op`` (acting on ``modes`` in the given order) into ``basis``."""
    modes = [basis._check_mode(j) for j in modes]
    if len(set(modes)) != len(modes):
        raise BasisError(f"repeated modes {modes}")
    sub = [basis.dims[j] for j in modes]
    op = np.asarray(op, dtype=complex)
    if op.shape != (math.prod(sub),) * 2:
        raise BasisError("operator shape does not match the selected modes")
    rest = [j for j in range(basis.mode_count) if j not in modes]
    order = modes + rest
    full = np.kron(op, np.eye(math.prod(basis.dims[j] for j in rest)))
    # full acts on modes in ``order``; permute back to basis order
    m = basis.mode_count
    dims_o = [basis.dims[j] for j in order]
    t = full.reshape(dims_o + dims_o)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [m + i for i in inv])
    return FockOperator(basis, t.reshape(basis.dim, basis.dim))


def tensor(a: FockOperator, b: FockOperator) -> FockOperator:
    """A (x) B on the concatenated basis (modes of A first)."""
    labels = None
    if a.basis.labels is not None and b.basis.labels is not None:
        labels = a.basis.labels + b.basis.labels
    basis = BasisSpec(a.basis.dims + b.basis.dims, labels)
    if basis.dim > 20000:
        raise BasisError(f"tensor product dimension {basis.dim} exceeds dense limit")
    return FockOperator(basis, np.kron(a.data, b.data))


def permute_modes(a: FockOperator, order: Sequence[int]) -> FockOperator:
    """Reorder modes; new mode i is old mode ``order[i]``."""
    order = list(order)
    m = a.basis.mode_count
    if sorted(order) != list(range(m)):
        raise BasisError(f"{order} is not a permutation of {m} modes")
    dims = a.basis.dims
    t = a.data.reshape(dims + dims).transpose(order + [m + i for i in order])
    labels = None if a.basis.labels is None else tuple(a.basis.labels[i] for i in order)
    new = BasisSpec(tuple(dims[i] for i in order), labels)
    return FockOperator(new, t.reshape(new.dim, new.dim))


def two_copies(a: FockOperator, b: FockOperator) -> FockOperator:
    """A (x) B for two copies of an m-mode system, party-major copy-minor."""
    if a.basis.dims != b.basis.dims:
        raise BasisError("copies must share a basis")
    m = a.basis.mode_count
    joint = tensor(
        FockOperator(BasisSpec(a.basis.dims, tuple((j, 0) for j in range(m))), a.data),
        FockOperator(BasisSpec(b.basis.dims, tuple((j, 1) for j in range(m))), b.data),
    )
    order = [i for j in range(m) for i in (j, m + j)]
    return permute_modes(joint, order)


def partial_trace(a: FockOperator, keep: Iterable[int]) -> FockOperator:
    """Trace out every mode not in ``keep`` (kept modes retain their order)."""
    keep = sorted({a.basis._check_mode(j) for j in keep})
    if not keep:
        raise BasisError("keep set must be nonempty")
    m = a.basis.mode_count
    dims = a.basis.dims
    t = a.data.reshape(dims + dims)
    rows = list(range(m))
    cols = [m + j if j in keep else j for j in range(m)]
    out_idx = keep + [m + j for j in keep]
    reduced = np.einsum(t, rows + cols, out_idx)
    labels = None if a.basis.labels is None else tuple(a.basis.labels[j] for j in keep)
    basis = BasisSpec(tuple(dims[j] for j in keep), labels)
    return FockOperator(basis, reduced.reshape(basis.dim, basis.dim))


def partial_transpose(a: FockOperator, modes: Iterable[int]) -> FockOperator:
    modes = {a.basis._check_mode(j) for j in modes}
    m = a.basis.mode_count
    dims = a.basis.dims
    perm = [m + j if j in modes else j for j in range(m)]
    perm += [j if j in modes else m + j for j in range(m)]
    t = a.data.reshape(dims + dims).transpose(perm)
    return FockOperator(a.basis, t.reshape(a.dim, a.dim))


# --------------------------------------------------------------------------
# Gaussian unitaries


@functools.lru_cache(maxsize=32)
def _bs_two_mode(d: int) -> np.ndarray:
    a = _lower(d)
    eye = np.eye(d)
    A = np.kron(a, eye)
    B = np.kron(eye, a)
    gen = A.conj().T @ B - B.conj().T @ A
    u = sla.expm(0.25 * np.pi * gen)
    u.flags.writeable = False
    return u


def beam_splitter_5050(basis: BasisSpec, mode_a: int, mode_b: int) -> FockOperator:
    """50:50 beam splitter with U a_a U^dag = (a_a - a_b)/sqrt2, U a_b U^dag = (a_a + a_b)/sqrt2.

    Obtained by exponentiating the pair-number-conserving generator
    ``a_a^dag a_b - a_b^dag a_a`` at angle pi/4.  Exact on the sector with
    pair photon number <= cutoff; higher sectors are clipped by truncation.
    """
    basis._check_mode(mode_a)
    basis._check_mode(mode_b)
    if mode_a == mode_b:
        raise BasisError("beam splitter needs two distinct modes")
    if basis.dims[mode_a] != basis.dims[mode_b]:
        raise BasisError("beam splitter modes must have equal cutoffs")
    return embed(_bs_two_mode(basis.dims[mode_a]), basis, (mode_a, mode_b))


DISPLACEMENT_TOL = 1e-12


@functools.lru_cache(maxsize=4096)
def _displacement_1m(d: int, x: float, p: float, tol: float) -> np.ndarray:
    alpha = abs(complex(-p, x)) / np.sqrt(2)
    # padded exponential; the wave packet of D|k>, k < d, must stay clear of the top band
    spread = np.sqrt(d) + alpha
    pad = int(np.ceil(spread**2 + 10 * spread + 20))
    for _ in range(4):
        a = _lower(pad)
        gen = 1j * (x * (a + a.conj().T) + p * 1j * (a.conj().T - a)) / np.sqrt(2)
        full = sla.expm(gen)
        band = max(1, pad // 10)
        top = np.sum(np.abs(full[pad - band:, :d]) ** 2, axis=0).max()
        if np.sqrt(top) <= tol:
            out = np.ascontiguousarray(full[:d, :d])
            out.flags.writeable = False
            return out
        pad *= 2
    raise DisplacementAccuracyError(
        f"displacement |r|={np.hypot(x, p):.3g} not converged at cutoff {d}: "
        f"top-band amplitude {np.sqrt(top):.2e} > {tol:.1e}"
    )


def single_mode_displacement(d: int, x: float, p: float, tol: float = DISPLACEMENT_TOL) -> np.ndarray:
    """Truncated matrix of exp(i(xX + pP)) with d levels (read-only array)."""
    if not (np.isfinite(x) and np.isfinite(p)):
        raise DisplacementAccuracyError("displacement requires finite r")
    return _displacement_1m(int(d), float(x), float(p), float(tol))


def displacement(basis: BasisSpec, r: Sequence[float], tol: float = DISPLACEMENT_TOL) -> FockOperator:
    """D(r) = exp(i r . R) restricted to the basis, R = (X_1, P_1, ..., X_m, P_m).

    Matrix elements are those of the untruncated operator: the exponential
    is taken in a padded space and cropped, and ``DisplacementAccuracyError``
    is raised if the padded computation is not converged to ``tol``.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (2 * basis.mode_count,):
        raise BasisError(f"r must have length {2 * basis.mode_count}")
    out = np.ones((1, 1), dtype=complex)
    for j, d in enumerate(basis.dims):
        out = np.kron(out, single_mode_displacement(d, r[2 * j], r[2 * j + 1], tol))
    return FockOperator(basis, out)


def char_fn(a: FockOperator, r: Sequence[float], tol: float = DISPLACEMENT_TOL) -> complex:
    """chi_A(r) = tr(D(r) A)."""
    return a.expect(displacement(a.basis, r, tol))


def char_fn_grid(a: FockOperator, axis: Sequence[float], tol: float = DISPLACEMENT_TOL) -> np.ndarray:
    """chi_A on the product grid ``axis^(2m)``.

    Returns an array of shape ``(len(axis),) * 2m`` indexed by
    ``(x_1, p_1, ..., x_m, p_m)``.
    """
    axis = np.asarray(axis, dtype=float)
    n = len(axis)
    dims = a.basis.dims
    t = a.data.reshape((1,) + dims + dims)
    u = 1
    for i, d in enumerate(dims):
        stack = np.array(
            [single_mode_displacement(d, x, p, tol) for x in axis for p in axis]
        )
        rest = math.prod(dims[i + 1:])
        t = t.reshape(u, d, rest, d, rest)
        # chi = sum_{k,j} A[k, j] D[j, k]
        t = np.einsum("ukKjJ,vjk->uvKJ", t, stack, optimize=True)
        u *= n * n
        t = t.reshape((u,) + dims[i + 1:] + dims[i + 1:])
    return t.reshape((n,) * (2 * len(dims)))


# --------------------------------------------------------------------------
# moments and entanglement


def _second_moment_ops(basis: BasisSpec):
    """Exact matrices of {R_j, R_k} within the basis (normal-ordered forms)."""
    m = basis.mode_count
    lows = [annihilation(basis, j).data for j in range(m)]
    R = []
    for a in lows:
        ad = a.conj().T
        R.append((ad + a) / np.sqrt(2))
        R.append(1j * (ad - a) / np.sqrt(2))
    ops = {}
    for j in range(m):
        a = lows[j]
        ad = a.conj().T
        n = ad @ a
        one = np.eye(basis.dim)
        ops[(2 * j, 2 * j)] = a @ a + ad @ ad + 2 * n + one
        ops[(2 * j + 1, 2 * j + 1)] = -(a @ a) - ad @ ad + 2 * n + one
        ops[(2 * j, 2 * j + 1)] = 1j * (ad @ ad - a @ a)
    for i in range(2 * m):
        for k in range(i + 1, 2 * m):
            if i // 2 != k // 2:
                ops[(i, k)] = 2 * R[i] @ R[k]
    return R, ops


def quadrature_moments(a: FockOperator, tol: float = 1e-12) -> QuadratureMoments:
    """First moments d_j = tr(R_j A) and Gamma_jk = tr({R_j - d_j, R_k - d_k} A).

    ``A`` is normalized to unit trace first.  The anticommutator carries no
    1/2, so the vacuum has Gamma = identity.
    """
    t = a.trace()
    if abs(t) <= tol:
        raise ValueError("quadrature moments need an operator with nonzero trace")
    rho = a.data / t
    R, ops = _second_moment_ops(a.basis)
    m2 = 2 * a.basis.mode_count
    d = np.array([np.sum(r.T * rho) for r in R])
    gamma = np.empty((m2, m2), dtype=complex)
    for (i, k), op in ops.items():
        v = np.sum(op.T * rho) - 2 * d[i] * d[k]
        gamma[i, k] = gamma[k, i] = v
    return QuadratureMoments(d, gamma)


def trace_norm(a: FockOperator | np.ndarray) -> float:
    m = a.data if isinstance(a, FockOperator) else np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise BasisError("trace norm needs a square operator")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def logneg_fock(rho: FockOperator, part: Iterable[int], tol: float = 1e-10) -> float:
    """log2 || rho^{T_part} ||_1 for a Hermitian unit-trace rho."""
    if not rho.is_hermitian(tol):
        raise ValueError(f"log-negativity needs a Hermitian state (defect {rho.hermiticity_defect():.2e})")
    if abs(rho.trace() - 1) > 1e-8:
        raise ValueError("log-negativity needs a unit-trace state")
    pt = partial_transpose(rho, part).data
    ev = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(np.log2(np.sum(np.abs(ev))))


def fidelity(psi, phi) -> float:
    """Root fidelity.

    For two state vectors this is |<psi|phi>| (vectors are normalized here).
    A vector and a density operator give sqrt(<psi|rho|psi>); two density
    operators give tr sqrt(sqrt(rho) sigma sqrt(rho)).
    """
    def raw(x):
        return x.data if isinstance(x, FockOperator) else np.asarray(x, dtype=complex)

    x, y = raw(psi), raw(phi)
    if x.shape[0] != y.shape[0]:
        raise BasisError(f"dimension mismatch {x.shape} vs {y.shape}")
    if x.ndim == 1 and y.ndim == 1:
        return float(abs(np.vdot(x, y)) / (np.linalg.norm(x) * np.linalg.norm(y)))
    if x.ndim == 2 and y.ndim == 1:
        x, y = y, x
    if x.ndim == 1:
        v = x / np.linalg.norm(x)
        return float(np.sqrt(max(np.real(v.conj() @ y @ v), 0.0)))
    s = sla.sqrtm(x)
    inner = sla.sqrtm(s @ y @ s)
    return float(np.real(np.trace(inner)))


# --------------------------------------------------------------------------
# states


def ket(basis: BasisSpec, terms: dict) -> np.ndarray:
    """Normalized vector sum_occ c_occ |occ>."""
    v = np.zeros(basis.dim, dtype=complex)
    for occ, c in terms.items():
        v[basis.index(occ)] += c
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("state vector is zero")
    return v / norm


def _pure(basis: BasisSpec, v: np.ndarray) -> FockOperator:
    return FockOperator(basis, np.outer(v, v.conj()))


def state_from_terms(terms: dict, basis: BasisSpec) -> FockOperator:
    """Pure state from {occupation tuple: amplitude}."""
    return _pure(basis, ket(basis, terms))


def state_from_amplitudes(amplitudes: Sequence[complex], basis: BasisSpec) -> FockOperator:
    """Pure state sum_k c_k |k, k, ..., k>."""
    need = len(amplitudes)
    if min(basis.dims) < need:
        raise BasisError(f"{need} amplitudes need at least {need} levels per mode")
    m = basis.mode_count
    return state_from_terms({(k,) * m: c for k, c in enumerate(amplitudes)}, basis)


def state_psi_lambda(lam: float, basis: BasisSpec) -> FockOperator:
    """Normalized |0,0> + lam |1,1>."""
    if basis.mode_count != 2 or min(basis.dims) < 2:
        raise BasisError("Psi_lambda needs two modes with at least 2 levels each")
    return state_from_terms({(0, 0): 1.0, (1, 1): lam}, basis)


def state_phi_mu(mu: float, basis: BasisSpec) -> FockOperator:
    """Normalized |0,0,0> + mu (|1,1,0> + |1,0,1> + |0,1,1>)."""
    if basis.mode_count != 3 or min(basis.dims) < 2:
        raise BasisError("Phi_mu needs three modes with at least 2 levels each")
    terms = {(0, 0, 0): 1.0}
    for occ in itertools.permutations((1, 1, 0)):
        terms[occ] = mu
    return state_from_terms(terms, basis)

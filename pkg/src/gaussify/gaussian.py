"""Covariance-matrix algebra for Gaussian operators.

Conventions
-----------
Quadratures are ordered ``R = (X_1, P_1, ..., X_m, P_m)`` and the covariance
is ``Gamma_jk = tr({R_j - d_j, R_k - d_k} A)`` without a factor 1/2, so the
vacuum has ``Gamma = 1``.  A Gaussian operator has characteristic function

    chi(r) = scale * exp(i r.d - r^T Gamma r / 4).

The symplectic form is ``Sigma = (+)_j [[0, 1], [-1, 0]]`` and a physical
state satisfies ``Gamma + i Sigma >= 0``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import SingularMatrixError, TheoremConditionError

__all__ = [
    "COND_LIMIT",
    "symplectic_form",
    "GaussianOperator",
    "gaussian_char",
    "symmetrize",
    "gaussian_product_cov",
    "FixedPoint",
    "fixed_point_cov",
    "gp_limit_cov",
    "PhysicalityReport",
    "physicality_check",
    "symplectic_eigenvalues",
    "logneg_gaussian",
    "LadderMoments",
    "ladder_moments",
    "cov_from_ladder",
    "wick_moments",
    "two_mode_squeezed_cov",
    "thermal_cov",
    "random_physical_cov",
]

COND_LIMIT = 1e12


def symplectic_form(m: int) -> np.ndarray:
    """Block-diagonal Sigma with blocks [[0, 1], [-1, 0]]."""
    if m < 1:
        raise ValueError("mode count must be positive")
    return np.kron(np.eye(m), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _modes_of(gamma: np.ndarray) -> int:
    n = gamma.shape[0]
    if gamma.shape != (n, n) or n % 2:
        raise ValueError(f"covariance must be square of even size, got {gamma.shape}")
    return n // 2


def _sigma_for(gamma: np.ndarray, sigma: Optional[np.ndarray]) -> np.ndarray:
    m = _modes_of(gamma)
    return symplectic_form(m) if sigma is None else np.asarray(sigma)


@dataclass(frozen=True, eq=False)
class GaussianOperator:
    """(scale, d, Gamma) describing a Gaussian characteristic function."""

    scale: complex
    d: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=complex)
        m = _modes_of(gamma)
        d = np.zeros(2 * m, dtype=complex) if self.d is None else np.array(self.d, dtype=complex)
        if d.shape != (2 * m,):
            raise ValueError("first-moment vector has the wrong length")
        if np.max(np.abs(gamma - gamma.T)) > 1e-12 * max(1.0, np.max(np.abs(gamma))):
            raise ValueError("covariance must be symmetric")
        gamma.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "scale", complex(self.scale))

    @classmethod
    def centered(cls, gamma, scale: complex = 1.0) -> "GaussianOperator":
        return cls(scale, None, gamma)

    @property
    def mode_count(self) -> int:
        return self.gamma.shape[0] // 2

    def is_physical(self, tol: float = 1e-10) -> bool:
        return physicality_check(self.gamma).is_physical(tol)


def gaussian_char(g: GaussianOperator, r: Sequence[float]) -> complex:
    r = np.asarray(r, dtype=float)
    return complex(g.scale * np.exp(1j * r @ g.d - r @ g.gamma @ r / 4))


def symmetrize(gamma: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """(Gamma + Gamma^T)/2, refusing asymmetry above ``tol``."""
    gamma = np.asarray(gamma)
    defect = float(np.max(np.abs(gamma - gamma.T), initial=0.0))
    if defect > tol:
        raise ValueError(f"covariance asymmetric by {defect:.2e} > {tol:.1e}")
    return 0.5 * (gamma + gamma.T)


def _solve_guarded(a: np.ndarray, b: np.ndarray, what: str, exc=SingularMatrixError):
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise exc(f"{what} is singular (condition number {cond:.3g})")
    return np.linalg.solve(a, b), float(cond)


def gaussian_product_cov(gamma_a, gamma_b, sigma: Optional[np.ndarray] = None) -> np.ndarray:
    """Covariance of the normalized product A B of two centered Gaussian operators.

    Gamma_AB = Gamma_B - (Gamma_B + i Sigma)(Gamma_A + Gamma_B)^-1 (Gamma_B - i Sigma)
    """
    ga = np.asarray(gamma_a, dtype=complex)
    gb = np.asarray(gamma_b, dtype=complex)
    sig = _sigma_for(ga, sigma)
    x, _ = _solve_guarded(ga + gb, gb - 1j * sig, "Gamma_A + Gamma_B")
    out = gb - (gb + 1j * sig) @ x
    return 0.5 * (out + out.T)


@dataclass(frozen=True, eq=False)
class FixedPoint:
    """Predicted covariance of the limit state with its diagnostics."""

    gamma: np.ndarray
    imag_defect: float
    min_eigenvalue: float
    physical_min_eigenvalue: float
    condition_number: float
    method: str = "fixed-point"

    @property
    def is_real(self) -> bool:
        return self.imag_defect <= 1e-8

    @property
    def positive_definite(self) -> bool:
        return self.is_real and self.min_eigenvalue > 0

    @property
    def gamma_real(self) -> np.ndarray:
        return np.real(self.gamma)


def _fixed_point_report(gamma: np.ndarray, cond: float, method: str) -> FixedPoint:
    gamma = 0.5 * (gamma + gamma.T)
    imag = float(np.max(np.abs(gamma.imag), initial=0.0))
    re = np.real(gamma)
    return FixedPoint(
        gamma=gamma,
        imag_defect=imag,
        min_eigenvalue=float(np.linalg.eigvalsh(re)[0]),
        physical_min_eigenvalue=physicality_check(re).min_eigenvalue,
        condition_number=cond,
        method=method,
    )


def fixed_point_cov(gamma_sigma, gamma_pi, sigma: Optional[np.ndarray] = None,
                    strict: bool = False) -> FixedPoint:
    """Covariance of the limit state for filter covariance ``gamma_pi``.

    Gamma_inf = (Gamma_Pi - i Sigma)(Gamma_Pi - Gamma_sigma)^-1 (Gamma_Pi + i Sigma) - Gamma_Pi

    Raises ``TheoremConditionError`` when Gamma_Pi - Gamma_sigma is singular.
    With ``strict`` the same error is raised when the result is not real
    positive definite; otherwise the verdict is left in the report.
    """
    gs = np.asarray(gamma_sigma, dtype=complex)
    gp = np.asarray(gamma_pi, dtype=complex)
    sig = _sigma_for(gs, sigma)
    x, cond = _solve_guarded(
        gp - gs, gp + 1j * sig,
        "Gamma_Pi - Gamma_sigma: fixed point does not exist for this filter/state pair",
        exc=TheoremConditionError,
    )
    out = _fixed_point_report((gp - 1j * sig) @ x - gp, cond, "fixed-point")
    if strict and not out.positive_definite:
        raise TheoremConditionError(
            "limit covariance is not real positive definite "
            f"(imag defect {out.imag_defect:.2e}, min eigenvalue {out.min_eigenvalue:.3e})"
        )
    return out


# --------------------------------------------------------------------------
# ladder-operator coordinates


def _ladder_transform(m: int) -> np.ndarray:
    """Rows give (a_1..a_m, a_1^dag..a_m^dag) in terms of R."""
    t = np.zeros((2 * m, 2 * m), dtype=complex)
    s = 1 / np.sqrt(2)
    for j in range(m):
        t[j, 2 * j], t[j, 2 * j + 1] = s, 1j * s
        t[m + j, 2 * j], t[m + j, 2 * j + 1] = s, -1j * s
    return t


@dataclass(frozen=True, eq=False)
class LadderMoments:
    """Centered second moments in ladder form.

    ``aa[j, k] = <a_j a_k>``, ``cc[j, k] = <a_j^dag a_k^dag>`` and
    ``ca[j, k] = <a_j^dag a_k>`` (expectations are tr(. A)).
    """

    aa: np.ndarray
    cc: np.ndarray
    ca: np.ndarray


def ladder_moments(gamma) -> LadderMoments:
    gamma = np.asarray(gamma, dtype=complex)
    m = _modes_of(gamma)
    t = _ladder_transform(m)
    sb = t @ gamma @ t.T / 2
    return LadderMoments(
        aa=sb[:m, :m].copy(),
        cc=sb[m:, m:].copy(),
        ca=sb[m:, :m] - 0.5 * np.eye(m),
    )


def cov_from_ladder(lm: LadderMoments) -> np.ndarray:
    m = lm.aa.shape[0]
    ac = lm.ca.T + np.eye(m)  # <a_j a_k^dag> = <a_k^dag a_j> + delta
    sym_ca = 0.5 * (lm.ca + ac.T)
    sb = np.block([[lm.aa, sym_ca.T], [sym_ca, lm.cc]])
    tinv = np.linalg.inv(_ladder_transform(m))
    gamma = 2 * tinv @ sb @ tinv.T
    return 0.5 * (gamma + gamma.T)


def gp_limit_cov(gamma_sigma, tol: float = 1e-8) -> FixedPoint:
    """Limit covariance for the vacuum-projector filter (Gamma_Pi = 1).

    Here Gamma_Pi - Gamma_sigma is always singular, so the closed form is
    replaced by its continuous extension: sigma = |phi><0| / <0|phi> has
    ladder moments <a a> = Z and nothing else, and the limit is the pure
    state proportional to exp(a^dag Z a^dag / 2)|0>.
    """
    lm = ladder_moments(gamma_sigma)
    resid = max(np.max(np.abs(lm.ca)), np.max(np.abs(lm.cc)))
    if resid > tol:
        raise TheoremConditionError(
            f"sigma is not of the vacuum-projected form (<a^dag a>, <a^dag a^dag> up to {resid:.2e})"
        )
    z = 0.5 * (lm.aa + lm.aa.T)
    norm = np.linalg.norm(z, 2)
    if norm >= 1 - 1e-12:
        raise TheoremConditionError(
            f"pair amplitude matrix has norm {norm:.6g} >= 1: fixed point does not exist"
        )
    m = z.shape[0]
    inv = np.linalg.inv(np.eye(m) - z @ z.conj())
    aa = inv @ z
    ca = z.conj() @ inv @ z
    gamma = cov_from_ladder(LadderMoments(aa=aa, cc=aa.conj(), ca=ca))
    return _fixed_point_report(gamma, float(np.linalg.cond(np.eye(m) - z @ z.conj())), "gp-limit")


# --------------------------------------------------------------------------
# physicality and entanglement


@dataclass(frozen=True)
class PhysicalityReport:
    min_eigenvalue: float
    imag_defect: float
    symmetry_defect: float

    def is_physical(self, tol: float = 1e-10) -> bool:
        return self.min_eigenvalue >= -tol and self.imag_defect <= tol and self.symmetry_defect <= tol


def physicality_check(gamma, sigma: Optional[np.ndarray] = None) -> PhysicalityReport:
    """Smallest eigenvalue of Re(Gamma) + i Sigma plus reality/symmetry defects."""
    gamma = np.asarray(gamma)
    sig = _sigma_for(gamma, sigma)
    re = np.real(gamma)
    h = 0.5 * (re + re.T) + 1j * sig
    return PhysicalityReport(
        min_eigenvalue=float(np.linalg.eigvalsh(h)[0]),
        imag_defect=float(np.max(np.abs(np.imag(gamma)), initial=0.0)),
        symmetry_defect=float(np.max(np.abs(gamma - gamma.T), initial=0.0)),
    )


def symplectic_eigenvalues(gamma, sigma: Optional[np.ndarray] = None, tol: float = 1e-8) -> np.ndarray:
    """The m values |eig(i Sigma Gamma)| (each appears twice), ascending."""
    gamma = np.asarray(gamma)
    if np.max(np.abs(np.imag(gamma)), initial=0.0) > tol:
        raise ValueError("symplectic eigenvalues need a real covariance")
    g = np.real(gamma)
    sig = _sigma_for(g, sigma)
    ev = np.linalg.eigvals(1j * sig @ g)
    if np.max(np.abs(ev.imag)) > tol * max(1.0, np.max(np.abs(ev))):
        raise ValueError("i Sigma Gamma has a complex spectrum; Gamma is not positive")
    vals = np.sort(np.abs(ev.real))
    return 0.5 * (vals[0::2] + vals[1::2])


def logneg_gaussian(gamma, part: Iterable[int], sigma: Optional[np.ndarray] = None) -> float:
    """Log-negativity (base 2) across the cut ``part`` | rest."""
    gamma = np.asarray(gamma)
    m = _modes_of(gamma)
    flip = np.ones(2 * m)
    for j in part:
        if not 0 <= j < m:
            raise ValueError(f"mode {j} out of range")
        flip[2 * j + 1] = -1
    nu = symplectic_eigenvalues(flip[:, None] * np.real(gamma) * flip[None, :], sigma)
    return float(np.sum(np.maximum(0.0, -np.log2(nu))))


# --------------------------------------------------------------------------
# Wick moments


def _hafnian(w: np.ndarray) -> complex:
    """Sum over perfect matchings of the symmetric weight matrix ``w``."""
    n = w.shape[0]
    if n == 0:
        return 1.0
    if n % 2:
        return 0.0
    total = 0.0
    rest = list(range(1, n))
    for i, k in enumerate(rest):
        if w[0, k] == 0:
            continue
        sub = rest[:i] + rest[i + 1:]
        total += w[0, k] * _hafnian(w[np.ix_(sub, sub)])
    return total


def wick_moments(g: GaussianOperator, x_vec: Sequence[int], y_vec: Sequence[int]) -> complex:
    """tr(prod_k (a_k^dag)^{x_k} prod_j a_j^{y_j} G) / tr(G) for centered G.

    Contractions follow the normally ordered sequence (creators left of
    annihilators), so each pair contributes <a^dag a^dag>, <a^dag a> or <a a>.
    """
    if np.max(np.abs(g.d), initial=0.0) > 1e-12:
        raise ValueError("Wick moments are implemented for zero first moments only")
    m = g.mode_count
    x_vec, y_vec = tuple(x_vec), tuple(y_vec)
    if len(x_vec) != m or len(y_vec) != m:
        raise ValueError("multi-indices must have one entry per mode")
    if (sum(x_vec) + sum(y_vec)) % 2:
        return 0j
    lm = ladder_moments(g.gamma)
    ops = [("c", j) for j in range(m) for _ in range(x_vec[j])]
    ops += [("a", j) for j in range(m) for _ in range(y_vec[j])]
    n = len(ops)
    w = np.zeros((n, n), dtype=complex)
    for p, q in itertools.combinations(range(n), 2):
        (tp, jp), (tq, jq) = ops[p], ops[q]
        if tp == "c" and tq == "c":
            v = lm.cc[jp, jq]
        elif tp == "a" and tq == "a":
            v = lm.aa[jp, jq]
        else:
            v = lm.ca[jp, jq]
        w[p, q] = w[q, p] = v
    return complex(_hafnian(w))


# --------------------------------------------------------------------------
# reference covariances


def thermal_cov(nbar: float, m: int = 1) -> np.ndarray:
    return (2 * nbar + 1) * np.eye(2 * m)


def two_mode_squeezed_cov(lam: float) -> np.ndarray:
    """Covariance of the normalized state sum_n lam^n |n, n>."""
    if not 0 <= abs(lam) < 1:
        raise ValueError("two-mode squeezing needs |lam| < 1")
    c = (1 + lam**2) / (1 - lam**2)
    s = 2 * lam / (1 - lam**2)
    z = np.diag([1.0, -1.0])
    return np.block([[c * np.eye(2), s * z], [s * z, c * np.eye(2)]])


def random_physical_cov(rng: np.random.Generator, m: int, squeeze: float = 0.25,
                        min_excess: float = 0.0, max_excess: float = 2.0) -> np.ndarray:
    """Random physical covariance S diag(nu) S^T.

    S = expm(Sigma H) with H symmetric Gaussian of scale ``squeeze``; the
    symplectic eigenvalues nu are uniform in [1 + min_excess, 1 + max_excess].
    Filters with nu near 1 are close to pure, where the fixed-point formula
    becomes singular, so callers drawing filter covariances should keep
    ``min_excess`` away from zero.
    """
    h = rng.normal(size=(2 * m, 2 * m))
    h = squeeze * (h + h.T)
    s = expm(symplectic_form(m) @ h)
    nu = np.repeat(1 + rng.uniform(min_excess, max_excess, size=m), 2)
    return s @ np.diag(nu) @ s.T

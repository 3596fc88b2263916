"""Diagnostics on top of the engine: doubling law, limit prediction, sweeps."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import engine
from .errors import GaussifyError, TheoremConditionError
from .filters import FilterSpec, filter_from_delta, sigma_of
from .fock import (
    BasisSpec,
    FockOperator,
    _lower,
    char_fn_grid,
    fidelity,
    logneg_fock,
    quadrature_moments,
)
from .gaussian import (
    FixedPoint,
    fixed_point_cov,
    gp_limit_cov,
    ladder_moments,
    logneg_gaussian,
    physicality_check,
    symmetrize,
)

__all__ = [
    "PhaseSpaceGrid",
    "bipartitions",
    "doubling_check",
    "BoundedChiReport",
    "bounded_chi_check",
    "Prediction",
    "predict",
    "gp_target_ket",
    "diagonal_ratios",
    "WeakConvergenceReport",
    "weak_convergence_report",
    "SweepRow",
    "sweep_delta",
    "DEFAULT_DELTA_GRID",
]

DEFAULT_DELTA_GRID = (1e-6, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Product grid with ``points`` samples on [-radius, radius] per quadrature."""

    radius: float = 4.0
    points: int = 9

    def __post_init__(self):
        if self.points < 1 or self.points % 2 == 0:
            raise ValueError("points per axis must be a positive odd integer")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.points)

    def point_list(self, mode_count: int) -> np.ndarray:
        return np.array(list(itertools.product(self.axis, repeat=2 * mode_count)))


def bipartitions(m: int) -> list[tuple[int, ...]]:
    """One side of each of the 2^(m-1) - 1 nontrivial cuts of m modes."""
    cuts = []
    for k in range(1, m):
        for part in itertools.combinations(range(m), k):
            comp = tuple(j for j in range(m) if j not in part)
            if comp not in cuts:
                cuts.append(part)
    return cuts


def doubling_check(sigma_n: FockOperator, sigma_n1: FockOperator,
                   grid: PhaseSpaceGrid = PhaseSpaceGrid()) -> float:
    """max_r |chi_{sigma_{n+1}}(r) - chi_{sigma_n}(r / sqrt 2)^2| over the grid.

    The two operators may live on different truncations; the displacement
    matrices are exact for either basis.
    """
    if sigma_n.basis.mode_count != sigma_n1.basis.mode_count:
        raise ValueError("operators have different mode counts")
    axis = grid.axis
    chi1 = char_fn_grid(sigma_n1.normalized(), axis)
    chi0 = char_fn_grid(sigma_n.normalized(), axis / np.sqrt(2))
    return float(np.max(np.abs(chi1 - chi0**2)))


@dataclass(frozen=True)
class BoundedChiReport:
    max_abs: float
    passed: bool
    points: int
    note: str = "sampled on a finite grid, not a proof for all r"


def bounded_chi_check(sigma: FockOperator, grid: PhaseSpaceGrid = PhaseSpaceGrid(),
                      tol: float = 1e-9) -> BoundedChiReport:
    chi = char_fn_grid(sigma.normalized(), grid.axis)
    top = float(np.max(np.abs(chi)))
    return BoundedChiReport(top, top <= 1 + tol, chi.size)


@dataclass(frozen=True, eq=False)
class Prediction:
    """Limit covariance from the initial state and the filter alone."""

    gamma_rho: np.ndarray
    gamma_sigma: np.ndarray
    d_sigma: np.ndarray
    fixed_point: Optional[FixedPoint]
    conditions: dict
    cuts: tuple
    logneg_inf: tuple
    logneg_rho_fock: tuple
    logneg_rho_gaussian: tuple
    method: str
    chi_report: Optional[BoundedChiReport] = None
    messages: tuple = ()

    @property
    def gamma_inf(self) -> Optional[np.ndarray]:
        return None if self.fixed_point is None else self.fixed_point.gamma_real

    @property
    def holds(self) -> bool:
        return all(self.conditions.values())

    @property
    def logneg_inf_total(self) -> float:
        return float(sum(self.logneg_inf))

    @property
    def logneg_rho_fock_total(self) -> float:
        return float(sum(self.logneg_rho_fock))

    @property
    def logneg_rho_gaussian_total(self) -> float:
        return float(sum(self.logneg_rho_gaussian))


def predict(rho: FockOperator, spec: FilterSpec, grid: Optional[PhaseSpaceGrid] = PhaseSpaceGrid(),
            strict: bool = True, first_moment_tol: float = 1e-10) -> Prediction:
    """Predict the limit covariance and its log-negativity without iterating.

    Conditions checked: (i) vanishing first moments of sigma, (ii) |chi_sigma| <= 1
    on ``grid`` (skipped when ``grid`` is None), (iii) a real positive-definite,
    physical limit covariance.  With ``strict`` a failed condition raises
    ``TheoremConditionError`` naming it.
    """
    m = rho.basis.mode_count
    rho_n = rho.normalized()
    qm_rho = quadrature_moments(rho_n)
    gamma_rho = np.real(qm_rho.gamma)
    cuts = tuple(bipartitions(m))
    ln_rho_f = tuple(logneg_fock(rho_n, c) for c in cuts)
    ln_rho_g = tuple(logneg_gaussian(gamma_rho, c) for c in cuts)

    sigma, _ = sigma_of(rho_n, spec)
    qm_sigma = quadrature_moments(sigma)
    gamma_sigma = symmetrize(qm_sigma.gamma)
    d_sigma = qm_sigma.d
    conditions = {}
    messages = []
    dmax = float(np.max(np.abs(d_sigma)))
    conditions["i_zero_first_moments"] = dmax <= first_moment_tol
    if not conditions["i_zero_first_moments"]:
        messages.append(f"condition (i) fails: |d_sigma| = {dmax:.3e}")

    chi_report = None
    if grid is not None:
        chi_report = bounded_chi_check(sigma, grid)
        conditions["ii_bounded_chi"] = chi_report.passed
        if not chi_report.passed:
            messages.append(f"condition (ii) fails on the grid: max |chi_sigma| = {chi_report.max_abs:.12g}")

    fp = None
    try:
        if spec.identity:
            fp = FixedPoint(gamma_rho.astype(complex), 0.0, float(np.linalg.eigvalsh(gamma_rho)[0]),
                            physicality_check(gamma_rho).min_eigenvalue, 1.0, "identity-filter")
            method = "identity-filter"
        elif spec.is_vacuum_projector:
            fp = gp_limit_cov(gamma_sigma)
            method = fp.method
        else:
            fp = fixed_point_cov(gamma_sigma, spec.gamma_pi)
            method = fp.method
    except TheoremConditionError as exc:
        method = "none"
        messages.append(f"condition (iii) fails: {exc}")
        conditions["iii_positive_definite"] = False
    if fp is not None:
        ok = fp.positive_definite and fp.physical_min_eigenvalue >= -1e-8
        conditions["iii_positive_definite"] = ok
        if not ok:
            messages.append(
                f"condition (iii) fails: imag defect {fp.imag_defect:.2e}, min eigenvalue "
                f"{fp.min_eigenvalue:.3e}, min eigenvalue of Gamma + i Sigma {fp.physical_min_eigenvalue:.3e}"
            )

    if strict and messages:
        raise TheoremConditionError("; ".join(messages))

    ln_inf = ()
    if fp is not None and conditions["iii_positive_definite"]:
        ln_inf = tuple(logneg_gaussian(fp.gamma_real, c) for c in cuts)
    return Prediction(
        gamma_rho=gamma_rho, gamma_sigma=gamma_sigma, d_sigma=d_sigma, fixed_point=fp,
        conditions=conditions, cuts=cuts, logneg_inf=ln_inf, logneg_rho_fock=ln_rho_f,
        logneg_rho_gaussian=ln_rho_g, method=method, chi_report=chi_report, messages=tuple(messages),
    )


def gp_target_ket(gamma_sigma: np.ndarray, basis: BasisSpec, tol: float = 1e-8) -> np.ndarray:
    """Normalized truncation of exp(a^dag Z a^dag / 2)|0> with Z = <a a>_sigma.

    This is the pure limit state of the vacuum-projector protocol.
    """
    lm = ladder_moments(gamma_sigma)
    if max(np.max(np.abs(lm.ca)), np.max(np.abs(lm.cc))) > tol:
        raise ValueError("sigma is not of the vacuum-projected form")
    z = 0.5 * (lm.aa + lm.aa.T)
    m = basis.mode_count
    creators = []
    for j, d in enumerate(basis.dims):
        ops = [np.eye(k) for k in basis.dims]
        ops[j] = _lower(d).conj().T
        out = np.ones((1, 1))
        for o in ops:
            out = np.kron(out, o)
        creators.append(out)
    gen = 0.5 * sum(z[j, k] * creators[j] @ creators[k] for j in range(m) for k in range(m))
    v = np.zeros(basis.dim, dtype=complex)
    v[0] = 1.0
    term = v.copy()
    # gen raises the photon number by two, so the series terminates
    for n in range(1, sum(basis.dims)):
        term = gen @ term / n
        if not np.any(term):
            break
        v = v + term
    return v / np.linalg.norm(v)


def diagonal_ratios(rho: FockOperator, levels: Sequence[int]) -> np.ndarray:
    """<n..n|rho|n..n> / <0..0|rho|0..0> for each n in ``levels``."""
    m = rho.basis.mode_count
    base = rho.element((0,) * m, (0,) * m).real
    return np.array([rho.element((n,) * m, (n,) * m).real / base for n in levels])


@dataclass(frozen=True, eq=False)
class WeakConvergenceReport:
    pairs: tuple
    values: np.ndarray  # shape (rounds, pairs): <x|rho_n|y> / tr(rho_n Pi)
    differences: np.ndarray  # |values[n] - values[n-1]|
    ratios: np.ndarray  # <x|rho_n|y> / <0|rho_n|0>
    targets: Optional[np.ndarray] = None

    def shrink_factors(self) -> np.ndarray:
        """differences[n-1] / differences[n] (inf where the later difference vanishes)."""
        d = self.differences
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(d[1:] > 0, d[:-1] / d[1:], np.inf)


def weak_convergence_report(records, spec: FilterSpec, pairs: Sequence[tuple],
                            targets: Optional[Sequence[complex]] = None) -> WeakConvergenceReport:
    """Filter-normalized matrix elements along a run.

    ``pairs`` holds (x, y) occupation tuples; both must be Fock states, which
    are eigenvectors of every filter in the family.
    """
    pairs = tuple((tuple(x), tuple(y)) for x, y in pairs)
    vals, rats = [], []
    for rec in records:
        rho = rec.state
        m = rho.basis.mode_count
        base = rho.element((0,) * m, (0,) * m)
        vals.append([rho.element(x, y) / rec.accept for x, y in pairs])
        rats.append([rho.element(x, y) / base for x, y in pairs])
    vals = np.array(vals)
    diffs = np.abs(np.diff(vals, axis=0))
    return WeakConvergenceReport(
        pairs, vals, diffs, np.array(rats), None if targets is None else np.asarray(targets)
    )


@dataclass(frozen=True)
class SweepRow:
    delta: float
    logneg_inf: Optional[float]
    logneg_rho_fock: float
    logneg_rho_gaussian: float
    success_probs: tuple
    method: str
    error: str = ""
    logneg_inf_cuts: tuple = field(default=())


def _sweep_point(args) -> SweepRow:
    rho, delta, rounds, policy, leakage_bound = args
    m = rho.basis.mode_count
    spec = filter_from_delta(delta, m)
    try:
        pred = predict(rho, spec, grid=None, strict=True)
    except GaussifyError as exc:
        pred = predict(rho, spec, grid=None, strict=False)
        return SweepRow(delta, None, pred.logneg_rho_fock_total, pred.logneg_rho_gaussian_total,
                        (), pred.method, f"{type(exc).__name__}: {exc}")
    probs = ()
    error = ""
    if rounds > 0:
        result = engine.run(engine.ProtocolConfig(rho, spec, rounds, policy, leakage_bound))
        probs = tuple(r.success_prob for r in result.records[1:])
        if result.aborted:
            error = f"engine aborted in round {result.abort_round}: {result.abort_reason}"
    return SweepRow(delta, pred.logneg_inf_total, pred.logneg_rho_fock_total,
                    pred.logneg_rho_gaussian_total, probs, pred.method, error, pred.logneg_inf)


def sweep_delta(rho: FockOperator, deltas: Sequence[float] = DEFAULT_DELTA_GRID, rounds: int = 0,
                policy: str = "exact-pair", leakage_bound: Optional[float] = engine.DEFAULT_LEAKAGE_BOUND,
                jobs: int = 1) -> list[SweepRow]:
    """Predicted limit entanglement (and optional engine success rates) per Delta.

    Failures are recorded in the row and the sweep continues.  Rows come back
    sorted by Delta regardless of ``jobs``.
    """
    tasks = [(rho, float(d), rounds, policy, leakage_bound) for d in deltas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    return sorted(rows, key=lambda r: r.delta)


def fidelity_to_ket(rho: FockOperator, target: np.ndarray) -> float:
    return fidelity(target, rho)


def is_nondecreasing(values: Sequence[float], tol: float = 1e-12) -> bool:
    return all(b >= a - tol for a, b in zip(values, values[1:]))

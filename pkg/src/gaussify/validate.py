"""Invariant suite behind the ``validate`` subcommand.

Every check is deterministic; the random operators use a fixed seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import engine
from .analysis import PhaseSpaceGrid, doubling_check
from .filters import filter_fock, filter_from_delta, sigma_of
from .fock import (
    BasisSpec,
    FockOperator,
    annihilation,
    beam_splitter_5050,
    char_fn,
    logneg_fock,
    partial_trace,
    quadratures,
    state_from_terms,
    state_psi_lambda,
    tensor,
)
from .gaussian import fixed_point_cov, gaussian_product_cov, physicality_check, random_physical_cov
from .moments import coefficient_parts, moment_step, moments_from_fock, multi_indices

__all__ = ["CheckResult", "CHECKS", "run_suite"]

SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "value", float(self.value))


def _below_cutoff_mask(basis: BasisSpec) -> np.ndarray:
    """Flat indices whose every mode sits strictly below its top level."""
    occ = np.array(list(itertools.product(*(range(d) for d in basis.dims))))
    return np.all(occ < np.array(basis.dims) - 1, axis=1)


def check_commutators() -> CheckResult:
    basis = BasisSpec((6, 6))
    keep = _below_cutoff_mask(basis)
    worst = 0.0
    for j in range(2):
        x, p = quadratures(basis, j)
        comm = (x @ p - p @ x).data
        worst = max(worst, np.max(np.abs(comm[np.ix_(keep, keep)] - 1j * np.eye(keep.sum()))))
    return CheckResult("canonical_commutators", worst <= 1e-12, float(worst), 1e-12)


def _pair_sector(basis: BasisSpec, cutoff: int) -> np.ndarray:
    occ = np.array(list(itertools.product(*(range(d) for d in basis.dims))))
    return occ.sum(axis=1) <= cutoff


def check_beam_splitter_action() -> CheckResult:
    basis = BasisSpec((7, 7))
    u = beam_splitter_5050(basis, 0, 1).data
    a = annihilation(basis, 0).data
    b = annihilation(basis, 1).data
    # compare on the sector where neither side is clipped
    keep = _pair_sector(basis, basis.dims[0] - 2)
    worst = 0.0
    for lhs, rhs in ((u @ a @ u.conj().T, (a - b) / np.sqrt(2)), (u @ b @ u.conj().T, (a + b) / np.sqrt(2))):
        worst = max(worst, np.max(np.abs((lhs - rhs)[np.ix_(keep, keep)])))
    return CheckResult("beam_splitter_heisenberg", worst <= 1e-10, float(worst), 1e-10)


def check_beam_splitter_unitarity() -> CheckResult:
    basis = BasisSpec((7, 7))
    u = beam_splitter_5050(basis, 0, 1).data
    keep = _pair_sector(basis, basis.dims[0] - 1)
    g = (u.conj().T @ u)[np.ix_(keep, keep)]
    err = float(np.max(np.abs(g - np.eye(keep.sum()))))
    return CheckResult("beam_splitter_unitarity", err <= 1e-12, err, 1e-12)


def check_filter_commutation() -> CheckResult:
    basis = BasisSpec((7, 7))
    u = beam_splitter_5050(basis, 0, 1).data
    worst = 0.0
    for delta in (0.2, 1 / 3, 0.5, 0.8, 1.0):
        pi = filter_fock(filter_from_delta(delta, 2), basis).data
        worst = max(worst, np.max(np.abs(u @ pi - pi @ u)))
    return CheckResult("filter_beam_splitter_commutation", worst <= 1e-12, float(worst), 1e-12)


def check_partial_trace_factorizes() -> CheckResult:
    rng = np.random.default_rng(SEED)
    b1 = BasisSpec((3,))
    a = FockOperator(b1, rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    c = FockOperator(b1, rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    ac = tensor(a, c)
    err = max(
        np.max(np.abs(partial_trace(ac, [0]).data - a.data * c.trace())),
        np.max(np.abs(partial_trace(ac, [1]).data - c.data * a.trace())),
        abs(ac.trace() - a.trace() * c.trace()),
    )
    return CheckResult("partial_trace_tensor", err <= 1e-12, float(err), 1e-12)


def check_char_fn_symmetry() -> CheckResult:
    rng = np.random.default_rng(SEED + 1)
    rho = state_psi_lambda(0.5, BasisSpec((6, 6)))
    worst = 0.0
    for _ in range(100):
        r = rng.uniform(-2, 2, size=4)
        worst = max(worst, abs(char_fn(rho, -r) - np.conj(char_fn(rho, r))))
    return CheckResult("char_fn_hermitian_symmetry", worst <= 1e-12, float(worst), 1e-12)


def check_logneg_anchors() -> CheckResult:
    basis = BasisSpec((2, 2))
    bell = state_from_terms({(0, 0): 1.0, (1, 1): 1.0}, basis)
    prod = state_from_terms({(0, 0): 1.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): 1.0}, basis)
    err = max(abs(logneg_fock(bell, [0]) - 1), abs(logneg_fock(prod, [0])))
    return CheckResult("logneg_anchor_states", err <= 1e-12, float(err), 1e-12)


def check_fixed_point_round_trip() -> CheckResult:
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 4))
        g_rho = random_physical_cov(rng, m)
        g_pi = random_physical_cov(rng, m, min_excess=0.2)
        g_sigma = gaussian_product_cov(g_rho, g_pi)
        back = fixed_point_cov(g_sigma, g_pi).gamma
        worst = max(worst, np.max(np.abs(back - g_rho)))
    return CheckResult("fixed_point_round_trip", worst < 1e-9, float(worst), 1e-9)


def check_run_physicality() -> CheckResult:
    """Every rho_n of a short run is a state with a physical covariance."""
    rho = state_psi_lambda(0.5, BasisSpec((6, 6)))
    state_defect = 0.0
    cov_defect = 0.0
    for delta in (0.5, 1.0):
        res = engine.run(engine.ProtocolConfig(rho, filter_from_delta(delta, 2), 4, leakage_bound=None))
        for rec in res.records:
            st = rec.state
            state_defect = max(state_defect, st.hermiticity_defect(), -st.min_eigenvalue(),
                               abs(st.trace() - 1))
            cov_defect = max(cov_defect, -physicality_check(rec.rho_moments.gamma).min_eigenvalue)
    ok = state_defect <= 1e-10 and cov_defect <= 1e-8
    return CheckResult("state_physicality_each_round", ok, float(max(state_defect, cov_defect, 0.0)), 1e-8,
                       f"state defect {state_defect:.2e} (tol 1e-10), covariance defect {cov_defect:.2e} (tol 1e-8)")


def check_doubling_one_round() -> CheckResult:
    spec = filter_from_delta(0.5, 2)
    rho = state_psi_lambda(0.5, BasisSpec((6, 6)))
    rec = engine.iterate_once(rho, spec, leakage_bound=None)
    res = doubling_check(sigma_of(rho, spec)[0], sigma_of(rec.raw_output, spec)[0], PhaseSpaceGrid(4.0, 5))
    return CheckResult("doubling_law_one_round", res <= 1e-8, res, 1e-8)


def check_moment_normalization() -> CheckResult:
    rho = state_psi_lambda(0.5, BasisSpec((6, 6)))
    table = moments_from_fock(sigma_of(rho, filter_from_delta(0.5, 2))[0], 4)
    zero = ((0, 0), (0, 0))
    err = 0.0
    for _ in range(3):
        table = moment_step(table)
        err = max(err, abs(table[zero] - 1))
    return CheckResult("alpha_00_preserved", err <= 1e-14, float(err), 1e-14)


def check_coefficient_identity() -> CheckResult:
    """sum_{u,v} C^{x,y}_{u,v} = 2^{(|x|+|y|)/2}, checked exactly as sum N = 2^s."""
    failures = 0
    negative = 0
    for m in (1, 2, 3):
        idx = multi_indices(m, 4)
        for x in idx:
            for y in idx:
                total = 0
                s = sum(x) + sum(y)
                for u in itertools.product(*(range(k + 1) for k in x)):
                    for v in itertools.product(*(range(k + 1) for k in y)):
                        num, s_uv = coefficient_parts(x, y, u, v)
                        negative += num < 0
                        total += num
                failures += total != 2**s
    return CheckResult("coefficient_binomial_sum", failures == 0 and negative == 0,
                       float(failures + negative), 0.0)


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_commutators,
    check_beam_splitter_action,
    check_beam_splitter_unitarity,
    check_filter_commutation,
    check_partial_trace_factorizes,
    check_char_fn_symmetry,
    check_logneg_anchors,
    check_fixed_point_round_trip,
    check_run_physicality,
    check_doubling_one_round,
    check_moment_normalization,
    check_coefficient_identity,
)


def run_suite() -> list[CheckResult]:
    out = []
    for check in CHECKS:
        try:
            out.append(check())
        except Exception as exc:  # a crashing check is a failing check
            out.append(CheckResult(check.__name__.removeprefix("check_"), False, float("nan"), 0.0,
                                   f"{type(exc).__name__}: {exc}"))
    return out

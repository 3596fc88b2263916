"""One Gaussification round on the truncated Fock space, and multi-round runs.

A round takes two copies of rho, applies a 50:50 beam splitter between the
two copies of every party, applies the filter to the second copy and traces
it out.  The filter mixture is applied as one deterministic map.

The beam splitter conserves the photon number of each pair, so with input
cutoff d the output of a pair never exceeds 2(d - 1) photons.  The
``exact-pair`` policy evolves each pair on that enlarged space, which makes
the round exact; the only approximation is the final crop back to d levels,
whose trace loss is recorded as ``leakage``.  The ``fixed`` policy also
crops the traced-out copy to d levels, which is cheaper to reason about but
loses more.
"""

from __future__ import annotations

import functools
import string
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AcceptanceError, BasisError, LeakageError, NumericalGuardError
from .filters import FilterSpec, sigma_of
from .fock import BasisSpec, FockOperator, QuadratureMoments, _bs_two_mode, quadrature_moments

__all__ = [
    "POLICIES",
    "IterationRecord",
    "ProtocolConfig",
    "ProtocolRun",
    "LeakageReport",
    "iterate_once",
    "initial_record",
    "run",
    "leakage_report",
]

POLICIES = ("exact-pair", "fixed")
DEFAULT_LEAKAGE_BOUND = 1e-4
DEFAULT_ACCEPT_TOL = 1e-12
MAX_INTERMEDIATE_ENTRIES = 60_000_000


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """State after ``round`` rounds plus the bookkeeping for that round.

    ``success_prob`` is the probability that the round's postselection
    succeeds (1 for round 0).  ``accept`` is tr(rho_n Pi) for the stored
    state.  ``raw_output`` is the normalized output before re-truncation,
    on the enlarged pair basis (None for round 0).
    """

    round: int
    state: FockOperator
    success_prob: float
    cumulative_copies: int
    expected_copies: float
    leakage: float
    accept: float
    rho_moments: QuadratureMoments
    sigma_moments: QuadratureMoments
    raw_output: Optional[FockOperator] = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ProtocolConfig:
    state: FockOperator
    spec: FilterSpec
    rounds: int
    policy: str = "exact-pair"
    leakage_bound: Optional[float] = DEFAULT_LEAKAGE_BOUND
    accept_tol: float = DEFAULT_ACCEPT_TOL

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if min(self.state.basis.dims) < 2:
            raise ValueError("cutoff dimension must be at least 2")
        if self.spec.mode_count != self.state.basis.mode_count:
            raise ValueError("filter and state mode counts differ")


@dataclass(frozen=True)
class ProtocolRun:
    records: tuple
    aborted: bool = False
    abort_round: Optional[int] = None
    abort_reason: str = ""

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]


@functools.lru_cache(maxsize=16)
def _pair_channel(d: int, q: float, policy: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-party channel tensors.

    Returns ``(E, M)`` where ``E[p, p', a, b, a', b']`` maps the pair input
    |a, b><a', b'| to the kept output |p><p'| (cropped per policy) and
    ``M[a, b, a', b']`` is the untruncated success weight, i.e. E summed over
    p = p' on the full pair space.
    """
    size = 2 * d - 1
    w = np.asarray(_bs_two_mode(size)).reshape(size, size, size, size)[:, :, :d, :d]
    pi = np.float_power(q, np.arange(size))
    full = np.einsum("q,pqab,rqce->prabce", pi, w, w.conj(), optimize=True)
    m = np.einsum("ppabce->abce", full)
    if policy == "exact-pair":
        e = full
    else:
        wf = w[:d, :d]
        e = np.einsum("q,pqab,rqce->prabce", pi[:d], wf, wf.conj(), optimize=True)
    for arr in (e, m):
        arr.flags.writeable = False
    return e, m


def _contract(tensors, r: np.ndarray, m: int, keep_output: bool) -> np.ndarray:
    """Contract per-party tensors with rho (x) rho.

    With ``keep_output`` the tensors are channels ``E[p, p', a, b, a', b']``
    and the result carries (p_0..p_{m-1}, p'_0..p'_{m-1}); otherwise they are
    weights ``M[a, b, a', b']`` and the result is a scalar.  The order is
    fixed: party 0 with the first copy, then the second copy, then the other
    parties one at a time.  Each step is a pairwise contraction, so the
    intermediates stay at O(P^2 d^(4m-4)) entries.
    """
    letters = iter(string.ascii_letters)
    p, pp, a, ap, b, bp = ([next(letters) for _ in range(m)] for _ in range(6))

    def spec(j):
        out = p[j] + pp[j] if keep_output else ""
        return out + a[j] + b[j] + ap[j] + bp[j]

    def outs(j):
        if not keep_output:
            return ""
        return "".join(p[: j + 1] + pp[: j + 1])

    def rest(j):
        return "".join(a[j + 1:] + ap[j + 1:] + b[j + 1:] + bp[j + 1:])

    cur = (p[0] + pp[0] if keep_output else "") + b[0] + bp[0] + "".join(a[1:] + ap[1:])
    t = np.einsum(f"{spec(0)},{''.join(a + ap)}->{cur}", tensors[0], r, optimize=True)
    nxt = outs(0) + rest(0)
    t = np.einsum(f"{cur},{''.join(b + bp)}->{nxt}", t, r, optimize=True)
    cur = nxt
    for j in range(1, m):
        nxt = outs(j) + rest(j)
        t = np.einsum(f"{cur},{spec(j)}->{nxt}", t, tensors[j], optimize=True)
        cur = nxt
    return t


def _check_state(rho: FockOperator, tol: float = 1e-10) -> np.ndarray:
    dims = rho.basis.dims
    if len(set(dims)) != 1:
        raise ValueError("the engine requires equal cutoffs on every mode")
    defect = rho.hermiticity_defect()
    if defect > tol:
        raise NumericalGuardError(f"input state not Hermitian (defect {defect:.2e})")
    tr = rho.trace().real
    if tr <= 0:
        raise NumericalGuardError("input state has nonpositive trace")
    return rho.data / tr


def _moments_pair(rho: FockOperator, spec: FilterSpec, accept_tol: float):
    sigma, accept = sigma_of(rho, spec, tol=accept_tol)
    return quadrature_moments(rho), quadrature_moments(sigma), accept


def initial_record(rho: FockOperator, spec: FilterSpec, accept_tol: float = DEFAULT_ACCEPT_TOL) -> IterationRecord:
    """Round-0 record echoing the input."""
    data = _check_state(rho)
    rho = FockOperator(rho.basis, 0.5 * (data + data.conj().T))
    rm, sm, accept = _moments_pair(rho, spec, accept_tol)
    return IterationRecord(
        round=0, state=rho, success_prob=1.0, cumulative_copies=1, expected_copies=1.0,
        leakage=0.0, accept=accept, rho_moments=rm, sigma_moments=sm,
        diagnostics={"min_eigenvalue": rho.min_eigenvalue()},
    )


def iterate_once(
    rho: FockOperator,
    spec: FilterSpec,
    policy: str = "exact-pair",
    leakage_bound: Optional[float] = DEFAULT_LEAKAGE_BOUND,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
    round_index: int = 1,
    previous_expected_copies: Optional[float] = None,
) -> IterationRecord:
    """Apply one round to ``rho`` and return the record for round ``round_index``.

    Raises ``AcceptanceError`` if the success probability falls below
    ``accept_tol`` and ``LeakageError`` if the re-truncation removes more
    than ``leakage_bound`` of the trace (``None`` disables the bound).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if spec.mode_count != rho.basis.mode_count:
        raise ValueError("filter and state mode counts differ")
    data = _check_state(rho)
    m = rho.basis.mode_count
    d = rho.basis.dims[0]
    size = 2 * d - 1 if policy == "exact-pair" else d
    peak = size**2 * d ** (4 * (m - 1)) if m > 1 else size**2 * d**4
    if peak > MAX_INTERMEDIATE_ENTRIES:
        raise BasisError(
            f"cutoff {d} on {m} modes needs ~{peak:.2e} complex entries per contraction step "
            f"(limit {MAX_INTERMEDIATE_ENTRIES:.1e}); lower the cutoff"
        )
    tensors = [_pair_channel(d, float(q), policy) for q in spec.q]
    r = data.reshape((d,) * (2 * m))

    success = complex(_contract([t[1] for t in tensors], r, m, keep_output=False))
    if success.real < accept_tol:
        raise AcceptanceError(f"success probability {success.real:.3e} below {accept_tol:.1e}")
    if abs(success.imag) > 1e-10:
        raise NumericalGuardError(f"success probability has imaginary part {success.imag:.2e}")
    success = success.real

    out = _contract([t[0] for t in tensors], r, m, keep_output=True)
    big = size**m
    out = out.reshape(big, big)
    herm = float(np.max(np.abs(out - out.conj().T)))
    if herm > 1e-10 * max(1.0, success):
        raise NumericalGuardError(f"round output not Hermitian (defect {herm:.2e})")
    out = 0.5 * (out + out.conj().T)

    raw = None
    if policy == "exact-pair":
        raw = FockOperator(BasisSpec((size,) * m), out / success)
        kept = out.reshape((size,) * (2 * m))[(slice(0, d),) * (2 * m)].reshape(d**m, d**m)
    else:
        kept = out
    k = float(np.trace(kept).real)
    leakage = max(0.0, 1.0 - k / success)
    if leakage < 1e-15:
        leakage = 0.0
    if leakage_bound is not None and leakage > leakage_bound:
        raise LeakageError(
            f"round {round_index}: re-truncation removed {leakage:.3e} of the trace "
            f"(bound {leakage_bound:.1e}); raise the cutoff"
        )
    if k <= 0:
        raise LeakageError(f"round {round_index}: no trace left after re-truncation")
    new = FockOperator(rho.basis, kept / k)
    rm, sm, accept = _moments_pair(new, spec, accept_tol)
    prev = 2.0 ** (round_index - 1) if previous_expected_copies is None else previous_expected_copies
    return IterationRecord(
        round=round_index,
        state=new,
        success_prob=success,
        cumulative_copies=2**round_index,
        expected_copies=2 * prev / success,
        leakage=leakage,
        accept=accept,
        rho_moments=rm,
        sigma_moments=sm,
        raw_output=raw,
        diagnostics={"hermiticity_defect": herm, "min_eigenvalue": new.min_eigenvalue()},
    )


def run(config: ProtocolConfig) -> ProtocolRun:
    """Run ``config.rounds`` rounds; on a guard failure return the partial run."""
    records = [initial_record(config.state, config.spec, config.accept_tol)]
    for n in range(1, config.rounds + 1):
        prev = records[-1]
        try:
            rec = iterate_once(
                prev.state, config.spec, config.policy, config.leakage_bound,
                config.accept_tol, round_index=n, previous_expected_copies=prev.expected_copies,
            )
        except NumericalGuardError as exc:
            return ProtocolRun(tuple(records), aborted=True, abort_round=n, abort_reason=str(exc))
        records.append(rec)
    return ProtocolRun(tuple(records))


@dataclass(frozen=True)
class LeakageReport:
    per_round: tuple
    total: float
    worst: float
    flagged: tuple
    bound: Optional[float]


def leakage_report(records, bound: Optional[float] = DEFAULT_LEAKAGE_BOUND) -> LeakageReport:
    """Aggregate per-round leakage and flag rounds above ``bound``."""
    per = tuple(float(r.leakage) for r in records)
    flagged = tuple(r.round for r in records if bound is not None and r.leakage > bound)
    return LeakageReport(per, float(sum(per)), float(max(per, default=0.0)), flagged, bound)

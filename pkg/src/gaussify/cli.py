"""Command-line entry point: ``gaussify {run,predict,sweep,validate,moments}``.

Each subcommand writes a CSV (first line ``# schema: <name>-v1``) and a JSON
summary into ``--out``.  Exit codes: 0 success, 1 configuration error,
2 numerical guard abort or failed invariant, 3 theorem-condition failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    PhaseSpaceGrid,
    bipartitions,
    diagonal_ratios,
    doubling_check,
    gp_target_ket,
    is_nondecreasing,
    predict,
    sweep_delta,
)
from .config import ExperimentConfig, load_config
from .engine import ProtocolConfig, leakage_report, run
from .errors import BasisError, ConfigError, FilterError, GaussifyError, NumericalGuardError, TheoremConditionError
from .filters import sigma_of
from .fock import fidelity, logneg_fock, quadrature_moments
from .gaussian import GaussianOperator, symmetrize
from .moments import moment_step, moments_from_fock, strong_convergence_check
from .validate import run_suite

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_THEOREM = 0, 1, 2, 3

RUN_COLUMNS = [
    "n", "success_prob", "cumulative_copies", "expected_copies", "leakage", "accept",
    "logneg_fock", "gamma_residual", "doubling_residual", "fidelity_to_target",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, schema: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema: {schema}-v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2, allow_nan=True)
    path.write_text(text + "\n", encoding="utf-8")


def _grid(cfg: ExperimentConfig) -> PhaseSpaceGrid:
    return PhaseSpaceGrid(cfg.grid.radius, cfg.grid.points)


# --------------------------------------------------------------------------
# subcommands


def cmd_run(cfg: ExperimentConfig, out: Path) -> int:
    rho0 = cfg.initial_state()
    spec = cfg.filter_spec()
    m = rho0.basis.mode_count
    cuts = bipartitions(m)
    result = run(ProtocolConfig(rho0, spec, cfg.rounds, cfg.policy,
                                cfg.tolerances.leakage_bound, cfg.tolerances.accept))

    pred = predict(rho0, spec, grid=None, strict=False)
    gamma_inf = pred.gamma_inf if pred.logneg_inf else None
    target = None
    if spec.is_vacuum_projector and gamma_inf is not None:
        target = gp_target_ket(pred.gamma_sigma, rho0.basis)
    levels = [n for n in cfg.ratio_levels if n < cfg.cutoff]
    target_ratios = None
    if target is not None:
        t0 = abs(target[0]) ** 2
        target_ratios = [abs(target[rho0.basis.index((n,) * m)]) ** 2 / t0 for n in levels]

    grid = _grid(cfg)
    header = RUN_COLUMNS + [f"ratio_{n}" for n in levels] + [f"ratio_target_{n}" for n in levels]
    rows, fids = [], []
    for k, rec in enumerate(result.records):
        dbl = None
        if k > 0 and rec.raw_output is not None:
            prev_sigma, _ = sigma_of(result.records[k - 1].state, spec)
            dbl = doubling_check(prev_sigma, sigma_of(rec.raw_output, spec)[0], grid)
        gres = None if gamma_inf is None else float(np.max(np.abs(rec.rho_moments.gamma.real - gamma_inf)))
        fid = None if target is None else fidelity(target, rec.state)
        fids.append(fid)
        ratios = list(diagonal_ratios(rec.state, levels))
        rows.append(
            [rec.round, rec.success_prob, rec.cumulative_copies, rec.expected_copies, rec.leakage,
             rec.accept, sum(logneg_fock(rec.state, c) for c in cuts), gres, dbl, fid]
            + ratios + (target_ratios or [None] * len(levels))
        )
    write_csv(out / f"{cfg.prefix}_run.csv", "gaussify-run", header, rows)
    lk = leakage_report(result.records, cfg.tolerances.leakage_bound)
    summary = {
        "config": cfg.model_dump(),
        "rounds_completed": len(result.records) - 1,
        "aborted": result.aborted,
        "abort_round": result.abort_round,
        "abort_reason": result.abort_reason,
        "leakage": {"per_round": lk.per_round, "total": lk.total, "worst": lk.worst, "flagged": lk.flagged},
        "prediction_method": pred.method,
        "prediction_conditions": pred.conditions,
        "logneg_inf_total": pred.logneg_inf_total if pred.logneg_inf else None,
        "final_success_prob": result.final.success_prob,
        "fidelity_to_target": fids,
    }
    write_json(out / f"{cfg.prefix}_run.json", summary)
    if result.aborted:
        print(f"run aborted in round {result.abort_round}: {result.abort_reason}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_predict(cfg: ExperimentConfig, out: Path) -> int:
    rho0 = cfg.initial_state()
    spec = cfg.filter_spec()
    pred = predict(rho0, spec, grid=_grid(cfg), strict=False)
    rows = []
    for i, cut in enumerate(pred.cuts):
        rows.append([" ".join(map(str, cut)), pred.logneg_inf[i] if pred.logneg_inf else None,
                     pred.logneg_rho_fock[i], pred.logneg_rho_gaussian[i]])
    write_csv(out / f"{cfg.prefix}_predict.csv", "gaussify-predict",
              ["cut", "logneg_inf", "logneg_rho_fock", "logneg_rho_gaussian"], rows)
    write_json(out / f"{cfg.prefix}_predict.json", {
        "config": cfg.model_dump(),
        "method": pred.method,
        "conditions": pred.conditions,
        "messages": pred.messages,
        "gamma_rho": pred.gamma_rho,
        "gamma_sigma": pred.gamma_sigma,
        "gamma_inf": pred.gamma_inf,
        "logneg_inf_total": pred.logneg_inf_total if pred.logneg_inf else None,
        "logneg_rho_fock_total": pred.logneg_rho_fock_total,
        "logneg_rho_gaussian_total": pred.logneg_rho_gaussian_total,
        "max_abs_chi_sigma": None if pred.chi_report is None else pred.chi_report.max_abs,
    })
    if not pred.holds:
        print("; ".join(pred.messages), file=sys.stderr)
        return EXIT_THEOREM
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> int:
    rho0 = cfg.initial_state()
    deltas = cfg.deltas if cfg.deltas is not None else [cfg.delta]
    if any(not isinstance(d, float) for d in deltas):
        raise ConfigError("sweep needs numeric deltas")
    rows = sweep_delta(rho0, deltas, cfg.sweep_rounds, cfg.policy, cfg.tolerances.leakage_bound, cfg.jobs)
    header = ["delta", "method", "logneg_inf", "logneg_rho_fock", "logneg_rho_gaussian"]
    header += [f"success_prob_{k}" for k in range(1, cfg.sweep_rounds + 1)] + ["error"]
    table = []
    for r in rows:
        probs = list(r.success_probs) + [None] * (cfg.sweep_rounds - len(r.success_probs))
        table.append([r.delta, r.method, r.logneg_inf, r.logneg_rho_fock, r.logneg_rho_gaussian] + probs + [r.error])
    write_csv(out / f"{cfg.prefix}_sweep.csv", "gaussify-sweep", header, table)
    values = [r.logneg_inf for r in rows if r.logneg_inf is not None]
    write_json(out / f"{cfg.prefix}_sweep.json", {
        "config": cfg.model_dump(),
        "points": len(rows),
        "failed_points": [r.delta for r in rows if r.error],
        "logneg_inf_nondecreasing": is_nondecreasing(values),
        "logneg_inf": {str(r.delta): r.logneg_inf for r in rows},
    })
    return EXIT_OK


def cmd_validate(out: Path, prefix: str = "validate") -> int:
    results = run_suite()
    write_csv(out / f"{prefix}.csv", "gaussify-validate", ["check", "passed", "value", "tol", "detail"],
              [[r.name, r.passed, r.value, r.tol, r.detail] for r in results])
    write_json(out / f"{prefix}.json", {
        "all_passed": all(r.passed for r in results),
        "checks": {r.name: {"passed": r.passed, "value": r.value, "tol": r.tol, "detail": r.detail} for r in results},
    })
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (tol {r.tol:.1e}) {r.detail}".rstrip())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


def cmd_moments(cfg: ExperimentConfig, out: Path) -> int:
    rho0 = cfg.initial_state()
    spec = cfg.filter_spec()
    k = cfg.max_order
    sigma0, _ = sigma_of(rho0, spec)
    table = moments_from_fock(sigma0, k)
    result = run(ProtocolConfig(rho0, spec, cfg.moment_rounds, cfg.policy,
                                cfg.tolerances.leakage_bound, cfg.tolerances.accept))
    rows = []
    worst = 0.0
    current = table
    for n, rec in enumerate(result.records):
        if n > 0:
            current = moment_step(current)
        eng = moments_from_fock(sigma_of(rec.state, spec)[0], k)
        for key in current.keys():
            a, b = current.entries[key], eng.entries[key]
            diff = abs(a - b)
            worst = max(worst, diff)
            rows.append([n, " ".join(map(str, key[0])), " ".join(map(str, key[1])),
                         a.real, a.imag, b.real, b.imag, diff])
    write_csv(out / f"{cfg.prefix}_moments.csv", "gaussify-moments",
              ["n", "x", "y", "recursion_re", "recursion_im", "engine_re", "engine_im", "abs_diff"], rows)
    g_inf = GaussianOperator.centered(symmetrize(quadrature_moments(sigma0).gamma))
    report = strong_convergence_check(table, g_inf, k)
    write_json(out / f"{cfg.prefix}_moments.json", {
        "config": cfg.model_dump(),
        "rounds_compared": len(result.records) - 1,
        "max_abs_diff": worst,
        "tolerance": cfg.tolerances.moments,
        "engine_aborted": result.aborted,
        "strong_convergence_passed": report.passed,
        "strong_convergence_verdict": report.verdict,
    })
    print(report.verdict)
    if result.aborted:
        print(f"engine aborted: {result.abort_reason}", file=sys.stderr)
        return EXIT_NUMERICAL
    if worst > cfg.tolerances.moments:
        print(f"moment recursion and engine differ by {worst:.3e} > {cfg.tolerances.moments:.1e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussify", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "iterate the protocol and write the per-round ledger"),
        ("predict", "predict the limit covariance and its log-negativity"),
        ("sweep", "predicted limit entanglement over a Delta grid"),
        ("validate", "run the invariant suite"),
        ("moments", "compare the moment recursion with the engine"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, required=name != "validate")
        p.add_argument("--out", type=Path, default=Path("."))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "validate":
            prefix = load_config(args.config).prefix + "_validate" if args.config else "validate"
            return cmd_validate(args.out, prefix)
        cfg = load_config(args.config)
        handler = {"run": cmd_run, "predict": cmd_predict, "sweep": cmd_sweep, "moments": cmd_moments}
        return handler[args.command](cfg, args.out)
    except (ConfigError, BasisError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalGuardError, FilterError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TheoremConditionError as exc:
        print(f"theorem condition: {exc}", file=sys.stderr)
        return EXIT_THEOREM
    except GaussifyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

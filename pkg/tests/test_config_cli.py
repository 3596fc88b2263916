import csv
import json
from pathlib import Path

import pytest

from gaussify import __version__
from gaussify.cli import main
from gaussify.config import ExperimentConfig, load_config
from gaussify.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_yaml(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema: gaussify-") and lines[0].endswith("-v1")
    return list(csv.DictReader(lines[1:]))


# --------------------------------------------------------------------------
# configuration


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write_yaml(tmp_path, "state: {family: psi_lambda, param: 0.5}\ndelta: 1.0\n"))
    assert cfg.rounds == 8 and cfg.cutoff == 8 and cfg.policy == "exact-pair"
    assert cfg.tolerances.leakage_bound == 1e-4
    assert cfg.filter_spec().is_vacuum_projector
    assert cfg.initial_state().basis.dims == (8, 8)


def test_identity_filter_config():
    cfg = ExperimentConfig.model_validate({"state": {"family": "phi_mu", "param": 0.3}, "delta": "identity"})
    assert cfg.filter_spec().identity and cfg.state.mode_count == 3


@pytest.mark.parametrize("text", [
    "state: {family: psi_lambda}\ndelta: 1.0\n",
    "state: {family: psi_lambda, param: 0.5}\n",
    "state: {family: psi_lambda, param: 0.5}\ndelta: 1.5\n",
    "state: {family: psi_lambda, param: 0.5}\ndeltas: [0.5, 0.0]\n",
    "state: {family: psi_lambda, param: 0.5}\ndelta: 1.0\nbogus: 3\n",
    "state: {family: amplitudes, amplitudes: [0, 0]}\ndelta: 1.0\n",
    "state: {family: psi_lambda, param: 0.5}\ndelta: 1.0\ngrid: {points: 4}\n",
    "state: {family: psi_lambda, param: 0.5}\ndelta: 1.0\npolicy: greedy\n",
    "- just a list\n",
    "state: [unclosed\n",
])
def test_invalid_configs_rejected(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write_yaml(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    load_config(path)


# --------------------------------------------------------------------------
# command line


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_run_writes_ledger(tmp_path):
    cfg = write_yaml(tmp_path, "name: t\nstate: {family: psi_lambda, param: 0.5}\ndelta: 1.0\nrounds: 3\ncutoff: 6\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "t_run.csv")
    assert [int(r["n"]) for r in rows] == [0, 1, 2, 3]
    assert float(rows[1]["doubling_residual"]) < 1e-8
    assert rows[0]["doubling_residual"] == ""
    assert {"ratio_1", "ratio_target_3", "fidelity_to_target", "leakage"} <= set(rows[0])
    summary = json.loads((tmp_path / "t_run.json").read_text())
    assert summary["rounds_completed"] == 3 and not summary["aborted"]
    assert summary["prediction_method"] == "gp-limit"


def test_run_is_deterministic(tmp_path):
    cfg = write_yaml(tmp_path, "name: t\nstate: {family: psi_lambda, param: 0.5}\ndelta: 0.5\nrounds: 2\ncutoff: 5\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "t_run.csv").read_bytes() == (b / "t_run.csv").read_bytes()
    assert (a / "t_run.json").read_bytes() == (b / "t_run.json").read_bytes()


def test_run_abort_exit_code(tmp_path):
    cfg = write_yaml(tmp_path, "name: t\nstate: {family: amplitudes, amplitudes: [1, 0.1, 6]}\n"
                               "delta: 1.0\nrounds: 3\ncutoff: 3\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    summary = json.loads((tmp_path / "t_run.json").read_text())
    assert summary["aborted"] and summary["abort_round"] == 1


def test_predict_exit_codes(tmp_path):
    good = write_yaml(tmp_path, "name: g\nstate: {family: psi_lambda, param: 0.5}\ndelta: 1.0\ncutoff: 4\n")
    assert main(["predict", "--config", str(good), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "g_predict.csv")
    assert float(rows[0]["logneg_inf"]) == pytest.approx(1.584962500721156)
    bad = write_yaml(tmp_path, "name: b\nstate: {family: amplitudes, amplitudes: [1, 1], modes: 1}\n"
                               "delta: 0.5\ncutoff: 4\n", "bad.yaml")
    assert main(["predict", "--config", str(bad), "--out", str(tmp_path)]) == 3
    summary = json.loads((tmp_path / "b_predict.json").read_text())
    assert summary["conditions"]["i_zero_first_moments"] is False


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_yaml(tmp_path, "state: {family: psi_lambda, param: 0.5}\ndelta: 7\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "configuration error" in capsys.readouterr().err
    # 'deltas' alone cannot drive a single run
    cfg = write_yaml(tmp_path, "state: {family: psi_lambda, param: 0.5}\ndeltas: [0.5]\n", "s.yaml")
    assert main(["predict", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_sweep(tmp_path):
    cfg = write_yaml(tmp_path, "name: s\nstate: {family: psi_lambda, param: 0.5}\n"
                               "deltas: [1.0, 0.5, 1.0e-6]\ncutoff: 4\nsweep_rounds: 1\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "s_sweep.csv")
    assert [float(r["delta"]) for r in rows] == [1e-6, 0.5, 1.0]
    assert "success_prob_1" in rows[0]
    assert json.loads((tmp_path / "s_sweep.json").read_text())["logneg_inf_nondecreasing"] is True


def test_moments(tmp_path):
    cfg = write_yaml(tmp_path, "name: m\nstate: {family: psi_lambda, param: 0.5}\ndelta: 1.0\n"
                               "cutoff: 6\nmax_order: 2\nmoment_rounds: 1\n")
    assert main(["moments", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "m_moments.json").read_text())
    assert summary["max_abs_diff"] < 1e-8 and summary["strong_convergence_passed"]
    assert "truncated check" in summary["strong_convergence_verdict"]


def test_validate(tmp_path, capsys):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "validate.csv")
    assert rows and all(r["passed"] == "true" for r in rows)
    assert capsys.readouterr().out.count("PASS") == len(rows)

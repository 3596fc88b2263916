"""Experiment configuration: a YAML document validated before any computation."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .filters import FilterSpec, filter_from_delta, identity_filter
from .fock import BasisSpec, FockOperator, state_from_amplitudes, state_phi_mu, state_psi_lambda

__all__ = ["StateConfig", "GridConfig", "Tolerances", "ExperimentConfig", "load_config"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StateConfig(_Strict):
    """Initial state.

    ``psi_lambda`` and ``phi_mu`` take ``param``; ``amplitudes`` builds
    sum_k c_k |k, ..., k> on ``modes`` modes.
    """

    family: Literal["psi_lambda", "phi_mu", "amplitudes"]
    param: Optional[float] = None
    amplitudes: Optional[list[float]] = None
    modes: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _check_family(self):
        if self.family in ("psi_lambda", "phi_mu") and self.param is None:
            raise ValueError(f"state family {self.family} needs 'param'")
        if self.family == "amplitudes":
            if not self.amplitudes:
                raise ValueError("state family 'amplitudes' needs a nonempty 'amplitudes' list")
            if not any(self.amplitudes):
                raise ValueError("amplitudes must not all vanish")
        return self

    @property
    def mode_count(self) -> int:
        return {"psi_lambda": 2, "phi_mu": 3}.get(self.family, self.modes)

    def build(self, cutoff: int) -> FockOperator:
        basis = BasisSpec.uniform(self.mode_count, cutoff)
        if self.family == "psi_lambda":
            return state_psi_lambda(self.param, basis)
        if self.family == "phi_mu":
            return state_phi_mu(self.param, basis)
        return state_from_amplitudes(self.amplitudes, basis)


class GridConfig(_Strict):
    radius: float = Field(4.0, gt=0)
    points: int = Field(9, ge=1)

    @field_validator("points")
    @classmethod
    def _odd(cls, v):
        if v % 2 == 0:
            raise ValueError("grid points per axis must be odd")
        return v


class Tolerances(_Strict):
    doubling: float = Field(1e-8, gt=0)
    moments: float = Field(1e-8, gt=0)
    leakage_bound: Optional[float] = Field(1e-4, gt=0)
    accept: float = Field(1e-12, gt=0)


class ExperimentConfig(_Strict):
    """Top-level document.  Exactly one of ``delta`` or ``deltas`` drives the filter
    (``deltas`` is used by ``sweep``; ``run``/``predict``/``moments`` use ``delta``)."""

    name: str = "experiment"
    state: StateConfig
    delta: Optional[Union[float, Literal["identity"]]] = None
    deltas: Optional[list[float]] = None
    rounds: int = Field(8, ge=0)
    cutoff: int = Field(8, ge=2)
    policy: Literal["exact-pair", "fixed"] = "exact-pair"
    grid: GridConfig = GridConfig()
    tolerances: Tolerances = Tolerances()
    max_order: int = Field(4, ge=0)
    moment_rounds: int = Field(2, ge=0)
    ratio_levels: list[int] = Field(default_factory=lambda: [1, 2, 3])
    sweep_rounds: int = Field(0, ge=0)
    jobs: int = Field(1, ge=1)
    output_prefix: Optional[str] = None

    @field_validator("delta")
    @classmethod
    def _delta_range(cls, v):
        if isinstance(v, float) and not 0 < v <= 1:
            raise ValueError("delta must lie in (0, 1]")
        return v

    @field_validator("deltas")
    @classmethod
    def _deltas_range(cls, v):
        if v is not None:
            if not v:
                raise ValueError("deltas must be nonempty")
            bad = [d for d in v if not 0 < d <= 1]
            if bad:
                raise ValueError(f"deltas outside (0, 1]: {bad}")
        return v

    @model_validator(mode="after")
    def _need_filter(self):
        if self.delta is None and self.deltas is None:
            raise ValueError("set 'delta' (single filter) or 'deltas' (sweep grid)")
        return self

    @property
    def prefix(self) -> str:
        return self.output_prefix or self.name

    def filter_spec(self) -> FilterSpec:
        m = self.state.mode_count
        if self.delta is None:
            raise ConfigError("this subcommand needs 'delta'")
        if self.delta == "identity":
            return identity_filter(m)
        return filter_from_delta(self.delta, m)

    def initial_state(self) -> FockOperator:
        return self.state.build(self.cutoff)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a YAML config; every failure becomes ``ConfigError``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"config {path} failed validation:\n{exc}") from exc

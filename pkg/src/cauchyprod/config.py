"""Run configuration: a JSON document validated with pydantic."""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import DomainError
from .specfun import ContourSpec
from .weight import EnsembleConfig

OUT_ENV = "CAUCHYPROD_OUT"


class ConfigError(ValueError):
    """Config file is malformed or violates an invariant."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    r_min: float = Field(0.05, ge=0.0, description="smallest radius")
    r_max: float = Field(5.0, gt=0.0, description="largest radius")
    points: int = Field(50, ge=2, description="number of grid radii, linearly spaced")

    @model_validator(mode="after")
    def _ordered(self):
        if self.r_max <= self.r_min:
            raise ValueError("grid.r_max must exceed grid.r_min")
        return self

    def radii(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.points)


class ContourOverride(_Strict):
    abscissa: float
    half_extent: float = Field(gt=0.0)
    node_count: int = Field(2048, ge=16)

    def spec(self) -> ContourSpec:
        return ContourSpec(self.abscissa, self.half_extent, self.node_count)


class MCConfig(_Strict):
    seed: int = Field(20240601, ge=0, lt=2**64)
    matrices: int = Field(500, ge=1)


class RunConfig(_Strict):
    n: int = Field(ge=1)
    dims: tuple[int, ...]
    grid: GridConfig = GridConfig()
    contour: Optional[ContourOverride] = None
    mc: MCConfig = MCConfig()
    tolerances: dict[str, float] = {}
    output: str = "out"

    @field_validator("tolerances")
    @classmethod
    def _positive(cls, v):
        bad = [k for k, t in v.items() if not t > 0]
        if bad:
            raise ValueError(f"tolerances must be positive: {bad}")
        return v

    @model_validator(mode="after")
    def _ensemble(self):
        try:
            EnsembleConfig(self.n, self.dims)
        except DomainError as exc:
            raise ValueError(str(exc)) from None
        return self

    @property
    def ensemble(self) -> EnsembleConfig:
        return EnsembleConfig(self.n, self.dims)

    def contour_spec(self) -> ContourSpec | None:
        return self.contour.spec() if self.contour else None

    def output_dir(self, override: str | None = None) -> Path:
        """--out beats the environment override, which beats the config value."""
        return Path(override or os.environ.get(OUT_ENV) or self.output)

    def tolerance(self, check_id: str, default: float) -> float:
        return self.tolerances.get(check_id, default)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def parse_config_text(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        msgs = "; ".join(f"{'.'.join(map(str, e['loc'])) or '<root>'}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"invalid config: {msgs}") from None


def parse_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)

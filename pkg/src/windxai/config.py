"""Run configuration shared by all subcommands."""

from __future__ import annotations

import json
from collections.abc import Mapping
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from windxai.attribution.reference import ReferenceStrategy
from windxai.data.pipeline import (
    DEFAULT_NORM_THRESHOLD_KW,
    DEFAULT_VAL_FRACTION,
    DEFAULT_YAW_CLIP_DEG,
    DEFAULT_YAW_SIGMA_DEG,
    TimeInterval,
)
from windxai.data.synthetic import SynthConfig
from windxai.errors import ConfigurationError

DEFAULT_N_SEEDS = 10
DEFAULT_MODELS: tuple[str, ...] = ("iec", "rf", "ann_small", "ann_large")


class DataSource(BaseModel):

    """Either a SCADA CSV file or a synthetic generator configuration."""

    model_config = ConfigDict(extra="forbid")

    csv: Path | None = None
    column_map: dict[str, str] = Field(default_factory=dict)
    synth: SynthConfig | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> DataSource:
        if (self.csv is None) == (self.synth is None):
            raise ValueError("Give exactly one data source: csv or synth")
        return self


class SplitConfig(BaseModel):

    """Temporal split; without intervals the time span is halved."""

    model_config = ConfigDict(extra="forbid")

    train_start: datetime | None = None
    train_end: datetime | None = None
    test_start: datetime | None = None
    test_end: datetime | None = None
    val_fraction: float = Field(default=DEFAULT_VAL_FRACTION, gt=0, lt=1)

    @model_validator(mode="after")
    def _all_or_none(self) -> SplitConfig:
        bounds = (self.train_start, self.train_end, self.test_start, self.test_end)
        if any(bound is None for bound in bounds) and not all(
            bound is None for bound in bounds
        ):
            raise ValueError("Give all four interval bounds or none")
        return self

    def intervals(self) -> tuple[TimeInterval, TimeInterval] | None:
        if (
            self.train_start is None
            or self.train_end is None
            or self.test_start is None
            or self.test_end is None
        ):
            return None
        return (
            TimeInterval(start=_utc(self.train_start), end=_utc(self.train_end)),
            TimeInterval(start=_utc(self.test_start), end=_utc(self.test_end)),
        )


def _utc(value: datetime) -> datetime:
    return value.replace(tzinfo=UTC) if value.tzinfo is None else value


class RunConfig(BaseModel):

    """Resolved configuration of one CLI run."""

    model_config = ConfigDict(extra="forbid")

    command: str
    data: DataSource
    output_dir: Path
    models: tuple[str, ...] = DEFAULT_MODELS
    features: tuple[str, ...] | None = None
    split: SplitConfig = Field(default_factory=SplitConfig)
    reference: ReferenceStrategy = ReferenceStrategy.INFORMED
    seed: int = 0
    n_seeds: int = Field(default=DEFAULT_N_SEEDS, ge=1)
    seeds: tuple[int, ...] | None = None
    norm_threshold_kw: float = Field(default=DEFAULT_NORM_THRESHOLD_KW, gt=0)
    curve_bin_width: float = Field(default=0.5, gt=0)
    bin_kw: float = Field(default=25.0, gt=0)
    augment_yaw: bool = True
    yaw_sigma_deg: float = Field(default=DEFAULT_YAW_SIGMA_DEG, gt=0)
    yaw_clip_deg: float = Field(default=DEFAULT_YAW_CLIP_DEG, gt=0, le=90)
    v_rated: float = Field(default=12.0, gt=0)

    @property
    def resolved_seeds(self) -> list[int]:
        """Explicit seeds, or ``n_seeds`` consecutive integers from ``seed``."""
        if self.seeds:
            return list(self.seeds)
        return list(range(self.seed, self.seed + self.n_seeds))


def _merge(base: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            current = merged.get(key)
            merged[key] = _merge(current if isinstance(current, dict) else {}, value)
        else:
            merged[key] = value
    return merged


def load_run_config(
    path: Path | str | None,
    overrides: Mapping[str, Any],
) -> RunConfig:
    """Combine a JSON configuration file with explicitly given flags.

    Flags override file values; ``None`` means "not given".

    Raises
    ------
        ConfigurationError: If the file is unreadable or the combined
            configuration is invalid.

    """
    document: dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
        if not isinstance(document, dict):
            raise ConfigurationError(f"Config file {path} must hold a JSON object")
    merged = _merge(document, overrides)
    # A data source given on the command line replaces the file's
    data_overrides = overrides.get("data") or {}
    if data_overrides.get("csv") is not None:
        merged.setdefault("data", {}).pop("synth", None)
    elif data_overrides.get("synth") is not None:
        merged.setdefault("data", {}).pop("csv", None)
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e


def parse_names(value: str | None) -> tuple[str, ...] | None:
    if value is None:
        return None
    return tuple(name.strip() for name in value.split(",") if name.strip())


"""Filtering, splitting and yaw augmentation of SCADA datasets."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from windxai.data.records import ScadaRecord
from windxai.errors import ConfigurationError, DataError
from windxai.physics.iec import (
    BinnedPowerCurve,
    curve_interpolate,
    density_normalize,
    yaw_power_factor,
)

logger = logging.getLogger(__name__)

DEFAULT_VAL_FRACTION = 0.2
DEFAULT_NORM_THRESHOLD_KW = 100.0
DEFAULT_YAW_SIGMA_DEG = 7.5
DEFAULT_YAW_CLIP_DEG = 15.0


class TimeInterval(BaseModel):

    """Half-open time interval ``[start, end)``."""

    model_config = ConfigDict(frozen=True)

    start: datetime
    end: datetime

    @model_validator(mode="after")
    def _ordered(self) -> TimeInterval:
        if not self.start < self.end:
            raise ValueError(f"Interval start {self.start} is not before {self.end}")
        return self

    def contains(self, timestamp: datetime) -> bool:
        return self.start <= timestamp < self.end

    def overlaps(self, other: TimeInterval) -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class DataSplit:

    """Temporal train/test split with a random validation subset."""

    train: list[ScadaRecord]
    val: list[ScadaRecord]
    test: list[ScadaRecord]
    seed: int
    excluded: int = 0

    def __post_init__(self) -> None:
        for name in ("train", "val", "test"):
            if not getattr(self, name):
                raise DataError(f"The {name} split is empty")

    @property
    def sizes(self) -> dict[str, int]:
        return {"train": len(self.train), "val": len(self.val), "test": len(self.test)}


@dataclass(frozen=True)
class YawGroundTruth:

    """Applied yaw loss for one augmented record."""

    timestamp: datetime
    delta_yaw: float
    c_ymis: float
    applied: bool
    p_free: float
    delta_p_true: float

    @property
    def residual_power(self) -> float:
        """Power left after the yaw factor (the literal ``c * P`` form).

        Records above rated speed keep their full power.
        """
        return self.c_ymis * self.p_free if self.applied else self.p_free


@dataclass(frozen=True)
class YawTruthSplit:
    train: list[YawGroundTruth] = field(default_factory=list)
    val: list[YawGroundTruth] = field(default_factory=list)
    test: list[YawGroundTruth] = field(default_factory=list)


@dataclass(frozen=True)
class NormFilterResult:

    """Records within and beyond the threshold of the reference curve."""

    kept: list[ScadaRecord]
    removed: list[ScadaRecord]
    out_of_support: int = 0


def filter_operational(records: Sequence[ScadaRecord]) -> list[ScadaRecord]:
    """Keep records in operation (``power > 0``) without stoppage flags."""
    return [record for record in records if record.power > 0 and record.status_ok]


def default_split_intervals(
    records: Sequence[ScadaRecord],
) -> tuple[TimeInterval, TimeInterval]:
    """Cut the observed time span at its midpoint into train and test halves.

    Raises
    ------
        DataError: If fewer than two distinct timestamps are present.

    """
    if not records:
        raise DataError("Cannot derive split intervals from no records")
    first = min(record.timestamp for record in records)
    last = max(record.timestamp for record in records)
    if not first < last:
        raise DataError("Need at least two distinct timestamps to split")
    middle = first + (last - first) / 2
    # The end is exclusive, so nudge it past the last observation
    end = last + (last - first) / max(len(records), 1)
    return (
        TimeInterval(start=first, end=middle),
        TimeInterval(start=middle, end=end),
    )


def split_temporal(
    records: Sequence[ScadaRecord],
    train_interval: TimeInterval,
    test_interval: TimeInterval,
    val_fraction: float = DEFAULT_VAL_FRACTION,
    seed: int = 0,
) -> DataSplit:
    """Split records temporally, drawing validation rows from training time.

    Args:
    ----
        records (Sequence[ScadaRecord]): All records.
        train_interval (TimeInterval): Training period.
        test_interval (TimeInterval): Test period, disjoint from training.
        val_fraction (float, optional): Share of training-period records
            moved to validation. Defaults to 0.2.
        seed (int, optional): Seed of the validation draw. Defaults to 0.

    Raises:
    ------
        ConfigurationError: If the intervals overlap or the fraction is
            outside (0, 1).
        DataError: If any resulting split is empty.

    Returns:
    -------
        DataSplit: The split; records outside both intervals are counted
            in ``excluded``.

    """
    if not 0 < val_fraction < 1:
        raise ConfigurationError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    if train_interval.overlaps(test_interval):
        raise ConfigurationError("Train and test intervals overlap")

    in_train = [
        record for record in records if train_interval.contains(record.timestamp)
    ]
    test = [record for record in records if test_interval.contains(record.timestamp)]
    if not in_train:
        raise DataError("No records in the training interval")
    if not test:
        raise DataError("No records in the test interval")

    # Uniform validation draw; both parts keep the input order
    n_val = int(round(val_fraction * len(in_train)))
    rng = np.random.default_rng(seed)
    is_val = np.zeros(len(in_train), dtype=bool)
    is_val[rng.choice(len(in_train), size=n_val, replace=False)] = True
    train = [record for record, flag in zip(in_train, is_val) if not flag]
    val = [record for record, flag in zip(in_train, is_val) if flag]

    excluded = len(records) - len(in_train) - len(test)
    logger.info(
        "Split %d records: %d train, %d val, %d test, %d outside both intervals",
        len(records),
        len(train),
        len(val),
        len(test),
        excluded,
    )
    return DataSplit(train=train, val=val, test=test, seed=seed, excluded=excluded)


def norm_filter(
    records: Sequence[ScadaRecord],
    reference_curve: BinnedPowerCurve,
    threshold_kw: float = DEFAULT_NORM_THRESHOLD_KW,
) -> NormFilterResult:
    """Separate records close to a reference power curve from outliers.

    Wind speeds are density-normalised to the curve's reference density.
    Records outside the curve's support are routed to ``removed`` and
    counted in ``out_of_support``.

    Raises
    ------
        ConfigurationError: If ``threshold_kw`` is not positive.

    """
    if not threshold_kw > 0:
        raise ConfigurationError(f"threshold_kw must be positive, got {threshold_kw}")
    if not records:
        return NormFilterResult(kept=[], removed=[])

    v_n = np.asarray(
        density_normalize(
            np.array([record.v_w for record in records]),
            np.array([record.rho for record in records]),
            reference_curve.rho_ref,
        ),
    )
    power = np.array([record.power for record in records])
    lower, upper = reference_curve.support
    in_support = (v_n >= lower) & (v_n < upper)
    deviation = np.abs(power - np.asarray(curve_interpolate(reference_curve, v_n)))
    keep = in_support & (deviation <= threshold_kw)

    kept = [record for record, flag in zip(records, keep) if flag]
    removed = [record for record, flag in zip(records, keep) if not flag]
    out_of_support = int(np.count_nonzero(~in_support))
    if out_of_support:
        logger.warning("%d records outside the reference curve support", out_of_support)
    return NormFilterResult(kept=kept, removed=removed, out_of_support=out_of_support)


def _augment_records(
    records: Sequence[ScadaRecord],
    draws: np.ndarray,
    clip_deg: float,
    v_rated: float,
) -> tuple[list[ScadaRecord], list[YawGroundTruth]]:
    delta = np.minimum(np.abs(draws), clip_deg)
    factor = np.asarray(yaw_power_factor(delta)).reshape(-1)
    augmented: list[ScadaRecord] = []
    truths: list[YawGroundTruth] = []
    for record, angle, c_ymis in zip(records, delta, factor):
        applied = record.v_w < v_rated
        power = record.power * c_ymis if applied else record.power
        augmented.append(
            record.model_copy(
                update={"delta_yaw": float(angle), "power": float(power)},
            ),
        )
        truths.append(
            YawGroundTruth(
                timestamp=record.timestamp,
                delta_yaw=float(angle),
                c_ymis=float(c_ymis),
                applied=applied,
                p_free=record.power,
                delta_p_true=float((c_ymis - 1.0) * record.power) if applied else 0.0,
            ),
        )
    return augmented, truths


def augment_yaw(
    split: DataSplit,
    sigma_deg: float = DEFAULT_YAW_SIGMA_DEG,
    clip_deg: float = DEFAULT_YAW_CLIP_DEG,
    v_rated: float = 12.0,
    seed: int = 0,
) -> tuple[DataSplit, YawTruthSplit]:
    """Inject artificial yaw misalignment into every split.

    Each record gets ``|N(0, sigma_deg)|`` clipped to ``clip_deg`` as its
    yaw misalignment; below rated wind speed its power is multiplied by
    ``cos^3`` of that angle. Draws follow record order (train, val, test)
    from a single seeded stream.

    Raises
    ------
        ConfigurationError: If ``sigma_deg`` or ``clip_deg`` is not
            positive, or ``clip_deg`` exceeds 90 degrees.

    """
    if not sigma_deg > 0:
        raise ConfigurationError(f"sigma_deg must be positive, got {sigma_deg}")
    if not 0 < clip_deg <= 90:
        raise ConfigurationError(f"clip_deg must lie in (0, 90], got {clip_deg}")

    rng = np.random.default_rng(seed)
    parts = (split.train, split.val, split.test)
    draws = rng.normal(0.0, sigma_deg, size=sum(len(part) for part in parts))

    augmented: list[list[ScadaRecord]] = []
    truths: list[list[YawGroundTruth]] = []
    offset = 0
    for part in parts:
        records, truth = _augment_records(
            part,
            draws[offset : offset + len(part)],
            clip_deg,
            v_rated,
        )
        augmented.append(records)
        truths.append(truth)
        offset += len(part)

    logger.info(
        "Augmented %d records with yaw misalignment (sigma %.1f deg, clip %.1f deg)",
        offset,
        sigma_deg,
        clip_deg,
    )
    return (
        DataSplit(
            train=augmented[0],
            val=augmented[1],
            test=augmented[2],
            seed=split.seed,
            excluded=split.excluded,
        ),
        YawTruthSplit(train=truths[0], val=truths[1], test=truths[2]),
    )


def truth_frame(truths: Sequence[YawGroundTruth]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "timestamp": [truth.timestamp.isoformat() for truth in truths],
            "delta_yaw": [truth.delta_yaw for truth in truths],
            "c_ymis": [truth.c_ymis for truth in truths],
            "applied": ["true" if truth.applied else "false" for truth in truths],
            "p_free": [truth.p_free for truth in truths],
            "delta_p_true": [truth.delta_p_true for truth in truths],
            "residual_power": [truth.residual_power for truth in truths],
        },
    )


def write_truth_csv(truths: Sequence[YawGroundTruth], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    truth_frame(truths).to_csv(path, index=False, lineterminator="\n")
    return path


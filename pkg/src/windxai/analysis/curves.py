"""Attribution distributions conditioned on wind speed."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from windxai.attribution.shapley import Attribution
from windxai.errors import ConfigurationError, DataError

DEFAULT_CURVE_BIN_WIDTH = 0.5
DEFAULT_CURVE_MIN_COUNT = 5


@dataclass(frozen=True)
class CurveBin:
    v_center: float
    count: int
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class ConditionalCurve:

    """Per-bin summary of one feature's attribution over wind speed."""

    feature: str
    bin_width: float
    bins: tuple[CurveBin, ...]


def conditional_attribution_curves(
    attrs: Sequence[Attribution],
    v_list: Sequence[float] | np.ndarray,
    bin_width: float = DEFAULT_CURVE_BIN_WIDTH,
    min_count: int = DEFAULT_CURVE_MIN_COUNT,
) -> dict[str, ConditionalCurve]:
    """Summarize each feature's attribution within wind-speed bins.

    Bins holding fewer than ``min_count`` attributions are dropped.

    Raises
    ------
        ConfigurationError: If ``bin_width`` is not positive.
        DataError: If ``attrs`` and ``v_list`` are not aligned.

    """
    if not bin_width > 0:
        raise ConfigurationError(f"bin_width must be positive, got {bin_width}")
    v = np.asarray(v_list, dtype=np.float64)
    if len(v) != len(attrs):
        raise DataError("Attributions and wind speeds are not aligned")
    if not attrs:
        return {}

    names = attrs[0].names
    phi = np.array([attr.phi for attr in attrs])
    index = np.floor(v / bin_width + 1e-12).astype(np.int64)

    curves: dict[str, ConditionalCurve] = {}
    for column, name in enumerate(names):
        bins: list[CurveBin] = []
        for key in np.unique(index):
            values = phi[index == key, column]
            if len(values) < min_count:
                continue
            low, high = float(values.min()), float(values.max())
            mean = math.fsum(values) / len(values)
            bins.append(
                CurveBin(
                    v_center=float((key + 0.5) * bin_width),
                    count=len(values),
                    mean=min(max(mean, low), high),
                    std=float(values.std()),
                    min=low,
                    max=high,
                ),
            )
        curves[name] = ConditionalCurve(
            feature=name,
            bin_width=bin_width,
            bins=tuple(bins),
        )
    return curves


def curves_frame(curves: dict[str, ConditionalCurve]) -> pd.DataFrame:
    """Tidy table with one row per (feature, bin)."""
    return pd.DataFrame(
        [
            {
                "feature": curve.feature,
                "v_center": item.v_center,
                "count": item.count,
                "mean": item.mean,
                "std": item.std,
                "min": item.min,
                "max": item.max,
            }
            for curve in curves.values()
            for item in curve.bins
        ],
        columns=["feature", "v_center", "count", "mean", "std", "min", "max"],
    )

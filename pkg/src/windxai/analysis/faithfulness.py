"""Faithfulness of yaw attributions against injected ground truth."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from windxai.attribution.shapley import Attribution
from windxai.data.pipeline import YawGroundTruth
from windxai.errors import ConfigurationError, DataError

DEFAULT_BIN_KW = 25.0


@dataclass(frozen=True)
class FaithfulnessBin:
    center_kw: float
    count: int
    mean_phi: float
    std_phi: float


@dataclass(frozen=True)
class FaithfulnessReport:

    """Attributed versus true yaw-induced power change.

    ``mae`` compares ``phi_delta_yaw`` with the signed deviation
    ``delta_p_true``; ``mae_residual`` with the residual power ``c * p``.
    """

    strategy: str
    bin_kw: float
    bins: tuple[FaithfulnessBin, ...]
    mae: float
    mae_residual: float
    n_instances: int


def yaw_faithfulness(
    truth: Sequence[YawGroundTruth],
    attrs: Sequence[Attribution],
    bin_kw: float = DEFAULT_BIN_KW,
) -> FaithfulnessReport:
    """Bin the true yaw loss and summarize the attributions per bin.

    Args:
    ----
        truth (Sequence[YawGroundTruth]): Applied yaw losses.
        attrs (Sequence[Attribution]): Attributions of the same records,
            from a model with a ``delta_yaw`` feature.
        bin_kw (float, optional): Bin width in kW. Defaults to 25.

    Raises:
    ------
        ConfigurationError: If ``bin_kw`` is not positive or the model has
            no ``delta_yaw`` feature.
        DataError: If the inputs are empty or not aligned.

    Returns:
    -------
        FaithfulnessReport: Per-bin statistics and the mean absolute errors.

    """
    if not bin_kw > 0:
        raise ConfigurationError(f"bin_kw must be positive, got {bin_kw}")
    if len(truth) != len(attrs):
        raise DataError("Ground truth and attributions are not aligned")
    if not attrs:
        raise DataError("Cannot assess faithfulness without attributions")
    if "delta_yaw" not in attrs[0].names:
        raise ConfigurationError("Attributions lack the delta_yaw feature")

    phi = np.array([attr.phi_of("delta_yaw") for attr in attrs], dtype=np.float64)
    delta = np.array([item.delta_p_true for item in truth])
    residual = np.array([item.residual_power for item in truth])

    # Bins are centered on multiples of bin_kw
    index = np.floor(delta / bin_kw + 0.5).astype(np.int64)
    bins = []
    for key in np.unique(index):
        values = phi[index == key]
        bins.append(
            FaithfulnessBin(
                center_kw=float(key * bin_kw),
                count=len(values),
                mean_phi=math.fsum(values) / len(values),
                std_phi=float(values.std()),
            ),
        )
    return FaithfulnessReport(
        strategy=str(attrs[0].reference.strategy),
        bin_kw=bin_kw,
        bins=tuple(bins),
        mae=math.fsum(np.abs(phi - delta)) / len(phi),
        mae_residual=math.fsum(np.abs(phi - residual)) / len(phi),
        n_instances=len(phi),
    )


def faithfulness_frame(reports: Sequence[FaithfulnessReport]) -> pd.DataFrame:
    """Tidy table with one row per (strategy, bin)."""
    return pd.DataFrame(
        [
            {
                "ref_strategy": report.strategy,
                "delta_p_true_center": item.center_kw,
                "count": item.count,
                "mean_phi_delta_yaw": item.mean_phi,
                "std_phi_delta_yaw": item.std_phi,
            }
            for report in reports
            for item in report.bins
        ],
        columns=[
            "ref_strategy",
            "delta_p_true_center",
            "count",
            "mean_phi_delta_yaw",
            "std_phi_delta_yaw",
        ],
    )

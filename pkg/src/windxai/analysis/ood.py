"""Robustness of trained models on points far from the standard curve."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import pandas as pd
from tqdm import tqdm

from windxai.analysis.strategy import compare_with_physics, min_reference_attributions
from windxai.data.records import ScadaRecord
from windxai.errors import ConfigurationError, DataError
from windxai.models.predictor import evaluate_rmse
from windxai.models.training import ModelSpec, train_model
from windxai.physics.iec import IecModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OodRow:
    model: str
    seed: int
    rmse_kept: float
    rmse_removed: float
    r2_phys: float | None = None


@dataclass(frozen=True)
class OodReport:

    """One row per (model, seed) with in- and out-of-distribution RMSE."""

    rows: tuple[OodRow, ...]
    n_kept_test: int
    n_removed_test: int

    def for_model(self, name: str) -> list[OodRow]:
        return [row for row in self.rows if row.model == name]


def ood_experiment(
    model_configs: Mapping[str, ModelSpec],
    kept_train: Sequence[ScadaRecord],
    kept_val: Sequence[ScadaRecord],
    kept_test: Sequence[ScadaRecord],
    removed_test: Sequence[ScadaRecord],
    seeds: Sequence[int],
    physics: IecModel | None = None,
) -> OodReport:
    """Train on filtered data, then score kept and removed test points.

    Args:
    ----
        model_configs (Mapping[str, ModelSpec]): Models to train, by name.
        kept_train (Sequence[ScadaRecord]): Filtered training records.
        kept_val (Sequence[ScadaRecord]): Filtered validation records.
        kept_test (Sequence[ScadaRecord]): Test records within the filter.
        removed_test (Sequence[ScadaRecord]): Test records it removed.
        seeds (Sequence[int]): One training run per seed and model.
        physics (IecModel | None, optional): Baseline for the r²_phys
            column; its attributions are computed once.

    Raises:
    ------
        ConfigurationError: If no seed or model is given.
        DataError: If there are no removed or no kept test records.

    Returns:
    -------
        OodReport: The per-run rows.

    """
    if not seeds:
        raise ConfigurationError("The OOD experiment needs at least one seed")
    if not model_configs:
        raise ConfigurationError("The OOD experiment needs at least one model")
    if not removed_test:
        raise DataError("No test records were removed by the filter")
    if not kept_test:
        raise DataError("No test records passed the filter")

    physics_attrs = (
        min_reference_attributions(physics, kept_train, kept_test)
        if physics is not None
        else None
    )

    runs = [(name, seed) for name in model_configs for seed in seeds]
    rows: list[OodRow] = []
    for name, seed in tqdm(runs, desc="OOD runs", disable=None, leave=False):
        model = train_model(model_configs[name], kept_train, kept_val, seed)
        r2_phys = None
        if physics is not None:
            r2_phys = compare_with_physics(
                model,
                physics,
                kept_train,
                kept_test,
                physics_attrs=physics_attrs,
            ).r2_phys
        rows.append(
            OodRow(
                model=name,
                seed=seed,
                rmse_kept=evaluate_rmse(model, kept_test),
                rmse_removed=evaluate_rmse(model, removed_test),
                r2_phys=r2_phys,
            ),
        )
        logger.debug("OOD run %s seed %d: %s", name, seed, rows[-1])

    return OodReport(
        rows=tuple(rows),
        n_kept_test=len(kept_test),
        n_removed_test=len(removed_test),
    )


def ood_frame(report: OodReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "model": row.model,
                "seed": row.seed,
                "rmse_kept": row.rmse_kept,
                "rmse_removed": row.rmse_removed,
                "r2_phys": row.r2_phys,
            }
            for row in report.rows
        ],
        columns=["model", "seed", "rmse_kept", "rmse_removed", "r2_phys"],
    )

"""CSV, JSON and console output of experiment results."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import BaseModel, Field
from rich.console import Console
from rich.table import Table

from windxai import __version__
from windxai.analysis.faithfulness import FaithfulnessReport
from windxai.analysis.ood import OodReport
from windxai.analysis.strategy import StrategyReport
from windxai.models.persistence import write_atomic

DOCUMENT_VERSION = 1


class ExperimentDocument(BaseModel):

    """Single JSON summary of one run: configuration, seeds and metrics."""

    format_version: int = DOCUMENT_VERSION
    toolkit_version: str = __version__
    command: str
    config: dict[str, Any] = Field(default_factory=dict)
    seeds: list[int] = Field(default_factory=list)
    metrics: dict[str, Any] = Field(default_factory=dict)


def write_frame(frame: pd.DataFrame, path: Path | str) -> Path:
    """Write a table as CSV with a header row and full float precision."""
    path = Path(path)
    write_atomic(path, frame.to_csv(index=False, lineterminator="\n"))
    return path


def write_document(document: ExperimentDocument, path: Path | str) -> Path:
    path = Path(path)
    write_atomic(path, document.model_dump_json(indent=2) + "\n")
    return path


def rmse_frame(rmse: Mapping[str, Sequence[float]]) -> pd.DataFrame:
    """One row per (model, seed run) of test RMSE in kW."""
    return pd.DataFrame(
        [
            {"model": name, "run": run, "rmse_test": value}
            for name, values in rmse.items()
            for run, value in enumerate(values)
        ],
        columns=["model", "run", "rmse_test"],
    )


def strategy_frame(report: StrategyReport) -> pd.DataFrame:
    rows = [{"feature": name, "r2": value} for name, value in report.r2.items()]
    rows.append({"feature": "r2_phys", "r2": report.r2_phys})
    return pd.DataFrame(rows, columns=["feature", "r2"])


def faithfulness_summary(reports: Sequence[FaithfulnessReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "ref_strategy": report.strategy,
                "n": report.n_instances,
                "mae": report.mae,
                "mae_residual": report.mae_residual,
            }
            for report in reports
        ],
        columns=["ref_strategy", "n", "mae", "mae_residual"],
    )


def _kw(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}"


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def print_rmse_table(
    rmse: Mapping[str, Sequence[float]],
    console: Console | None = None,
) -> None:
    """Print mean and spread of test RMSE per model."""
    table = Table(title="Model performance")
    table.add_column("Model")
    table.add_column("Runs", justify="right")
    table.add_column("RMSE test [kW]", justify="right")
    table.add_column("Std [kW]", justify="right")
    for name, values in rmse.items():
        series = pd.Series(list(values), dtype=float)
        spread = float(series.std(ddof=0)) if len(series) > 1 else 0.0
        table.add_row(name, str(len(series)), _kw(float(series.mean())), _kw(spread))
    (console or Console()).print(table)


def print_strategy_reports(
    reports: Mapping[str, Sequence[StrategyReport]],
    console: Console | None = None,
) -> None:
    """Print the mean r² per feature and model over all runs."""
    features: list[str] = []
    for runs in reports.values():
        for report in runs:
            features.extend(name for name in report.r2 if name not in features)

    table = Table(title="Attribution agreement with the physics baseline (r²)")
    table.add_column("Model")
    for name in [*features, "r2_phys"]:
        table.add_column(name, justify="right")
    for model, runs in reports.items():
        cells = []
        for name in features:
            values = [run.r2.get(name) for run in runs]
            defined = [value for value in values if value is not None]
            cells.append(_kw(_mean(defined)) if defined else "-")
        phys = [run.r2_phys for run in runs if run.r2_phys is not None]
        cells.append(_kw(_mean(phys)) if phys else "-")
        table.add_row(model, *cells)
    (console or Console()).print(table)


def print_faithfulness(
    reports: Sequence[FaithfulnessReport],
    console: Console | None = None,
) -> None:
    table = Table(title="Yaw attribution faithfulness")
    table.add_column("Reference")
    table.add_column("MAE [kW]", justify="right")
    table.add_column("MAE residual form [kW]", justify="right")
    for report in reports:
        table.add_row(report.strategy, _kw(report.mae), _kw(report.mae_residual))
    (console or Console()).print(table)


def print_ood(report: OodReport, console: Console | None = None) -> None:
    table = Table(title="In- and out-of-distribution error")
    table.add_column("Model")
    table.add_column("RMSE kept [kW]", justify="right")
    table.add_column("RMSE removed [kW]", justify="right")
    table.add_column("r2_phys", justify="right")
    names = list(dict.fromkeys(row.model for row in report.rows))
    for name in names:
        rows = report.for_model(name)
        r2 = [row.r2_phys for row in rows if row.r2_phys is not None]
        table.add_row(
            name,
            _kw(_mean([row.rmse_kept for row in rows])),
            _kw(_mean([row.rmse_removed for row in rows])),
            _kw(_mean(r2)) if r2 else "-",
        )
    (console or Console()).print(table)

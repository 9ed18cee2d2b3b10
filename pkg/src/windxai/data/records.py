"""SCADA records and their CSV representation."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from datetime import UTC, datetime
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from windxai.errors import DataError

logger = logging.getLogger(__name__)

# Model inputs in their canonical order
FEATURE_NAMES: tuple[str, ...] = ("v_w", "rho", "ti", "delta_yaw")
BASE_FEATURES: tuple[str, ...] = ("v_w", "rho", "ti")

CANONICAL_COLUMNS: tuple[str, ...] = (
    "timestamp",
    "v_w",
    "rho",
    "ti",
    "delta_yaw",
    "power",
    "status_ok",
)
REQUIRED_COLUMNS: tuple[str, ...] = ("timestamp", "v_w", "rho", "ti", "power")
IDENTITY_COLUMN_MAP: dict[str, str] = {name: name for name in CANONICAL_COLUMNS}

_TRUE_STRINGS = {"true", "1", "yes", "y", "t"}
_FALSE_STRINGS = {"false", "0", "no", "n", "f"}


class ScadaRecord(BaseModel):

    """One 10-minute SCADA observation."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    timestamp: datetime
    v_w: float = Field(ge=0.0, description="Wind speed [m/s]")
    rho: float = Field(gt=0.8, lt=1.5, description="Air density [kg/m3]")
    ti: float = Field(ge=0.0, lt=1.0, description="Turbulence intensity [-]")
    delta_yaw: float = Field(default=0.0, ge=0.0, le=180.0, description="[deg]")
    power: float = Field(ge=-50.0, description="Active power [kW]")
    status_ok: bool = True

    @field_validator("timestamp")
    @classmethod
    def _as_utc(cls, value: datetime) -> datetime:
        if value.tzinfo is None:
            return value.replace(tzinfo=UTC)
        return value.astimezone(UTC)

    def feature(self, name: str) -> float:
        if name not in FEATURE_NAMES:
            raise DataError(f"Unknown feature '{name}'")
        return float(getattr(self, name))


@dataclass(frozen=True)
class ScadaParseResult:

    """Records read from a CSV file plus the number of rows skipped."""

    records: list[ScadaRecord]
    dropped: int


def _parse_status(values: pd.Series) -> pd.Series:
    lowered = values.astype(str).str.strip().str.lower()
    parsed = pd.Series(np.nan, index=values.index, dtype=object)
    parsed[lowered.isin(_TRUE_STRINGS)] = True
    parsed[lowered.isin(_FALSE_STRINGS)] = False
    return parsed


def parse_scada_csv(
    path: Path | str,
    column_map: Mapping[str, str] | None = None,
) -> ScadaParseResult:
    """Read SCADA records from a CSV file.

    Rows where any mapped field cannot be parsed (or violates the record
    invariants) are skipped and counted instead of aborting the read.

    Args:
    ----
        path (Path | str): CSV file with a header row.
        column_map (Mapping[str, str] | None, optional): Canonical field
            name to CSV header name. Unmapped canonical fields fall back
            to a column with the canonical name. ``delta_yaw`` and
            ``status_ok`` are optional.

    Raises:
    ------
        DataError: If the file is missing, a required column is missing
            or no row could be parsed.

    Returns:
    -------
        ScadaParseResult: The parsed records and the drop count.

    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"SCADA file not found: {path}")
    mapping = {**IDENTITY_COLUMN_MAP, **dict(column_map or {})}

    frame = pd.read_csv(path, dtype=str, encoding="utf-8", keep_default_na=False)

    # Required columns must be present in the header
    for name in REQUIRED_COLUMNS:
        if mapping[name] not in frame.columns:
            raise DataError(f"missing column '{mapping[name]}' (mapped to {name})")

    parsed: dict[str, pd.Series] = {
        "timestamp": pd.to_datetime(
            frame[mapping["timestamp"]],
            utc=True,
            errors="coerce",
            format="ISO8601",
        ),
    }
    for name in ("v_w", "rho", "ti", "power"):
        parsed[name] = pd.to_numeric(frame[mapping[name]], errors="coerce")

    # Optional columns get their healthy defaults when absent
    if mapping["delta_yaw"] in frame.columns:
        parsed["delta_yaw"] = pd.to_numeric(
            frame[mapping["delta_yaw"]],
            errors="coerce",
        )
    else:
        parsed["delta_yaw"] = pd.Series(0.0, index=frame.index)
    if mapping["status_ok"] in frame.columns:
        parsed["status_ok"] = _parse_status(frame[mapping["status_ok"]])
    else:
        parsed["status_ok"] = pd.Series(True, index=frame.index, dtype=object)

    table = pd.DataFrame(parsed)
    valid = table.notna().all(axis=1)

    records: list[ScadaRecord] = []
    for row in table[valid].itertuples(index=False):
        try:
            records.append(
                ScadaRecord(
                    timestamp=row.timestamp.to_pydatetime(),
                    v_w=row.v_w,
                    rho=row.rho,
                    ti=row.ti,
                    delta_yaw=row.delta_yaw,
                    power=row.power,
                    status_ok=bool(row.status_ok),
                ),
            )
        except ValidationError:
            continue

    dropped = len(frame) - len(records)
    if not records:
        raise DataError(f"No parseable rows in {path} ({dropped} dropped)")
    if dropped:
        logger.warning("Dropped %d unparseable rows from %s", dropped, path)
    logger.info("Read %d SCADA records from %s", len(records), path)
    return ScadaParseResult(records=records, dropped=dropped)


def records_frame(records: Sequence[ScadaRecord]) -> pd.DataFrame:
    """Tabulate records with the canonical column order."""
    return pd.DataFrame(
        {
            "timestamp": [record.timestamp.isoformat() for record in records],
            "v_w": [record.v_w for record in records],
            "rho": [record.rho for record in records],
            "ti": [record.ti for record in records],
            "delta_yaw": [record.delta_yaw for record in records],
            "power": [record.power for record in records],
            "status_ok": [
                "true" if record.status_ok else "false" for record in records
            ],
        },
        columns=list(CANONICAL_COLUMNS),
    )


def write_scada_csv(records: Sequence[ScadaRecord], path: Path | str) -> Path:
    """Write records as canonical CSV (full float precision, ISO timestamps)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(path, index=False, lineterminator="\n")
    return path


def feature_matrix(
    records: Sequence[ScadaRecord],
    names: Sequence[str],
) -> np.ndarray:
    """Stack the named features of ``records`` into an ``(n, d)`` array."""
    for name in names:
        if name not in FEATURE_NAMES:
            raise DataError(f"Unknown feature '{name}'")
    return np.array(
        [[getattr(record, name) for name in names] for record in records],
        dtype=np.float64,
    ).reshape(len(records), len(names))


def target_vector(records: Sequence[ScadaRecord]) -> np.ndarray:
    """Return the measured power of ``records`` in kW."""
    return np.array([record.power for record in records], dtype=np.float64)


def wind_speeds(records: Sequence[ScadaRecord]) -> np.ndarray:
    return np.array([record.v_w for record in records], dtype=np.float64)

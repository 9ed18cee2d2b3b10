"""Decomposition of deviations from the expected turbine output."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pandas as pd

from windxai.attribution.reference import (
    ReferenceBuilder,
    ReferencePoint,
    ReferenceStrategy,
)
from windxai.attribution.shapley import Attribution, explain_records
from windxai.data.records import FEATURE_NAMES, ScadaRecord, target_vector
from windxai.errors import ConfigurationError, DataError
from windxai.models.predictor import FeatureSchema, Predictor

logger = logging.getLogger(__name__)

DEFAULT_ERROR_QUANTILE = 0.9


@dataclass(frozen=True)
class MonitoringReport:

    """Why one observation deviates from the expected output.

    ``f_ref`` is the expected output under typical ambient conditions and
    zero yaw at the observed wind speed. The attributions split
    ``f_x - f_ref``; the model error ``power - f_x`` covers the rest.
    """

    timestamp: datetime
    v_w: float
    power: float
    f_x: float
    f_ref: float
    phi: dict[str, float]
    low_confidence: bool
    fallback: bool
    reference: ReferencePoint

    @property
    def residual(self) -> float:
        return self.power - self.f_x

    @property
    def abs_error(self) -> float:
        return abs(self.residual)

    @property
    def expected_deviation(self) -> float:
        return self.power - self.f_ref

    @property
    def confidence_note(self) -> str:
        level = "low" if self.low_confidence else "ok"
        note = f"{level} confidence: |power - f_x| = {self.abs_error:.2f} kW"
        if self.fallback:
            note += "; wind speed outside conditional tables, global means used"
        return note


class Monitor:

    """Explains deviations of many observations for one trained model.

    Reference tables and the error threshold that flags low-confidence
    explanations are derived from the training set once.
    """

    def __init__(
        self,
        predictor: Predictor,
        train: Sequence[ScadaRecord],
        error_quantile: float = DEFAULT_ERROR_QUANTILE,
    ) -> None:
        names = predictor.feature_schema.names
        if "delta_yaw" not in names:
            raise ConfigurationError(
                f"Monitoring needs the delta_yaw feature, the model uses {names}",
            )
        if not 0 < error_quantile < 1:
            raise ConfigurationError(
                f"error_quantile must lie in (0, 1), got {error_quantile}",
            )
        if not train:
            raise DataError("Monitoring needs the training set")
        self.predictor = predictor
        self.builder = ReferenceBuilder(train, names)
        errors = np.abs(
            predictor.predict(predictor.feature_schema.matrix(train))
            - target_vector(train),
        )
        self.error_threshold = float(np.quantile(errors, error_quantile))

    def _report(
        self,
        record: ScadaRecord,
        attribution: Attribution,
    ) -> MonitoringReport:
        return MonitoringReport(
            timestamp=record.timestamp,
            v_w=record.v_w,
            power=record.power,
            f_x=attribution.f_x,
            f_ref=attribution.f_ref,
            phi={
                name: float(value)
                for name, value in zip(attribution.names, attribution.phi)
            },
            low_confidence=abs(record.power - attribution.f_x) > self.error_threshold,
            fallback=attribution.reference.fallback,
            reference=attribution.reference,
        )

    def decompose(self, records: Sequence[ScadaRecord]) -> list[MonitoringReport]:
        attributions = explain_records(
            self.predictor,
            records,
            self.builder,
            ReferenceStrategy.INFORMED,
        )
        reports = [
            self._report(record, attribution)
            for record, attribution in zip(records, attributions)
        ]
        flagged = sum(report.fallback for report in reports)
        if flagged:
            logger.warning(
                "%d of %d observations lie outside the conditional tables",
                flagged,
                len(reports),
            )
        return reports


def decompose_deviation(
    predictor: Predictor,
    instance: ScadaRecord,
    train: Sequence[ScadaRecord],
    schema: FeatureSchema | None = None,
) -> MonitoringReport:
    """Explain one observation relative to its informed reference.

    Args:
    ----
        predictor (Predictor): Model trained with a ``delta_yaw`` feature.
        instance (ScadaRecord): The observation to explain.
        train (Sequence[ScadaRecord]): The model's training records.
        schema (FeatureSchema | None, optional): Expected feature order;
            must match the model's.

    Raises:
    ------
        ConfigurationError: If the model has no ``delta_yaw`` feature.
        DataError: If ``schema`` differs from the model's features.

    Returns:
    -------
        MonitoringReport: Attributions, expected output and confidence.

    """
    if schema is not None and schema.names != predictor.feature_schema.names:
        raise DataError(
            f"schema mismatch: {schema.names} vs {predictor.feature_schema.names}",
        )
    return Monitor(predictor, train).decompose([instance])[0]


def monitoring_frame(reports: Sequence[MonitoringReport]) -> pd.DataFrame:
    columns = [
        "timestamp",
        "v_w",
        "power",
        "f_x",
        "f_ref",
        "residual",
        *(f"phi_{name}" for name in FEATURE_NAMES),
        "low_confidence",
        "fallback",
        "confidence_note",
    ]
    return pd.DataFrame(
        [
            {
                "timestamp": report.timestamp.isoformat(),
                "v_w": report.v_w,
                "power": report.power,
                "f_x": report.f_x,
                "f_ref": report.f_ref,
                "residual": report.residual,
                **{f"phi_{name}": report.phi.get(name) for name in FEATURE_NAMES},
                "low_confidence": "true" if report.low_confidence else "false",
                "fallback": "true" if report.fallback else "false",
                "confidence_note": report.confidence_note,
            }
            for report in reports
        ],
        columns=columns,
    )

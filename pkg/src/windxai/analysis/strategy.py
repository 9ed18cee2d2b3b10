"""Agreement between data-driven and physical attribution strategies."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from windxai.attribution.reference import ReferenceBuilder, ReferenceStrategy
from windxai.attribution.shapley import Attribution, explain_records
from windxai.data.records import FEATURE_NAMES, ScadaRecord
from windxai.errors import ConfigurationError, DataError
from windxai.models.predictor import Predictor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrategyReport:

    """Squared correlations of per-feature attributions.

    ``r2`` maps each shared feature to its squared Pearson correlation, or
    ``None`` where either series is constant. ``r2_phys`` is the unweighted
    mean over the defined values.
    """

    r2: dict[str, float | None]
    r2_phys: float | None
    n_instances: int


def squared_correlation(a: np.ndarray, b: np.ndarray) -> float | None:
    """Squared Pearson correlation, ``None`` for a constant series."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da = a - math.fsum(a) / len(a)
    db = b - math.fsum(b) / len(b)
    saa = math.fsum(da * da)
    sbb = math.fsum(db * db)
    if not (saa > 0 and sbb > 0):
        return None
    sab = math.fsum(da * db)
    return min(1.0, max(0.0, (sab * sab) / (saa * sbb)))


def strategy_correlation(
    ml_attrs: Sequence[Attribution],
    iec_attrs: Sequence[Attribution],
) -> StrategyReport:
    """Correlate two attribution series instance by instance.

    Args:
    ----
        ml_attrs (Sequence[Attribution]): Attributions of the data-driven
            model.
        iec_attrs (Sequence[Attribution]): Attributions of the physics
            baseline for the same instances, in the same order.

    Raises:
    ------
        DataError: If the series are empty, differ in length or share no
            feature.
        ConfigurationError: If the two series use different reference
            strategies.

    Returns:
    -------
        StrategyReport: Per-feature r² over the shared features and their
            mean.

    """
    if len(ml_attrs) != len(iec_attrs):
        raise DataError("Attribution series differ in length")
    if not ml_attrs:
        raise DataError("Cannot correlate empty attribution series")
    strategies = {str(attr.reference.strategy) for attr in (*ml_attrs, *iec_attrs)}
    if len(strategies) > 1:
        raise ConfigurationError(
            f"Attributions mix reference strategies {sorted(strategies)}",
        )

    shared = [
        name
        for name in FEATURE_NAMES
        if name in ml_attrs[0].names and name in iec_attrs[0].names
    ]
    if not shared:
        raise DataError("The attribution series share no feature")

    r2: dict[str, float | None] = {}
    for name in shared:
        r2[name] = squared_correlation(
            np.array([attr.phi_of(name) for attr in ml_attrs]),
            np.array([attr.phi_of(name) for attr in iec_attrs]),
        )
    defined = [value for value in r2.values() if value is not None]
    if len(defined) < len(r2):
        logger.warning(
            "Correlation undefined for constant attributions of %s",
            [name for name, value in r2.items() if value is None],
        )
    r2_phys = math.fsum(defined) / len(defined) if defined else None
    return StrategyReport(r2=r2, r2_phys=r2_phys, n_instances=len(ml_attrs))


def min_reference_attributions(
    predictor: Predictor,
    train: Sequence[ScadaRecord],
    records: Sequence[ScadaRecord],
) -> list[Attribution]:
    """Attribute ``records`` relative to the training minimum."""
    builder = ReferenceBuilder(train, predictor.feature_schema.names)
    return explain_records(predictor, records, builder, ReferenceStrategy.MIN)


def compare_with_physics(
    model: Predictor,
    physics: Predictor,
    train: Sequence[ScadaRecord],
    test: Sequence[ScadaRecord],
    physics_attrs: Sequence[Attribution] | None = None,
) -> StrategyReport:
    """r²_phys of ``model`` against the physics baseline on ``test``.

    ``physics_attrs`` may carry precomputed baseline attributions of
    ``test`` so repeated comparisons reuse them.
    """
    if physics_attrs is None:
        physics_attrs = min_reference_attributions(physics, train, test)
    return strategy_correlation(
        min_reference_attributions(model, train, test),
        physics_attrs,
    )

"""Exact Shapley attributions by coalition enumeration."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cache

import numpy as np
import pandas as pd

from windxai.attribution.reference import (
    ReferenceBuilder,
    ReferencePoint,
    ReferenceStrategy,
)
from windxai.data.records import FEATURE_NAMES, ScadaRecord
from windxai.errors import ConfigurationError, DataError, NumericalError
from windxai.models.predictor import Predictor

logger = logging.getLogger(__name__)

MAX_EXACT_FEATURES = 16
MAX_ORACLE_FEATURES = 8
# Instances per predictor call; each contributes 2^n coalition rows
_CHUNK_INSTANCES = 4096

ATTRIBUTION_COLUMNS: tuple[str, ...] = (
    "timestamp",
    "v_w",
    "rho",
    "ti",
    "delta_yaw",
    "power",
    "f_x",
    "f_ref",
    *(f"phi_{name}" for name in FEATURE_NAMES),
    "ref_strategy",
)


@dataclass(frozen=True, eq=False)
class Attribution:

    """Shapley attribution of one prediction, in kW."""

    names: tuple[str, ...]
    phi: np.ndarray
    f_x: float
    f_ref: float
    x: np.ndarray
    reference: ReferencePoint

    def phi_of(self, name: str) -> float | None:
        return float(self.phi[self.names.index(name)]) if name in self.names else None

    @property
    def conservation_error(self) -> float:
        return abs(math.fsum(self.phi) - (self.f_x - self.f_ref))


@cache
def _coalition_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Membership bits of all ``2^n`` coalitions and the Shapley weights.

    Coalition ``S`` is the bitmask whose bit ``i`` marks feature ``i``;
    ``weights[k] = k! (n - 1 - k)! / n!``.
    """
    masks = np.arange(2**n)
    members = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    weights = np.array(
        [
            math.factorial(k) * math.factorial(n - 1 - k) / math.factorial(n)
            for k in range(n)
        ],
    )
    return members, weights


def _coalition_values(
    predictor: Predictor,
    instances: np.ndarray,
    refs: np.ndarray,
    members: np.ndarray,
) -> np.ndarray:
    n_instances, n = instances.shape
    mixed = np.where(members[None, :, :], instances[:, None, :], refs[:, None, :])
    values = np.asarray(predictor.predict(mixed.reshape(-1, n)), dtype=np.float64)
    values = values.reshape(n_instances, len(members))
    if not np.all(np.isfinite(values)):
        raise NumericalError("The model produced non-finite output for a coalition")
    return values


def _check_inputs(predictor: Predictor, instances: np.ndarray, refs: np.ndarray) -> int:
    n = predictor.feature_schema.n_features
    if instances.ndim != 2 or instances.shape[1] != n or refs.shape != instances.shape:
        raise DataError(
            f"schema mismatch: instances {instances.shape} and references {refs.shape} "
            f"for {n} features",
        )
    if not (np.all(np.isfinite(instances)) and np.all(np.isfinite(refs))):
        raise DataError("Instances and references must be finite")
    return n


def shapley_batch(
    predictor: Predictor,
    instances: np.ndarray,
    refs: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact Shapley values of many instances against their references.

    Off-coalition features take their reference value. All ``2^n``
    coalition values of an instance are evaluated once.

    Args:
    ----
        predictor (Predictor): The explained model.
        instances (np.ndarray): Instances, one row each, in schema order.
        refs (np.ndarray): One reference row per instance.

    Raises:
    ------
        ConfigurationError: If the schema has more than 16 features.
        DataError: If the shapes do not match the schema or an input is
            not finite.
        NumericalError: If the model output is not finite.

    Returns:
    -------
        tuple[np.ndarray, np.ndarray, np.ndarray]: Attributions ``(m, n)``,
            ``f(x)`` and ``f(reference)``, all in kW.

    """
    instances = np.asarray(instances, dtype=np.float64)
    refs = np.asarray(refs, dtype=np.float64)
    instances = instances.reshape(1, -1) if instances.ndim == 1 else instances
    refs = refs.reshape(1, -1) if refs.ndim == 1 else refs
    n = _check_inputs(predictor, instances, refs)
    if n > MAX_EXACT_FEATURES:
        raise ConfigurationError(
            f"Exact attribution supports at most {MAX_EXACT_FEATURES} features, "
            f"got {n}",
        )

    members, weights = _coalition_tables(n)
    full = 2**n - 1
    phi = np.empty(instances.shape, dtype=np.float64)
    f_x = np.empty(len(instances), dtype=np.float64)
    f_ref = np.empty(len(instances), dtype=np.float64)
    for start in range(0, len(instances), _CHUNK_INSTANCES):
        rows = slice(start, start + _CHUNK_INSTANCES)
        values = _coalition_values(predictor, instances[rows], refs[rows], members)
        f_x[rows] = values[:, full]
        f_ref[rows] = values[:, 0]
        for i in range(n):
            without = np.flatnonzero(~members[:, i])
            sizes = members[without].sum(axis=1)
            gains = values[:, without | (1 << i)] - values[:, without]
            phi[rows, i] = gains @ weights[sizes]
    return phi, f_x, f_ref


def shapley_exact(
    predictor: Predictor,
    x: np.ndarray,
    ref: ReferencePoint,
) -> Attribution:
    """Exact Shapley attribution of one instance relative to ``ref``.

    Raises
    ------
        DataError: If the reference features differ from the schema.

    """
    names = predictor.feature_schema.names
    if ref.names != names:
        raise DataError(f"Reference features {ref.names} differ from {names}")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    phi, f_x, f_ref = shapley_batch(predictor, x, ref.as_array())
    return Attribution(
        names=names,
        phi=phi[0],
        f_x=float(f_x[0]),
        f_ref=float(f_ref[0]),
        x=x,
        reference=ref,
    )


def shapley_permutation_oracle(
    predictor: Predictor,
    x: np.ndarray,
    ref: ReferencePoint,
) -> Attribution:
    """Shapley attribution averaged over all feature orderings.

    Independent of the coalition formula in :func:`shapley_batch`; meant
    for cross-checking it on small feature sets.

    Raises
    ------
        ConfigurationError: If the schema has more than 8 features.

    """
    names = predictor.feature_schema.names
    n = len(names)
    if n > MAX_ORACLE_FEATURES:
        raise ConfigurationError(
            f"The permutation oracle supports at most {MAX_ORACLE_FEATURES} "
            f"features, got {n}",
        )
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    reference = ref.as_array()
    _check_inputs(predictor, x.reshape(1, -1), reference.reshape(1, -1))

    def value(coalition: frozenset[int]) -> float:
        z = np.array([x[i] if i in coalition else reference[i] for i in range(n)])
        output = float(predictor.predict(z.reshape(1, -1))[0])
        if not math.isfinite(output):
            raise NumericalError("The model produced non-finite output")
        return output

    totals = np.zeros(n)
    orderings = 0
    for ordering in itertools.permutations(range(n)):
        coalition: frozenset[int] = frozenset()
        previous = value(coalition)
        for i in ordering:
            coalition = coalition | {i}
            current = value(coalition)
            totals[i] += current - previous
            previous = current
        orderings += 1

    return Attribution(
        names=names,
        phi=totals / orderings,
        f_x=value(frozenset(range(n))),
        f_ref=value(frozenset()),
        x=x,
        reference=ref,
    )


def explain_records(
    predictor: Predictor,
    records: Sequence[ScadaRecord],
    builder: ReferenceBuilder,
    strategy: ReferenceStrategy,
) -> list[Attribution]:
    """Attribute the prediction of every record under one strategy.

    Raises
    ------
        DataError: If the builder's features differ from the schema.

    """
    names = predictor.feature_schema.names
    if builder.names != names:
        raise DataError(f"Reference features {builder.names} differ from {names}")
    if not records:
        return []
    strategy = ReferenceStrategy(strategy)
    instances = predictor.feature_schema.matrix(records)
    refs, fallback = builder.references(strategy, instances)
    phi, f_x, f_ref = shapley_batch(predictor, instances, refs)
    tables = tuple(builder.tables.values()) if strategy == "informed" else ()
    logger.info("Explained %d records with the %s reference", len(records), strategy)
    return [
        Attribution(
            names=names,
            phi=phi[i],
            f_x=float(f_x[i]),
            f_ref=float(f_ref[i]),
            x=instances[i],
            reference=ReferencePoint(
                strategy=strategy,
                names=names,
                values=tuple(float(value) for value in refs[i]),
                fallback=bool(fallback[i]),
                tables=tables,
            ),
        )
        for i in range(len(records))
    ]


def attributions_frame(
    attributions: Sequence[Attribution],
    records: Sequence[ScadaRecord],
) -> pd.DataFrame:
    """Tabulate attributions next to their records.

    Features absent from the explained model leave empty ``phi_`` columns.

    Raises
    ------
        DataError: If the two sequences differ in length.

    """
    if len(attributions) != len(records):
        raise DataError("Attributions and records are not aligned")
    rows = []
    for attribution, record in zip(attributions, records):
        row: dict[str, object] = {
            "timestamp": record.timestamp.isoformat(),
            "v_w": record.v_w,
            "rho": record.rho,
            "ti": record.ti,
            "delta_yaw": record.delta_yaw,
            "power": record.power,
            "f_x": attribution.f_x,
            "f_ref": attribution.f_ref,
        }
        for name in FEATURE_NAMES:
            row[f"phi_{name}"] = attribution.phi_of(name)
        row["ref_strategy"] = str(attribution.reference.strategy)
        rows.append(row)
    return pd.DataFrame(rows, columns=list(ATTRIBUTION_COLUMNS))

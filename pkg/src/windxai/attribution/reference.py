"""Reference points relative to which attributions are computed."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from windxai.data.records import ScadaRecord, feature_matrix, wind_speeds
from windxai.errors import ConfigurationError, DataError

logger = logging.getLogger(__name__)

CONDITIONAL_BIN_WIDTH = 0.5
CONDITIONAL_MIN_COUNT = 10

# Technical features are referenced to their healthy state
HEALTHY_BASELINES: dict[str, float] = {"delta_yaw": 0.0}
ENVIRONMENTAL_FEATURES: tuple[str, ...] = ("rho", "ti")


class ReferenceStrategy(StrEnum):
    MIN = "min"
    MEAN = "mean"
    INFORMED = "informed"


@dataclass(frozen=True)
class ConditionalTable:

    """Binned conditional mean of one feature given wind speed.

    Lookups interpolate linearly between bin centers and fall back to the
    global mean outside the range of retained bins.
    """

    feature: str
    centers: tuple[float, ...]
    means: tuple[float, ...]
    global_mean: float

    @property
    def v_range(self) -> tuple[float, float] | None:
        if not self.centers:
            return None
        return self.centers[0], self.centers[-1]

    def lookup(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return conditional means at ``v`` and a mask of fallback rows."""
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if not self.centers:
            return np.full(v.shape, self.global_mean), np.ones(v.shape, dtype=bool)
        outside = (v < self.centers[0]) | (v > self.centers[-1])
        values = np.interp(v, self.centers, self.means)
        return np.where(outside, self.global_mean, values), outside


def fit_conditional_table(
    v: np.ndarray,
    values: np.ndarray,
    feature: str,
    bin_width: float = CONDITIONAL_BIN_WIDTH,
    min_count: int = CONDITIONAL_MIN_COUNT,
) -> ConditionalTable:
    """Estimate ``E(feature | v_w)`` by averaging within wind-speed bins.

    Bins with fewer than ``min_count`` rows are dropped.
    """
    if not bin_width > 0:
        raise ConfigurationError(f"bin_width must be positive, got {bin_width}")
    if len(v) == 0:
        raise DataError(f"Cannot condition {feature} on an empty training set")
    index = np.floor(np.asarray(v) / bin_width + 1e-12).astype(np.int64)
    keys, inverse, counts = np.unique(index, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=values)
    keep = counts >= min_count
    if not keep.all():
        logger.debug(
            "Dropped %d sparse wind-speed bins conditioning %s",
            int(np.count_nonzero(~keep)),
            feature,
        )
    return ConditionalTable(
        feature=feature,
        centers=tuple(float((key + 0.5) * bin_width) for key in keys[keep]),
        means=tuple(float(mean) for mean in (sums / counts)[keep]),
        global_mean=float(np.mean(values)),
    )


@dataclass(frozen=True)
class ReferencePoint:

    """Feature values standing in for a "removed" feature."""

    strategy: ReferenceStrategy
    names: tuple[str, ...]
    values: tuple[float, ...]
    # Set when a conditional lookup fell outside its table
    fallback: bool = False
    tables: tuple[ConditionalTable, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if len(self.names) != len(self.values):
            raise DataError("A reference needs one value per feature")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def value(self, name: str) -> float:
        return self.values[self.names.index(name)]


class ReferenceBuilder:

    """Reference points for one training set and feature order.

    Training statistics and conditional tables are computed once, so
    building the informed reference of many instances stays cheap.
    """

    def __init__(
        self,
        train: Sequence[ScadaRecord],
        names: Sequence[str],
        bin_width: float = CONDITIONAL_BIN_WIDTH,
        min_count: int = CONDITIONAL_MIN_COUNT,
    ) -> None:
        if not train:
            raise DataError("Cannot build references from an empty training set")
        self.names = tuple(names)
        matrix = feature_matrix(train, self.names)
        self.minimum = matrix.min(axis=0)
        self.mean = matrix.mean(axis=0)

        v = wind_speeds(train)
        self.tables = {
            name: fit_conditional_table(
                v,
                matrix[:, self.names.index(name)],
                name,
                bin_width=bin_width,
                min_count=min_count,
            )
            for name in ENVIRONMENTAL_FEATURES
            if name in self.names
        }

    def _instance_matrix(
        self,
        instances: Sequence[ScadaRecord] | np.ndarray,
    ) -> np.ndarray:
        if isinstance(instances, np.ndarray):
            matrix = np.asarray(instances, dtype=np.float64)
            matrix = matrix.reshape(1, -1) if matrix.ndim == 1 else matrix
            if matrix.shape[1] != len(self.names):
                raise DataError(
                    f"schema mismatch: expected {len(self.names)} features, "
                    f"got {matrix.shape[1]}",
                )
            return matrix
        return feature_matrix(instances, self.names)

    def informed(
        self,
        instances: Sequence[ScadaRecord] | np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Informed references of many instances.

        Args:
        ----
            instances (Sequence[ScadaRecord] | np.ndarray): Records, or
                feature rows in this builder's feature order.

        Raises:
        ------
            ConfigurationError: If the feature set lacks ``v_w``.

        Returns:
        -------
            tuple[np.ndarray, np.ndarray]: One reference row per instance
                and a mask of rows where a table fell back to its global
                mean.

        """
        if "v_w" not in self.names:
            raise ConfigurationError("The informed reference needs v_w as a feature")
        matrix = self._instance_matrix(instances)
        v = matrix[:, self.names.index("v_w")]
        refs = np.empty_like(matrix)
        fallback = np.zeros(len(matrix), dtype=bool)
        for column, name in enumerate(self.names):
            if name == "v_w":
                refs[:, column] = v
            elif name in self.tables:
                refs[:, column], outside = self.tables[name].lookup(v)
                fallback |= outside
            else:
                refs[:, column] = HEALTHY_BASELINES[name]
        return refs, fallback

    def references(
        self,
        strategy: ReferenceStrategy,
        instances: Sequence[ScadaRecord] | np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Reference rows for every instance under ``strategy``."""
        n = len(self._instance_matrix(instances))
        match ReferenceStrategy(strategy):
            case ReferenceStrategy.MIN:
                return np.tile(self.minimum, (n, 1)), np.zeros(n, dtype=bool)
            case ReferenceStrategy.MEAN:
                return np.tile(self.mean, (n, 1)), np.zeros(n, dtype=bool)
        return self.informed(instances)

    def build(
        self,
        strategy: ReferenceStrategy,
        instance: ScadaRecord | np.ndarray | None = None,
    ) -> ReferencePoint:
        """Reference point for one instance.

        Raises
        ------
            ConfigurationError: If the informed strategy gets no instance.

        """
        strategy = ReferenceStrategy(strategy)
        if strategy == ReferenceStrategy.INFORMED:
            if instance is None:
                raise ConfigurationError("The informed reference needs an instance")
            rows = instance if isinstance(instance, np.ndarray) else [instance]
            refs, fallback = self.informed(rows)
            return ReferencePoint(
                strategy=strategy,
                names=self.names,
                values=tuple(float(value) for value in refs[0]),
                fallback=bool(fallback[0]),
                tables=tuple(self.tables.values()),
            )
        values = self.minimum if strategy == ReferenceStrategy.MIN else self.mean
        return ReferencePoint(
            strategy=strategy,
            names=self.names,
            values=tuple(float(value) for value in values),
        )


def build_reference(
    strategy: ReferenceStrategy,
    train: Sequence[ScadaRecord],
    names: Sequence[str],
    instance: ScadaRecord | np.ndarray | None = None,
) -> ReferencePoint:
    """Build one reference point from training data.

    Args:
    ----
        strategy (ReferenceStrategy): ``min``, ``mean`` or ``informed``.
        train (Sequence[ScadaRecord]): Training records.
        names (Sequence[str]): Feature order of the explained model.
        instance (ScadaRecord | np.ndarray | None, optional): The explained
            instance; required for the informed strategy.

    Returns:
    -------
        ReferencePoint: Reference values in physical units.

    """
    return ReferenceBuilder(train, names).build(strategy, instance)

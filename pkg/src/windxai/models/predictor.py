"""Feature schemas and the prediction contract shared by all models."""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Protocol, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from windxai.data.records import (
    FEATURE_NAMES,
    ScadaRecord,
    feature_matrix,
    target_vector,
)
from windxai.errors import DataError


class FeatureSchema(BaseModel):

    """Ordered model inputs with optional z-score standardization.

    The order is fixed for a model's lifetime; every feature matrix passed
    to a model must have its columns in ``names`` order.
    """

    model_config = ConfigDict(frozen=True)

    names: tuple[str, ...]
    means: tuple[float, ...] | None = None
    stds: tuple[float, ...] | None = None

    @model_validator(mode="after")
    def _check(self) -> FeatureSchema:
        if not self.names:
            raise ValueError("A schema needs at least one feature")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"Duplicate features in {self.names}")
        unknown = [name for name in self.names if name not in FEATURE_NAMES]
        if unknown:
            raise ValueError(f"Unknown features {unknown}")
        if (self.means is None) != (self.stds is None):
            raise ValueError("Means and stds must be given together")
        if self.means is not None and self.stds is not None:
            if len(self.means) != len(self.names) or len(self.stds) != len(
                self.names,
            ):
                raise ValueError("Standardization does not match the features")
            if any(not std > 0 for std in self.stds):
                raise ValueError("Standard deviations must be positive")
        return self

    @property
    def n_features(self) -> int:
        return len(self.names)

    @property
    def is_standardized(self) -> bool:
        return self.means is not None

    def index(self, name: str) -> int:
        return self.names.index(name)

    def matrix(self, records: Sequence[ScadaRecord]) -> np.ndarray:
        return feature_matrix(records, self.names)

    def check(self, inputs: np.ndarray) -> np.ndarray:
        """Return ``inputs`` as a 2-D float array, validating its width.

        Raises
        ------
            DataError: If the number of columns differs from the schema.

        """
        array = np.asarray(inputs, dtype=np.float64)
        if array.ndim == 1:
            array = array.reshape(1, -1)
        if array.ndim != 2 or array.shape[1] != self.n_features:
            raise DataError(
                f"schema mismatch: expected {self.n_features} features "
                f"{self.names}, got array of shape {array.shape}",
            )
        return array

    def transform(self, inputs: np.ndarray) -> np.ndarray:
        array = self.check(inputs)
        if self.means is None or self.stds is None:
            return array
        return (array - np.asarray(self.means)) / np.asarray(self.stds)

    def inverse_transform(self, scaled: np.ndarray) -> np.ndarray:
        array = self.check(scaled)
        if self.means is None or self.stds is None:
            return array
        return array * np.asarray(self.stds) + np.asarray(self.means)


@runtime_checkable
class Predictor(Protocol):

    """Anything mapping a feature matrix (schema order) to power in kW."""

    kind: str

    @property
    def feature_schema(self) -> FeatureSchema: ...

    def predict(self, inputs: np.ndarray) -> np.ndarray: ...


def fit_scaler(
    train: Sequence[ScadaRecord] | np.ndarray,
    schema: FeatureSchema,
) -> FeatureSchema:
    """Fit per-feature standardization on training rows only.

    Uses the population convention (``ddof=0``) for the standard deviation.

    Args:
    ----
        train (Sequence[ScadaRecord] | np.ndarray): Training records, or a
            feature matrix already in schema order.
        schema (FeatureSchema): Feature names to standardize.

    Raises:
    ------
        DataError: If ``train`` is empty or a feature is constant.

    Returns:
    -------
        FeatureSchema: A copy of ``schema`` carrying means and stds.

    """
    inputs = train if isinstance(train, np.ndarray) else schema.matrix(train)
    inputs = schema.check(inputs)
    if inputs.shape[0] == 0:
        raise DataError("Cannot fit a scaler on an empty training set")
    means = inputs.mean(axis=0)
    stds = inputs.std(axis=0)
    constant = [name for name, std in zip(schema.names, stds) if not std > 0]
    if constant:
        raise DataError(f"Zero-variance features cannot be standardized: {constant}")
    return FeatureSchema(
        names=schema.names,
        means=tuple(float(value) for value in means),
        stds=tuple(float(value) for value in stds),
    )


def evaluate_rmse(predictor: Predictor, dataset: Sequence[ScadaRecord]) -> float:
    """Root mean squared error of ``predictor`` on ``dataset`` in kW."""
    if len(dataset) == 0:
        raise DataError("Cannot evaluate on an empty dataset")
    predictions = predictor.predict(predictor.feature_schema.matrix(dataset))
    errors = (predictions - target_vector(dataset)) ** 2
    return math.sqrt(math.fsum(errors) / len(errors))

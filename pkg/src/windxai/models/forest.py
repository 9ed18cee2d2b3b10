"""Bootstrap-aggregated CART regression trees."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from tqdm import tqdm

from windxai.data.records import BASE_FEATURES, ScadaRecord, target_vector
from windxai.errors import DataError
from windxai.models.predictor import FeatureSchema
from windxai.settings import thread_count

logger = logging.getLogger(__name__)

LEAF = -1


class ForestConfig(BaseModel):

    """Random forest hyperparameters."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["forest"] = "forest"
    n_estimators: int = Field(default=100, ge=1)
    min_samples_split: int = Field(default=3, ge=2)
    min_samples_leaf: int = Field(default=30, ge=1)
    features: tuple[str, ...] = BASE_FEATURES

    @model_validator(mode="after")
    def _check(self) -> ForestConfig:
        FeatureSchema(names=self.features)
        return self


RF = ForestConfig()


class RegressionTree(BaseModel):

    """A binary regression tree stored as flat node arrays.

    Node 0 is the root. Internal nodes send rows with
    ``x[feature] <= threshold`` to ``left``; leaves have ``feature == -1``.
    """

    model_config = ConfigDict(frozen=True)

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]
    n_samples: list[int]

    _feature: np.ndarray = PrivateAttr()
    _threshold: np.ndarray = PrivateAttr()
    _left: np.ndarray = PrivateAttr()
    _right: np.ndarray = PrivateAttr()
    _value: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def _check_nodes(self) -> RegressionTree:
        n = len(self.feature)
        if n == 0:
            raise ValueError("A tree needs at least one node")
        lengths = {
            len(self.threshold),
            len(self.left),
            len(self.right),
            len(self.value),
            len(self.n_samples),
        }
        if lengths != {n}:
            raise ValueError("Node arrays differ in length")
        for node, feature in enumerate(self.feature):
            if feature == LEAF:
                continue
            if not (node < self.left[node] < n and node < self.right[node] < n):
                raise ValueError(f"Node {node} has invalid children")
        return self

    def model_post_init(self, __context: object) -> None:
        self._feature = np.asarray(self.feature, dtype=np.int64)
        self._threshold = np.asarray(self.threshold, dtype=np.float64)
        self._left = np.asarray(self.left, dtype=np.int64)
        self._right = np.asarray(self.right, dtype=np.int64)
        self._value = np.asarray(self.value, dtype=np.float64)

    @property
    def n_leaves(self) -> int:
        return sum(1 for feature in self.feature if feature == LEAF)

    @property
    def leaf_sizes(self) -> list[int]:
        return [
            count
            for feature, count in zip(self.feature, self.n_samples)
            if feature == LEAF
        ]

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        node = np.zeros(inputs.shape[0], dtype=np.int64)
        while True:
            feature = self._feature[node]
            rows = np.flatnonzero(feature != LEAF)
            if rows.size == 0:
                return self._value[node]
            current = node[rows]
            go_left = inputs[rows, feature[rows]] <= self._threshold[current]
            node[rows] = np.where(go_left, self._left[current], self._right[current])


def _best_split(
    inputs: np.ndarray,
    y: np.ndarray,
    min_leaf: int,
) -> tuple[int, float] | None:
    """Variance-reducing split over all features, or ``None``.

    Maximizing ``S_L^2 / n_L + S_R^2 / n_R`` is equivalent to minimizing
    the summed squared error of both children.
    """
    n = len(y)
    total = float(y.sum())
    parent = total**2 / n
    best_score = parent + 1e-12 * max(1.0, abs(parent))
    best: tuple[int, float] | None = None
    sizes = np.arange(1, n)

    for feature in range(inputs.shape[1]):
        order = np.argsort(inputs[:, feature], kind="stable")
        xs = inputs[order, feature]
        left_sum = np.cumsum(y[order])[:-1]
        valid = (sizes >= min_leaf) & (n - sizes >= min_leaf) & (xs[1:] > xs[:-1])
        if not valid.any():
            continue
        score = np.where(
            valid,
            left_sum**2 / sizes + (total - left_sum) ** 2 / (n - sizes),
            -np.inf,
        )
        position = int(np.argmax(score))
        if score[position] > best_score:
            best_score = float(score[position])
            threshold = 0.5 * (xs[position] + xs[position + 1])
            # The midpoint can round onto the upper value
            if threshold >= xs[position + 1]:
                threshold = float(xs[position])
            best = (feature, float(threshold))
    return best


def grow_tree(
    inputs: np.ndarray,
    y: np.ndarray,
    min_samples_split: int,
    min_samples_leaf: int,
) -> RegressionTree:
    """Grow one CART tree greedily until no admissible split remains."""
    feature: list[int] = [LEAF]
    threshold: list[float] = [0.0]
    left: list[int] = [LEAF]
    right: list[int] = [LEAF]
    value: list[float] = [0.0]
    n_samples: list[int] = [0]

    stack = [(0, np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        targets = y[rows]
        value[node] = float(targets.mean())
        n_samples[node] = len(rows)
        if (
            len(rows) < min_samples_split
            or len(rows) < 2 * min_samples_leaf
            or np.ptp(targets) == 0
        ):
            continue
        split = _best_split(inputs[rows], targets, min_samples_leaf)
        if split is None:
            continue

        feature[node], threshold[node] = split
        goes_left = inputs[rows, split[0]] <= split[1]
        branches = ((left, rows[goes_left]), (right, rows[~goes_left]))
        for children, child_rows in branches:
            child = len(feature)
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(0.0)
            n_samples.append(0)
            children[node] = child
            stack.append((child, child_rows))

    return RegressionTree(
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        n_samples=n_samples,
    )


class ForestModel(BaseModel):

    """Trained forest satisfying the :class:`Predictor` contract."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["forest"] = "forest"
    feature_schema: FeatureSchema
    trees: list[RegressionTree] = Field(min_length=1)
    seeds: list[int] = Field(default_factory=list)
    min_samples_leaf: int = Field(default=1, ge=1)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return rf_predict(self, inputs)


def rf_train(
    config: ForestConfig,
    train: Sequence[ScadaRecord],
    seed: int = 0,
) -> ForestModel:
    """Train a random forest on bootstrap resamples of ``train``.

    Every tree draws its own resample from a stream derived from
    ``(seed, tree index)``, so the result does not depend on how trees are
    scheduled over threads.

    Args:
    ----
        config (ForestConfig): Forest hyperparameters.
        train (Sequence[ScadaRecord]): Training records.
        seed (int, optional): Base seed. Defaults to 0.

    Raises:
    ------
        DataError: If there are fewer rows than ``min_samples_split``.

    Returns:
    -------
        ForestModel: The trained forest.

    """
    if len(train) < config.min_samples_split:
        raise DataError(
            f"Need at least {config.min_samples_split} training rows, "
            f"got {len(train)}",
        )
    schema = FeatureSchema(names=config.features)
    inputs = schema.matrix(train)
    y = target_vector(train)
    n = len(y)

    tree_seeds = [
        int(value)
        for value in np.random.SeedSequence(seed).generate_state(config.n_estimators)
    ]

    def fit_one(tree_seed: int) -> RegressionTree:
        rows = np.random.default_rng(tree_seed).integers(0, n, n)
        return grow_tree(
            inputs[rows],
            y[rows],
            config.min_samples_split,
            config.min_samples_leaf,
        )

    workers = max(1, min(thread_count(), config.n_estimators))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        trees = list(
            tqdm(
                executor.map(fit_one, tree_seeds),
                total=config.n_estimators,
                desc="Trees",
                disable=None,
                leave=False,
            ),
        )

    logger.info(
        "Trained forest of %d trees on %d rows (%d leaves on average)",
        len(trees),
        n,
        round(sum(tree.n_leaves for tree in trees) / len(trees)),
    )
    return ForestModel(
        feature_schema=schema,
        trees=trees,
        seeds=tree_seeds,
        min_samples_leaf=config.min_samples_leaf,
    )


def rf_predict(model: ForestModel, inputs: np.ndarray) -> np.ndarray:
    """Mean of the tree predictions in kW.

    Raises
    ------
        DataError: If ``inputs`` does not match the model's feature schema.

    """
    array = model.feature_schema.check(inputs)
    return np.mean([tree.predict(array) for tree in model.trees], axis=0)

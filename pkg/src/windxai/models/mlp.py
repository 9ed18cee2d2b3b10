"""Multilayer perceptron regressor trained with Adam and early stopping."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from enum import StrEnum
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from scipy.special import expit

from windxai.data.records import BASE_FEATURES, ScadaRecord, target_vector
from windxai.errors import ConfigurationError, DataError, NumericalError
from windxai.models.predictor import FeatureSchema, fit_scaler

logger = logging.getLogger(__name__)

Params = tuple[list[np.ndarray], list[np.ndarray]]


class Activation(StrEnum):
    IDENTITY = "identity"
    LOGISTIC = "logistic"
    RELU = "relu"


class MlpConfig(BaseModel):

    """Architecture and optimizer settings of a multilayer perceptron."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["mlp"] = "mlp"
    hidden_layer_sizes: tuple[int, ...] = (3, 3)
    activation: Activation = Activation.LOGISTIC
    features: tuple[str, ...] = BASE_FEATURES
    learning_rate_init: float = Field(default=0.1, gt=0)
    beta_1: float = Field(default=0.9, ge=0, lt=1)
    beta_2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    # Adaptive schedule on the training loss
    tol: float = Field(default=1e-6, ge=0)
    n_iter_no_change: int = Field(default=2, ge=1)
    learning_rate_divisor: float = Field(default=5.0, gt=1)
    min_learning_rate: float = Field(default=1e-6, gt=0)
    # Early stopping on the validation loss
    patience: int = Field(default=100, ge=1)
    max_epochs: int = Field(default=10000, ge=1)
    full_batch_limit: int = Field(default=5000, ge=1)
    batch_size: int = Field(default=200, ge=1)

    @model_validator(mode="after")
    def _check(self) -> MlpConfig:
        if any(size < 1 for size in self.hidden_layer_sizes):
            raise ValueError("Hidden layers need at least one unit")
        FeatureSchema(names=self.features)
        return self


ANN_SMALL = MlpConfig(hidden_layer_sizes=(3, 3), activation=Activation.LOGISTIC)
ANN_LARGE = MlpConfig(hidden_layer_sizes=(100, 100, 25), activation=Activation.RELU)


class TrainingHistory(BaseModel):

    """Per-epoch losses in standardized target units."""

    model_config = ConfigDict(frozen=True)

    train_loss: list[float] = Field(default_factory=list)
    val_loss: list[float] = Field(default_factory=list)
    learning_rate: list[float] = Field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float | None = None

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


def _activate(activation: Activation, z: np.ndarray) -> np.ndarray:
    match activation:
        case Activation.LOGISTIC:
            return expit(z)
        case Activation.RELU:
            return np.maximum(z, 0.0)
    return z


def _activation_derivative(
    activation: Activation,
    z: np.ndarray,
    a: np.ndarray,
) -> np.ndarray:
    match activation:
        case Activation.LOGISTIC:
            return a * (1.0 - a)
        case Activation.RELU:
            return (z > 0).astype(np.float64)
    return np.ones_like(z)


def _forward(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    activation: Activation,
    scaled: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Return pre-activations and activations of every layer.

    ``activations[0]`` is the input; the output layer is linear.
    """
    pre: list[np.ndarray] = []
    activations = [scaled]
    last = len(weights) - 1
    for index, (w, b) in enumerate(zip(weights, biases)):
        z = activations[-1] @ w + b
        pre.append(z)
        activations.append(z if index == last else _activate(activation, z))
    return pre, activations


def _backprop(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    activation: Activation,
    scaled: np.ndarray,
    y: np.ndarray,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean squared error and its gradient with respect to every parameter."""
    pre, activations = _forward(weights, biases, activation, scaled)
    residual = activations[-1][:, 0] - y
    loss = float(np.mean(residual**2))

    weight_grads: list[np.ndarray] = [np.empty(0)] * len(weights)
    bias_grads: list[np.ndarray] = [np.empty(0)] * len(biases)
    delta = (2.0 / len(y)) * residual[:, None]
    for index in range(len(weights) - 1, -1, -1):
        weight_grads[index] = activations[index].T @ delta
        bias_grads[index] = delta.sum(axis=0)
        if index > 0:
            delta = (delta @ weights[index].T) * _activation_derivative(
                activation,
                pre[index - 1],
                activations[index],
            )
    return loss, weight_grads, bias_grads


class MlpModel(BaseModel):

    """Trained perceptron satisfying the :class:`Predictor` contract.

    Parameters act on standardized inputs and produce a standardized
    target; :meth:`predict` maps back to kW.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["mlp"] = "mlp"
    activation: Activation
    feature_schema: FeatureSchema
    weights: list[list[list[float]]]
    biases: list[list[float]]
    target_mean: float
    target_std: float = Field(gt=0)
    history: TrainingHistory = Field(default_factory=TrainingHistory)

    _weights: list[np.ndarray] = PrivateAttr()
    _biases: list[np.ndarray] = PrivateAttr()

    @model_validator(mode="after")
    def _check_layers(self) -> MlpModel:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("Need one bias vector per weight matrix")
        fan_in = self.feature_schema.n_features
        for w, b in zip(self.weights, self.biases):
            matrix = np.asarray(w, dtype=np.float64)
            if matrix.ndim != 2 or matrix.shape[0] != fan_in:
                raise ValueError("Layer dimensions do not chain")
            if len(b) != matrix.shape[1]:
                raise ValueError("Bias length does not match its layer")
            if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(b))):
                raise ValueError("Parameters must be finite")
            fan_in = matrix.shape[1]
        if fan_in != 1:
            raise ValueError("The output layer must have a single unit")
        return self

    def model_post_init(self, __context: object) -> None:
        self._weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self._biases = [np.asarray(b, dtype=np.float64) for b in self.biases]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (
            self.feature_schema.n_features,
            *(len(b) for b in self.biases),
        )

    @property
    def parameters(self) -> Params:
        return [w.copy() for w in self._weights], [b.copy() for b in self._biases]

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return mlp_predict(self, inputs)

    def preactivations(self, inputs: np.ndarray) -> list[np.ndarray]:
        """Hidden-layer pre-activations for rows of ``inputs`` (physical units)."""
        scaled = self.feature_schema.transform(inputs)
        pre, _ = _forward(self._weights, self._biases, self.activation, scaled)
        return pre[:-1]


def _init_parameters(
    sizes: Sequence[int],
    activation: Activation,
    rng: np.random.Generator,
) -> Params:
    # Uniform Glorot initialization
    factor = 2.0 if activation == Activation.LOGISTIC else 6.0
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(factor / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return weights, biases


class _Adam:
    def __init__(self, params: list[np.ndarray], config: MlpConfig) -> None:
        self.config = config
        self.learning_rate = config.learning_rate_init
        self.step = 0
        self.first = [np.zeros_like(param) for param in params]
        self.second = [np.zeros_like(param) for param in params]

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        beta_1, beta_2 = self.config.beta_1, self.config.beta_2
        self.step += 1
        rate = (
            self.learning_rate
            * math.sqrt(1.0 - beta_2**self.step)
            / (1.0 - beta_1**self.step)
        )
        for param, grad, first, second in zip(
            params,
            grads,
            self.first,
            self.second,
        ):
            first *= beta_1
            first += (1.0 - beta_1) * grad
            second *= beta_2
            second += (1.0 - beta_2) * grad**2
            param -= rate * first / (np.sqrt(second) + self.config.epsilon)


def _batches(
    n: int,
    config: MlpConfig,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    if n <= config.full_batch_limit:
        return [np.arange(n)]
    order = rng.permutation(n)
    return [order[i : i + config.batch_size] for i in range(0, n, config.batch_size)]


def mlp_train(
    config: MlpConfig,
    train: Sequence[ScadaRecord],
    val: Sequence[ScadaRecord],
    seed: int = 0,
) -> MlpModel:
    """Train a perceptron on ``train``, early-stopping on ``val``.

    Args:
    ----
        config (MlpConfig): Architecture and optimizer settings.
        train (Sequence[ScadaRecord]): Training records; also used to fit
            the feature and target standardization.
        val (Sequence[ScadaRecord]): Validation records for early stopping.
        seed (int, optional): Seed of initialization and batch order.
            Defaults to 0.

    Raises:
    ------
        DataError: If either set is empty or the target is constant.
        NumericalError: If a loss becomes non-finite.

    Returns:
    -------
        MlpModel: Parameters of the epoch with the lowest validation loss.

    """
    if not train or not val:
        raise DataError("Training and validation sets must be non-empty")
    schema = fit_scaler(train, FeatureSchema(names=config.features))
    y_train = target_vector(train)
    target_mean = float(y_train.mean())
    target_std = float(y_train.std())
    if not target_std > 0:
        raise DataError("Cannot train on a constant target")

    scaled_train = schema.transform(schema.matrix(train))
    scaled_val = schema.transform(schema.matrix(val))
    t_train = (y_train - target_mean) / target_std
    t_val = (target_vector(val) - target_mean) / target_std

    rng = np.random.default_rng(seed)
    sizes = (schema.n_features, *config.hidden_layer_sizes, 1)
    weights, biases = _init_parameters(sizes, config.activation, rng)
    params = weights + biases
    optimizer = _Adam(params, config)

    train_losses: list[float] = []
    val_losses: list[float] = []
    learning_rates: list[float] = []
    best_params = [param.copy() for param in params]
    best_epoch = 0
    best_val = math.inf
    best_train = math.inf
    stale_train = 0
    stale_val = 0

    for epoch in range(1, config.max_epochs + 1):
        accumulated = 0.0
        for batch in _batches(len(t_train), config, rng):
            loss, weight_grads, bias_grads = _backprop(
                weights,
                biases,
                config.activation,
                scaled_train[batch],
                t_train[batch],
            )
            accumulated += loss * len(batch)
            optimizer.update(params, weight_grads + bias_grads)
        train_loss = accumulated / len(t_train)
        val_prediction = _forward(weights, biases, config.activation, scaled_val)[1][-1]
        val_loss = float(np.mean((val_prediction[:, 0] - t_val) ** 2))
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise NumericalError(
                f"Training diverged at epoch {epoch} "
                f"(train loss {train_loss}, val loss {val_loss}, "
                f"learning rate {optimizer.learning_rate})",
            )
        train_losses.append(train_loss)
        val_losses.append(val_loss)
        learning_rates.append(optimizer.learning_rate)

        # Early stopping keeps the best validation parameters
        stale_val = 0 if val_loss < best_val - config.tol else stale_val + 1
        if val_loss < best_val:
            best_val, best_epoch = val_loss, epoch
            best_params = [param.copy() for param in params]
        if stale_val >= config.patience:
            logger.debug("Early stopping at epoch %d", epoch)
            break

        # Adaptive learning rate
        stale_train = stale_train + 1 if train_loss > best_train - config.tol else 0
        best_train = min(best_train, train_loss)
        if stale_train >= config.n_iter_no_change:
            optimizer.learning_rate /= config.learning_rate_divisor
            stale_train = 0
            if optimizer.learning_rate < config.min_learning_rate:
                logger.debug("Learning rate exhausted at epoch %d", epoch)
                break
    else:
        logger.warning(
            "MLP %s reached %d epochs without stopping",
            config.hidden_layer_sizes,
            config.max_epochs,
        )

    history = TrainingHistory(
        train_loss=train_losses,
        val_loss=val_losses,
        learning_rate=learning_rates,
        best_epoch=best_epoch,
        best_val_loss=best_val,
    )
    n_layers = len(weights)
    logger.info(
        "Trained MLP %s (%s) for %d epochs, best val loss %.3g at epoch %d",
        config.hidden_layer_sizes,
        config.activation,
        history.epochs,
        history.best_val_loss,
        history.best_epoch,
    )
    return MlpModel(
        activation=config.activation,
        feature_schema=schema,
        weights=[w.tolist() for w in best_params[:n_layers]],
        biases=[b.tolist() for b in best_params[n_layers:]],
        target_mean=target_mean,
        target_std=target_std,
        history=history,
    )


def mlp_predict(model: MlpModel, inputs: np.ndarray) -> np.ndarray:
    """Predict power in kW for rows of ``inputs`` in schema order.

    Raises
    ------
        DataError: If ``inputs`` does not match the model's feature schema.

    """
    scaled = model.feature_schema.transform(inputs)
    output = _forward(model._weights, model._biases, model.activation, scaled)[1][-1]
    return output[:, 0] * model.target_std + model.target_mean


def mlp_gradient_check(
    model: MlpModel,
    x: np.ndarray,
    h: float = 1e-5,
    target: float | None = None,
) -> float:
    """Compare backpropagated gradients with central finite differences.

    The loss is the squared error of the standardized output at ``x``
    against ``target`` (kW); without a target a standardized value of 1 is
    used.

    Args:
    ----
        model (MlpModel): Network whose parameters are checked.
        x (np.ndarray): One feature vector, or rows of them, in physical units.
        h (float, optional): Finite-difference step. Defaults to 1e-5.
        target (float | None, optional): Target power in kW.

    Raises:
    ------
        ConfigurationError: If ``h`` is not positive.

    Returns:
    -------
        float: Maximum relative discrepancy over all parameters.

    """
    if not h > 0:
        raise ConfigurationError(f"Step h must be positive, got {h}")
    scaled = model.feature_schema.transform(x)
    t = np.full(
        scaled.shape[0],
        1.0 if target is None else (target - model.target_mean) / model.target_std,
    )
    weights, biases = model.parameters
    _, weight_grads, bias_grads = _backprop(
        weights,
        biases,
        model.activation,
        scaled,
        t,
    )

    def loss() -> float:
        output = _forward(weights, biases, model.activation, scaled)[1][-1]
        return float(np.mean((output[:, 0] - t) ** 2))

    worst = 0.0
    for param, grad in zip(weights + biases, weight_grads + bias_grads):
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + h
            upper = loss()
            param[index] = original - h
            lower = loss()
            param[index] = original
            numeric = (upper - lower) / (2.0 * h)
            analytic = float(grad[index])
            scale = max(abs(numeric), abs(analytic), 1e-4)
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst


def loss_history_frame(model: MlpModel) -> pd.DataFrame:
    """Tabulate the loss history as ``epoch,train_loss,val_loss``."""
    history = model.history
    return pd.DataFrame(
        {
            "epoch": np.arange(1, history.epochs + 1),
            "train_loss": history.train_loss,
            "val_loss": history.val_loss,
        },
    )

"""Model specifications, named presets and training dispatch."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Annotated

from pydantic import Field, TypeAdapter

from windxai.data.records import ScadaRecord
from windxai.errors import ConfigurationError
from windxai.models.forest import RF, ForestConfig, ForestModel, rf_train
from windxai.models.mlp import ANN_LARGE, ANN_SMALL, MlpConfig, MlpModel, mlp_train
from windxai.physics.iec import IecConfig, IecModel, fit_iec_model

ModelSpec = Annotated[
    IecConfig | MlpConfig | ForestConfig,
    Field(discriminator="kind"),
]
TrainedModel = IecModel | MlpModel | ForestModel

MODEL_SPEC_ADAPTER: TypeAdapter[ModelSpec] = TypeAdapter(ModelSpec)

PRESETS: dict[str, ModelSpec] = {
    "iec": IecConfig(),
    "rf": RF,
    "ann_small": ANN_SMALL,
    "ann_large": ANN_LARGE,
}


def resolve_preset(name: str, features: Sequence[str] | None = None) -> ModelSpec:
    """Look up a preset by name, optionally with another feature set.

    The IEC baseline always uses (v_w, rho, ti) and ignores ``features``.

    Raises
    ------
        ConfigurationError: If ``name`` is not a known preset.

    """
    try:
        spec = PRESETS[name.lower()]
    except KeyError:
        raise ConfigurationError(
            f"Unknown model '{name}', choose from {', '.join(PRESETS)}",
        ) from None
    if features is None or isinstance(spec, IecConfig):
        return spec
    return type(spec).model_validate(
        {**spec.model_dump(), "features": tuple(features)},
    )


def train_model(
    spec: ModelSpec,
    train: Sequence[ScadaRecord],
    val: Sequence[ScadaRecord],
    seed: int = 0,
) -> TrainedModel:
    """Train the model described by ``spec``.

    The IEC fit is deterministic and ignores ``seed``; the forest does not
    use the validation set.
    """
    match spec:
        case IecConfig():
            return fit_iec_model(train, spec)
        case MlpConfig():
            return mlp_train(spec, train, val, seed)
        case ForestConfig():
            return rf_train(spec, train, seed)
    raise ConfigurationError(f"Unsupported model specification {spec!r}")

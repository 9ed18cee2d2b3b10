"""Versioned JSON model files."""

from __future__ import annotations

import logging
import os
import tempfile
from pathlib import Path
from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from windxai.errors import DataError, SchemaVersionError
from windxai.models.forest import ForestModel
from windxai.models.mlp import MlpModel
from windxai.physics.iec import IecModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class _VersionProbe(BaseModel):
    model_config = ConfigDict(extra="ignore")

    format_version: int


class ModelDocument(BaseModel):

    """On-disk envelope of a trained model."""

    format_version: int = FORMAT_VERSION
    model: Annotated[
        IecModel | MlpModel | ForestModel,
        Field(discriminator="kind"),
    ]


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(temporary, path)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise


def save_model(model: IecModel | MlpModel | ForestModel, path: Path | str) -> Path:
    path = Path(path)
    document = ModelDocument(model=model)
    write_atomic(path, document.model_dump_json(indent=1))
    logger.info("Saved %s model to %s", model.kind, path)
    return path


def load_model(path: Path | str) -> IecModel | MlpModel | ForestModel:
    """Load a model file written by :func:`save_model`.

    Raises
    ------
        SchemaVersionError: If the file uses an unsupported format version.
        DataError: If the file is missing or corrupt.

    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Model file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        version = _VersionProbe.model_validate_json(text).format_version
    except ValidationError as e:
        raise DataError(f"Corrupt model file {path}: {e}") from e
    if version != FORMAT_VERSION:
        raise SchemaVersionError(
            f"Model file {path} has format version {version}, "
            f"this build reads version {FORMAT_VERSION}",
        )
    try:
        document = ModelDocument.model_validate_json(text)
    except ValidationError as e:
        raise DataError(f"Corrupt model file {path}: {e}") from e
    return document.model

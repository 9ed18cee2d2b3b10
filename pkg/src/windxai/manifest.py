"""Reproducibility manifest written at the end of every run."""

from __future__ import annotations

import hashlib
import logging
import time
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from windxai import __version__
from windxai.models.persistence import write_atomic

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_digest(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class OutputFile(BaseModel):
    path: str
    sha256: str


class ExperimentManifest(BaseModel):

    """Toolkit version, resolved configuration, input and output digests."""

    toolkit_version: str = __version__
    command: str
    config: dict[str, Any] = Field(default_factory=dict)
    input_digest: str | None = None
    outputs: list[OutputFile] = Field(default_factory=list)
    timings: dict[str, float] = Field(default_factory=dict)


class ManifestRecorder:

    """Collects outputs and timings while a command runs."""

    def __init__(self, command: str, config: dict[str, Any], root: Path) -> None:
        self.command = command
        self.config = config
        self.root = root
        self.input_digest: str | None = None
        self.outputs: dict[str, Path] = {}
        self.timings: dict[str, float] = {}
        self._started = time.perf_counter()

    def add(self, path: Path) -> Path:
        try:
            key = path.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            key = path.as_posix()
        self.outputs[key] = path
        return path

    def time(self, step: str, started: float) -> None:
        self.timings[step] = round(time.perf_counter() - started, 6)

    def write(self, path: Path) -> ExperimentManifest:
        """Write the manifest atomically, digesting every recorded output."""
        self.timings["total"] = round(time.perf_counter() - self._started, 6)
        manifest = ExperimentManifest(
            command=self.command,
            config=self.config,
            input_digest=self.input_digest,
            outputs=[
                OutputFile(path=key, sha256=file_digest(self.outputs[key]))
                for key in sorted(self.outputs)
            ],
            timings=self.timings,
        )
        write_atomic(path, manifest.model_dump_json(indent=2) + "\n")
        logger.info("Wrote manifest with %d outputs to %s", len(manifest.outputs), path)
        return manifest

import json
from pathlib import Path

import pytest

from windxai.attribution.reference import ReferenceStrategy
from windxai.config import load_run_config, parse_names
from windxai.errors import ConfigurationError


def _write(path: Path, document: object) -> Path:
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_flags_override_file(tmp_path: Path) -> None:
    path = _write(
        tmp_path / "run.json",
        {
            "command": "evaluate",
            "data": {"synth": {"n_samples": 500, "seed": 4}},
            "output_dir": "out",
            "seed": 2,
            "n_seeds": 3,
            "split": {"val_fraction": 0.3},
        },
    )

    config = load_run_config(
        path,
        {"n_seeds": 2, "data": {"synth": {"seed": 9}}, "split": {"train_start": None}},
    )

    assert config.data.synth is not None
    assert config.data.synth.n_samples == 500
    assert config.data.synth.seed == 9
    assert config.split.val_fraction == 0.3
    assert config.resolved_seeds == [2, 3]
    assert config.reference == ReferenceStrategy.INFORMED


def test_csv_flag_replaces_synthetic_source(tmp_path: Path) -> None:
    path = _write(
        tmp_path / "run.json",
        {"command": "train", "data": {"synth": {}}, "output_dir": "out"},
    )

    config = load_run_config(path, {"data": {"csv": tmp_path / "scada.csv"}})

    assert config.data.synth is None
    assert config.data.csv == tmp_path / "scada.csv"


def test_explicit_seeds() -> None:
    config = load_run_config(
        None,
        {
            "command": "evaluate",
            "data": {"synth": {}},
            "output_dir": "out",
            "seeds": [5, 7],
        },
    )

    assert config.resolved_seeds == [5, 7]


@pytest.mark.parametrize(
    "overrides",
    [
        {"command": "train", "output_dir": "out"},
        {"command": "train", "data": {"synth": {}}, "output_dir": "o", "seed": "x"},
        {
            "command": "train",
            "data": {"synth": {}},
            "output_dir": "o",
            "split": {"train_start": "2021-01-01T00:00:00"},
        },
        {"command": "train", "data": {"synth": {}}, "output_dir": "o", "typo": 1},
    ],
    ids=["no-data", "bad-seed", "partial-split", "unknown-key"],
)
def test_invalid_configurations(overrides: dict) -> None:
    with pytest.raises(ConfigurationError, match="Invalid configuration"):
        load_run_config(None, overrides)


def test_unreadable_file(tmp_path: Path) -> None:
    (tmp_path / "broken.json").write_text("{", encoding="utf-8")
    _write(tmp_path / "list.json", [1, 2])

    with pytest.raises(ConfigurationError, match="Cannot read"):
        load_run_config(tmp_path / "broken.json", {})
    with pytest.raises(ConfigurationError, match="JSON object"):
        load_run_config(tmp_path / "list.json", {})
    with pytest.raises(ConfigurationError):
        load_run_config(tmp_path / "absent.json", {})


def test_parse_names() -> None:
    assert parse_names("v_w, rho,,ti") == ("v_w", "rho", "ti")
    assert parse_names(None) is None

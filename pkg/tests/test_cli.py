import json
from pathlib import Path

import pandas as pd
import pytest

from windxai.cli import run_cli
from windxai.manifest import file_digest

SMALL_RUN = ["--synth-n", "800", "--n-seeds", "1"]


@pytest.fixture(scope="module")
def scada_csv(tmp_path_factory: pytest.TempPathFactory) -> Path:
    path = tmp_path_factory.mktemp("data") / "scada.csv"
    assert run_cli(["synth", "-n", "800", "--seed", "5", "-o", str(path)]) == 0
    return path


def test_synth_writes_data_and_manifest(scada_csv: Path) -> None:
    frame = pd.read_csv(scada_csv)
    manifest = json.loads(
        scada_csv.with_name("scada.csv.manifest.json").read_text(encoding="utf-8"),
    )

    assert len(frame) == 800
    assert {"timestamp", "v_w", "rho", "ti", "power"} <= set(frame.columns)
    assert manifest["command"] == "synth"
    assert manifest["config"]["seed"] == 5
    assert manifest["outputs"][0]["sha256"] == file_digest(scada_csv)


def test_evaluate(scada_csv: Path, tmp_path: Path) -> None:
    code = run_cli(
        [
            "evaluate",
            "--data",
            str(scada_csv),
            "--models",
            "iec,rf",
            "--n-seeds",
            "1",
            "-o",
            str(tmp_path),
        ],
    )

    assert code == 0
    rmse = pd.read_csv(tmp_path / "rmse.csv")
    assert list(rmse["model"]) == ["iec", "rf"]
    assert (rmse["rmse_test"] > 0).all()
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["input_digest"] == file_digest(scada_csv)
    assert {item["path"] for item in manifest["outputs"]} == {
        "rmse.csv",
        "experiment.json",
    }


def test_train_then_evaluate_saved_models(tmp_path: Path) -> None:
    trained = tmp_path / "trained"
    assert (
        run_cli(
            ["train", *SMALL_RUN, "--models", "iec,ann_small", "-o", str(trained)],
        )
        == 0
    )
    models = trained / "models"
    assert (models / "iec.json").exists()
    assert (models / "ann_small_seed0.json").exists()
    loss = pd.read_csv(models / "ann_small_seed0_loss.csv")
    assert list(loss.columns) == ["epoch", "train_loss", "val_loss"]

    scored = tmp_path / "scored"
    code = run_cli(
        ["evaluate", *SMALL_RUN, "--model-dir", str(models), "-o", str(scored)],
    )

    assert code == 0
    assert set(pd.read_csv(scored / "rmse.csv")["model"]) == {"iec", "ann_small"}


def test_explain(tmp_path: Path) -> None:
    code = run_cli(
        [
            "explain",
            *SMALL_RUN,
            "--model",
            "rf",
            "--reference",
            "min",
            "-o",
            str(tmp_path),
        ],
    )

    assert code == 0
    frame = pd.read_csv(tmp_path / "attributions.csv")
    assert (frame["ref_strategy"] == "min").all()
    assert frame["phi_delta_yaw"].isna().all()
    conserved = frame[["phi_v_w", "phi_rho", "phi_ti"]].sum(axis=1)
    assert (conserved - (frame["f_x"] - frame["f_ref"])).abs().max() < 1e-6


def test_monitor(tmp_path: Path) -> None:
    code = run_cli(["monitor", *SMALL_RUN, "--model", "rf", "-o", str(tmp_path)])

    assert code == 0
    for name in ("monitoring.csv", "truth.csv", "faithfulness.csv", "manifest.json"):
        assert (tmp_path / name).exists()
    summary = pd.read_csv(tmp_path / "faithfulness_summary.csv")
    assert list(summary["ref_strategy"]) == ["min", "mean", "informed"]
    monitoring = pd.read_csv(tmp_path / "monitoring.csv")
    assert monitoring["phi_delta_yaw"].notna().all()


def _output_digests(manifest_path: Path) -> dict[str, str]:
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    return {item["path"]: item["sha256"] for item in manifest["outputs"]}


def test_runs_are_reproducible(tmp_path: Path) -> None:
    digests = []
    for run in ("first", "second"):
        root = tmp_path / run
        data = root / "scada.csv"
        assert run_cli(["synth", "-n", "600", "--seed", "9", "-o", str(data)]) == 0
        trained = root / "trained"
        argv = ["train", "--data", str(data), "--n-seeds", "1", "--seed", "4"]
        assert run_cli([*argv, "--models", "rf,ann_small", "-o", str(trained)]) == 0
        digests.append(
            (
                data.read_bytes(),
                _output_digests(root / "scada.csv.manifest.json"),
                _output_digests(trained / "manifest.json"),
            ),
        )

    assert digests[0] == digests[1]
    assert len(digests[0][2]) == 3


@pytest.mark.parametrize(
    ("argv", "expected"),
    [
        (["explain", "--monitor", "--features", "v_w,rho,ti", *SMALL_RUN], 1),
        (["evaluate", "--n-seeds", "1"], 1),
        (["evaluate", *SMALL_RUN, "--models", "gbm"], 1),
        (["evaluate", *SMALL_RUN, "--explode"], 1),
        (["evaluate", "--data", "absent.csv"], 2),
    ],
    ids=["monitor-without-yaw", "no-data", "unknown-model", "bad-flag", "no-file"],
)
def test_exit_codes(
    argv: list[str],
    expected: int,
    tmp_path: Path,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    monkeypatch.chdir(tmp_path)

    assert run_cli([*argv, "-o", str(tmp_path / "out")]) == expected


def test_malformed_csv_is_a_data_error(tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("timestamp,v_w,power\n2021-01-01T00:00:00,5.0,100\n")

    code = run_cli(["evaluate", "--data", str(path), "-o", str(tmp_path / "out")])

    assert code == 2
    assert not (tmp_path / "out" / "manifest.json").exists()

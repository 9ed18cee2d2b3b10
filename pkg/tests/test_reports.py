import json
from pathlib import Path

import pandas as pd
from rich.console import Console

from windxai import __version__
from windxai.analysis.faithfulness import FaithfulnessReport
from windxai.analysis.ood import OodReport, OodRow
from windxai.analysis.reports import (
    ExperimentDocument,
    faithfulness_summary,
    print_ood,
    print_rmse_table,
    print_strategy_reports,
    rmse_frame,
    strategy_frame,
    write_document,
    write_frame,
)
from windxai.analysis.strategy import StrategyReport
from windxai.manifest import ManifestRecorder, file_digest, text_digest

REPORT = StrategyReport(r2={"v_w": 0.9, "rho": None}, r2_phys=0.9, n_instances=10)


def test_rmse_frame() -> None:
    frame = rmse_frame({"iec": [120.0], "rf": [80.0, 82.0]})

    assert list(frame.columns) == ["model", "run", "rmse_test"]
    assert list(frame["model"]) == ["iec", "rf", "rf"]
    assert list(frame["run"]) == [0, 0, 1]


def test_strategy_frame() -> None:
    frame = strategy_frame(REPORT)

    assert list(frame["feature"]) == ["v_w", "rho", "r2_phys"]
    assert frame["r2"].isna().tolist() == [False, True, False]


def test_faithfulness_summary() -> None:
    report = FaithfulnessReport(
        strategy="min",
        bin_kw=25.0,
        bins=(),
        mae=12.5,
        mae_residual=900.0,
        n_instances=4,
    )

    frame = faithfulness_summary([report])

    assert frame.to_dict("records") == [
        {"ref_strategy": "min", "n": 4, "mae": 12.5, "mae_residual": 900.0},
    ]


def test_frames_round_trip_through_csv(tmp_path: Path) -> None:
    frame = rmse_frame({"ann_small": [101.123456789012]})

    path = write_frame(frame, tmp_path / "sub" / "rmse.csv")

    assert path.read_bytes().count(b"\r") == 0
    frame = pd.read_csv(path, float_precision="round_trip")
    assert frame["rmse_test"].iloc[0] == 101.123456789012


def test_experiment_document(tmp_path: Path) -> None:
    document = ExperimentDocument(
        command="evaluate",
        seeds=[0, 1],
        metrics={"rmse": {"iec": [1.0]}},
    )

    path = write_document(document, tmp_path / "experiment.json")

    loaded = json.loads(path.read_text(encoding="utf-8"))
    assert loaded["toolkit_version"] == __version__
    assert loaded["format_version"] == 1
    assert loaded["seeds"] == [0, 1]


def test_console_tables() -> None:
    console = Console(record=True, width=120)
    ood = OodReport(
        rows=(OodRow("rf", 0, 50.0, 300.0, 0.8), OodRow("rf", 1, 52.0, 310.0)),
        n_kept_test=10,
        n_removed_test=2,
    )

    print_rmse_table({"iec": [120.0, 124.0]}, console=console)
    print_strategy_reports({"rf": [REPORT, REPORT]}, console=console)
    print_ood(ood, console=console)

    text = console.export_text()
    assert "122.00" in text
    assert "0.90" in text
    assert "305.00" in text


def test_console_means_are_exact() -> None:
    console = Console(record=True, width=160)
    kept = [1e16, 1.0, 1.0, 1.0, 1.0]
    ood = OodReport(
        rows=tuple(OodRow("rf", seed, value, 1.0) for seed, value in enumerate(kept)),
        n_kept_test=5,
        n_removed_test=1,
    )

    print_ood(ood, console=console)

    assert "2000000000000000.75" in console.export_text()


def test_manifest_digests_outputs(tmp_path: Path) -> None:
    output = tmp_path / "rmse.csv"
    output.write_text("model,run,rmse_test\n", encoding="utf-8")
    recorder = ManifestRecorder("evaluate", {"seed": 0}, tmp_path)
    recorder.input_digest = text_digest("synthetic")
    recorder.add(output)

    manifest = recorder.write(tmp_path / "manifest.json")

    assert manifest.outputs[0].path == "rmse.csv"
    assert manifest.outputs[0].sha256 == file_digest(output)
    assert "total" in manifest.timings
    loaded = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert loaded["input_digest"] == text_digest("synthetic")
    assert loaded["command"] == "evaluate"

import pytest

from windxai.analysis.ood import ood_experiment, ood_frame
from windxai.data.pipeline import DataSplit, norm_filter
from windxai.errors import ConfigurationError, DataError
from windxai.models.forest import ForestConfig
from windxai.physics.iec import IecConfig, fit_binned_curve, fit_iec_model

MODELS = {"iec": IecConfig(), "rf": ForestConfig(n_estimators=5)}


def test_ood_experiment(synth_split: DataSplit) -> None:
    curve = fit_binned_curve(synth_split.train)
    train, val, test = (
        norm_filter(part, curve, threshold_kw=100.0)
        for part in (synth_split.train, synth_split.val, synth_split.test)
    )

    report = ood_experiment(
        MODELS,
        train.kept,
        val.kept,
        test.kept,
        test.removed,
        seeds=[0, 1],
        physics=fit_iec_model(train.kept),
    )

    assert [(row.model, row.seed) for row in report.rows] == [
        ("iec", 0),
        ("iec", 1),
        ("rf", 0),
        ("rf", 1),
    ]
    assert (report.n_kept_test, report.n_removed_test) == (
        len(test.kept),
        len(test.removed),
    )
    assert report.for_model("iec")[0].r2_phys == pytest.approx(1.0)
    for row in report.rows:
        assert row.rmse_removed > row.rmse_kept > 0.0

    frame = ood_frame(report)
    assert list(frame.columns) == [
        "model",
        "seed",
        "rmse_kept",
        "rmse_removed",
        "r2_phys",
    ]
    assert len(frame) == 4


def test_without_physics_baseline(synth_split: DataSplit) -> None:
    report = ood_experiment(
        {"iec": IecConfig()},
        synth_split.train,
        synth_split.val,
        synth_split.test[:50],
        synth_split.test[50:60],
        seeds=[3],
    )

    assert report.rows[0].r2_phys is None


def test_filter_partitions_test_records(synth_split: DataSplit) -> None:
    curve = fit_binned_curve(synth_split.train)

    result = norm_filter(synth_split.test, curve, threshold_kw=50.0)

    assert len(result.kept) + len(result.removed) == len(synth_split.test)
    assert result.out_of_support <= len(result.removed)


def test_invalid_experiments(synth_split: DataSplit) -> None:
    kept, removed = synth_split.test[:20], synth_split.test[20:30]
    train, val = synth_split.train, synth_split.val

    with pytest.raises(ConfigurationError):
        ood_experiment(MODELS, train, val, kept, removed, seeds=[])
    with pytest.raises(ConfigurationError):
        ood_experiment({}, train, val, kept, removed, seeds=[0])
    with pytest.raises(DataError, match="removed"):
        ood_experiment(MODELS, train, val, kept, [], seeds=[0])
    with pytest.raises(DataError):
        ood_experiment(MODELS, train, val, [], removed, seeds=[0])

import math
from datetime import timedelta
from pathlib import Path

import pandas as pd
import pytest

from tests.helpers import START, make_records
from windxai.data.pipeline import (
    DataSplit,
    TimeInterval,
    augment_yaw,
    default_split_intervals,
    filter_operational,
    norm_filter,
    split_temporal,
    write_truth_csv,
)
from windxai.data.records import ScadaRecord
from windxai.errors import ConfigurationError, DataError
from windxai.physics.iec import BinnedPowerCurve, PowerCurveBin


def _interval(start_hours: float, end_hours: float) -> TimeInterval:
    return TimeInterval(
        start=START + timedelta(hours=start_hours),
        end=START + timedelta(hours=end_hours),
    )


def test_filter_operational() -> None:
    records = make_records([2.0, 5.0, 6.0], [0.0, 300.0, 400.0])
    records[2] = records[2].model_copy(update={"status_ok": False})

    assert filter_operational(records) == [records[1]]


def test_filter_operational_is_idempotent() -> None:
    records = make_records([2.0, 5.0, 6.0, 7.0], [0.0, 300.0, -5.0, 450.0])
    records[3] = records[3].model_copy(update={"status_ok": False})

    once = filter_operational(records)

    assert filter_operational(once) == once == [records[1]]


def test_split_temporal() -> None:
    """Six records per hour: first ten hours train, next ten test."""
    records = make_records([5.0] * 120, [300.0] * 120)

    split = split_temporal(records, _interval(0, 10), _interval(10, 20), seed=4)

    assert len(split.train) + len(split.val) == 60
    assert len(split.val) == 12
    assert len(split.test) == 60
    assert split.excluded == 0
    assert max(r.timestamp for r in split.train) < min(r.timestamp for r in split.test)
    assert not set(r.timestamp for r in split.val) & set(
        r.timestamp for r in split.train
    )


def test_split_is_deterministic() -> None:
    records = make_records([5.0] * 120, [300.0] * 120)

    first = split_temporal(records, _interval(0, 10), _interval(10, 20), seed=1)
    second = split_temporal(records, _interval(0, 10), _interval(10, 20), seed=1)

    assert first.val == second.val


def test_split_rejects_overlap() -> None:
    records = make_records([5.0] * 12, [300.0] * 12)

    with pytest.raises(ConfigurationError):
        split_temporal(records, _interval(0, 2), _interval(1, 3))


def test_split_rejects_empty_test() -> None:
    records = make_records([5.0] * 12, [300.0] * 12)

    with pytest.raises(DataError):
        split_temporal(records, _interval(0, 2), _interval(5, 6))


def test_default_split_covers_all_records() -> None:
    records = make_records([5.0] * 50, [300.0] * 50)

    train, test = default_split_intervals(records)
    split = split_temporal(records, train, test)

    assert split.excluded == 0
    assert sum(split.sizes.values()) == 50


def _flat_curve(power: float) -> BinnedPowerCurve:
    bins = [
        PowerCurveBin(v_center=c, mean_v=c, mean_p=power, count=10)
        for c in (4.25, 4.75, 5.25, 5.75)
    ]
    return BinnedPowerCurve(bin_width=0.5, rho_ref=1.225, bins=bins)


def test_norm_filter() -> None:
    """900 kW against a 700 kW curve exceeds a 100 kW threshold."""
    records = make_records([5.0, 5.0, 5.0, 12.0], [900.0, 750.0, 650.0, 700.0])

    result = norm_filter(records, _flat_curve(700.0), threshold_kw=100.0)

    assert result.kept == [records[1], records[2]]
    assert result.removed == [records[0], records[3]]
    assert result.out_of_support == 1


def test_norm_filter_without_threshold_keeps_supported_records() -> None:
    records = make_records([5.0, 5.0, 12.0, 4.5], [5000.0, 0.1, 700.0, 700.0])

    result = norm_filter(records, _flat_curve(700.0), threshold_kw=math.inf)

    assert result.kept == [records[0], records[1], records[3]]
    assert result.removed == [records[2]]
    assert result.out_of_support == 1


def test_norm_filter_threshold() -> None:
    with pytest.raises(ConfigurationError):
        norm_filter(make_records([5.0], [700.0]), _flat_curve(700.0), 0.0)


def _split(records: list[ScadaRecord]) -> DataSplit:
    return DataSplit(train=records[:2], val=records[2:3], test=records[3:], seed=0)


def test_augment_yaw_below_rated() -> None:
    """A huge sigma saturates every draw at the 15 degree clip."""
    records = make_records([8.0, 9.0, 10.0, 11.0, 13.0], [1000.0] * 5)

    augmented, truth = augment_yaw(_split(records), sigma_deg=1e6, clip_deg=15.0)

    factor = math.cos(math.radians(15.0)) ** 3
    assert factor == pytest.approx(0.90122, abs=1e-5)
    assert augmented.test[0].power == pytest.approx(1000.0 * factor)
    assert truth.test[0].delta_p_true == pytest.approx(1000.0 * (factor - 1.0))
    assert truth.train[0].delta_yaw == 15.0
    assert truth.train[0].residual_power == pytest.approx(1000.0 * factor)

    # Above rated wind speed the power is left alone
    assert augmented.test[1].power == 1000.0
    assert augmented.test[1].delta_yaw == 15.0
    assert truth.test[1].delta_p_true == 0.0


def test_augment_yaw_conserves_inputs(synth_split: DataSplit) -> None:
    augmented, truth = augment_yaw(synth_split, seed=2)

    for name in ("train", "val", "test"):
        parts = (getattr(synth_split, name), getattr(augmented, name))
        for original, record, item in zip(*parts, getattr(truth, name)):
            assert item.p_free == original.power
            if item.applied:
                assert record.power == item.c_ymis * item.p_free
                assert item.delta_p_true == (item.c_ymis - 1.0) * item.p_free
            else:
                assert record.power == item.p_free
                assert item.delta_p_true == 0.0
            assert record.delta_yaw == item.delta_yaw
            restored = record.model_copy(
                update={"power": original.power, "delta_yaw": original.delta_yaw},
            )
            assert restored.model_dump() == original.model_dump()


def test_augment_yaw_is_reproducible() -> None:
    records = make_records([8.0, 9.0, 10.0, 11.0], [1000.0] * 4)

    _, first = augment_yaw(_split(records), seed=11)
    _, second = augment_yaw(_split(records), seed=11)

    assert first == second
    assert all(0.0 <= item.delta_yaw <= 15.0 for item in first.train)


def test_augment_yaw_rejects_clip() -> None:
    records = make_records([8.0, 9.0, 10.0, 11.0], [1000.0] * 4)

    with pytest.raises(ConfigurationError):
        augment_yaw(_split(records), clip_deg=120.0)


def test_write_truth_csv(tmp_path: Path) -> None:
    records = make_records([8.0, 9.0, 10.0, 13.0], [1000.0] * 4)
    _, truth = augment_yaw(_split(records), sigma_deg=1e6)

    frame = pd.read_csv(write_truth_csv(truth.test, tmp_path / "truth.csv"))

    assert list(frame["applied"]) == [False]
    assert frame["delta_p_true"].iloc[0] == 0.0

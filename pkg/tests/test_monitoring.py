import math

import numpy as np
import pytest

from tests.helpers import FunctionModel, make_records
from windxai.analysis.monitoring import Monitor, decompose_deviation, monitoring_frame
from windxai.data.pipeline import (
    augment_yaw,
    default_split_intervals,
    filter_operational,
    split_temporal,
)
from windxai.data.records import BASE_FEATURES, FEATURE_NAMES, ScadaRecord
from windxai.data.synthetic import SynthConfig, generate_synthetic, latent_power
from windxai.errors import ConfigurationError, DataError
from windxai.models.mlp import ANN_SMALL, MlpModel, mlp_train
from windxai.models.predictor import FeatureSchema


def _turbine(inputs: np.ndarray) -> np.ndarray:
    v, rho, ti, yaw = inputs.T
    return 0.5 * v**3 * rho * (1.0 - ti) * np.cos(np.radians(yaw)) ** 3


MODEL = FunctionModel(FEATURE_NAMES, _turbine)
SPEEDS = np.repeat([5.25, 5.75, 6.25], 20)
YAW = np.tile([0.0, 8.0], 30)
TRAIN = make_records(
    SPEEDS,
    _turbine(np.column_stack([SPEEDS, np.full(60, 1.2), np.full(60, 0.1), YAW])),
    rho=1.2,
    ti=0.1,
    delta_yaw=YAW,
)


def test_typical_conditions_need_no_attribution() -> None:
    (instance,) = make_records([5.75], [50.0], rho=1.2, ti=0.1, delta_yaw=0.0)

    report = Monitor(MODEL, TRAIN).decompose([instance])[0]

    np.testing.assert_allclose(list(report.phi.values()), 0.0, atol=1e-9)
    assert report.f_x == pytest.approx(report.f_ref)
    assert report.low_confidence
    assert not report.fallback
    assert report.expected_deviation == pytest.approx(report.residual)


def test_deviation_is_conserved() -> None:
    (instance,) = make_records([6.0], [100.0], rho=1.25, ti=0.15, delta_yaw=12.0)

    report = decompose_deviation(MODEL, instance, TRAIN)

    assert report.expected_deviation == pytest.approx(
        math.fsum(report.phi.values()) + report.residual,
        abs=1e-8,
    )
    assert report.phi["delta_yaw"] < 0.0
    assert report.phi["rho"] > 0.0
    assert report.phi["ti"] < 0.0
    assert report.reference.value("delta_yaw") == 0.0
    assert report.reference.value("v_w") == 6.0


def test_outside_conditional_tables() -> None:
    (instance,) = make_records([12.0], [800.0], rho=1.2, ti=0.1, delta_yaw=3.0)

    report = Monitor(MODEL, TRAIN).decompose([instance])[0]

    assert report.fallback
    assert "global means" in report.confidence_note


def test_error_threshold_from_training() -> None:
    power = _turbine(np.array([[6.25, 1.2, 0.1, 8.0]]))
    (exact,) = make_records([6.25], power, rho=1.2, ti=0.1, delta_yaw=8.0)

    monitor = Monitor(MODEL, TRAIN)
    report = monitor.decompose([exact])[0]

    assert monitor.error_threshold == 0.0
    assert not report.low_confidence
    assert report.confidence_note.startswith("ok confidence")


def test_requires_yaw_feature() -> None:
    model = FunctionModel(BASE_FEATURES, lambda rows: rows[:, 0])

    with pytest.raises(ConfigurationError, match="delta_yaw"):
        Monitor(model, TRAIN)
    with pytest.raises(ConfigurationError):
        Monitor(MODEL, TRAIN, error_quantile=1.0)
    with pytest.raises(DataError):
        Monitor(MODEL, [])


def test_schema_must_match() -> None:
    with pytest.raises(DataError, match="schema mismatch"):
        decompose_deviation(
            MODEL,
            TRAIN[0],
            TRAIN,
            schema=FeatureSchema(names=("rho", "v_w", "ti", "delta_yaw")),
        )


def test_monitoring_frame() -> None:
    records = make_records([5.5, 12.0], [60.0, 800.0], rho=1.2, ti=0.1)

    frame = monitoring_frame(Monitor(MODEL, TRAIN).decompose(records))

    assert list(frame["fallback"]) == ["false", "true"]
    assert list(frame.columns[:6]) == [
        "timestamp",
        "v_w",
        "power",
        "f_x",
        "f_ref",
        "residual",
    ]
    assert frame["residual"].iloc[0] == pytest.approx(60.0 - frame["f_x"].iloc[0])


@pytest.fixture(scope="module")
def yawed_turbine(synth_config: SynthConfig) -> tuple[SynthConfig, Monitor]:
    config = synth_config.model_copy(update={"n_samples": 8000})
    records, _ = generate_synthetic(config)
    records = filter_operational(records)
    split = split_temporal(records, *default_split_intervals(records))
    split, _ = augment_yaw(split, seed=1)
    model = mlp_train(
        ANN_SMALL.model_copy(update={"features": FEATURE_NAMES}),
        split.train,
        split.val,
        seed=0,
    )
    return config, Monitor(model, split.train)


def _observation(
    config: SynthConfig,
    monitor: Monitor,
    v_w: float,
    delta_yaw: float,
    rho_offset: float = 0.0,
) -> tuple[ScadaRecord, float]:
    """Observation under typical ambient conditions and its aligned power."""
    typical, _ = monitor.builder.informed(np.array([[v_w, 0.0, 0.0, 0.0]]))
    rho, ti = typical[0, 1] + rho_offset, typical[0, 2]
    p_free = float(latent_power(config, v_w, rho, ti))
    power = float(latent_power(config, v_w, rho, ti, delta_yaw))
    (record,) = make_records([v_w], [power], rho=rho, ti=ti, delta_yaw=delta_yaw)
    return record, p_free


def test_trained_model_recovers_yaw_loss(
    yawed_turbine: tuple[SynthConfig, Monitor],
) -> None:
    config, monitor = yawed_turbine
    instance, p_free = _observation(config, monitor, 8.0, 12.0)

    report = monitor.decompose([instance])[0]

    expected = (math.cos(math.radians(12.0)) ** 3 - 1.0) * p_free
    assert isinstance(monitor.predictor, MlpModel)
    assert report.phi["delta_yaw"] < 0.0
    assert abs(report.phi["delta_yaw"] - expected) < 3.0 * config.noise_std(p_free)


def test_trained_model_separates_yaw_from_density(
    yawed_turbine: tuple[SynthConfig, Monitor],
) -> None:
    """Yaw loss hidden by dense air versus an aligned rotor in thin air."""
    config, monitor = yawed_turbine
    yawed, _ = _observation(config, monitor, 9.0, 15.0, rho_offset=0.06)
    aligned, _ = _observation(config, monitor, 9.0, 0.0, rho_offset=-0.06)

    first, second = monitor.decompose([yawed, aligned])

    assert first.phi["delta_yaw"] < 0.0 < first.phi["rho"]
    assert second.phi["delta_yaw"] == pytest.approx(0.0, abs=1e-9)
    assert second.phi["rho"] < 0.0

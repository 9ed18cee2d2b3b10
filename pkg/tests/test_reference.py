import numpy as np
import pytest

from tests.helpers import make_records
from windxai.attribution.reference import (
    ReferenceBuilder,
    ReferenceStrategy,
    build_reference,
    fit_conditional_table,
)
from windxai.data.records import FEATURE_NAMES
from windxai.errors import ConfigurationError

# Twenty rows at each 0.5 m/s bin center; density rises with speed
SPEEDS = np.repeat([5.25, 5.75, 6.25, 6.75], 20)
TRAIN = make_records(
    SPEEDS,
    100.0 * SPEEDS,
    rho=1.0 + 0.02 * SPEEDS,
    ti=0.4 / SPEEDS,
    delta_yaw=np.tile([0.0, 10.0], 40),
)


def test_minimum_and_mean() -> None:
    minimum = build_reference(ReferenceStrategy.MIN, TRAIN, FEATURE_NAMES)
    mean = build_reference(ReferenceStrategy.MEAN, TRAIN, FEATURE_NAMES)

    assert minimum.values[0] == 5.25
    assert minimum.value("delta_yaw") == 0.0
    assert mean.value("v_w") == pytest.approx(6.0)
    assert mean.value("delta_yaw") == pytest.approx(5.0)


def test_informed_reference() -> None:
    """v_w is kept, ambient features follow their conditional means."""
    instance = make_records([6.25], [900.0], rho=1.3, ti=0.3, delta_yaw=12.0)[0]

    reference = build_reference(
        ReferenceStrategy.INFORMED,
        TRAIN,
        FEATURE_NAMES,
        instance,
    )

    assert reference.value("v_w") == 6.25
    assert reference.value("rho") == pytest.approx(1.0 + 0.02 * 6.25)
    assert reference.value("ti") == pytest.approx(0.4 / 6.25)
    assert reference.value("delta_yaw") == 0.0
    assert not reference.fallback
    assert len(reference.tables) == 2


def test_informed_reference_interpolates_between_bins() -> None:
    builder = ReferenceBuilder(TRAIN, ("v_w", "rho"))

    refs, fallback = builder.informed(np.array([[5.5, 1.2], [5.25, 1.2]]))

    assert refs[0, 1] == pytest.approx(1.0 + 0.02 * 5.5)
    assert refs[1, 1] == pytest.approx(1.0 + 0.02 * 5.25)
    assert not fallback.any()


def test_informed_reference_falls_back_outside_tables() -> None:
    builder = ReferenceBuilder(TRAIN, FEATURE_NAMES)

    refs, fallback = builder.informed(np.array([[12.0, 1.2, 0.1, 3.0]]))

    assert fallback[0]
    assert refs[0, 1] == pytest.approx(np.mean([record.rho for record in TRAIN]))
    assert refs[0, 0] == 12.0


def test_sparse_bins_are_dropped() -> None:
    v = np.array([5.1] * 10 + [8.1] * 3)
    table = fit_conditional_table(v, np.arange(13.0), "rho")

    assert table.centers == (5.25,)
    assert table.means == (4.5,)
    assert table.v_range == (5.25, 5.25)


def test_informed_requires_instance_and_wind_speed() -> None:
    with pytest.raises(ConfigurationError):
        build_reference(ReferenceStrategy.INFORMED, TRAIN, FEATURE_NAMES)
    with pytest.raises(ConfigurationError):
        ReferenceBuilder(TRAIN, ("rho", "ti")).informed(np.array([[1.2, 0.1]]))


def test_references_follow_strategy() -> None:
    builder = ReferenceBuilder(TRAIN, FEATURE_NAMES)
    inputs = np.array([[5.7, 1.2, 0.1, 4.0], [6.7, 1.2, 0.1, 0.0]])

    refs, _ = builder.references(ReferenceStrategy.MEAN, inputs)

    np.testing.assert_allclose(refs, np.tile(builder.mean, (2, 1)))

from datetime import timedelta

import numpy as np
import pytest

from windxai.data.synthetic import (
    SynthConfig,
    generate_synthetic,
    latent_power,
    ramp_power,
)


def test_ramp_power() -> None:
    config = SynthConfig()

    power = ramp_power(config, [0.0, 3.0, 12.0, 20.0])

    np.testing.assert_allclose(power, [0.0, 0.0, 2000.0, 2000.0])


def test_generation_is_deterministic() -> None:
    config = SynthConfig(n_samples=200, seed=7)

    first, truth = generate_synthetic(config)
    second, _ = generate_synthetic(config)

    assert first == second
    assert len(first) == len(truth) == 200
    assert first[1].timestamp - first[0].timestamp == timedelta(minutes=10)


def test_seed_override_changes_draws() -> None:
    config = SynthConfig(n_samples=50, seed=7)

    first, _ = generate_synthetic(config)
    second, _ = generate_synthetic(config, seed=8)

    assert [r.v_w for r in first] != [r.v_w for r in second]


def test_records_respect_bounds() -> None:
    config = SynthConfig(n_samples=2000, seed=1)

    records, truth = generate_synthetic(config)

    assert all(record.v_w <= config.v_cut_out for record in records)
    assert all(0.9 <= record.rho <= 1.4 for record in records)
    assert all(config.ti_min <= record.ti <= config.ti_max for record in records)
    assert all(item.p_latent <= config.rated_power + 1e-9 for item in truth)


def test_turbulence_smooths_the_knee() -> None:
    """Turbulence lowers power just below rated and raises it near cut-in."""
    config = SynthConfig()

    calm = latent_power(config, [4.0, 11.5], 1.225, 0.0)
    gusty = latent_power(config, [4.0, 11.5], 1.225, 0.2)

    assert gusty[0] > calm[0]
    assert gusty[1] < calm[1]


def test_yaw_only_below_rated() -> None:
    config = SynthConfig()

    aligned = latent_power(config, [8.0, 14.0], 1.225, 0.1)
    yawed = latent_power(config, [8.0, 14.0], 1.225, 0.1, delta_yaw=15.0)

    assert yawed[0] == pytest.approx(aligned[0] * np.cos(np.radians(15.0)) ** 3)
    assert yawed[1] == aligned[1]


def test_ti_derate_lowers_power() -> None:
    plain = SynthConfig()
    derated = SynthConfig(ti_derate=1.5)

    baseline = latent_power(plain, 8.0, 1.225, 0.25)
    assert latent_power(derated, 8.0, 1.225, 0.25) < baseline


def test_rejects_unordered_speeds() -> None:
    with pytest.raises(ValueError):
        SynthConfig(v_cut_in=13.0)

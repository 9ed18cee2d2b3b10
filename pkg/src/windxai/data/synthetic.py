"""Desk-scale synthetic SCADA data with known latent power."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import UTC, datetime

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from windxai.data.records import ScadaRecord
from windxai.physics.iec import density_normalize, gaussian_expectation

logger = logging.getLogger(__name__)

RHO_CLIP = (0.9, 1.4)
POWER_FLOOR_KW = -50.0


class SynthConfig(BaseModel):

    """Parameters of the synthetic turbine, site and measurement noise.

    Defaults describe a pitch-regulated 2 MW turbine (cut-in 3 m/s, rated
    12 m/s, cut-out 25 m/s) on a Weibull(2, 8 m/s) site.
    """

    model_config = ConfigDict(frozen=True)

    n_samples: int = Field(default=20000, ge=1)
    rated_power: float = Field(default=2000.0, gt=0)
    v_cut_in: float = Field(default=3.0, gt=0)
    v_rated: float = Field(default=12.0, gt=0)
    v_cut_out: float = Field(default=25.0, gt=0)
    weibull_shape: float = Field(default=2.0, gt=0)
    weibull_scale: float = Field(default=8.0, gt=0)
    rho_mean: float = Field(default=1.225, gt=RHO_CLIP[0], lt=RHO_CLIP[1])
    rho_std: float = Field(default=0.03, ge=0)
    rho_seasonal_amplitude: float = Field(default=0.02, ge=0)
    # Median TI falls with wind speed: ti_a + ti_b / max(v, 1)
    ti_a: float = Field(default=0.06, ge=0)
    ti_b: float = Field(default=0.4, ge=0)
    ti_sigma: float = Field(default=0.3, ge=0, description="log-space std")
    ti_min: float = Field(default=0.01, ge=0)
    ti_max: float = Field(default=0.5, lt=1)
    noise_base_kw: float = Field(default=10.0, ge=0)
    noise_rel: float = Field(default=0.03, ge=0)
    # Turbulence derating beyond the IEC physics, off by default
    ti_derate: float = Field(default=0.0, ge=0)
    ti_derate_ref: float = Field(default=0.08, ge=0)
    start: datetime = datetime(2021, 1, 1, tzinfo=UTC)
    interval_minutes: int = Field(default=10, ge=1)
    seed: int = 0

    @field_validator("start")
    @classmethod
    def _start_utc(cls, value: datetime) -> datetime:
        if value.tzinfo is None:
            return value.replace(tzinfo=UTC)
        return value.astimezone(UTC)

    @model_validator(mode="after")
    def _check_speeds(self) -> SynthConfig:
        if not 0 < self.v_cut_in < self.v_rated < self.v_cut_out:
            raise ValueError("Require 0 < v_cut_in < v_rated < v_cut_out")
        if not self.ti_min <= self.ti_max:
            raise ValueError("Require ti_min <= ti_max")
        return self

    def noise_std(self, p_latent: ArrayLike) -> np.ndarray:
        return self.noise_base_kw + self.noise_rel * np.asarray(p_latent)


@dataclass(frozen=True)
class SyntheticTruth:

    """Noiseless generator output for one record."""

    p_latent: float
    noise_std: float


def ramp_power(config: SynthConfig, u: ArrayLike) -> np.ndarray:
    """Zero-turbulence curve: cubic ramp from cut-in to rated, flat above."""
    u_array = np.asarray(u, dtype=np.float64)
    span = config.v_rated**3 - config.v_cut_in**3
    cubic = (u_array**3 - config.v_cut_in**3) / span
    return config.rated_power * np.clip(cubic, 0.0, 1.0)


def latent_power(
    config: SynthConfig,
    v: ArrayLike,
    rho: ArrayLike,
    ti: ArrayLike,
    delta_yaw: ArrayLike = 0.0,
) -> np.ndarray:
    """Noiseless power of the synthetic turbine in kW.

    The ramp is convolved with a Gaussian of width ``ti * v_n`` at the
    density-normalised speed ``v_n``. Below rated wind speed the result
    is scaled by ``cos^3`` of the yaw misalignment; below cut-in it is zero.
    """
    v_array, rho_array, ti_array, delta_array = np.broadcast_arrays(
        np.asarray(v, dtype=np.float64),
        np.asarray(rho, dtype=np.float64),
        np.asarray(ti, dtype=np.float64),
        np.asarray(delta_yaw, dtype=np.float64),
    )
    v_n = np.asarray(density_normalize(v_array, rho_array, config.rho_mean))
    power = gaussian_expectation(
        lambda u: ramp_power(config, u),
        v_n,
        ti_array * v_n,
    )

    if config.ti_derate > 0:
        derate = np.minimum(
            config.ti_derate * np.maximum(ti_array - config.ti_derate_ref, 0.0),
            0.25,
        )
        power = power * (1.0 - 4.0 * derate * (1.0 - power / config.rated_power))

    yaw_factor = np.cos(np.radians(delta_array)) ** 3
    power = np.where(v_array < config.v_rated, power * yaw_factor, power)
    return np.where(v_array < config.v_cut_in, 0.0, power)


def _draw_wind_speeds(
    config: SynthConfig,
    rng: np.random.Generator,
    n: int,
) -> np.ndarray:
    speeds = config.weibull_scale * rng.weibull(config.weibull_shape, size=n)
    # Truncate at cut-out by redrawing
    while np.any(beyond := speeds > config.v_cut_out):
        speeds[beyond] = config.weibull_scale * rng.weibull(
            config.weibull_shape,
            size=int(beyond.sum()),
        )
    return speeds


def generate_synthetic(
    config: SynthConfig,
    seed: int | None = None,
) -> tuple[list[ScadaRecord], list[SyntheticTruth]]:
    """Generate synthetic SCADA records with their latent power.

    Args:
    ----
        config (SynthConfig): Turbine, site and noise parameters.
        seed (int | None, optional): Overrides ``config.seed``.

    Returns:
    -------
        tuple[list[ScadaRecord], list[SyntheticTruth]]: Records on a
            regular 10-minute grid and their noiseless ground truth.

    """
    n = config.n_samples
    rng = np.random.default_rng(config.seed if seed is None else seed)

    # Timestamps and the seasonal density cycle
    start = np.datetime64(config.start.replace(tzinfo=None), "us")
    timestamps = start + np.arange(n) * np.timedelta64(config.interval_minutes, "m")
    day_of_year = (timestamps - timestamps.astype("datetime64[Y]")) / np.timedelta64(
        1,
        "D",
    )
    rho_season = config.rho_mean + config.rho_seasonal_amplitude * np.sin(
        2 * np.pi * day_of_year / 365.25,
    )

    # Ambient conditions, always drawn in the same order
    v = _draw_wind_speeds(config, rng, n)
    rho = np.clip(rng.normal(rho_season, config.rho_std), *RHO_CLIP)
    ti_median = config.ti_a + config.ti_b / np.maximum(v, 1.0)
    ti = np.clip(
        ti_median * np.exp(config.ti_sigma * rng.standard_normal(n)),
        config.ti_min,
        config.ti_max,
    )

    p_latent = latent_power(config, v, rho, ti)
    noise_std = config.noise_std(p_latent)
    power = np.maximum(p_latent + noise_std * rng.standard_normal(n), POWER_FLOOR_KW)

    records = [
        ScadaRecord(
            timestamp=timestamp.replace(tzinfo=UTC),
            v_w=float(v[i]),
            rho=float(rho[i]),
            ti=float(ti[i]),
            delta_yaw=0.0,
            power=float(power[i]),
            status_ok=True,
        )
        for i, timestamp in enumerate(timestamps.astype(datetime))
    ]
    truths = [
        SyntheticTruth(p_latent=float(p), noise_std=float(s))
        for p, s in zip(p_latent, noise_std)
    ]
    logger.info("Generated %d synthetic records", n)
    return records, truths

"""IEC 61400-12-1 style physics baseline.

The baseline is a binned power curve in density-normalised wind speed,
deconvolved into a zero-turbulence reference curve. Predictions convolve
that reference curve with a Gaussian 10-minute wind distribution of width
``TI * v`` and are therefore a genuine function of (v_w, rho, ti).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from scipy.stats import norm

from windxai.data.records import BASE_FEATURES, ScadaRecord
from windxai.errors import DataError
from windxai.models.predictor import FeatureSchema

logger = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 0.5
DEFAULT_MIN_COUNT = 3
DEFAULT_GRID_STEP = 0.25
DEFAULT_MAX_ITER = 20
DEFAULT_TOL_KW = 0.5
RATED_HEADROOM = 1.05

# Truncated Gaussian quadrature: nodes at v + sigma * z, z in [-4, 4]
TRUNCATION_SIGMAS = 4.0
QUADRATURE_NODES = 321
_CHUNK_ROWS = 2048


def _quadrature_rule() -> tuple[np.ndarray, np.ndarray]:
    z = np.linspace(-TRUNCATION_SIGMAS, TRUNCATION_SIGMAS, QUADRATURE_NODES)
    trapezoid = np.full(QUADRATURE_NODES, z[1] - z[0])
    trapezoid[[0, -1]] *= 0.5
    weights = norm.pdf(z) * trapezoid
    # Renormalised over the truncated support
    return z, weights / weights.sum()


QUADRATURE_Z, QUADRATURE_WEIGHTS = _quadrature_rule()


def density_normalize(
    v: ArrayLike,
    rho: ArrayLike,
    rho_ref: float,
) -> np.ndarray | float:
    """Normalise wind speed to the reference air density.

    Uses the pitch-regulated form ``v * (rho / rho_ref) ** (1 / 3)``.

    Raises
    ------
        DataError: If either density is not positive.

    """
    rho_array = np.asarray(rho, dtype=np.float64)
    if not rho_ref > 0 or np.any(~(rho_array > 0)):
        raise DataError("Air densities must be positive")
    result = np.asarray(v, dtype=np.float64) * np.cbrt(rho_array / rho_ref)
    return float(result) if result.ndim == 0 else result


def yaw_power_factor(delta_deg: ArrayLike) -> np.ndarray | float:
    """Actuator-disk power factor ``cos^3`` of the yaw misalignment angle.

    Raises
    ------
        DataError: If an angle lies outside [0, 90] degrees.

    """
    delta = np.asarray(delta_deg, dtype=np.float64)
    if np.any(~((delta >= 0.0) & (delta <= 90.0))):
        raise DataError("Yaw misalignment must lie within [0, 90] degrees")
    factor = np.cos(np.radians(delta)) ** 3
    factor = np.where(delta == 90.0, 0.0, factor)
    return float(factor) if factor.ndim == 0 else factor


def gaussian_expectation(
    fn: Callable[[np.ndarray], np.ndarray],
    v: ArrayLike,
    sigma: ArrayLike,
) -> np.ndarray:
    """Expectation of ``fn`` under ``N(v, sigma)`` truncated at 4 sigma.

    Evaluated with trapezoidal quadrature on a fixed node set; rows with
    ``sigma == 0`` return ``fn(v)`` exactly.
    """
    v_array, sigma_array = np.broadcast_arrays(
        np.asarray(v, dtype=np.float64),
        np.asarray(sigma, dtype=np.float64),
    )
    flat_v = v_array.ravel()
    flat_sigma = sigma_array.ravel()
    result = np.empty_like(flat_v)
    for start in range(0, flat_v.size, _CHUNK_ROWS):
        stop = start + _CHUNK_ROWS
        nodes = flat_v[start:stop, None] + flat_sigma[start:stop, None] * QUADRATURE_Z
        result[start:stop] = fn(nodes) @ QUADRATURE_WEIGHTS

    # The degenerate Gaussian is exact, not a weighted sum of equal values
    degenerate = flat_sigma == 0.0
    if np.any(degenerate):
        result[degenerate] = fn(flat_v[degenerate])
    return result.reshape(v_array.shape)


class PowerCurveBin(BaseModel):
    model_config = ConfigDict(frozen=True)

    v_center: float
    mean_v: float
    mean_p: float
    count: int = Field(ge=1)


class BinnedPowerCurve(BaseModel):

    """Method-of-bins power curve in density-normalised wind speed."""

    model_config = ConfigDict(frozen=True)

    bin_width: float = Field(default=DEFAULT_BIN_WIDTH, gt=0)
    rho_ref: float = Field(gt=0)
    bins: list[PowerCurveBin] = Field(min_length=1)

    _mean_v: np.ndarray = PrivateAttr()
    _mean_p: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def _check_bins(self) -> BinnedPowerCurve:
        centers = [item.v_center for item in self.bins]
        if centers != sorted(centers):
            raise ValueError("Bins must be sorted by v_center")
        half = self.bin_width / 2 + 1e-9
        for item in self.bins:
            if not item.v_center - half <= item.mean_v <= item.v_center + half:
                raise ValueError(f"Bin mean {item.mean_v} outside its interval")
        return self

    def model_post_init(self, __context: object) -> None:
        self._mean_v = np.array([item.mean_v for item in self.bins])
        self._mean_p = np.array([item.mean_p for item in self.bins])

    @property
    def mean_v(self) -> np.ndarray:
        return self._mean_v

    @property
    def mean_p(self) -> np.ndarray:
        return self._mean_p

    @property
    def support(self) -> tuple[float, float]:
        """Lower edge of the first and upper edge of the last bin."""
        half = self.bin_width / 2
        return self.bins[0].v_center - half, self.bins[-1].v_center + half

    @property
    def cut_in(self) -> float:
        return self.support[0]


def _bin_index(v_n: np.ndarray, bin_width: float) -> np.ndarray:
    # Half-open bins [k*w, (k+1)*w)
    return np.floor(v_n / bin_width + 1e-12).astype(np.int64)


def fit_binned_curve(
    train: Sequence[ScadaRecord],
    bin_width: float = DEFAULT_BIN_WIDTH,
    rho_ref: float | None = None,
    min_count: int = DEFAULT_MIN_COUNT,
) -> BinnedPowerCurve:
    """Fit a binned power curve with the method of bins.

    Args:
    ----
        train (Sequence[ScadaRecord]): Training records.
        bin_width (float, optional): Bin width in m/s. Defaults to 0.5.
        rho_ref (float | None, optional): Reference density. Defaults to
            the training-mean air density.
        min_count (int, optional): Bins with fewer rows are dropped.
            Defaults to 3.

    Raises:
    ------
        DataError: If ``train`` is empty or every bin is dropped.

    Returns:
    -------
        BinnedPowerCurve: The fitted curve.

    """
    if len(train) == 0:
        raise DataError("Cannot fit a power curve on an empty training set")
    v = np.array([record.v_w for record in train])
    rho = np.array([record.rho for record in train])
    power = np.array([record.power for record in train])
    rho_ref = float(rho.mean()) if rho_ref is None else float(rho_ref)

    v_n = np.asarray(density_normalize(v, rho, rho_ref))
    keys, inverse, counts = np.unique(
        _bin_index(v_n, bin_width),
        return_inverse=True,
        return_counts=True,
    )
    sum_v = np.bincount(inverse, weights=v_n)
    sum_p = np.bincount(inverse, weights=power)

    bins = [
        PowerCurveBin(
            v_center=(int(key) + 0.5) * bin_width,
            mean_v=float(sv / count),
            mean_p=float(sp / count),
            count=int(count),
        )
        for key, sv, sp, count in zip(keys, sum_v, sum_p, counts)
        if count >= min_count
    ]
    if not bins:
        raise DataError(f"No bin holds at least {min_count} records")
    logger.debug("Fitted binned curve with %d bins", len(bins))
    return BinnedPowerCurve(bin_width=bin_width, rho_ref=rho_ref, bins=bins)


def curve_interpolate(
    curve: BinnedPowerCurve,
    v: ArrayLike,
    cut_in: float | None = None,
) -> np.ndarray | float:
    """Piecewise-linear evaluation between bin means.

    Outside the covered range the first/last bin value is held; when a
    ``cut_in`` speed is given, speeds below it evaluate to zero.
    """
    v_array = np.asarray(v, dtype=np.float64)
    result = np.interp(v_array, curve.mean_v, curve.mean_p)
    if cut_in is not None:
        result = np.where(v_array < cut_in, 0.0, result)
    return float(result) if np.ndim(result) == 0 else result


class ZeroTICurve(BaseModel):

    """Zero-turbulence reference curve on a uniform wind speed grid."""

    model_config = ConfigDict(frozen=True)

    grid: list[float] = Field(min_length=2)
    p_zero: list[float] = Field(min_length=2)
    cut_in: float = 0.0
    converged: bool
    iterations: int = Field(ge=0)

    _grid: np.ndarray = PrivateAttr()
    _p_zero: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def _check_grid(self) -> ZeroTICurve:
        if len(self.grid) != len(self.p_zero):
            raise ValueError("Grid and p_zero lengths differ")
        steps = np.diff(self.grid)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9):
            raise ValueError("Grid must be uniform and increasing")
        if steps[0] > DEFAULT_GRID_STEP + 1e-12:
            raise ValueError(f"Grid step above {DEFAULT_GRID_STEP} m/s")
        if min(self.p_zero) < 0:
            raise ValueError("Negative zero-TI power")
        return self

    def model_post_init(self, __context: object) -> None:
        self._grid = np.asarray(self.grid)
        self._p_zero = np.asarray(self.p_zero)

    def evaluate(self, u: ArrayLike) -> np.ndarray:
        """Linear interpolation between knots, held flat beyond the grid."""
        return np.interp(u, self._grid, self._p_zero)


def ti_expected_power(
    zero_ti: ZeroTICurve,
    v: ArrayLike,
    ti: ArrayLike,
) -> np.ndarray | float:
    """Expected 10-minute power at mean speed ``v`` and turbulence ``ti``.

    Raises
    ------
        DataError: If a turbulence intensity is negative.

    """
    v_array = np.asarray(v, dtype=np.float64)
    ti_array = np.asarray(ti, dtype=np.float64)
    if np.any(~(ti_array >= 0)):
        raise DataError("Turbulence intensity must be non-negative")
    result = gaussian_expectation(zero_ti.evaluate, v_array, ti_array * v_array)
    return float(result) if result.ndim == 0 else result


def _simulation_matrix(
    grid: np.ndarray,
    v_bins: np.ndarray,
    sigma_bins: np.ndarray,
) -> np.ndarray:
    """Linear map from knot powers to TI-simulated bin powers.

    Row ``b`` holds the quadrature weights of bin ``b`` spread onto the two
    knots bracketing each quadrature node, so ``W @ p`` equals
    :func:`gaussian_expectation` of the interpolated curve.
    """
    step = grid[1] - grid[0]
    n_bins, n_knots = v_bins.size, grid.size
    nodes = v_bins[:, None] + sigma_bins[:, None] * QUADRATURE_Z
    position = (np.clip(nodes, grid[0], grid[-1]) - grid[0]) / step
    left = np.clip(np.floor(position).astype(np.int64), 0, n_knots - 2)
    fraction = np.clip(position - left, 0.0, 1.0)
    weights = np.broadcast_to(QUADRATURE_WEIGHTS, nodes.shape)
    rows = np.broadcast_to(np.arange(n_bins)[:, None], nodes.shape)

    matrix = np.zeros((n_bins, n_knots))
    np.add.at(matrix, (rows, left), weights * (1.0 - fraction))
    np.add.at(matrix, (rows, left + 1), weights * fraction)
    return matrix


def fit_zero_ti_curve(
    binned: BinnedPowerCurve,
    train: Sequence[ScadaRecord],
    rated_power: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol_kw: float = DEFAULT_TOL_KW,
    grid_step: float = DEFAULT_GRID_STEP,
) -> ZeroTICurve:
    """Deconvolve the binned curve into a zero-turbulence reference curve.

    Starting from the binned curve on a uniform grid, every iteration
    simulates each bin at its mean turbulence intensity and adds the bin
    residual ``p_meas - sim`` back onto the grid. The residual is spread
    through the bin's own turbulence kernel, so at TI = 0 this is the plain
    fixed-point update. Iteration stops once the largest knot update falls
    below ``tol_kw`` or after ``max_iter`` iterations; non-convergence is
    flagged on the result, not raised.

    Args:
    ----
        binned (BinnedPowerCurve): Method-of-bins curve.
        train (Sequence[ScadaRecord]): Training records (for bin mean TI).
        rated_power (float | None, optional): Rated power in kW. Defaults
            to the largest bin mean power.
        max_iter (int, optional): Iteration limit. Defaults to 20.
        tol_kw (float, optional): Convergence tolerance in kW. Defaults
            to 0.5.
        grid_step (float, optional): Knot spacing in m/s. Defaults to 0.25.

    Raises:
    ------
        DataError: If ``train`` is empty.

    Returns:
    -------
        ZeroTICurve: The fitted curve and its convergence state.

    """
    if len(train) == 0:
        raise DataError("Cannot fit a zero-TI curve on an empty training set")
    rated = float(binned.mean_p.max()) if rated_power is None else float(rated_power)
    ceiling = RATED_HEADROOM * rated

    # Mean turbulence intensity per retained bin
    v_n = np.asarray(
        density_normalize(
            np.array([record.v_w for record in train]),
            np.array([record.rho for record in train]),
            binned.rho_ref,
        ),
    )
    ti = np.array([record.ti for record in train])
    keys, inverse, counts = np.unique(
        _bin_index(v_n, binned.bin_width),
        return_inverse=True,
        return_counts=True,
    )
    ti_by_key = dict(zip(keys.tolist(), np.bincount(inverse, weights=ti) / counts))
    global_ti = float(ti.mean())
    ti_bins = np.array(
        [
            ti_by_key.get(int(math.floor(item.v_center / binned.bin_width)), global_ti)
            for item in binned.bins
        ],
    )

    # Uniform grid covering the binned curve
    upper = binned.support[1]
    n_knots = int(math.ceil(upper / grid_step)) + 1
    grid = grid_step * np.arange(n_knots)
    below_cut_in = grid < binned.cut_in

    v_bins = binned.mean_v
    p_meas = binned.mean_p
    matrix = _simulation_matrix(grid, v_bins, ti_bins * v_bins)
    coverage = matrix.sum(axis=0)
    covered = coverage > 1e-12

    p_zero = np.clip(np.interp(grid, v_bins, p_meas), 0.0, ceiling)
    p_zero[below_cut_in] = 0.0

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        residual = p_meas - matrix @ p_zero
        update = np.where(
            covered,
            (matrix.T @ residual) / np.where(covered, coverage, 1.0),
            np.interp(grid, v_bins, residual),
        )
        p_next = np.clip(p_zero + update, 0.0, ceiling)
        p_next[below_cut_in] = 0.0
        max_update = float(np.max(np.abs(p_next - p_zero)))
        p_zero = p_next
        if max_update < tol_kw:
            converged = True
            break

    if not converged:
        logger.warning(
            "Zero-TI iteration did not converge in %d iterations", max_iter,
        )
    return ZeroTICurve(
        grid=[float(value) for value in grid],
        p_zero=[float(value) for value in p_zero],
        cut_in=binned.cut_in,
        converged=converged,
        iterations=iterations,
    )


class IecConfig(BaseModel):

    """Parameters of the IEC baseline fit."""

    kind: Literal["iec"] = "iec"
    bin_width: float = Field(default=DEFAULT_BIN_WIDTH, gt=0)
    min_count: int = Field(default=DEFAULT_MIN_COUNT, ge=1)
    grid_step: float = Field(default=DEFAULT_GRID_STEP, gt=0, le=DEFAULT_GRID_STEP)
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)
    tol_kw: float = Field(default=DEFAULT_TOL_KW, gt=0)
    rated_power: float | None = Field(default=None, gt=0)


class IecModel(BaseModel):

    """Physics baseline satisfying the :class:`Predictor` contract."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["iec"] = "iec"
    binned: BinnedPowerCurve
    zero_ti: ZeroTICurve
    rho_ref: float = Field(gt=0)
    rated_power: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_parts(self) -> IecModel:
        if max(self.zero_ti.p_zero) > RATED_HEADROOM * self.rated_power + 1e-9:
            raise ValueError("Zero-TI curve exceeds the rated power headroom")
        return self

    @property
    def feature_schema(self) -> FeatureSchema:
        return FeatureSchema(names=BASE_FEATURES)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        """Predict power in kW for rows of (v_w, rho, ti)."""
        array = self.feature_schema.check(inputs)
        return np.asarray(
            iec_predict(self, array[:, 0], array[:, 1], array[:, 2]),
        ).reshape(-1)


def fit_iec_model(
    train: Sequence[ScadaRecord],
    config: IecConfig | None = None,
) -> IecModel:
    config = config or IecConfig()
    binned = fit_binned_curve(
        train,
        bin_width=config.bin_width,
        min_count=config.min_count,
    )
    rated = (
        config.rated_power
        if config.rated_power is not None
        else float(binned.mean_p.max())
    )
    zero_ti = fit_zero_ti_curve(
        binned,
        train,
        rated_power=rated,
        max_iter=config.max_iter,
        tol_kw=config.tol_kw,
        grid_step=config.grid_step,
    )
    logger.info(
        "Fitted IEC model: %d bins, zero-TI %s after %d iterations",
        len(binned.bins),
        "converged" if zero_ti.converged else "not converged",
        zero_ti.iterations,
    )
    return IecModel(
        binned=binned,
        zero_ti=zero_ti,
        rho_ref=binned.rho_ref,
        rated_power=rated,
    )


def iec_predict(
    model: IecModel,
    v: ArrayLike,
    rho: ArrayLike,
    ti: ArrayLike,
) -> np.ndarray | float:
    """Predict power at measured density and turbulence, clamped to rating."""
    v_n = density_normalize(v, rho, model.rho_ref)
    expected = np.asarray(ti_expected_power(model.zero_ti, v_n, ti))
    result = np.clip(expected, 0.0, RATED_HEADROOM * model.rated_power)
    return float(result) if result.ndim == 0 else result

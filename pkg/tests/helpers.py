"""Builders shared by the test modules."""

from collections.abc import Callable, Sequence
from datetime import UTC, datetime, timedelta

import numpy as np

from windxai.attribution.reference import ReferencePoint, ReferenceStrategy
from windxai.attribution.shapley import Attribution
from windxai.data.records import ScadaRecord
from windxai.models.predictor import FeatureSchema

START = datetime(2021, 1, 1, tzinfo=UTC)


def make_records(
    v: Sequence[float],
    power: Sequence[float],
    rho: float | Sequence[float] = 1.225,
    ti: float | Sequence[float] = 0.1,
    delta_yaw: float | Sequence[float] = 0.0,
) -> list[ScadaRecord]:
    """Build records on a 10-minute grid from column values."""
    n = len(v)
    columns = np.broadcast_arrays(
        np.asarray(v, dtype=float),
        np.asarray(power, dtype=float),
        np.asarray(rho, dtype=float),
        np.asarray(ti, dtype=float),
        np.asarray(delta_yaw, dtype=float),
    )
    return [
        ScadaRecord(
            timestamp=START + timedelta(minutes=10 * i),
            v_w=float(columns[0][i]),
            power=float(columns[1][i]),
            rho=float(columns[2][i]),
            ti=float(columns[3][i]),
            delta_yaw=float(columns[4][i]),
        )
        for i in range(n)
    ]


class FunctionModel:

    """Predictor wrapping a plain function of the feature matrix."""

    kind = "function"

    def __init__(
        self,
        names: Sequence[str],
        function: Callable[[np.ndarray], np.ndarray],
    ) -> None:
        self._schema = FeatureSchema(names=tuple(names))
        self.function = function

    @property
    def feature_schema(self) -> FeatureSchema:
        return self._schema

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return np.asarray(self.function(self._schema.check(inputs)), dtype=float)


def make_attribution(
    names: Sequence[str],
    phi: Sequence[float],
    strategy: ReferenceStrategy = ReferenceStrategy.MIN,
) -> Attribution:
    """Attribution with a zero reference; ``f_x`` is the sum of ``phi``."""
    names = tuple(names)
    values = np.asarray(phi, dtype=float)
    return Attribution(
        names=names,
        phi=values,
        f_x=float(values.sum()),
        f_ref=0.0,
        x=np.zeros(len(names)),
        reference=ReferencePoint(
            strategy=strategy,
            names=names,
            values=(0.0,) * len(names),
        ),
    )

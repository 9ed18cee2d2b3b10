import pytest

from windxai.data.pipeline import (
    DataSplit,
    default_split_intervals,
    filter_operational,
    split_temporal,
)
from windxai.data.records import ScadaRecord
from windxai.data.synthetic import SynthConfig, generate_synthetic


@pytest.fixture(scope="session")
def synth_config() -> SynthConfig:
    return SynthConfig(n_samples=1500, seed=3)


@pytest.fixture(scope="session")
def synth_records(synth_config: SynthConfig) -> list[ScadaRecord]:
    records, _ = generate_synthetic(synth_config)
    return filter_operational(records)


@pytest.fixture(scope="session")
def synth_split(synth_records: list[ScadaRecord]) -> DataSplit:
    return split_temporal(synth_records, *default_split_intervals(synth_records))

import dataclasses

import pytest

from photon_decision import config as cfgio
from photon_decision.experiment import ExperimentConfig


def single_pair(config: ExperimentConfig, **changes) -> ExperimentConfig:
    source = dataclasses.replace(config.source, single_pair=True)
    return config.replace(source=source, **changes)


def with_mu(config: ExperimentConfig, mu: float, **changes) -> ExperimentConfig:
    source = dataclasses.replace(config.source, mean_pairs_per_pulse=mu, single_pair=False)
    return config.replace(source=source, **changes)


@pytest.fixture
def spacelike():
    return cfgio.preset("spacelike")


@pytest.fixture
def timelike():
    return cfgio.preset("timelike")

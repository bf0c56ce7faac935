"""Shared fixtures: the canonical parameter sets."""

import numpy as np
import pytest

from uav_aoi.params import PropulsionParams, SystemParams


@pytest.fixture
def params() -> SystemParams:
    """The canonical full-scale parameter set used by the worked examples."""
    return SystemParams()


@pytest.fixture
def prop() -> PropulsionParams:
    return PropulsionParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(71)

"""Shared fixtures: default models and reproducible random sampling."""

import numpy as np
import pytest

from uamsim.arm import ArmModel, BatteryCarriage
from uamsim.config import default_config


@pytest.fixture
def arm() -> ArmModel:
    return ArmModel()


@pytest.fixture
def carriage() -> BatteryCarriage:
    return BatteryCarriage()


@pytest.fixture
def config():
    return default_config()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def sample_joints(rng: np.random.Generator, arm: ArmModel, margin: float = 0.05,
                  size: int | None = None) -> np.ndarray:
    """Uniform joint vectors strictly inside the limits."""
    lo = arm.joint_lower + margin
    hi = arm.joint_upper - margin
    if size is None:
        return rng.uniform(lo, hi)
    return rng.uniform(lo, hi, size=(size, arm.dof))


@pytest.fixture
def random_q(rng, arm):
    """Callable returning in-limit joint vectors from the shared generator."""
    def _draw(size: int | None = None, margin: float = 0.05) -> np.ndarray:
        return sample_joints(rng, arm, margin=margin, size=size)
    return _draw

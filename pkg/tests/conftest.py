import numpy as np
import pytest
import torch

from reachsim.arm import ArmModelSpec, NoiseParams, ResetMode
from reachsim.environment import EnvConfig
from reachsim.observation import ObservationLayout
from reachsim.reward import RewardWeights
from reachsim.tasks import SphereTargetSpec, TaskScheduleSpec

torch.set_num_threads(1)


@pytest.fixture
def model():
    return ArmModelSpec()


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def fixed_sphere(centre, radius, dwell=0.25):
    return SphereTargetSpec(
        radius_range=(radius, radius),
        position_ranges=tuple((c, c) for c in centre),
        dwell_duration=dwell,
    )


@pytest.fixture
def easy_config():
    """Single fixed target whose radius covers the whole workspace: the
    dwell timer runs continuously, so every episode succeeds at step 5."""
    task = TaskScheduleSpec(primitives=[fixed_sphere((0.0, 0.0, 0.0), 1.0)])
    return EnvConfig(task=task, reset_mode=ResetMode(variant="zero"), seed=0)


@pytest.fixture
def pointing_config():
    task = TaskScheduleSpec(primitives=[SphereTargetSpec() for _ in range(3)])
    return EnvConfig(task=task, seed=0)

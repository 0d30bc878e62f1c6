import numpy as np
import pytest

from reachsim import arm as armmod
from reachsim import observation as omod
from reachsim.arm import ArmModelSpec, ResetMode
from reachsim.errors import ValidationError
from reachsim.observation import ObservationLayout
from reachsim.tasks import TaskScheduleSpec, advance_schedule, instantiate_episode

from conftest import fixed_sphere


def _schedule(rng, n=2, dwell=0.25):
    spec = TaskScheduleSpec(
        primitives=[fixed_sphere((0.3, 0.0, 0.0), 0.05, dwell) for _ in range(n)]
    )
    return instantiate_episode(spec, rng)


def test_full_layout_dim(model):
    layout = ObservationLayout()
    assert omod.layout_dim(layout, model) == 30


def test_component_dims_sum(model):
    dims = omod.component_dims(model)
    assert dims == {
        "qpos": 4, "qvel": 4, "qacc": 4, "act": 8, "ee_pos": 3,
        "target_pos": 3, "target_size": 1, "phase": 2, "dwell_fraction": 1,
    }


def test_layout_rejects_unknown():
    with pytest.raises(ValidationError):
        ObservationLayout(enabled=("qpos", "banana"))


def test_layout_rejects_empty():
    with pytest.raises(ValidationError):
        ObservationLayout(enabled=())


def test_layout_canonicalizes_order():
    layout = ObservationLayout(enabled=("ee_pos", "qpos", "qpos"))
    assert layout.enabled == ("qpos", "ee_pos")


def test_zero_pose_observation(model, rng):
    arm = armmod.reset(model, ResetMode(variant="zero"), rng)
    sched = _schedule(rng)
    obs = omod.build_observation(arm, sched, ObservationLayout(), model)
    assert obs.shape == (30,)
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    np.testing.assert_allclose(obs[0:4], 2 * (0 - lo) / (hi - lo) - 1, atol=1e-12)
    np.testing.assert_array_equal(obs[4:8], 0.0)  # qvel
    np.testing.assert_array_equal(obs[8:12], 0.0)  # qacc
    np.testing.assert_array_equal(obs[12:20], arm.actuation.act)
    np.testing.assert_allclose(obs[20:23], [0, 0, -0.65], atol=1e-12)
    np.testing.assert_array_equal(obs[23:26], [0.3, 0.0, 0.0])
    assert obs[26] == 0.05  # target size
    np.testing.assert_array_equal(obs[27:29], [0.0, 1.0])  # phase: k=0 of 2
    assert obs[29] == 0.0  # dwell fraction


def test_velocity_and_acceleration_scaling(model, rng):
    arm = armmod.reset(model, ResetMode(variant="zero"), rng)
    arm.joints.qvel[:] = [1.0, -5.0, 10.0, 2.0]
    arm.joints.qacc[:] = [20.0, -100.0, 200.0, 0.0]
    obs = omod.build_observation(arm, _schedule(rng), ObservationLayout(), model)
    np.testing.assert_allclose(obs[4:8], [0.1, -0.5, 1.0, 0.2], atol=1e-12)
    np.testing.assert_allclose(obs[8:12], [0.1, -0.5, 1.0, 0.0], atol=1e-12)


def test_masking_exact_slices(model, rng):
    arm = armmod.reset(model, ResetMode(), rng)
    sched = _schedule(rng)
    full = omod.build_observation(arm, sched, ObservationLayout(), model)
    masked = omod.build_observation(
        arm, sched, ObservationLayout(enabled=("qpos", "ee_pos", "target_pos")), model
    )
    assert masked.shape == (10,)
    np.testing.assert_array_equal(masked[0:4], full[0:4])
    np.testing.assert_array_equal(masked[4:7], full[20:23])
    np.testing.assert_array_equal(masked[7:10], full[23:26])


def test_phase_progression(model, rng):
    arm = armmod.reset(model, ResetMode(variant="zero"), rng)
    sched = _schedule(rng, n=3)
    obs0 = omod.build_observation(arm, sched, ObservationLayout(), model)
    np.testing.assert_array_equal(obs0[27:29], [0.0, 1.0])
    advance_schedule(sched, 0)
    obs1 = omod.build_observation(arm, sched, ObservationLayout(), model)
    np.testing.assert_allclose(obs1[27:29], [0.5, 2.0 / 3.0], atol=1e-12)
    advance_schedule(sched, 1)
    advance_schedule(sched, 2)
    # after the last subtask the phase clamps to the final target
    obs3 = omod.build_observation(arm, sched, ObservationLayout(), model)
    np.testing.assert_allclose(obs3[27:29], [1.0, 1.0 / 3.0], atol=1e-12)


def test_dwell_fraction(model, rng):
    arm = armmod.reset(model, ResetMode(variant="zero"), rng)
    sched = _schedule(rng, dwell=0.25)
    sched.dwell_timer = 0.125
    obs = omod.build_observation(arm, sched, ObservationLayout(), model)
    assert obs[29] == pytest.approx(0.5)


def test_dwell_fraction_zero_for_zero_dwell(model, rng):
    arm = armmod.reset(model, ResetMode(variant="zero"), rng)
    sched = _schedule(rng, dwell=0.0)
    sched.dwell_timer = 0.0
    obs = omod.build_observation(arm, sched, ObservationLayout(), model)
    assert obs[29] == 0.0

import logging
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from reachsim import environment as envmod
from reachsim.arm import ResetMode
from reachsim.environment import BatchEnv, Env, EnvConfig
from reachsim.errors import ValidationError
from reachsim.observation import ObservationLayout
from reachsim.tasks import ButtonSpec, SphereTargetSpec, TaskScheduleSpec

from conftest import fixed_sphere


# ---------------------------------------------------------------------------
# config validation


def test_config_rejects_unreachable_sphere():
    task = TaskScheduleSpec(primitives=[fixed_sphere((2.0, 0.0, 0.0), 0.05)])
    with pytest.raises(ValidationError, match="beyond reach"):
        EnvConfig(task=task)


def test_config_rejects_unreachable_button():
    task = TaskScheduleSpec(primitives=[ButtonSpec(centre=(0.9, 0.0, 0.0))])
    with pytest.raises(ValidationError, match="beyond reach"):
        EnvConfig(task=task)


def test_config_obs_dim(pointing_config):
    assert pointing_config.obs_dim == 30


# ---------------------------------------------------------------------------
# single env basics


def test_reset_returns_observation(easy_config):
    env = Env(easy_config)
    obs = env.reset()
    assert obs.shape == (30,)
    np.testing.assert_allclose(obs[20:23], [0, 0, -0.65], atol=1e-12)


def test_reset_episode_seed_reproducible(pointing_config):
    env = Env(pointing_config)
    env.reset(episode_seed=42)
    c1 = [t.centre.copy() for t in env.schedule.instances]
    env.reset(episode_seed=43)
    env.reset(episode_seed=42)
    c2 = [t.centre.copy() for t in env.schedule.instances]
    for a, b in zip(c1, c2):
        np.testing.assert_array_equal(a, b)


def test_easy_task_completes_quickly(easy_config):
    """The whole workspace is inside the target, so the 0.25 s dwell elapses
    on the 5th control step (5 x 0.05 s) whatever the policy does."""
    env = Env(easy_config)
    env.reset()
    for step in range(1, 6):
        res = env.step(np.zeros(8))
        if step < 5:
            assert res.done == "running"
            assert res.reward.subtask_term == 0.0
    assert res.done == "success"
    assert res.reward.subtask_term == 1.0
    assert res.reward.completion_term == 1.0
    assert res.events["episode_success"]
    assert res.info["completed_flags"] == [True]
    assert res.info["terminal_distance"] < 1.0


def test_step_after_done_rejected(easy_config):
    env = Env(easy_config)
    env.reset()
    for _ in range(5):
        res = env.step(np.zeros(8))
    assert res.done == "success"
    with pytest.raises(ValidationError):
        env.step(np.zeros(8))


def test_timeout_reports_terminal_distance():
    task = TaskScheduleSpec(
        primitives=[fixed_sphere((0.3, 0.0, 0.0), 0.02)], max_episode_duration=0.2
    )
    env = Env(EnvConfig(task=task, reset_mode=ResetMode(variant="zero"), seed=0))
    env.reset()
    res = None
    for _ in range(4):
        res = env.step(np.zeros(8))
    assert res.done == "timeout"
    assert res.info["terminal_distance"] > 0.02
    assert res.info["episode_time"] == pytest.approx(0.2)


def test_action_shape_rejected(easy_config):
    env = Env(easy_config)
    env.reset()
    with pytest.raises(ValidationError):
        env.step(np.zeros((8, 1)))


def test_out_of_range_actions_clipped_with_single_warning(easy_config, caplog):
    env = BatchEnv(easy_config, 2)
    with caplog.at_level(logging.WARNING, logger="reachsim.environment"):
        env.step(np.full((2, 8), 1.5))
        env.step(np.full((2, 8), -0.5))
    warnings = [r for r in caplog.records if "clipped" in r.message]
    assert len(warnings) == 1


# ---------------------------------------------------------------------------
# batch semantics


def test_batch_of_one_matches_env(easy_config):
    env = Env(easy_config)
    batch = BatchEnv(easy_config, 1, auto_reset=False)
    env.reset(episode_seed=7)
    batch.reset_lane(0, episode_seed=7)
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(4):
        a = rng.uniform(0, 1, size=(1, 8))
        r1 = env.step(a[0])
        r2 = batch.step(a)[0]
        np.testing.assert_array_equal(r1.observation, r2.observation)
        assert r1.reward.total == r2.reward.total
        assert r1.done == r2.done


def test_batch_lanes_independent(pointing_config):
    """Stepping a batch gives each lane exactly the same trajectory it would
    have alone, for any batch size."""
    cfg = pointing_config
    big = BatchEnv(cfg, 4, auto_reset=False)
    rng = np.random.Generator(np.random.PCG64(3))
    actions = rng.uniform(0, 1, size=(6, 4, 8))
    for t in range(6):
        big.step(actions[t])
    for lane in range(4):
        solo = BatchEnv(cfg, 4, auto_reset=False)
        for t in range(6):
            solo._step_slice(lane, lane + 1, actions[t])
        np.testing.assert_array_equal(big.qpos[lane], solo.qpos[lane])
        np.testing.assert_array_equal(big.tip[lane], solo.tip[lane])


def test_serial_vs_parallel_byte_identical(pointing_config):
    a = BatchEnv(pointing_config, 8, auto_reset=False, n_workers=1)
    b = BatchEnv(pointing_config, 8, auto_reset=False, n_workers=4)
    rng = np.random.Generator(np.random.PCG64(11))
    for _ in range(10):
        act = rng.uniform(0, 1, size=(8, 8))
        ra = a.step(act)
        rb = b.step(act)
        np.testing.assert_array_equal(a.qpos, b.qpos)
        np.testing.assert_array_equal(a.qvel, b.qvel)
        np.testing.assert_array_equal(a.tip, b.tip)
        for x, y in zip(ra, rb):
            np.testing.assert_array_equal(x.observation, y.observation)
            assert x.reward.total == y.reward.total


def test_auto_reset_starts_new_episode(easy_config):
    batch = BatchEnv(easy_config, 1, auto_reset=True)
    dones = []
    for _ in range(12):
        res = batch.step(np.zeros((1, 8)))[0]
        dones.append(res.done)
    # episodes complete every 5 steps and restart automatically
    assert dones[4] == "success" and dones[9] == "success"
    assert dones[5] == "running"


def test_determinism_same_seed(pointing_config):
    def run():
        batch = BatchEnv(pointing_config, 3, auto_reset=True)
        rng = np.random.Generator(np.random.PCG64(2))
        outs = []
        for _ in range(8):
            res = batch.step(rng.uniform(0, 1, size=(3, 8)))
            outs.append(np.stack([r.observation for r in res]))
        return np.stack(outs)

    np.testing.assert_array_equal(run(), run())


def test_numpy_fallback_matches_kernel(pointing_config):
    from reachsim import _kernel

    if not _kernel.HAVE_NUMBA:
        pytest.skip("numba unavailable; only the numpy path exists")
    a = BatchEnv(pointing_config, 4, auto_reset=False)
    b = BatchEnv(pointing_config, 4, auto_reset=False)
    b._use_kernel = False
    assert a._use_kernel
    rng = np.random.Generator(np.random.PCG64(9))
    for _ in range(10):
        act = rng.uniform(0, 1, size=(4, 8))
        a.step(act)
        b.step(act)
    np.testing.assert_allclose(a.qpos, b.qpos, atol=1e-12)
    np.testing.assert_allclose(a.qvel, b.qvel, atol=1e-10)
    np.testing.assert_allclose(a.tip, b.tip, atol=1e-12)


def test_divergence_isolated_to_one_lane(pointing_config):
    batch = BatchEnv(pointing_config, 3, auto_reset=False)
    healthy_before = batch.qpos[[0, 2]].copy()
    batch.qvel[1] = 99.9  # poised to blow through the safety bound
    batch.act[1] = 1.0
    res = batch.step(np.concatenate([np.zeros((1, 8)), np.ones((1, 8)), np.zeros((1, 8))]))
    assert res[1].done == "diverged"
    assert res[0].done != "diverged"
    assert res[2].done != "diverged"
    assert np.all(np.isfinite(batch.qpos))


def test_button_press_completes_subtask():
    """A button wrapping the resting fingertip registers a press once the
    tip is pushed into it with enough force."""
    btn = ButtonSpec(size=(0.2, 0.2, 0.1), centre=(0.05, 0.0, -0.6), min_touch_force=1.0)
    task = TaskScheduleSpec(primitives=[btn])
    cfg = EnvConfig(task=task, reset_mode=ResetMode(variant="zero"), seed=0)
    env = Env(cfg)
    env.reset()
    res = None
    pressed = False
    for _ in range(int(task.max_episode_duration / cfg.model.control_dt)):
        a = np.zeros(8)
        a[0] = 1.0  # swing forward into the button
        res = env.step(a)
        if res.done == "success":
            pressed = True
            break
    assert pressed
    assert res.reward.completion_term == 1.0

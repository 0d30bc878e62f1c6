import math

import numpy as np
import pytest

from reachsim import motion as momod
from reachsim.errors import ValidationError
from reachsim.motion import (
    FittsPoint,
    Trajectory,
    count_submovements,
    fitts_fit,
    fitts_id,
    fitts_points_from_trajectory,
    movement_time,
    projected_profiles,
    resample,
)


def _traj(samples):
    """samples: list of (t, ee, subtask, in_target)."""
    return Trajectory.from_records(
        [
            {
                "t": t, "ee": ee, "qpos": [0.0] * 4, "action": [0.0] * 8,
                "subtask": k, "in_target": inside,
            }
            for t, ee, k, inside in samples
        ]
    )


def _reach_traj(duration=1.0, dt=0.05, dwell=0.25):
    """Minimum-jerk style reach from z=0 to z=0.3 then a dwell hold."""
    samples = []
    t = 0.0
    while t <= duration + dwell + 1e-9:
        tau = min(t / duration, 1.0)
        z = 0.3 * (10 * tau**3 - 15 * tau**4 + 6 * tau**5)
        inside = abs(z - 0.3) <= 0.03
        samples.append((round(t, 10), [0.3, 0.0, z], 0, inside))
        t += dt
    return _traj(samples)


# ---------------------------------------------------------------------------
# trajectory container


def test_trajectory_rejects_nonmonotonic_times():
    with pytest.raises(ValidationError):
        _traj([(0.0, [0, 0, 0], 0, False), (0.0, [0, 0, 1], 0, False)])


def test_trajectory_jsonl_round_trip():
    traj = _reach_traj()
    again = Trajectory.from_jsonl(traj.to_jsonl())
    assert len(again.samples) == len(traj.samples)
    for a, b in zip(traj.samples, again.samples):
        assert a.t == b.t
        np.testing.assert_array_equal(a.ee, b.ee)
        assert a.in_target == b.in_target


# ---------------------------------------------------------------------------
# resampling


def test_resample_density_and_endpoints():
    traj = _traj(
        [(0.05 * i, [0.0, 0.0, 0.05 * i], 0, False) for i in range(21)]
    )  # 0..1 s at 20 Hz
    out = resample(traj, 100.0)
    assert len(out.samples) == 101
    assert out.samples[0].t == pytest.approx(0.0)
    assert out.samples[-1].t == pytest.approx(1.0)
    np.testing.assert_allclose(out.samples[-1].ee, [0, 0, 1.0], atol=1e-12)


def test_resample_linear_interpolation():
    traj = _traj([(0.0, [0, 0, 0], 0, False), (1.0, [0, 0, 1.0], 0, True)])
    out = resample(traj, 4.0)
    zs = [s.ee[2] for s in out.samples]
    np.testing.assert_allclose(zs, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)
    # annotations come from the nearest previous sample
    assert [s.in_target for s in out.samples] == [False, False, False, False, True]


def test_resample_rejects_bad_input():
    with pytest.raises(ValidationError):
        resample(_traj([(0.0, [0, 0, 0], 0, False)]), 100.0)
    with pytest.raises(ValidationError):
        resample(_reach_traj(), 0.0)


# ---------------------------------------------------------------------------
# movement time


def test_movement_time_simple_reach():
    """Enter at t=2, stay: MT = entry time - activation time."""
    traj = _traj(
        [
            (0.0, [0, 0, 0.0], 0, False),
            (1.0, [0, 0, 0.1], 0, False),
            (2.0, [0, 0, 0.2], 0, True),
            (3.0, [0, 0, 0.2], 0, True),
            (4.0, [0, 0, 0.2], 1, False),
        ]
    )
    assert movement_time(traj, 0) == pytest.approx(2.0)


def test_movement_time_uses_final_unbroken_dwell():
    """An early in-target visit that is later exited does not count."""
    traj = _traj(
        [
            (0.0, [0, 0, 0.0], 0, False),
            (1.0, [0, 0, 0.2], 0, True),  # first touch
            (2.0, [0, 0, 0.4], 0, False),  # overshoot out
            (3.0, [0, 0, 0.2], 0, True),  # final dwell starts here
            (4.0, [0, 0, 0.2], 0, True),
            (5.0, [0, 0, 0.2], 1, False),
        ]
    )
    assert movement_time(traj, 0) == pytest.approx(3.0)


def test_movement_time_none_when_never_completed():
    traj = _traj([(float(i), [0, 0, 0], 0, False) for i in range(5)])
    assert movement_time(traj, 0) is None


def test_movement_time_completion_on_final_sample():
    traj = _traj(
        [
            (0.0, [0, 0, 0.0], 0, False),
            (1.0, [0, 0, 0.2], 0, True),
            (2.0, [0, 0, 0.2], 0, True),
        ]
    )
    assert movement_time(traj, 0) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Fitts quantities


def test_fitts_id_examples():
    assert fitts_id(0.0, 0.1) == 0.0
    assert fitts_id(0.1, 0.1) == pytest.approx(1.0)
    assert fitts_id(0.3, 0.1) == pytest.approx(2.0)
    assert fitts_id(1.5, 0.1) == pytest.approx(4.0)


def test_fitts_id_rejects_bad_args():
    with pytest.raises(ValidationError):
        fitts_id(0.1, 0.0)


def test_fitts_point_validation():
    with pytest.raises(ValidationError):
        FittsPoint(D=0.1, W=0.05, ID=1.0, MT=0.0)


def test_fitts_fit_exact_line():
    points = [
        FittsPoint(D=1, W=1, ID=i, MT=0.2 + 0.15 * i) for i in (1.0, 2.0, 3.0, 4.0)
    ]
    a, b, r2 = fitts_fit(points)
    assert a == pytest.approx(0.2, abs=1e-12)
    assert b == pytest.approx(0.15, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fitts_fit_known_r2():
    ids = np.array([1.0, 2.0, 3.0, 4.0])
    mts = np.array([0.3, 0.5, 0.55, 0.8])
    pts = [FittsPoint(D=1, W=1, ID=i, MT=m) for i, m in zip(ids, mts)]
    a, b, r2 = fitts_fit(pts)
    # reference OLS computed directly
    bb, aa = np.polyfit(ids, mts, 1)
    res = mts - (aa + bb * ids)
    r2_ref = 1 - float(res @ res) / float(((mts - mts.mean()) ** 2).sum())
    assert (a, b, r2) == pytest.approx((aa, bb, r2_ref), abs=1e-12)


def test_fitts_fit_requires_spread():
    pts = [FittsPoint(D=1, W=1, ID=2.0, MT=0.5) for _ in range(4)]
    with pytest.raises(ValidationError):
        fitts_fit(pts)
    with pytest.raises(ValidationError):
        fitts_fit(pts[:2])


# ---------------------------------------------------------------------------
# profiles and submovements


def test_projected_profiles_normalization():
    traj = _traj(
        [
            (0.0, [0.1, 0.0, 0.0], 0, False),
            (0.5, [0.1, 0.0, 0.15], 0, False),
            (1.0, [0.1, 0.0, 0.3], 0, True),
        ]
    )
    pos, vel, ts = projected_profiles(traj, [0.1, 0, 0], [0.1, 0, 0.3])
    np.testing.assert_allclose(pos, [0.0, 0.5, 1.0], atol=1e-12)
    np.testing.assert_allclose(vel, [1.0, 1.0, 1.0], atol=1e-12)


def test_projected_profiles_rejects_degenerate_axis():
    with pytest.raises(ValidationError):
        projected_profiles(_reach_traj(), [0, 0, 0], [0, 0, 0])


def test_minimum_jerk_profile_is_single_submovement():
    tau = np.linspace(0, 1, 101)
    vel = 30 * tau**2 - 60 * tau**3 + 30 * tau**4  # minimum-jerk speed
    assert count_submovements(vel) == 1
    # its peak/mean ratio is the classic 1.875 bell signature
    assert vel.max() / vel.mean() == pytest.approx(1.875, rel=0.02)


def test_two_distinct_peaks_counted():
    t = np.linspace(0, 1, 200)
    vel = np.exp(-((t - 0.3) / 0.07) ** 2) + 0.5 * np.exp(-((t - 0.8) / 0.05) ** 2)
    assert count_submovements(vel) == 2


def test_shallow_ripple_merges_into_one():
    t = np.linspace(0, 1, 200)
    vel = np.exp(-((t - 0.5) / 0.2) ** 2) * (1 + 0.02 * np.sin(40 * t))
    assert count_submovements(vel) == 1


def test_tiny_peaks_below_threshold_ignored():
    t = np.linspace(0, 1, 200)
    vel = np.exp(-((t - 0.4) / 0.08) ** 2) + 0.05 * np.exp(-((t - 0.9) / 0.03) ** 2)
    assert count_submovements(vel, threshold_fraction=0.1) == 1


def test_count_submovements_degenerate():
    assert count_submovements(np.zeros(10)) == 0
    assert count_submovements(np.array([0.0, 1.0])) == 0


# ---------------------------------------------------------------------------
# end-to-end extraction from a synthetic noiseless reach


def test_fitts_points_from_synthetic_reach():
    traj = _reach_traj(duration=1.0, dwell=0.3)
    targets = [
        {"centre": [0.3, 0.0, 0.3], "radius": 0.03, "dwell": 0.25, "kind": "sphere"}
    ]
    pts = fitts_points_from_trajectory(traj, targets, rate_hz=100.0)
    assert len(pts) == 1
    k, p = pts[0]
    assert k == 0
    assert p.D == pytest.approx(0.3, abs=1e-9)
    assert p.W == pytest.approx(0.06, abs=1e-12)
    assert p.ID == pytest.approx(math.log2(0.3 / 0.06 + 1), abs=1e-9)
    # the tip crosses within 3 cm of the target at tau where |z-0.3|=0.03
    assert 0.7 < p.MT <= 1.0


def test_reach_motion_stats_bell_shape():
    traj = _reach_traj(duration=1.0, dwell=0.3)
    target = {"centre": [0.3, 0.0, 0.3], "radius": 0.03, "dwell": 0.25, "kind": "sphere"}
    st = momod.reach_motion_stats(traj, target, 0)
    assert st is not None
    assert st["submovements"] == 1
    # minimum jerk peaks exactly halfway through the movement
    assert st["peak_fraction"] == pytest.approx(0.5, abs=0.1)


def test_default_grid_spans_required_difficulty():
    grid = momod.default_fitts_grid()
    ids = [fitts_id(d, w) for d, w in grid]
    assert len(grid) >= 5
    assert min(ids) <= 1.3
    assert max(ids) >= 3.5
    assert all(1.0 <= i <= 4.0 for i in ids)
    # amplitudes must be bridgeable from the rest fingertip to the target
    # box: the nearest box point is ~0.42 away, the farthest corner ~1.02
    assert all(0.42 <= d <= 1.02 for d, _ in grid)

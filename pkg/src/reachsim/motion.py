"""Post-hoc motion validation: trajectory resampling, movement-time
extraction, Fitts'-Law regression, projected position/velocity profiles and
submovement counting."""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class TrajectorySample:
    t: float
    ee: np.ndarray  # fingertip, m
    qpos: np.ndarray
    action: np.ndarray
    subtask: int
    in_target: bool


@dataclass
class Trajectory:
    samples: list

    def __post_init__(self):
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValidationError("trajectory times must be strictly increasing")

    @classmethod
    def from_records(cls, records):
        return cls(
            samples=[
                TrajectorySample(
                    t=float(r["t"]),
                    ee=np.asarray(r["ee"], dtype=np.float64),
                    qpos=np.asarray(r["qpos"], dtype=np.float64),
                    action=np.asarray(r["action"], dtype=np.float64),
                    subtask=int(r["subtask"]),
                    in_target=bool(r["in_target"]),
                )
                for r in records
            ]
        )

    def to_jsonl(self):
        return "\n".join(
            json.dumps(
                {
                    "t": s.t,
                    "ee": list(s.ee),
                    "qpos": list(s.qpos),
                    "action": list(s.action),
                    "subtask": s.subtask,
                    "in_target": s.in_target,
                }
            )
            for s in self.samples
        )

    @classmethod
    def from_jsonl(cls, text):
        return cls.from_records(
            [json.loads(line) for line in text.splitlines() if line.strip()]
        )


@dataclass
class FittsPoint:
    D: float  # start-to-target distance, m
    W: float  # 2 * target radius, m
    ID: float  # bits
    MT: float  # s

    def __post_init__(self):
        if self.D <= 0 or self.W <= 0:
            raise ValidationError("Fitts D and W must be positive")
        if self.MT <= 0:
            raise ValidationError("Fitts MT must be positive")


def resample(traj, rate_hz):
    """Linear position interpolation onto a uniform 1/rate grid; subtask and
    in-target annotations carried from the nearest previous sample."""
    if len(traj.samples) < 2:
        raise ValidationError("resampling needs at least 2 samples")
    if rate_hz <= 0:
        raise ValidationError("rate must be positive")
    ts = np.array([s.t for s in traj.samples])
    t0, t1 = ts[0], ts[-1]
    dt = 1.0 / rate_hz
    n = int(math.floor((t1 - t0) / dt + 1e-9)) + 1
    grid = t0 + dt * np.arange(n)
    if grid[-1] < t1 - 1e-12:
        grid = np.append(grid, t1)  # preserve the final endpoint exactly
    ee = np.stack([s.ee for s in traj.samples])
    qpos = np.stack([s.qpos for s in traj.samples])
    action = np.stack([s.action for s in traj.samples])
    out = []
    prev_idx = np.clip(np.searchsorted(ts, grid, side="right") - 1, 0, len(ts) - 1)
    for k, t in enumerate(grid):
        i = prev_idx[k]
        src = traj.samples[i]
        out.append(
            TrajectorySample(
                t=float(t),
                ee=np.array([np.interp(t, ts, ee[:, d]) for d in range(3)]),
                qpos=np.array([np.interp(t, ts, qpos[:, d]) for d in range(qpos.shape[1])]),
                action=np.array(
                    [np.interp(t, ts, action[:, d]) for d in range(action.shape[1])]
                ),
                subtask=src.subtask,
                in_target=src.in_target,
            )
        )
    return Trajectory(samples=out)


def movement_time(traj, k):
    """MT for subtask k: start of the successful (final, unbroken) dwell
    minus the time subtask k became current. None if k never completed."""
    samples = traj.samples
    start_t = None
    seg = []
    completed = False
    for i, s in enumerate(samples):
        if s.subtask == k:
            if start_t is None:
                start_t = s.t
            seg.append(s)
        elif s.subtask > k and start_t is not None:
            completed = True
            break
    else:
        # subtask may complete on the final sample (episode success)
        completed = bool(seg) and seg[-1].in_target and _last_subtask_done(traj, k)
    if not completed or start_t is None:
        return None
    # successful dwell = the final contiguous in-target run of the segment
    dwell_start = None
    for s in seg:
        if s.in_target:
            if dwell_start is None:
                dwell_start = s.t
        else:
            dwell_start = None
    if dwell_start is None:
        dwell_start = seg[-1].t
    return dwell_start - start_t


def _last_subtask_done(traj, k):
    last = traj.samples[-1]
    return last.subtask == k and last.in_target


def fitts_id(d, w):
    """Index of difficulty, Shannon formulation: log2(D/W + 1) bits."""
    if d < 0 or w <= 0:
        raise ValidationError("fitts_id needs D >= 0 and W > 0")
    return math.log2(d / w + 1.0)


def fitts_fit(points):
    """OLS of MT on ID: returns (a seconds, b seconds/bit, r_squared)."""
    if len(points) < 3:
        raise ValidationError("fitts_fit needs at least 3 points")
    ids = np.array([p.ID for p in points])
    mts = np.array([p.MT for p in points])
    if np.ptp(ids) < 1e-12:
        raise ValidationError("fitts_fit needs at least 2 distinct IDs")
    b, a = np.polyfit(ids, mts, 1)
    resid = mts - (a + b * ids)
    ss_res = float(resid @ resid)
    ss_tot = float(((mts - mts.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(a), float(b), float(r2)


def projected_profiles(traj, start, target_centre):
    """Scalar projection of the fingertip onto the start->target axis,
    normalized so start = 0 and target centre = 1, plus central-difference
    velocities (1/s) on the trajectory's time grid."""
    start = np.asarray(start, dtype=np.float64)
    target_centre = np.asarray(target_centre, dtype=np.float64)
    axis = target_centre - start
    length = float(np.linalg.norm(axis))
    if length <= 1e-12:
        raise ValidationError("degenerate start->target segment")
    axis = axis / length
    ts = np.array([s.t for s in traj.samples])
    pos = np.array([float((s.ee - start) @ axis) / length for s in traj.samples])
    vel = np.gradient(pos, ts)
    return pos, vel, ts


def count_submovements(velocity, threshold_fraction=0.1):
    """Local velocity maxima above threshold_fraction of the global peak,
    where consecutive peaks must be separated by a trough below 50% of the
    smaller peak (otherwise they merge into one submovement)."""
    v = np.asarray(velocity, dtype=np.float64)
    if v.size < 3:
        return 0
    peak = float(v.max())
    if peak <= 0:
        return 0
    floor = threshold_fraction * peak
    candidates = [
        i
        for i in range(1, v.size - 1)
        if v[i] >= v[i - 1] and v[i] > v[i + 1] and v[i] >= floor
    ]
    if not candidates:
        return 0
    accepted = [candidates[0]]
    for i in candidates[1:]:
        prev = accepted[-1]
        trough = float(v[prev : i + 1].min())
        smaller = min(v[prev], v[i])
        if trough < 0.5 * smaller:
            accepted.append(i)
        elif v[i] > v[prev]:
            accepted[-1] = i  # same submovement; keep the taller peak
    return len(accepted)


# ---------------------------------------------------------------------------
# end-to-end Fitts battery


def fitts_points_from_trajectory(traj, targets, rate_hz=100.0, subtasks=None):
    """(subtask index, FittsPoint) per completed sphere subtask of one episode.

    targets: the episode's concrete target descriptions
    (dicts with centre, radius, dwell, kind). D is measured from the
    fingertip position at subtask activation to the target centre.
    """
    rs = resample(traj, rate_hz)
    points = []
    for k, tgt in enumerate(targets):
        if tgt["kind"] != "sphere":
            continue
        if subtasks is not None and k not in subtasks:
            continue
        mt = movement_time(rs, k)
        if mt is None or mt <= 0:
            continue
        start = next((s.ee for s in rs.samples if s.subtask == k), None)
        if start is None:
            continue
        d = float(np.linalg.norm(np.asarray(tgt["centre"]) - start))
        w = 2.0 * float(tgt["radius"])
        if d <= 0 or w <= 0:
            continue
        points.append((k, FittsPoint(D=d, W=w, ID=fitts_id(d, w), MT=mt)))
    return points


def fitts_points_csv(points):
    lines = ["D,W,ID,MT"]
    lines += [f"{p.D:.6f},{p.W:.6f},{p.ID:.6f},{p.MT:.6f}" for p in points]
    return "\n".join(lines)


def reach_motion_stats(traj, target, k, rate_hz=100.0):
    """Bell-shape statistics for one completed reach: submovement count and
    the peak-velocity time as a fraction of MT. None if k was not completed
    with positive MT."""
    rs = resample(traj, rate_hz)
    mt = movement_time(rs, k)
    if mt is None or mt <= 0:
        return None
    seg = [s for s in rs.samples if s.subtask == k]
    if len(seg) < 3:
        return None
    start = seg[0].ee
    centre = np.asarray(target["centre"], dtype=np.float64)
    if float(np.linalg.norm(centre - start)) <= 1e-9:
        return None
    sub = Trajectory(samples=seg)
    _, vel, ts = projected_profiles(sub, start, centre)
    n_sub = count_submovements(vel, 0.1)
    t_act = seg[0].t
    t_peak = float(ts[int(np.argmax(vel))])
    return {
        "mt": mt,
        "submovements": n_sub,
        "peak_fraction": (t_peak - t_act) / mt,
    }


# ---------------------------------------------------------------------------
# evaluation battery


# Nominal fingertip position of the rest posture (arm hanging); battery
# reaches start here, so amplitudes are measured from this point.
REST_FINGERTIP = (0.0, 0.0, -0.65)


def default_fitts_grid():
    """(D, W) cells spanning ID in [1, 4] bits inside the workspace.

    Distances are measured from the rest fingertip position, which sits
    0.42-1.02 m from the target sampling box, so amplitudes run 0.45-0.90.
    """
    widths = (0.08, 0.13, 0.21, 0.34)
    distances = (0.45, 0.60, 0.75, 0.90)
    return [
        (d, w)
        for d in distances
        for w in widths
        if 1.0 <= fitts_id(d, w) <= 4.0
    ]


def _sample_target_on_shell(rng, d, lo, hi, centre, tol=0.01, max_tries=10000):
    """Uniform point of the box [lo, hi] whose distance to `centre` is
    within tol of d; None if the shell misses the box."""
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    centre = np.asarray(centre)
    for _ in range(max_tries):
        p = rng.uniform(lo, hi)
        if abs(float(np.linalg.norm(p - centre)) - d) < tol:
            return p
    return None


def fitts_battery(
    policy_fn, base_config, reaches_per_cell=12, seed=0, grid=None, rate_hz=100.0
):
    """Controlled single-reach episodes over a (D, W) grid.

    Each episode places one sphere of width W at distance D (within 1 cm)
    from the rest fingertip position, sampled inside the task's target box
    so target placement matches the policy's training distribution; the
    position is re-sampled per episode so outcomes within a cell are not
    all copies of one deterministic rollout. MT runs from movement start to
    target entry (a short 0.1 s dwell confirms the hit without imposing a
    long hold). The regression runs on per-cell mean MT against the cell's
    nominal ID (the conventional condition-level analysis); per-reach
    points keep the empirical start-to-centre distance for reference.
    Returns the per-reach points, the per-cell points, the
    (a, b, r_squared) fit, and the bell-shape statistics of every
    successful reach.
    """
    from dataclasses import replace

    from .metrics import evaluation_run
    from .tasks import SphereTargetSpec, TaskScheduleSpec

    if grid is None:
        grid = default_fitts_grid()
    box_lo = [r[0] for r in base_config.task.primitives[0].position_ranges]
    box_hi = [r[1] for r in base_config.task.primitives[0].position_ranges]
    rng = np.random.Generator(np.random.PCG64(seed))
    points = []
    stats = []
    per_cell = []
    for c, (d, w) in enumerate(grid):
        cell_points = []
        for j in range(reaches_per_cell):
            pos = _sample_target_on_shell(rng, d, box_lo, box_hi, REST_FINGERTIP)
            if pos is None:
                continue
            primitives = [
                SphereTargetSpec(
                    radius_range=(w / 2, w / 2),
                    position_ranges=tuple((float(v), float(v)) for v in pos),
                    dwell_duration=0.10,
                ),
            ]
            config = replace(
                base_config,
                task=TaskScheduleSpec(primitives=primitives),
                seed=base_config.seed + 7919 * (c + 1) + j,
            )
            _, trajs = evaluation_run(
                policy_fn, config, 1, seed=seed + 1000 * (c + 1) + j,
                deterministic=True, record_trajectories=True,
            )
            traj = trajs[0]
            if not traj["success"]:
                continue
            t = Trajectory.from_records(traj["samples"])
            for k, p in fitts_points_from_trajectory(
                t, traj["targets"], rate_hz, subtasks=(0,)
            ):
                cell_points.append(p)
                st = reach_motion_stats(t, traj["targets"][k], k, rate_hz)
                if st is not None:
                    stats.append(st)
        points.extend(cell_points)
        if cell_points:
            per_cell.append(
                FittsPoint(
                    D=d,
                    W=w,
                    ID=fitts_id(d, w),
                    MT=float(np.mean([p.MT for p in cell_points])),
                )
            )
    fit = fitts_fit(per_cell) if len(per_cell) >= 3 else None
    return {"points": points, "per_cell": per_cell, "fit": fit, "motion": stats}

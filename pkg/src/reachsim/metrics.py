"""Training diagnostics: metric records, the JSONL sink with live
subscribers, per-update rollout aggregation and isolated evaluation runs."""

import json
import math
import queue
import threading
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

SUBSCRIBER_BUFFER = 4096  # live records per subscriber before drops begin


@dataclass
class MetricRecord:
    step: int
    name: str
    value: float
    run_id: str = ""
    wall_time: float = 0.0

    def to_json(self):
        return json.dumps(
            {
                "step": self.step,
                "name": self.name,
                "value": self.value,
                "run_id": self.run_id,
                "wall_time": self.wall_time,
            }
        )


class MetricsSink:
    """File-first metric stream: every record reaches the JSONL file; live
    subscribers receive best-effort pushes with per-subscriber drop counters."""

    def __init__(self, path, run_id=""):
        self.path = path
        self.run_id = run_id
        seq = 0
        try:
            with open(path, encoding="utf-8") as fh:
                seq = sum(1 for line in fh if line.strip())
        except FileNotFoundError:
            pass
        self._seq = seq  # 1-based sequence = line number in the JSONL file
        self._fh = open(path, "a", encoding="utf-8")
        self._lock = threading.Lock()
        self._subscribers = {}
        self._drops = {}
        self._next_sub = 0
        self.closed = False

    def emit(self, record):
        if not math.isfinite(record.value):
            raise ValidationError(f"non-finite metric value for {record.name!r}")
        if not record.run_id:
            record.run_id = self.run_id
        if not record.wall_time:
            record.wall_time = _time.time()
        line = record.to_json()
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()
            self._seq += 1
            for sid, q in self._subscribers.items():
                try:
                    q.put_nowait((self._seq, line))
                except queue.Full:
                    self._drops[sid] += 1

    def emit_many(self, records):
        for r in records:
            self.emit(r)

    def subscribe(self):
        with self._lock:
            sid = self._next_sub
            self._next_sub += 1
            q = queue.Queue(maxsize=SUBSCRIBER_BUFFER)
            self._subscribers[sid] = q
            self._drops[sid] = 0
        return sid, q

    def unsubscribe(self, sid):
        with self._lock:
            self._subscribers.pop(sid, None)

    def drops(self, sid):
        return self._drops.get(sid, 0)

    def close(self):
        with self._lock:
            self._fh.close()
            self.closed = True


def read_metrics(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                d = json.loads(line)
                records.append(MetricRecord(**d))
    return records


# ---------------------------------------------------------------------------
# aggregation


def aggregate_rollout(episodes, step, n_subtasks, run_id=""):
    """Metric records summarising the episodes finished in one update window.

    episodes: list of dicts with keys success, completed_flags,
    length_steps, duration, components (name -> per-episode sum).
    """
    records = [MetricRecord(step, "episodes_finished", float(len(episodes)), run_id)]
    if not episodes:
        return records
    n = len(episodes)
    records.append(
        MetricRecord(
            step, "success_rate", sum(1.0 for e in episodes if e["success"]) / n, run_id
        )
    )
    for k in range(n_subtasks):
        rate = sum(1.0 for e in episodes if e["completed_flags"][k]) / n
        records.append(MetricRecord(step, f"subtask_{k}_rate", rate, run_id))
    for comp in ("distance", "subtask", "completion", "effort", "total"):
        mean = sum(e["components"][comp] for e in episodes) / n
        records.append(MetricRecord(step, f"reward_{comp}", mean, run_id))
    records.append(
        MetricRecord(
            step, "episode_length", sum(e["length_steps"] for e in episodes) / n, run_id
        )
    )
    records.append(
        MetricRecord(
            step,
            "terminal_distance",
            sum(e["terminal_distance"] for e in episodes) / n,
            run_id,
        )
    )
    return records


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalReport:
    n_episodes: int
    success_rate: float
    subtask_rates: list
    mean_terminal_distance: float
    terminal_distance_percentiles: dict
    spatial_bins: list  # (position triple, size, success rate, count)
    mean_episode_duration: float
    mean_movement_times: list = field(default_factory=list)

    def to_dict(self):
        return {
            "n_episodes": self.n_episodes,
            "success_rate": self.success_rate,
            "subtask_rates": self.subtask_rates,
            "mean_terminal_distance": self.mean_terminal_distance,
            "terminal_distance_percentiles": self.terminal_distance_percentiles,
            "spatial_bins": self.spatial_bins,
            "mean_episode_duration": self.mean_episode_duration,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


SPATIAL_BIN = 0.05  # m


def evaluation_run(
    policy_fn, config, n_episodes, seed, deterministic=True, record_trajectories=False
):
    """Roll isolated episodes with the given policy and summarise them.

    policy_fn(observation, deterministic) -> control vector in [0,1]^A.
    Returns (EvalReport, trajectories); trajectories is empty unless
    record_trajectories is set.
    """
    from .environment import Env, RUNNING

    if n_episodes < 1:
        raise ValidationError("n_episodes must be >= 1")
    env = Env(config)
    n_sub = config.task.n_subtasks
    successes = 0
    flags_count = [0] * n_sub
    terminal_distances = []
    durations = []
    bins = {}
    trajectories = []

    for ep in range(n_episodes):
        obs = env.reset(episode_seed=(seed, ep))
        sched = env.schedule
        samples = []
        done = RUNNING
        while done == RUNNING:
            action = policy_fn(obs, deterministic)
            pre_index = sched.current_index
            result = env.step(action)
            done = result.done
            obs = result.observation
            if record_trajectories:
                b = env._batch
                target = sched.instances[min(pre_index, n_sub - 1)]
                inside = bool(
                    np.linalg.norm(b.tip[0] - target.centre) <= target.radius
                )
                samples.append(
                    {
                        "t": float(b.time[0]),
                        "ee": [float(x) for x in b.tip[0]],
                        "qpos": [float(x) for x in b.qpos[0]],
                        "action": [float(x) for x in np.asarray(action)],
                        "subtask": int(pre_index),
                        "in_target": inside,
                    }
                )
        success = done == "success"
        successes += success
        for k in range(n_sub):
            flags_count[k] += bool(sched.completed_flags[k])
        terminal_distances.append(result.info["terminal_distance"])
        durations.append(result.info["episode_time"])
        # spatial bin keyed by the failing-or-final subtask's target
        ref = min(sched.current_index, n_sub - 1)
        target = sched.instances[ref]
        key = tuple(int(round(c / SPATIAL_BIN)) for c in target.centre)
        hit, total, size_sum = bins.get(key, (0, 0, 0.0))
        bins[key] = (hit + int(success), total + 1, size_sum + target.radius)
        if record_trajectories:
            trajectories.append(
                {"samples": samples, "success": success,
                 "targets": [
                     {"centre": [float(x) for x in t.centre], "radius": float(t.radius),
                      "dwell": float(t.dwell_duration), "kind": t.kind}
                     for t in sched.instances
                 ]}
            )

    td = np.asarray(terminal_distances)
    report = EvalReport(
        n_episodes=n_episodes,
        success_rate=successes / n_episodes,
        subtask_rates=[c / n_episodes for c in flags_count],
        mean_terminal_distance=float(td.mean()),
        terminal_distance_percentiles={
            "p50": float(np.percentile(td, 50)),
            "p90": float(np.percentile(td, 90)),
            "p99": float(np.percentile(td, 99)),
        },
        spatial_bins=[
            {
                "position": [k[0] * SPATIAL_BIN, k[1] * SPATIAL_BIN, k[2] * SPATIAL_BIN],
                "mean_size": size_sum / total,
                "success_rate": hit / total,
                "count": total,
            }
            for k, (hit, total, size_sum) in sorted(bins.items())
        ],
        mean_episode_duration=float(np.mean(durations)),
    )
    return report, trajectories


def eval_report_csv_row(step, report):
    """One CSV row per evaluation: step, success, mean terminal distance, duration."""
    return (
        f"{step},{report.n_episodes},{report.success_rate:.6f},"
        f"{report.mean_terminal_distance:.6f},{report.mean_episode_duration:.6f}"
    )


EVAL_CSV_HEADER = "step,n_episodes,success_rate,mean_terminal_distance,mean_episode_duration"

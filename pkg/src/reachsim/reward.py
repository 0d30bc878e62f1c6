"""Four-term weighted reward: distance shaping, subtask bonus, completion
bonus and a neural-effort penalty, with per-step decomposition and
theoretical per-component bounds used for interface tooltips."""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class RewardWeights:
    w_distance: float = 1.0
    w_subtask: float = 5.0
    w_completion: float = 10.0
    w_effort: float = 0.05

    def __post_init__(self):
        for name in ("w_distance", "w_subtask", "w_completion", "w_effort"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")


@dataclass
class RewardBreakdown:
    distance_term: float
    subtask_term: float
    completion_term: float
    effort_term: float
    total: float

    def as_dict(self):
        return {
            "distance": self.distance_term,
            "subtask": self.subtask_term,
            "completion": self.completion_term,
            "effort": self.effort_term,
            "total": self.total,
        }


def distance_term(fingertip, centres, current_index):
    """-(|p - c_k| + sum of consecutive centre distances of remaining targets)."""
    n = len(centres)
    if current_index >= n:
        raise ValidationError("current_index beyond target list")
    p = np.asarray(fingertip, dtype=np.float64)
    d = float(np.linalg.norm(p - centres[current_index]))
    for i in range(current_index, n - 1):
        d += float(np.linalg.norm(centres[i] - centres[i + 1]))
    return -d


def effort_term(intended):
    """Mean squared intended control, negated."""
    a = np.asarray(intended, dtype=np.float64)
    if np.any(a < 0) or np.any(a > 1):
        raise ValidationError("controls must lie in [0, 1]")
    return -float(np.mean(a * a))


def compute_reward(
    fingertip, centres, current_index, subtask_event, completion_event, intended, weights
):
    """Per-step breakdown; bonus indicators are 0/1 before weighting."""
    dist = distance_term(fingertip, centres, current_index)
    sub = 1.0 if subtask_event else 0.0
    comp = 1.0 if completion_event else 0.0
    eff = effort_term(intended)
    total = (
        weights.w_distance * dist
        + weights.w_subtask * sub
        + weights.w_completion * comp
        + weights.w_effort * eff
    )
    return RewardBreakdown(dist, sub, comp, eff, total)


def _max_chain_distance(task, reach):
    """Largest start-to-end chain distance attainable from the sampling ranges."""
    corners = []
    for prim in task.primitives:
        if prim.kind == "sphere":
            (x0, x1), (y0, y1), (z0, z1) = prim.position_ranges
            corners.append(
                [np.array([x, y, z]) for x in (x0, x1) for y in (y0, y1) for z in (z0, z1)]
            )
        else:
            corners.append([np.asarray(prim.centre, dtype=np.float64)])
    # fingertip can be anywhere within reach of the shoulder
    d_max = 0.0
    for first in corners[0]:
        d_max = max(d_max, float(np.linalg.norm(first)) + reach)
    chain = 0.0
    for a_set, b_set in zip(corners[:-1], corners[1:]):
        chain += max(
            float(np.linalg.norm(a - b)) for a in a_set for b in b_set
        )
    return d_max + chain


def reward_bounds(task, weights, max_steps, reach=0.65):
    """Per-component (min, max) over an episode, scaled by the weights."""
    n = task.n_subtasks
    d_max = _max_chain_distance(task, reach)
    return {
        "distance": (-weights.w_distance * max_steps * d_max, 0.0),
        "subtask": (0.0, weights.w_subtask * n),
        "completion": (0.0, weights.w_completion * 1.0),
        "effort": (-weights.w_effort * max_steps, 0.0),
    }

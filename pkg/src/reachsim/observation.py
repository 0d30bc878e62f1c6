"""Assembly of the policy input vector from proprioceptive and task components.

Components can be masked individually (e.g. to model proprioceptive
deficits); the canonical ordering is fixed regardless of the order in
which components were enabled.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

COMPONENT_ORDER = (
    "qpos", "qvel", "qacc", "act", "ee_pos",
    "target_pos", "target_size", "phase", "dwell_fraction",
)

QVEL_SCALE = 10.0  # rad/s
QACC_SCALE = 200.0  # rad/s^2


@dataclass
class ObservationLayout:
    enabled: tuple = COMPONENT_ORDER

    def __post_init__(self):
        unknown = [c for c in self.enabled if c not in COMPONENT_ORDER]
        if unknown:
            raise ValidationError(f"unknown observation components: {unknown}")
        if not self.enabled:
            raise ValidationError("observation layout must enable at least one component")
        # canonical order, duplicates dropped
        self.enabled = tuple(c for c in COMPONENT_ORDER if c in self.enabled)


def component_dims(model):
    j, a = model.joint_count, model.actuator_count
    return {
        "qpos": j, "qvel": j, "qacc": j, "act": a, "ee_pos": 3,
        "target_pos": 3, "target_size": 1, "phase": 2, "dwell_fraction": 1,
    }


def layout_dim(layout, model):
    dims = component_dims(model)
    return sum(dims[c] for c in layout.enabled)


def build_observation(arm, active, layout, model):
    """Observation vector of layout_dim entries for one instance."""
    if not layout.enabled:
        raise ValidationError("empty observation layout")
    target = active.current
    n = active.n_subtasks
    k = min(active.current_index, n - 1)
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    parts = {
        "qpos": 2.0 * (arm.joints.qpos - lo) / (hi - lo) - 1.0,
        "qvel": arm.joints.qvel / QVEL_SCALE,
        "qacc": arm.joints.qacc / QACC_SCALE,
        "act": arm.actuation.act,
        "ee_pos": arm.fingertip,
        "target_pos": target.centre,
        "target_size": np.array([target.radius]),
        "phase": np.array([k / (n - 1) if n > 1 else 0.0, (n - k) / n]),
        "dwell_fraction": np.array(
            [
                active.dwell_timer / target.dwell_duration
                if target.dwell_duration > 0
                else 0.0
            ]
        ),
    }
    return np.concatenate([np.atleast_1d(parts[c]) for c in layout.enabled]).astype(
        np.float64
    )

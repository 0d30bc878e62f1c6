"""Composable pointing and button-press primitives and the episode phase machine.

Schedules are ordered lists of sphere (dwell pointing) and button (force
threshold) primitives. Each episode concretizes the spheres by sampling
radius and position, then the fingertip must complete the primitives
strictly in order.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass
class SphereTargetSpec:
    radius_range: tuple = (0.05, 0.10)
    position_ranges: tuple = ((0.225, 0.35), (-0.15, 0.15), (-0.3, 0.3))
    dwell_duration: float = 0.25
    colour: tuple = (0.8, 0.2, 0.2)

    kind = "sphere"

    def __post_init__(self):
        r0, r1 = self.radius_range
        if not (0 < r0 <= r1):
            raise ValidationError("sphere radius_range must satisfy 0 < r_min <= r_max")
        if len(self.position_ranges) != 3:
            raise ValidationError("position_ranges needs one [min, max] per axis")
        for lo, hi in self.position_ranges:
            if lo > hi:
                raise ValidationError("position range min must be <= max")
        if self.dwell_duration < 0:
            raise ValidationError("dwell_duration must be >= 0")


@dataclass
class ButtonSpec:
    size: tuple = (0.05, 0.05, 0.02)  # (w, h, d)
    centre: tuple = (0.42, 0.0, 0.0)
    min_touch_force: float = 1.0
    orientation_deg: float = 0.0
    colour: tuple = (0.2, 0.8, 0.2)

    kind = "button"

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise ValidationError("button size components must be positive")
        if self.min_touch_force <= 0:
            raise ValidationError("min_touch_force must be positive")


@dataclass
class ContactParams:
    stiffness: float = 1000.0
    damping: float = 10.0

    def __post_init__(self):
        if self.stiffness < 0 or self.damping < 0:
            raise ValidationError("contact parameters must be non-negative")


@dataclass
class TaskScheduleSpec:
    primitives: list
    max_episode_duration: float = None  # default: 4 s per primitive
    contact: ContactParams = field(default_factory=ContactParams)

    def __post_init__(self):
        if not self.primitives:
            raise ValidationError("schedule needs at least one primitive")
        if self.max_episode_duration is None:
            self.max_episode_duration = 4.0 * len(self.primitives)
        if self.max_episode_duration <= 0:
            raise ValidationError("max_episode_duration must be positive")

    @property
    def n_subtasks(self):
        return len(self.primitives)

    @property
    def total_dwell(self):
        return sum(
            p.dwell_duration for p in self.primitives if p.kind == "sphere"
        )


@dataclass
class ConcreteTarget:
    """A per-episode instance of one primitive."""

    kind: str
    centre: np.ndarray
    radius: float  # sphere radius, or min(w,h)/2 for buttons (observation size)
    dwell_duration: float  # 0 for buttons
    spec: object  # the originating SphereTargetSpec or ButtonSpec


@dataclass
class ActiveSchedule:
    instances: list
    current_index: int = 0
    dwell_timer: float = 0.0
    completed_flags: list = None
    first_completion_events: list = None

    def __post_init__(self):
        n = len(self.instances)
        if self.completed_flags is None:
            self.completed_flags = [False] * n
        if self.first_completion_events is None:
            self.first_completion_events = [False] * n

    @property
    def n_subtasks(self):
        return len(self.instances)

    @property
    def all_complete(self):
        return all(self.completed_flags)

    @property
    def current(self):
        return self.instances[min(self.current_index, self.n_subtasks - 1)]


def instantiate_episode(spec, rng):
    """Sample concrete targets for one episode (3+1 draws per sphere)."""
    instances = []
    for prim in spec.primitives:
        if prim.kind == "sphere":
            (x0, x1), (y0, y1), (z0, z1) = prim.position_ranges
            centre = np.array(
                [rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(z0, z1)]
            )
            radius = rng.uniform(prim.radius_range[0], prim.radius_range[1])
            instances.append(
                ConcreteTarget("sphere", centre, radius, prim.dwell_duration, prim)
            )
        else:
            instances.append(
                ConcreteTarget(
                    "button",
                    np.asarray(prim.centre, dtype=np.float64),
                    min(prim.size[0], prim.size[1]) / 2.0,
                    0.0,
                    prim,
                )
            )
    return ActiveSchedule(instances=instances)


def update_pointing(fingertip, target, dwell_timer, dt):
    """Accumulate dwell while inside the sphere; reset to zero on exit."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    inside = bool(
        np.linalg.norm(np.asarray(fingertip) - target.centre) <= target.radius
    )
    new_timer = dwell_timer + dt if inside else 0.0
    return inside, new_timer, inside and new_timer >= target.dwell_duration


def _button_frame(button):
    """Rotation from world to button frame (about the y axis)."""
    th = math.radians(button.orientation_deg)
    c, s = math.cos(th), math.sin(th)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def button_contact_force(fingertip, velocity, button, contact):
    """Penalty contact: scalar normal force and its world-frame vector.

    The fingertip is transformed into the button frame; if inside the box,
    the force acts along the nearest face normal with magnitude
    max(0, stiffness * penetration - damping * approach_velocity).
    Returns (force_newton, world_force_vector).
    """
    r = _button_frame(button)
    centre = np.asarray(button.centre, dtype=np.float64)
    p_local = r.T @ (np.asarray(fingertip) - centre)
    v_local = r.T @ np.asarray(velocity)
    # local axes: x = depth (face normal), y = width, z = height
    half = np.array([button.size[2], button.size[0], button.size[1]]) / 2.0
    if np.any(np.abs(p_local) > half):
        return 0.0, np.zeros(3)
    # nearest face along each axis; pick the shallowest penetration
    depths = half - np.abs(p_local)
    axis = int(np.argmin(depths))
    normal_local = np.zeros(3)
    normal_local[axis] = 1.0 if p_local[axis] >= 0 else -1.0
    approach = -float(v_local @ normal_local)  # positive when moving inward
    force = max(0.0, contact.stiffness * float(depths[axis]) - contact.damping * approach)
    return force, force * (r @ normal_local)


def advance_schedule(active, subtask_index):
    """Mark the current primitive complete and move to the next one."""
    if subtask_index != active.current_index:
        raise ValidationError(
            f"completion signalled for subtask {subtask_index}, "
            f"but current is {active.current_index}"
        )
    if active.completed_flags[subtask_index]:
        return active
    active.completed_flags[subtask_index] = True
    if not active.first_completion_events[subtask_index]:
        active.first_completion_events[subtask_index] = True
    active.current_index += 1
    active.dwell_timer = 0.0
    return active


def is_episode_done(active, time, spec):
    """'success' | 'timeout' | 'running'."""
    if active.all_complete:
        return "success"
    if time >= spec.max_episode_duration:
        return "timeout"
    return "running"

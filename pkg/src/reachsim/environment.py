"""Episodic environment composing arm dynamics, task schedule, reward and
observation, plus a vectorized batch of independent instances.

The batch keeps structure-of-arrays mirrors of the hot per-instance state
(joints, activations, current-target geometry, dwell timers) and advances
all instances with elementwise numpy kernels. Every operation is
elementwise along the instance axis, so results are bitwise identical for
any partitioning of the batch — a single instance is just a batch of one.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernel

from . import arm as armmod
from . import observation as obsmod
from . import reward as rewmod
from . import tasks as taskmod
from .arm import ArmModelSpec, NoiseParams, ResetMode
from .errors import ValidationError
from .observation import ObservationLayout
from .reward import RewardWeights
from .tasks import TaskScheduleSpec

log = logging.getLogger(__name__)

RUNNING, SUCCESS, TIMEOUT, DIVERGED = "running", "success", "timeout", "diverged"


@dataclass
class EnvConfig:
    model: ArmModelSpec = field(default_factory=ArmModelSpec)
    task: TaskScheduleSpec = None
    weights: RewardWeights = field(default_factory=RewardWeights)
    layout: ObservationLayout = field(default_factory=ObservationLayout)
    noise: NoiseParams = field(default_factory=NoiseParams)
    reset_mode: ResetMode = field(default_factory=ResetMode)
    seed: int = 0

    def __post_init__(self):
        if self.task is None:
            self.task = TaskScheduleSpec(primitives=[taskmod.SphereTargetSpec()])
        self.validate()

    def validate(self):
        problems = []
        if not self.layout.enabled:
            problems.append("layout: no components enabled")
        reach = self.model.reach
        for i, prim in enumerate(self.task.primitives):
            if prim.kind == "sphere":
                nearest = np.array([
                    min(abs(lo), abs(hi)) if lo * hi > 0 else 0.0
                    for lo, hi in prim.position_ranges
                ])
                if float(np.linalg.norm(nearest)) > reach:
                    problems.append(
                        f"primitive {i}: sampling box entirely beyond reach {reach:.3f} m"
                    )
            else:
                if float(np.linalg.norm(prim.centre)) > reach:
                    problems.append(
                        f"primitive {i}: button centre beyond reach {reach:.3f} m"
                    )
        if problems:
            raise ValidationError("; ".join(problems))

    @property
    def obs_dim(self):
        return obsmod.layout_dim(self.layout, self.model)


@dataclass
class StepResult:
    observation: np.ndarray
    reward: rewmod.RewardBreakdown
    done: str  # running | success | timeout | diverged
    events: dict
    info: dict


class BatchEnv:
    """N independent environment instances advanced by vectorized kernels."""

    def __init__(self, config, n, auto_reset=True, n_workers=1):
        config.validate()
        self.config = config
        self.n = n
        self.auto_reset = auto_reset
        self.n_workers = max(1, int(n_workers))
        self._pool = (
            ThreadPoolExecutor(max_workers=self.n_workers)
            if self.n_workers > 1
            else None
        )
        model = config.model
        children = np.random.SeedSequence(config.seed).spawn(n)
        self.rngs = [np.random.Generator(np.random.PCG64(c)) for c in children]

        j, a = model.joint_count, model.actuator_count
        self.qpos = np.zeros((n, j))
        self.qvel = np.zeros((n, j))
        self.qacc = np.zeros((n, j))
        self.act = np.zeros((n, a))
        self.tip = np.zeros((n, 3))
        self.time = np.zeros(n)
        self.dwell = np.zeros(n)
        self.schedules = [None] * n
        # current-target mirrors
        self.tgt_centre = np.zeros((n, 3))
        self.tgt_radius = np.zeros(n)
        self.tgt_dwell = np.zeros(n)
        self.is_button = np.zeros(n, dtype=bool)
        self.btn_rot = np.tile(np.eye(3), (n, 1, 1))
        self.btn_half = np.ones((n, 3))
        self.btn_minforce = np.ones(n)
        self._k = np.zeros(n)  # clamped current subtask index per lane
        self._n = np.full(n, float(config.task.n_subtasks))
        # remaining inter-target chain distance from the current target on
        self._chain_rest = np.zeros(n)
        self._suffix = [None] * n
        self._warned_clip = False
        self._use_kernel = _kernel.HAVE_NUMBA and not os.environ.get(
            "REACHSIM_NO_NUMBA"
        )
        for i in range(n):
            self.reset_lane(i)

    # -- lifecycle ----------------------------------------------------------

    def reset_lane(self, i, episode_seed=None):
        if episode_seed is not None:
            if isinstance(episode_seed, (tuple, list)):
                extra = [int(x) for x in episode_seed]
            else:
                extra = [int(episode_seed)]
            ss = np.random.SeedSequence([self.config.seed] + extra)
            self.rngs[i] = np.random.Generator(np.random.PCG64(ss))
        state = armmod.reset(self.config.model, self.config.reset_mode, self.rngs[i])
        self.qpos[i] = state.joints.qpos
        self.qvel[i] = state.joints.qvel
        self.qacc[i] = 0.0
        self.act[i] = state.actuation.act
        self.tip[i] = state.fingertip
        self.time[i] = 0.0
        self.dwell[i] = 0.0
        self.schedules[i] = taskmod.instantiate_episode(self.config.task, self.rngs[i])
        centres = [t.centre for t in self.schedules[i].instances]
        suffix = [0.0] * (len(centres) + 1)
        for k in range(len(centres) - 2, -1, -1):
            suffix[k] = suffix[k + 1] + float(
                np.linalg.norm(centres[k] - centres[k + 1])
            )
        self._suffix[i] = suffix
        self._sync_target(i)

    def _sync_target(self, i):
        sched = self.schedules[i]
        tgt = sched.current
        self._k[i] = float(min(sched.current_index, sched.n_subtasks - 1))
        self._n[i] = float(sched.n_subtasks)
        self._chain_rest[i] = self._suffix[i][
            min(sched.current_index, sched.n_subtasks - 1)
        ]
        self.tgt_centre[i] = tgt.centre
        self.tgt_radius[i] = tgt.radius
        self.tgt_dwell[i] = tgt.dwell_duration
        self.is_button[i] = tgt.kind == "button"
        if tgt.kind == "button":
            spec = tgt.spec
            self.btn_rot[i] = taskmod._button_frame(spec)
            self.btn_half[i] = (
                np.array([spec.size[2], spec.size[0], spec.size[1]]) / 2.0
            )
            self.btn_minforce[i] = spec.min_touch_force

    # -- observation --------------------------------------------------------

    def observations(self, idx=None):
        """Observation matrix for all (or selected) instances."""
        sl = slice(None) if idx is None else idx
        model = self.config.model
        lo = model.joint_limits[:, 0][None, :]
        hi = model.joint_limits[:, 1][None, :]
        ks = self._k[sl]
        ns = self._n[sl]
        phase0 = np.where(ns > 1, ks / np.maximum(ns - 1, 1), 0.0)
        phase1 = (ns - ks) / ns
        dwell_frac = np.where(
            self.tgt_dwell[sl] > 0, self.dwell[sl] / np.where(self.tgt_dwell[sl] > 0, self.tgt_dwell[sl], 1.0), 0.0
        )
        parts = {
            "qpos": 2.0 * (self.qpos[sl] - lo) / (hi - lo) - 1.0,
            "qvel": self.qvel[sl] / obsmod.QVEL_SCALE,
            "qacc": self.qacc[sl] / obsmod.QACC_SCALE,
            "act": self.act[sl],
            "ee_pos": self.tip[sl],
            "target_pos": self.tgt_centre[sl],
            "target_size": self.tgt_radius[sl][:, None],
            "phase": np.stack([phase0, phase1], axis=-1),
            "dwell_fraction": dwell_frac[:, None],
        }
        return np.concatenate(
            [parts[c] for c in self.config.layout.enabled], axis=1
        )

    # -- stepping -----------------------------------------------------------

    def step(self, actions):
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.n, self.config.model.actuator_count):
            raise ValidationError(
                f"actions must have shape {(self.n, self.config.model.actuator_count)}"
            )
        if self.n_workers == 1 or self.n < 2 * self.n_workers:
            return self._step_slice(0, self.n, actions)
        bounds = np.linspace(0, self.n, self.n_workers + 1).astype(int)
        futures = [
            self._pool.submit(self._step_slice, lo, hi, actions)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        out = []
        for f in futures:
            out.extend(f.result())
        return out

    def _step_slice(self, lo_i, hi_i, actions):
        cfg = self.config
        model = cfg.model
        sl = slice(lo_i, hi_i)
        b = hi_i - lo_i
        a = actions[sl]
        if np.any((a < 0) | (a > 1)):
            if not self._warned_clip:
                log.warning("actions outside [0, 1] are clipped")
                self._warned_clip = True
            a = np.clip(a, 0.0, 1.0)

        if cfg.noise.k_sdn == 0.0 and cfg.noise.k_cn == 0.0:
            applied = a
        else:
            applied = np.empty_like(a)
            for i in range(b):
                applied[i] = armmod.apply_motor_noise(
                    a[i], cfg.noise, self.rngs[lo_i + i]
                )

        if self._use_kernel:
            completed, diverged = self._substeps_compiled(sl, applied)
        else:
            completed, diverged = self._substeps_numpy(sl, applied)
        self.time[sl] = self.time[sl] + model.control_dt

        dist_terms = -(
            np.sqrt(np.sum((self.tip[sl] - self.tgt_centre[sl]) ** 2, axis=1))
            + self._chain_rest[sl]
        )
        effort_terms = -np.mean(a * a, axis=1)
        finished = [
            self._finish_step(
                lo_i + i, dist_terms[i], effort_terms[i], completed[i], diverged[i]
            )
            for i in range(b)
        ]
        obs = self.observations(idx=sl)
        return [
            StepResult(observation=obs[i], reward=br, done=done, events=ev, info=info)
            for i, (br, done, ev, info) in enumerate(finished)
        ]

    def _substeps_compiled(self, sl, applied):
        model = self.config.model
        contact = self.config.task.contact
        b = applied.shape[0]
        completed = np.zeros(b, dtype=np.bool_)
        diverged = np.zeros(b, dtype=np.bool_)
        qpos = np.ascontiguousarray(self.qpos[sl])
        qvel = np.ascontiguousarray(self.qvel[sl])
        qacc = np.ascontiguousarray(self.qacc[sl])
        act = np.ascontiguousarray(self.act[sl])
        dwell = np.ascontiguousarray(self.dwell[sl])
        tip = np.empty((b, 3))
        _kernel.step_batch(
            qpos, qvel, qacc, act, np.ascontiguousarray(applied), dwell, tip,
            completed, diverged,
            np.ascontiguousarray(self.tgt_centre[sl]),
            np.ascontiguousarray(self.tgt_radius[sl]),
            np.ascontiguousarray(self.tgt_dwell[sl]),
            np.ascontiguousarray(self.is_button[sl]),
            np.ascontiguousarray(self.btn_rot[sl]),
            np.ascontiguousarray(self.btn_half[sl]),
            np.ascontiguousarray(self.btn_minforce[sl]),
            model.link_lengths[0], model.link_lengths[1],
            model.link_com_offsets[0], model.link_com_offsets[1],
            model.link_masses[0], model.link_masses[1],
            model.joint_limits, model.joint_damping, model.gravity,
            model.moment_matrix * model.max_muscle_force[None, :],
            model.tau_act, model.tau_deact, model.joint_armature,
            contact.stiffness, contact.damping,
            model.n_substeps, model.physics_dt, armmod.QVEL_DIVERGENCE_BOUND,
        )
        self.qpos[sl], self.qvel[sl], self.qacc[sl] = qpos, qvel, qacc
        self.act[sl] = act
        self.dwell[sl] = dwell
        self.tip[sl] = tip
        return completed, diverged

    def _substeps_numpy(self, sl, applied):
        cfg = self.config
        model = cfg.model
        b = applied.shape[0]
        qpos, qvel = self.qpos[sl], self.qvel[sl]
        act = self.act[sl]
        qacc = self.qacc[sl]
        dwell = self.dwell[sl]
        completed = np.zeros(b, dtype=bool)
        diverged = np.zeros(b, dtype=bool)
        contact = cfg.task.contact
        dtp = model.physics_dt

        with np.errstate(all="ignore"):
            for _ in range(model.n_substeps):
                act = armmod.activation_step(act, applied, dtp, model)
                ch = armmod.fk_chain(qpos, model)
                tip = ch["tip"]
                tip_force = None
                if np.any(self.is_button[sl]):
                    jt = armmod._point_jacobian(ch, tip, True)
                    vtip = np.einsum("bik,bk->bi", jt, qvel)
                    force, fvec = self._contact_batch(sl, tip, vtip, contact)
                    pressed = (
                        self.is_button[sl] & ~completed & (force >= self.btn_minforce[sl])
                    )
                    completed |= pressed
                    tip_force = fvec
                # dwell bookkeeping at substep granularity
                inside = (
                    np.linalg.norm(tip - self.tgt_centre[sl], axis=1)
                    <= self.tgt_radius[sl]
                )
                sphere = ~self.is_button[sl]
                dwell = np.where(sphere & inside & ~completed, dwell + dtp, 0.0)
                completed |= sphere & (self.tgt_dwell[sl] <= dwell) & inside
                dwell = np.minimum(dwell, self.tgt_dwell[sl])

                qacc = armmod.forward_dynamics(qpos, qvel, act, tip_force, model, ch=ch)
                qpos, qvel = armmod.integrate_substep(qpos, qvel, qacc, model)
                bad = ~np.all(
                    np.isfinite(qvel)
                    & (np.abs(qvel) <= armmod.QVEL_DIVERGENCE_BOUND),
                    axis=1,
                )
                if np.any(bad):
                    diverged |= bad
                    qvel = np.where(diverged[:, None], 0.0, qvel)
                    qacc = np.where(diverged[:, None], 0.0, qacc)
                    qpos = np.where(
                        diverged[:, None],
                        np.clip(qpos, model.joint_limits[:, 0], model.joint_limits[:, 1]),
                        qpos,
                    )

        tip = armmod.fk_chain(qpos, model)["tip"]
        self.qpos[sl], self.qvel[sl], self.qacc[sl] = qpos, qvel, qacc
        self.act[sl] = act
        self.tip[sl] = tip
        self.dwell[sl] = dwell
        return completed, diverged

    def _contact_batch(self, sl, tip, vtip, contact):
        """Vectorized box penalty contact for lanes whose target is a button."""
        rel = tip - self.tgt_centre[sl]
        rot = self.btn_rot[sl]
        p_local = np.einsum("bji,bj->bi", rot, rel)
        v_local = np.einsum("bji,bj->bi", rot, vtip)
        half = self.btn_half[sl]
        inside = np.all(np.abs(p_local) <= half, axis=1) & self.is_button[sl]
        depths = half - np.abs(p_local)
        axis = np.argmin(depths, axis=1)
        rows = np.arange(depths.shape[0])
        depth = depths[rows, axis]
        sign = np.where(p_local[rows, axis] >= 0, 1.0, -1.0)
        approach = -v_local[rows, axis] * sign
        force = np.maximum(
            0.0, contact.stiffness * depth - contact.damping * approach
        )
        force = np.where(inside, force, 0.0)
        normal_local = np.zeros_like(p_local)
        normal_local[rows, axis] = sign
        fvec = np.einsum("bij,bj->bi", rot, normal_local) * force[:, None]
        return force, fvec

    def _finish_step(self, i, dist_term, effort, completed, diverged):
        cfg = self.config
        sched = self.schedules[i]
        sched.dwell_timer = float(self.dwell[i])
        pre_index = sched.current_index
        subtask_event = False
        completion_event = False
        if completed and not diverged:
            taskmod.advance_schedule(sched, pre_index)
            subtask_event = True
            self.dwell[i] = 0.0
            if sched.all_complete:
                completion_event = True
            else:
                self._sync_target(i)

        w = cfg.weights
        sub = 1.0 if subtask_event else 0.0
        comp = 1.0 if completion_event else 0.0
        breakdown = rewmod.RewardBreakdown(
            distance_term=float(dist_term),
            subtask_term=sub,
            completion_term=comp,
            effort_term=float(effort),
            total=w.w_distance * float(dist_term)
            + w.w_subtask * sub
            + w.w_completion * comp
            + w.w_effort * float(effort),
        )

        if diverged:
            done = DIVERGED
        else:
            done = taskmod.is_episode_done(sched, self.time[i], cfg.task)

        events = {
            "subtask_completed": pre_index if subtask_event else None,
            "episode_success": completion_event,
        }
        info = {}
        if done != RUNNING:
            ref = min(sched.current_index, sched.n_subtasks - 1)
            info["terminal_distance"] = float(
                np.linalg.norm(self.tip[i] - sched.instances[ref].centre)
            )
            info["episode_time"] = float(self.time[i])
            info["completed_flags"] = list(sched.completed_flags)
            # the state the episode actually ended in, before any auto-reset;
            # lets the trainer bootstrap values across pure time limits
            info["terminal_observation"] = self.observations(idx=slice(i, i + 1))[0]
            if self.auto_reset:
                self.reset_lane(i)
        return breakdown, done, events, info


class Env:
    """A single environment instance (batch of one, no auto-reset)."""

    def __init__(self, config, n_workers=1):
        self._batch = BatchEnv(config, 1, auto_reset=False)
        self._done = RUNNING
        self.config = config

    def reset(self, episode_seed=None):
        self._batch.reset_lane(0, episode_seed=episode_seed)
        self._done = RUNNING
        return self._batch.observations()[0]

    def step(self, action):
        if self._done != RUNNING:
            raise ValidationError("episode is over; call reset()")
        result = self._batch.step(np.asarray(action)[None, :])[0]
        self._done = result.done
        return result

    @property
    def schedule(self):
        return self._batch.schedules[0]

    @property
    def state(self):
        b = self._batch
        return armmod.ArmState(
            joints=armmod.JointVector(
                qpos=b.qpos[0].copy(), qvel=b.qvel[0].copy(), qacc=b.qacc[0].copy()
            ),
            actuation=armmod.ActuationState(
                act=b.act[0].copy(), applied_control=None
            ),
            fingertip=b.tip[0].copy(),
            time=float(b.time[0]),
        )

"""Reference muscle-actuated arm.

A 4-DoF serial chain (3 shoulder axes + elbow flexion) driven by 8 lumped
antagonistic actuators with first-order activation dynamics. Links are
modelled as point masses at their centres of mass plus a small constant
joint armature, which keeps the mass matrix positive definite in singular
poses. All heavy code paths are written batch-first: arrays carry a leading
instance axis of size B, and every operation is elementwise along that axis
so results are bitwise independent of how a batch is partitioned.

Coordinate frame: origin at the shoulder, x forward, y lateral, z up.
At the zero pose the arm hangs straight down (fingertip at (0, 0, -L1-L2)).

Joint order:
  0: shoulder flexion    (positive swings the arm forward, about -y)
  1: shoulder abduction  (positive swings the arm to +y, about +x)
  2: shoulder rotation   (twist about the upper-arm long axis)
  3: elbow flexion       (positive folds the forearm forward)
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ValidationError

QVEL_DIVERGENCE_BOUND = 100.0  # rad/s; beyond this the integrator has blown up


def _as_f64(x):
    return np.asarray(x, dtype=np.float64)


@dataclass
class ArmModelSpec:
    """Geometry, inertia and actuation parameters of the reference arm."""

    joint_count: int = 4
    link_lengths: np.ndarray = field(default_factory=lambda: _as_f64([0.30, 0.35]))
    link_masses: np.ndarray = field(default_factory=lambda: _as_f64([2.0, 1.5]))
    link_com_offsets: np.ndarray = field(default_factory=lambda: _as_f64([0.15, 0.175]))
    joint_limits: np.ndarray = field(
        default_factory=lambda: _as_f64(
            [[-0.7, 3.0], [-1.2, 1.2], [-1.0, 1.0], [0.0, 2.5]]
        )
    )
    joint_damping: np.ndarray = field(default_factory=lambda: _as_f64([0.5] * 4))
    gravity: np.ndarray = field(default_factory=lambda: _as_f64([0.0, 0.0, -9.81]))
    actuator_count: int = 8
    moment_matrix: np.ndarray = field(default_factory=lambda: _default_moments())
    max_muscle_force: np.ndarray = field(default_factory=lambda: _as_f64([1000.0] * 8))
    tau_act: float = 0.015
    tau_deact: float = 0.060
    physics_dt: float = 0.002
    control_dt: float = 0.05
    joint_armature: float = 0.01  # kg*m^2, regularizes singular poses

    def __post_init__(self):
        self.link_lengths = _as_f64(self.link_lengths)
        self.link_masses = _as_f64(self.link_masses)
        self.link_com_offsets = _as_f64(self.link_com_offsets)
        self.joint_limits = _as_f64(self.joint_limits)
        self.joint_damping = _as_f64(self.joint_damping)
        self.gravity = _as_f64(self.gravity)
        self.moment_matrix = _as_f64(self.moment_matrix)
        self.max_muscle_force = _as_f64(self.max_muscle_force)
        self.validate()

    def validate(self):
        if self.joint_count != 4:
            raise ValidationError("reference arm supports exactly 4 joints")
        if self.link_lengths.shape != (2,) or np.any(self.link_lengths <= 0):
            raise ValidationError("link_lengths must be 2 positive lengths")
        if np.any(self.link_masses <= 0):
            raise ValidationError("link_masses must be positive")
        if self.joint_limits.shape != (self.joint_count, 2):
            raise ValidationError("joint_limits must be Jx2")
        if np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ValidationError("joint_limits lo must be < hi")
        if self.tau_act <= 0 or self.tau_deact <= 0:
            raise ValidationError("activation time constants must be positive")
        if self.physics_dt <= 0 or self.control_dt <= 0:
            raise ValidationError("time steps must be positive")
        n_sub = self.control_dt / self.physics_dt
        if abs(n_sub - round(n_sub)) > 1e-9:
            raise ValidationError("physics_dt must divide control_dt exactly")
        if self.moment_matrix.shape != (self.joint_count, self.actuator_count):
            raise ValidationError("moment_matrix must be JxA")
        if self.max_muscle_force.shape != (self.actuator_count,) or np.any(
            self.max_muscle_force <= 0
        ):
            raise ValidationError("max_muscle_force must be A positive forces")
        for j in range(self.joint_count):
            row = self.moment_matrix[j]
            if not (np.any(row > 0) and np.any(row < 0)):
                raise ValidationError(
                    f"joint {j} lacks an antagonistic actuator pair"
                )

    @property
    def n_substeps(self):
        return int(round(self.control_dt / self.physics_dt))

    @property
    def reach(self):
        return float(np.sum(self.link_lengths))


def _default_moments():
    m = np.zeros((4, 8))
    for j in range(4):
        m[j, 2 * j] = 0.03
        m[j, 2 * j + 1] = -0.03
    return m


@dataclass
class NoiseParams:
    k_sdn: float = 0.0
    k_cn: float = 0.0

    def __post_init__(self):
        if self.k_sdn < 0 or self.k_cn < 0:
            raise ValidationError("noise levels must be non-negative")


@dataclass
class ResetMode:
    variant: str = "epsilon_uniform"  # zero | epsilon_uniform | range_uniform
    eps_pos: float = 0.05
    eps_vel: float = 0.05

    VARIANTS = ("zero", "epsilon_uniform", "range_uniform")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ValidationError(f"unknown reset variant {self.variant!r}")
        if self.eps_pos < 0 or self.eps_vel < 0:
            raise ValidationError("reset eps values must be non-negative")


@dataclass
class JointVector:
    qpos: np.ndarray
    qvel: np.ndarray
    qacc: np.ndarray


@dataclass
class ActuationState:
    act: np.ndarray
    applied_control: np.ndarray


@dataclass
class ArmState:
    joints: JointVector
    actuation: ActuationState
    fingertip: np.ndarray
    time: float


# ---------------------------------------------------------------------------
# actuation


def apply_motor_noise(intended, noise, rng):
    """a = clip_0^1((1 + k_sdn * z) * intended + k_cn), one z per actuator."""
    intended = _as_f64(intended)
    if not np.all(np.isfinite(intended)):
        raise ValidationError("intended controls must be finite")
    if np.any(intended < 0) or np.any(intended > 1):
        raise ValidationError("intended controls must lie in [0, 1]")
    z = rng.standard_normal(intended.shape)
    return np.clip((1.0 + noise.k_sdn * z) * intended + noise.k_cn, 0.0, 1.0)


def activation_step(act, applied, dt, spec):
    """First-order activation filter with separate rise/decay time constants."""
    act = _as_f64(act)
    applied = _as_f64(applied)
    if dt <= 0:
        raise ValidationError("dt must be positive")
    tau = np.where(applied >= act, spec.tau_act, spec.tau_deact)
    return np.clip(act + dt * (applied - act) / tau, 0.0, 1.0)


# ---------------------------------------------------------------------------
# kinematics (batched; leading axis B)


def _rot_about_neg_y(q):
    """Rotation by q about the (0,-1,0) axis, shape (B,3,3)."""
    c, s = np.cos(q), np.sin(q)
    z = np.zeros_like(q)
    o = np.ones_like(q)
    return np.stack(
        [
            np.stack([c, z, -s], axis=-1),
            np.stack([z, o, z], axis=-1),
            np.stack([s, z, c], axis=-1),
        ],
        axis=-2,
    )


def _rot_about_x(q):
    c, s = np.cos(q), np.sin(q)
    z = np.zeros_like(q)
    o = np.ones_like(q)
    return np.stack(
        [
            np.stack([o, z, z], axis=-1),
            np.stack([z, c, -s], axis=-1),
            np.stack([z, s, c], axis=-1),
        ],
        axis=-2,
    )


def _rot_about_neg_z(q):
    c, s = np.cos(q), np.sin(q)
    z = np.zeros_like(q)
    o = np.ones_like(q)
    return np.stack(
        [
            np.stack([c, s, z], axis=-1),
            np.stack([-s, c, z], axis=-1),
            np.stack([z, z, o], axis=-1),
        ],
        axis=-2,
    )


def _cross(a, b):
    """Batched cross product, (B,3) x (B,3), explicit components."""
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def fk_chain(qpos, spec):
    """All frame quantities for a batch of joint configurations.

    qpos: (B, 4). Returns a dict of batched arrays: world joint axes a1..a4,
    elbow/tip/COM positions and the shoulder/forearm rotation matrices.
    """
    q = _as_f64(qpos)
    r1 = _rot_about_neg_y(q[:, 0])
    r12 = r1 @ _rot_about_x(q[:, 1])
    rs = r12 @ _rot_about_neg_z(q[:, 2])
    rf = rs @ _rot_about_neg_y(q[:, 3])

    l1, l2 = spec.link_lengths
    c1, c2 = spec.link_com_offsets
    b = q.shape[0]
    a1 = np.broadcast_to(_as_f64([0.0, -1.0, 0.0]), (b, 3))
    a2 = r1[:, :, 0]
    a3 = -r12[:, :, 2]
    a4 = -rs[:, :, 1]
    upper_dir = -rs[:, :, 2]
    fore_dir = -rf[:, :, 2]
    elbow = l1 * upper_dir
    tip = elbow + l2 * fore_dir
    com1 = c1 * upper_dir
    com2 = elbow + c2 * fore_dir
    return {
        "a1": a1, "a2": a2, "a3": a3, "a4": a4,
        "elbow": elbow, "tip": tip, "com1": com1, "com2": com2,
        "rs": rs, "rf": rf,
    }


def forward_kinematics(qpos, spec):
    """Fingertip position for a single joint configuration, shape (3,)."""
    return fk_chain(_as_f64(qpos)[None, :], spec)["tip"][0]


def _point_jacobian(ch, point, from_elbow):
    """Positional Jacobian columns for a point on the chain, (B,3,4)."""
    cols = [
        _cross(ch["a1"], point),
        _cross(ch["a2"], point),
        _cross(ch["a3"], point),
    ]
    if from_elbow:
        cols.append(_cross(ch["a4"], point - ch["elbow"]))
    else:
        cols.append(np.zeros_like(point))
    return np.stack(cols, axis=-1)


def tip_jacobian(qpos, spec):
    """Fingertip Jacobian for a single configuration, shape (3, 4)."""
    ch = fk_chain(_as_f64(qpos)[None, :], spec)
    return _point_jacobian(ch, ch["tip"], True)[0]


# ---------------------------------------------------------------------------
# dynamics


def _chol_solve4(m, rhs):
    """Solve m @ x = rhs for SPD (B,4,4) via explicit Cholesky.

    Unrolled over the fixed dimension 4, elementwise over the batch, so the
    arithmetic per instance is identical for any batch partitioning.
    """
    n = 4
    l = [[None] * n for _ in range(n)]
    for j in range(n):
        s = m[:, j, j].copy()
        for k in range(j):
            s = s - l[j][k] * l[j][k]
        l[j][j] = np.sqrt(s)
        for i in range(j + 1, n):
            s = m[:, i, j].copy()
            for k in range(j):
                s = s - l[i][k] * l[j][k]
            l[i][j] = s / l[j][j]
    y = [None] * n
    for i in range(n):
        s = rhs[:, i].copy()
        for k in range(i):
            s = s - l[i][k] * y[k]
        y[i] = s / l[i][i]
    x = [None] * n
    for i in reversed(range(n)):
        s = y[i]
        for k in range(i + 1, n):
            s = s - l[k][i] * x[k]
        x[i] = s / l[i][i]
    return np.stack(x, axis=-1)


def _bias_accelerations(ch, qvel):
    """COM accelerations at zero joint acceleration (velocity product terms)."""
    qd = qvel
    w = qd[:, 0:1] * ch["a1"]
    al = np.zeros_like(w)
    for k, a in ((1, ch["a2"]), (2, ch["a3"])):
        al = al + _cross(w, a) * qd[:, k : k + 1]
        w = w + a * qd[:, k : k + 1]
    w3, al3 = w, al
    al4 = al3 + _cross(w3, ch["a4"]) * qd[:, 3:4]
    w4 = w3 + ch["a4"] * qd[:, 3:4]

    def point_acc(alpha, omega, r):
        return _cross(alpha, r) + _cross(omega, _cross(omega, r))

    a_c1 = point_acc(al3, w3, ch["com1"])
    a_elbow = point_acc(al3, w3, ch["elbow"])
    a_c2 = a_elbow + point_acc(al4, w4, ch["com2"] - ch["elbow"])
    return a_c1, a_c2


def muscle_torques(act, spec):
    """Joint torques from actuator activations, tau = M_arm @ (F_max * act)."""
    # einsum (not BLAS) keeps the reduction order fixed per instance, so
    # results are bitwise independent of the batch size.
    gains = spec.moment_matrix * spec.max_muscle_force[None, :]
    return np.einsum("ja,ba->bj", gains, act)


def forward_dynamics(qpos, qvel, act, tip_force, spec, ch=None):
    """Joint accelerations for a batch of states.

    tip_force: external world-frame force on the fingertip, (B,3), mapped
    through the fingertip Jacobian transpose (used for button contact).
    """
    if ch is None:
        ch = fk_chain(qpos, spec)
    m1, m2 = spec.link_masses
    j1 = _point_jacobian(ch, ch["com1"], False)
    j2 = _point_jacobian(ch, ch["com2"], True)

    m = m1 * np.einsum("bik,bil->bkl", j1, j1) + m2 * np.einsum(
        "bik,bil->bkl", j2, j2
    )
    m[:, np.arange(4), np.arange(4)] += spec.joint_armature

    a_c1, a_c2 = _bias_accelerations(ch, qvel)
    g = spec.gravity[None, :]
    rhs = (
        muscle_torques(act, spec)
        - spec.joint_damping[None, :] * qvel
        - m1 * np.einsum("bik,bi->bk", j1, a_c1 - g)
        - m2 * np.einsum("bik,bi->bk", j2, a_c2 - g)
    )
    if tip_force is not None:
        jt = _point_jacobian(ch, ch["tip"], True)
        rhs = rhs + np.einsum("bik,bi->bk", jt, tip_force)
    return _chol_solve4(m, rhs)


def integrate_substep(qpos, qvel, qacc, spec):
    """Semi-implicit Euler plus hard joint-limit clamp with velocity zeroing."""
    dt = spec.physics_dt
    qvel = qvel + dt * qacc
    qpos = qpos + dt * qvel
    lo = spec.joint_limits[:, 0][None, :]
    hi = spec.joint_limits[:, 1][None, :]
    hit = (qpos < lo) | (qpos > hi)
    qpos = np.clip(qpos, lo, hi)
    qvel = np.where(hit, 0.0, qvel)
    return qpos, qvel


def kinetic_energy(qpos, qvel, spec):
    """0.5 qd' M qd for a batch, used by the dissipation tests."""
    ch = fk_chain(qpos, spec)
    m1, m2 = spec.link_masses
    j1 = _point_jacobian(ch, ch["com1"], False)
    j2 = _point_jacobian(ch, ch["com2"], True)
    v1 = np.einsum("bik,bk->bi", j1, qvel)
    v2 = np.einsum("bik,bk->bi", j2, qvel)
    t = 0.5 * (m1 * np.sum(v1 * v1, axis=-1) + m2 * np.sum(v2 * v2, axis=-1))
    return t + 0.5 * spec.joint_armature * np.sum(qvel * qvel, axis=-1)


def physics_step(state, intended, spec, noise, rng):
    """Advance one control step (n_substeps physics substeps).

    Noise is applied once per control step; activations and dynamics are
    advanced each substep. Raises DivergenceError when |qvel| exceeds the
    safety bound.
    """
    intended = _as_f64(intended)
    if intended.shape != (spec.actuator_count,):
        raise ValidationError("control vector has wrong length")
    applied = apply_motor_noise(intended, noise, rng)

    qpos = state.joints.qpos[None, :].copy()
    qvel = state.joints.qvel[None, :].copy()
    act = state.actuation.act[None, :].copy()
    app = applied[None, :]
    qacc = state.joints.qacc[None, :]
    for _ in range(spec.n_substeps):
        act = activation_step(act, app, spec.physics_dt, spec)
        qacc = forward_dynamics(qpos, qvel, act, None, spec)
        qpos, qvel = integrate_substep(qpos, qvel, qacc, spec)
        if np.any(np.abs(qvel) > QVEL_DIVERGENCE_BOUND):
            raise DivergenceError("joint velocity exceeded safety bound")
    tip = fk_chain(qpos, spec)["tip"][0]
    return ArmState(
        joints=JointVector(qpos=qpos[0], qvel=qvel[0], qacc=qacc[0]),
        actuation=ActuationState(act=act[0], applied_control=applied),
        fingertip=tip,
        time=state.time + spec.control_dt,
    )


def reset(spec, mode, rng):
    """Initial arm state per reset mode; activations always U(0,1)."""
    j = spec.joint_count
    if mode.variant == "zero":
        qpos = np.zeros(j)
        qvel = np.zeros(j)
    elif mode.variant == "epsilon_uniform":
        qpos = rng.uniform(-mode.eps_pos, mode.eps_pos, j)
        qpos = np.clip(qpos, spec.joint_limits[:, 0], spec.joint_limits[:, 1])
        qvel = rng.uniform(-mode.eps_vel, mode.eps_vel, j)
    else:  # range_uniform
        qpos = rng.uniform(spec.joint_limits[:, 0], spec.joint_limits[:, 1])
        qvel = rng.uniform(-mode.eps_vel, mode.eps_vel, j)
    act = rng.uniform(0.0, 1.0, spec.actuator_count)
    tip = forward_kinematics(qpos, spec)
    return ArmState(
        joints=JointVector(qpos=qpos, qvel=qvel, qacc=np.zeros(j)),
        actuation=ActuationState(act=act, applied_control=np.zeros(spec.actuator_count)),
        fingertip=tip,
        time=0.0,
    )

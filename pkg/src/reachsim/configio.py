"""Config persistence and the bundled scenario library.

The on-disk format is UTF-8, line-oriented and commentable (# to end of
line). A file starts with top-level keys (schema_version, name, mode),
followed by bracketed sections; [sphere] and [button] sections repeat, in
order, one per task primitive. Floats are written with repr so that
load(save(c)) reproduces every value bit-for-bit.
"""

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .arm import ArmModelSpec, NoiseParams, ResetMode
from .environment import EnvConfig
from .errors import ConfigParseError, ConfigVersionError, ValidationError
from .observation import COMPONENT_ORDER, ObservationLayout
from .ppo import HyperParams, recommended_steps
from .reward import RewardWeights
from .tasks import ButtonSpec, ContactParams, SphereTargetSpec, TaskScheduleSpec
from . import arm as armmod

SCHEMA_VERSION = 1
MODES = ("simple", "advanced")


@dataclass
class SavedConfig:
    name: str
    config: EnvConfig
    hyper: HyperParams
    mode: str = "simple"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")


# ---------------------------------------------------------------------------
# serialization


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _line(key, *values):
    flat = []
    for v in values:
        if isinstance(v, (list, tuple, np.ndarray)):
            flat.extend(np.asarray(v).reshape(-1).tolist())
        else:
            flat.append(v)
    return key + " " + " ".join(_fmt(v) for v in flat)


def serialize_saved(saved):
    c = saved.config
    m = c.model
    h = saved.hyper
    out = [
        "# reachsim run configuration",
        _line("schema_version", saved.schema_version),
        f"name {saved.name}",
        f"mode {saved.mode}",
        "",
        "[env]",
        _line("seed", c.seed),
        "",
        "[model]",
        _line("link_lengths", m.link_lengths),
        _line("link_masses", m.link_masses),
        _line("link_com_offsets", m.link_com_offsets),
        _line("joint_limits", m.joint_limits),
        _line("joint_damping", m.joint_damping),
        _line("gravity", m.gravity),
        _line("moment_matrix", m.moment_matrix),
        _line("max_muscle_force", m.max_muscle_force),
        _line("tau_act", m.tau_act),
        _line("tau_deact", m.tau_deact),
        _line("physics_dt", m.physics_dt),
        _line("control_dt", m.control_dt),
        _line("joint_armature", m.joint_armature),
        "",
        "[noise]",
        _line("k_sdn", c.noise.k_sdn),
        _line("k_cn", c.noise.k_cn),
        "",
        "[reset]",
        f"variant {c.reset_mode.variant}",
        _line("eps_pos", c.reset_mode.eps_pos),
        _line("eps_vel", c.reset_mode.eps_vel),
        "",
        "[weights]",
        _line("w_distance", c.weights.w_distance),
        _line("w_subtask", c.weights.w_subtask),
        _line("w_completion", c.weights.w_completion),
        _line("w_effort", c.weights.w_effort),
        "",
        "[layout]",
        "enabled " + " ".join(c.layout.enabled),
        "",
        "[task]",
        _line("max_episode_duration", c.task.max_episode_duration),
        _line("contact_stiffness", c.task.contact.stiffness),
        _line("contact_damping", c.task.contact.damping),
    ]
    for prim in c.task.primitives:
        out.append("")
        if prim.kind == "sphere":
            out += [
                "[sphere]",
                _line("radius_range", prim.radius_range),
                _line("position_x", prim.position_ranges[0]),
                _line("position_y", prim.position_ranges[1]),
                _line("position_z", prim.position_ranges[2]),
                _line("dwell", prim.dwell_duration),
                _line("colour", prim.colour),
            ]
        else:
            out += [
                "[button]",
                _line("size", prim.size),
                _line("centre", prim.centre),
                _line("min_touch_force", prim.min_touch_force),
                _line("orientation_deg", prim.orientation_deg),
                _line("colour", prim.colour),
            ]
    out += [
        "",
        "[hyper]",
    ]
    for f in fields(HyperParams):
        out.append(_line(f.name, getattr(h, f.name)))
    return "\n".join(out) + "\n"


def serialize_run_config(config, hyper, name="run", mode="simple"):
    return serialize_saved(SavedConfig(name=name, config=config, hyper=hyper, mode=mode))


# ---------------------------------------------------------------------------
# parsing

_TOP_KEYS = {"schema_version": 1, "name": 1, "mode": 1}
_SECTION_KEYS = {
    "env": {"seed": 1},
    "model": {
        "link_lengths": 2, "link_masses": 2, "link_com_offsets": 2,
        "joint_limits": 8, "joint_damping": 4, "gravity": 3,
        "moment_matrix": 32, "max_muscle_force": 8,
        "tau_act": 1, "tau_deact": 1, "physics_dt": 1, "control_dt": 1,
        "joint_armature": 1,
    },
    "noise": {"k_sdn": 1, "k_cn": 1},
    "reset": {"variant": 1, "eps_pos": 1, "eps_vel": 1},
    "weights": {"w_distance": 1, "w_subtask": 1, "w_completion": 1, "w_effort": 1},
    "layout": {"enabled": None},
    "task": {"max_episode_duration": 1, "contact_stiffness": 1, "contact_damping": 1},
    "sphere": {
        "radius_range": 2, "position_x": 2, "position_y": 2, "position_z": 2,
        "dwell": 1, "colour": 3,
    },
    "button": {
        "size": 3, "centre": 3, "min_touch_force": 1, "orientation_deg": 1,
        "colour": 3,
    },
    "hyper": {f.name: 1 for f in fields(HyperParams)},
}
_STRING_KEYS = {"name", "mode", "variant", "enabled"}
_INT_KEYS = {
    "schema_version", "seed", "num_envs", "batch_size", "num_minibatches",
    "updates_per_batch", "unroll_length", "total_steps", "checkpoint_every",
    "eval_every",
}
# hyper "seed" is an int too; section context disambiguates nothing — both int


def _scan(text):
    """First pass: (top keys, ordered section list) with line numbers."""
    top = {}
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigParseError(f"line {lineno}: malformed section header {line!r}")
            name = line[1:-1].strip()
            if name not in _SECTION_KEYS:
                raise ConfigParseError(f"line {lineno}: unknown section [{name}]")
            current = (name, lineno, {})
            sections.append(current)
            continue
        parts = line.split()
        key, values = parts[0], parts[1:]
        if current is None:
            if key not in _TOP_KEYS:
                raise ConfigParseError(f"line {lineno}: unknown key {key!r}")
            top[key] = (lineno, values)
        else:
            allowed = _SECTION_KEYS[current[0]]
            if key not in allowed:
                raise ConfigParseError(
                    f"line {lineno}: unknown key {key!r} in [{current[0]}]"
                )
            arity = allowed[key]
            if arity is not None and len(values) != arity:
                raise ConfigParseError(
                    f"line {lineno}: key {key!r} expects {arity} value(s), "
                    f"got {len(values)}"
                )
            current[2][key] = (lineno, values)
    return top, sections


def _floats(values, lineno, key):
    try:
        return [float(v) for v in values]
    except ValueError:
        raise ConfigParseError(f"line {lineno}: key {key!r}: not a number")


def _get(section, key, default=None, as_int=False, as_str=False):
    body = section[2]
    if key not in body:
        if default is not None:
            return default
        raise ConfigParseError(
            f"section [{section[0]}] (line {section[1]}): missing key {key!r}"
        )
    lineno, values = body[key]
    if as_str:
        return values[0] if len(values) == 1 else values
    vals = _floats(values, lineno, key)
    if as_int:
        vals = [int(v) for v in vals]
    return vals[0] if len(vals) == 1 else vals


def parse_saved(text):
    """Parse config text; raises with every construction violation listed."""
    top, sections = _scan(text)
    if "schema_version" in top:
        version = int(top["schema_version"][1][0])
        if version > SCHEMA_VERSION:
            raise ConfigVersionError(
                f"config schema_version {version} is newer than supported "
                f"version {SCHEMA_VERSION}"
            )
    name = top.get("name", (0, ["unnamed"]))[1][0]
    mode = top.get("mode", (0, ["simple"]))[1][0]

    by_name = {s[0]: s for s in sections}
    violations = []

    def build(factory, *args, **kwargs):
        try:
            return factory(*args, **kwargs)
        except ValidationError as exc:
            violations.extend(str(exc).split("; "))
            return None

    model = ArmModelSpec()
    if "model" in by_name:
        s = by_name["model"]
        jl = np.asarray(_get(s, "joint_limits", default=model.joint_limits)).reshape(4, 2)
        mm = np.asarray(
            _get(s, "moment_matrix", default=model.moment_matrix)
        ).reshape(4, 8)
        model = build(
            ArmModelSpec,
            link_lengths=_get(s, "link_lengths", default=model.link_lengths),
            link_masses=_get(s, "link_masses", default=model.link_masses),
            link_com_offsets=_get(s, "link_com_offsets", default=model.link_com_offsets),
            joint_limits=jl,
            joint_damping=_get(s, "joint_damping", default=model.joint_damping),
            gravity=_get(s, "gravity", default=model.gravity),
            moment_matrix=mm,
            max_muscle_force=_get(s, "max_muscle_force", default=model.max_muscle_force),
            tau_act=_get(s, "tau_act", default=model.tau_act),
            tau_deact=_get(s, "tau_deact", default=model.tau_deact),
            physics_dt=_get(s, "physics_dt", default=model.physics_dt),
            control_dt=_get(s, "control_dt", default=model.control_dt),
            joint_armature=_get(s, "joint_armature", default=model.joint_armature),
        )

    noise = NoiseParams()
    if "noise" in by_name:
        s = by_name["noise"]
        noise = build(
            NoiseParams,
            k_sdn=_get(s, "k_sdn", default=0.0),
            k_cn=_get(s, "k_cn", default=0.0),
        )

    reset = ResetMode()
    if "reset" in by_name:
        s = by_name["reset"]
        reset = build(
            ResetMode,
            variant=_get(s, "variant", default="epsilon_uniform", as_str=True),
            eps_pos=_get(s, "eps_pos", default=0.05),
            eps_vel=_get(s, "eps_vel", default=0.05),
        )

    weights = RewardWeights()
    if "weights" in by_name:
        s = by_name["weights"]
        weights = build(
            RewardWeights,
            w_distance=_get(s, "w_distance", default=1.0),
            w_subtask=_get(s, "w_subtask", default=5.0),
            w_completion=_get(s, "w_completion", default=10.0),
            w_effort=_get(s, "w_effort", default=0.05),
        )

    layout = ObservationLayout()
    if "layout" in by_name:
        s = by_name["layout"]
        enabled = _get(s, "enabled", default=list(COMPONENT_ORDER), as_str=True)
        if isinstance(enabled, str):
            enabled = [enabled]
        layout = build(ObservationLayout, enabled=tuple(enabled))

    primitives = []
    for s in sections:
        if s[0] == "sphere":
            prim = build(
                SphereTargetSpec,
                radius_range=tuple(_get(s, "radius_range", default=(0.05, 0.10))),
                position_ranges=(
                    tuple(_get(s, "position_x", default=(0.225, 0.35))),
                    tuple(_get(s, "position_y", default=(-0.15, 0.15))),
                    tuple(_get(s, "position_z", default=(-0.3, 0.3))),
                ),
                dwell_duration=_get(s, "dwell", default=0.25),
                colour=tuple(_get(s, "colour", default=(0.8, 0.2, 0.2))),
            )
        elif s[0] == "button":
            prim = build(
                ButtonSpec,
                size=tuple(_get(s, "size", default=(0.05, 0.05, 0.02))),
                centre=tuple(_get(s, "centre", default=(0.42, 0.0, 0.0))),
                min_touch_force=_get(s, "min_touch_force", default=1.0),
                orientation_deg=_get(s, "orientation_deg", default=0.0),
                colour=tuple(_get(s, "colour", default=(0.2, 0.8, 0.2))),
            )
        else:
            continue
        if prim is not None:
            primitives.append(prim)

    task = None
    if "task" in by_name or primitives:
        s = by_name.get("task", ("task", 0, {}))
        contact = build(
            ContactParams,
            stiffness=_get(s, "contact_stiffness", default=1000.0),
            damping=_get(s, "contact_damping", default=10.0),
        )
        if primitives and contact is not None:
            task = build(
                TaskScheduleSpec,
                primitives=primitives,
                max_episode_duration=_get(s, "max_episode_duration", default=-1.0)
                if "max_episode_duration" in s[2]
                else None,
                contact=contact,
            )
        elif not primitives:
            violations.append("schedule needs at least one primitive")

    seed = 0
    if "env" in by_name:
        seed = int(_get(by_name["env"], "seed", default=0, as_int=True))

    hyper = HyperParams()
    if "hyper" in by_name:
        s = by_name["hyper"]
        kwargs = {}
        for f in fields(HyperParams):
            if f.name in s[2]:
                kwargs[f.name] = _get(s, f.name, as_int=f.name in _INT_KEYS)
        hyper = build(HyperParams, **kwargs)

    config = None
    if not violations and None not in (model, noise, reset, weights, layout, task, hyper):
        config = build(
            EnvConfig,
            model=model, task=task, weights=weights, layout=layout,
            noise=noise, reset_mode=reset, seed=seed,
        )
    if violations or config is None:
        raise ValidationError("; ".join(violations) or "invalid configuration")
    return SavedConfig(
        name=name, config=config, hyper=hyper, mode=mode,
        schema_version=int(top.get("schema_version", (0, [SCHEMA_VERSION]))[1][0]),
    )


def parse_run_config(text):
    saved = parse_saved(text)
    return saved.config, saved.hyper


def save_config(saved, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_saved(saved))


def load_config(path_or_name):
    """Load from a file path, or by bundled scenario name."""
    scenarios = list_scenarios()
    if path_or_name in scenarios:
        return scenarios[path_or_name]
    try:
        with open(path_or_name, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise FileNotFoundError(
            f"{path_or_name}: no such config file or bundled scenario "
            f"(bundled: {', '.join(sorted(scenarios))})"
        )
    return parse_saved(text)


# ---------------------------------------------------------------------------
# validation


def validate_config(saved_or_text):
    """All violations in a config; empty list means ok."""
    if isinstance(saved_or_text, str):
        try:
            saved = parse_saved(saved_or_text)
        except ValidationError as exc:
            return str(exc).split("; ")
        except FileNotFoundError as exc:
            return [str(exc)]
    else:
        saved = saved_or_text
    violations = []
    c = saved.config
    reach = c.model.reach
    for i, prim in enumerate(c.task.primitives):
        if prim.kind == "sphere":
            nearest = np.array(
                [
                    min(abs(lo), abs(hi)) if lo * hi > 0 else 0.0
                    for lo, hi in prim.position_ranges
                ]
            )
            if float(np.linalg.norm(nearest)) > reach:
                violations.append(
                    f"target {i}: sampling box entirely beyond reach {reach:.3f} m"
                )
            if prim.dwell_duration < 0:
                violations.append(f"target {i}: dwell must be >= 0")
        else:
            if float(np.linalg.norm(prim.centre)) > reach:
                violations.append(
                    f"target {i}: button centre {tuple(prim.centre)} beyond "
                    f"reach {reach:.3f} m"
                )
    for name in ("w_distance", "w_subtask", "w_completion", "w_effort"):
        if getattr(c.weights, name) < 0:
            violations.append(f"{name} must be non-negative")
    if not c.layout.enabled:
        violations.append("observation layout is empty")
    try:
        saved.hyper.validate()
    except ValidationError as exc:
        violations.append(str(exc))
    return violations


# ---------------------------------------------------------------------------
# bundled scenarios


def _scenario(name, primitives, seed=0, **env_kwargs):
    task = TaskScheduleSpec(primitives=primitives)
    config = EnvConfig(task=task, seed=seed, **env_kwargs)
    hyper = HyperParams(total_steps=recommended_steps(task))
    return SavedConfig(name=name, config=config, hyper=hyper, mode="simple")


def _default_pointing():
    return _scenario("default_pointing", [SphereTargetSpec() for _ in range(10)])


def _ar_interaction():
    # Four virtual pointing spheres (25 ms dwell) alternating with four
    # tilted physical buttons on a vertical plane 42 cm ahead.
    def button(y, z):
        return ButtonSpec(
            size=(0.05, 0.05, 0.02), centre=(0.42, y, z),
            min_touch_force=1.0, orientation_deg=45.0,
        )

    def sphere(xr, yr, zr, rr):
        return SphereTargetSpec(
            radius_range=rr, position_ranges=(xr, yr, zr), dwell_duration=0.025
        )

    primitives = [
        sphere((0.225, 0.35), (-0.15, 0.15), (-0.3, 0.3), (0.04, 0.08)),
        button(0.15, -0.29),
        sphere((0.3, 0.3), (-0.15, 0.15), (0.0, 0.3), (0.04, 0.08)),
        button(0.15, 0.01),
        sphere((0.3, 0.3), (-0.1, 0.1), (0.0, 0.3), (0.04, 0.08)),
        button(-0.15, -0.29),
        sphere((0.225, 0.35), (-0.15, 0.15), (-0.3, 0.3), (0.05, 0.15)),
        button(-0.15, 0.01),
    ]
    return _scenario("ar_interaction", primitives)


def _public_display():
    def button(y, z):
        return ButtonSpec(
            size=(0.05, 0.05, 0.02), centre=(0.42, y, z),
            min_touch_force=1.0, orientation_deg=0.0,
        )

    primitives = [
        button(-0.15, 0.01), button(0.15, 0.01),
        button(-0.15, -0.29), button(0.15, -0.29),
    ]
    return _scenario("public_display", primitives)


def _mobile_typing():
    # Five 1 cm spheres on a 15 cm x 7.2 cm horizontal plane, 30 cm below
    # and 30 cm in front of the shoulder; 50 ms dwell.
    sphere = SphereTargetSpec(
        radius_range=(0.01, 0.01),
        position_ranges=((0.264, 0.336), (-0.075, 0.075), (-0.3, -0.3)),
        dwell_duration=0.05,
    )
    return _scenario("mobile_typing", [sphere] * 5)


def list_scenarios():
    return {
        "default_pointing": _default_pointing(),
        "ar_interaction": _ar_interaction(),
        "public_display": _public_display(),
        "mobile_typing": _mobile_typing(),
    }


# ---------------------------------------------------------------------------
# scene preview


def scene_preview(saved):
    """Deterministic geometry for pre-training inspection: target primitives
    (sampling ranges as boxes), the reset-pose arm skeleton and camera hints."""
    config = saved.config if isinstance(saved, SavedConfig) else saved
    primitives = []
    for i, prim in enumerate(config.task.primitives):
        if prim.kind == "sphere":
            (x0, x1), (y0, y1), (z0, z1) = prim.position_ranges
            centre = [(x0 + x1) / 2, (y0 + y1) / 2, (z0 + z1) / 2]
            mean_r = sum(prim.radius_range) / 2
            fixed = x0 == x1 and y0 == y1 and z0 == z1
            if not fixed:
                primitives.append(
                    {
                        "type": "box", "role": "sampling_range", "index": i,
                        "centre": centre,
                        "size": [x1 - x0, y1 - y0, z1 - z0],
                        "orientation_deg": 0.0,
                        "colour": list(prim.colour), "alpha": 0.2,
                    }
                )
            primitives.append(
                {
                    "type": "sphere", "role": "target", "index": i,
                    "centre": centre, "radius": mean_r,
                    "colour": list(prim.colour), "alpha": 1.0 if fixed else 0.6,
                }
            )
        else:
            primitives.append(
                {
                    "type": "box", "role": "button", "index": i,
                    "centre": list(prim.centre),
                    # world extents before tilt: depth along x, width along
                    # y, height along z
                    "size": [prim.size[2], prim.size[0], prim.size[1]],
                    "orientation_deg": prim.orientation_deg,
                    "colour": list(prim.colour), "alpha": 1.0,
                }
            )
    model = config.model
    ch = armmod.fk_chain(np.zeros((1, model.joint_count)), model)
    skeleton = [
        [0.0, 0.0, 0.0],
        [float(v) for v in ch["elbow"][0]],
        [float(v) for v in ch["tip"][0]],
    ]
    reach = model.reach
    return {
        "primitives": primitives,
        "skeleton": skeleton,
        "reach": reach,
        "cameras": {
            "lateral": {"axis": "y", "up": [0.0, 0.0, 1.0]},
            "frontal": {"axis": "x", "up": [0.0, 0.0, 1.0]},
        },
    }

import numpy as np
import pytest

from reachsim import configio
from reachsim.configio import (
    SavedConfig,
    list_scenarios,
    load_config,
    parse_saved,
    save_config,
    scene_preview,
    serialize_saved,
    validate_config,
)
from reachsim.environment import EnvConfig
from reachsim.errors import (
    ConfigParseError,
    ConfigVersionError,
    ValidationError,
)
from reachsim.ppo import HyperParams
from reachsim.tasks import SphereTargetSpec, TaskScheduleSpec

from conftest import fixed_sphere


def _saved(name="t", **hyper_kw):
    task = TaskScheduleSpec(
        primitives=[SphereTargetSpec(), fixed_sphere((0.3, 0.1, -0.2), 0.07)]
    )
    return SavedConfig(
        name=name, config=EnvConfig(task=task, seed=3), hyper=HyperParams(**hyper_kw)
    )


# ---------------------------------------------------------------------------
# round-trips


def test_round_trip_exact():
    saved = _saved(learning_rate=2.7315e-4, total_steps=123456)
    text = serialize_saved(saved)
    again = parse_saved(text)
    assert serialize_saved(again) == text
    assert again.name == "t"
    assert again.hyper.learning_rate == 2.7315e-4
    assert again.hyper.total_steps == 123456
    assert again.config.seed == 3
    prim = again.config.task.primitives[1]
    assert prim.position_ranges == ((0.3, 0.3), (0.1, 0.1), (-0.2, -0.2))
    assert prim.radius_range == (0.07, 0.07)


def test_round_trip_awkward_floats():
    saved = _saved(learning_rate=1 / 3, discount=0.1 + 0.2)
    again = parse_saved(serialize_saved(saved))
    assert again.hyper.learning_rate == 1 / 3
    assert again.hyper.discount == 0.1 + 0.2


def test_file_round_trip(tmp_path):
    path = tmp_path / "c.cfg"
    saved = _saved()
    save_config(saved, path)
    again = load_config(str(path))
    assert serialize_saved(again) == serialize_saved(saved)


def test_all_scenarios_round_trip():
    for name, saved in list_scenarios().items():
        text = serialize_saved(saved)
        again = parse_saved(text)
        assert serialize_saved(again) == text, name


def test_button_round_trip():
    saved = list_scenarios()["ar_interaction"]
    again = parse_saved(serialize_saved(saved))
    btn = again.config.task.primitives[1]
    assert btn.kind == "button"
    assert btn.centre == (0.42, 0.15, -0.29)
    assert btn.orientation_deg == 45.0
    assert btn.min_touch_force == 1.0


# ---------------------------------------------------------------------------
# parse errors


def test_unknown_key_reports_line_number():
    text = "schema_version 1\nname x\n[env]\nseed 1\nbananas 4\n"
    with pytest.raises(ConfigParseError, match="line 5"):
        parse_saved(text)


def test_unknown_section_reports_line_number():
    text = "schema_version 1\n[phantom]\n"
    with pytest.raises(ConfigParseError, match=r"line 2: unknown section"):
        parse_saved(text)


def test_wrong_arity_reports_line_number():
    text = "[model]\ngravity 0.0 0.0\n"
    with pytest.raises(ConfigParseError, match="line 2.*expects 3"):
        parse_saved(text)


def test_non_numeric_value_rejected():
    text = "[env]\nseed banana\n"
    with pytest.raises(ConfigParseError, match="not a number"):
        parse_saved(text)


def test_malformed_section_header():
    with pytest.raises(ConfigParseError, match="malformed"):
        parse_saved("[env\n")


def test_comments_and_blank_lines_ignored():
    text = serialize_saved(_saved())
    commented = "# leading comment\n\n" + text.replace(
        "[env]", "[env]  # the environment"
    )
    assert serialize_saved(parse_saved(commented)) == text


def test_newer_schema_version_rejected():
    text = serialize_saved(_saved()).replace("schema_version 1", "schema_version 2")
    with pytest.raises(ConfigVersionError):
        parse_saved(text)


def test_construction_violations_collected():
    text = serialize_saved(_saved())
    bad = text.replace("w_effort 0.05", "w_effort -1.0")
    with pytest.raises(ValidationError, match="w_effort"):
        parse_saved(bad)


def test_missing_file_lists_scenarios():
    with pytest.raises(FileNotFoundError, match="default_pointing"):
        load_config("/nonexistent/path.cfg")


# ---------------------------------------------------------------------------
# validation report


def test_validate_config_ok():
    assert validate_config(_saved()) == []
    assert validate_config(serialize_saved(_saved())) == []


def test_validate_config_reports_unreachable():
    text = serialize_saved(_saved())
    bad = text.replace("position_x 0.3 0.3", "position_x 2.0 2.0")
    violations = validate_config(bad)
    assert any("beyond reach" in v for v in violations)


def test_validate_config_reports_parse_error_text():
    violations = validate_config("[env\n")
    assert violations and "malformed" in violations[0]


# ---------------------------------------------------------------------------
# bundled scenarios


def test_scenario_library_contents():
    scen = list_scenarios()
    assert set(scen) == {
        "default_pointing", "ar_interaction", "public_display", "mobile_typing"
    }
    for saved in scen.values():
        assert validate_config(saved) == []


def test_default_pointing_structure():
    s = list_scenarios()["default_pointing"]
    prims = s.config.task.primitives
    assert len(prims) == 10
    for p in prims:
        assert p.kind == "sphere"
        assert p.radius_range == (0.05, 0.10)
        assert p.position_ranges == ((0.225, 0.35), (-0.15, 0.15), (-0.3, 0.3))
        assert p.dwell_duration == 0.25
    assert s.hyper.total_steps == 8_750_000


def test_ar_interaction_structure():
    s = list_scenarios()["ar_interaction"]
    prims = s.config.task.primitives
    assert [p.kind for p in prims] == ["sphere", "button"] * 4
    assert all(p.dwell_duration == 0.025 for p in prims if p.kind == "sphere")
    assert [p.centre for p in prims if p.kind == "button"] == [
        (0.42, 0.15, -0.29), (0.42, 0.15, 0.01),
        (0.42, -0.15, -0.29), (0.42, -0.15, 0.01),
    ]
    assert all(p.orientation_deg == 45.0 for p in prims if p.kind == "button")
    assert prims[6].radius_range == (0.05, 0.15)
    assert s.hyper.total_steps == 6_250_000


def test_public_display_structure():
    s = list_scenarios()["public_display"]
    prims = s.config.task.primitives
    assert len(prims) == 4
    assert all(p.kind == "button" for p in prims)
    assert all(p.size == (0.05, 0.05, 0.02) for p in prims)
    assert all(p.orientation_deg == 0.0 for p in prims)
    assert s.hyper.total_steps == 5_250_000


def test_mobile_typing_structure():
    s = list_scenarios()["mobile_typing"]
    prims = s.config.task.primitives
    assert len(prims) == 5
    for p in prims:
        assert p.radius_range == (0.01, 0.01)
        assert p.position_ranges == ((0.264, 0.336), (-0.075, 0.075), (-0.3, -0.3))
        assert p.dwell_duration == 0.05
    assert s.hyper.total_steps == 5_500_000


# ---------------------------------------------------------------------------
# scene preview


def test_scene_preview_sampled_sphere():
    saved = list_scenarios()["default_pointing"]
    pv = scene_preview(saved)
    boxes = [p for p in pv["primitives"] if p["role"] == "sampling_range"]
    spheres = [p for p in pv["primitives"] if p["role"] == "target"]
    assert len(boxes) == 10 and len(spheres) == 10
    box = boxes[0]
    np.testing.assert_allclose(box["centre"], [0.2875, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(box["size"], [0.125, 0.3, 0.6], atol=1e-12)
    assert box["alpha"] == 0.2
    assert spheres[0]["radius"] == pytest.approx(0.075)


def test_scene_preview_fixed_sphere_has_no_box():
    saved = SavedConfig(
        name="x",
        config=EnvConfig(
            task=TaskScheduleSpec(primitives=[fixed_sphere((0.3, 0.0, -0.2), 0.05)])
        ),
        hyper=HyperParams(),
    )
    pv = scene_preview(saved)
    assert [p["type"] for p in pv["primitives"]] == ["sphere"]
    assert pv["primitives"][0]["alpha"] == 1.0


def test_scene_preview_button_geometry():
    pv = scene_preview(list_scenarios()["public_display"])
    btn = pv["primitives"][0]
    assert btn["type"] == "box" and btn["role"] == "button"
    # depth maps to x, width to y, height to z
    np.testing.assert_allclose(btn["size"], [0.02, 0.05, 0.05], atol=1e-12)


def test_scene_preview_skeleton_and_cameras():
    pv = scene_preview(list_scenarios()["default_pointing"])
    np.testing.assert_allclose(pv["skeleton"][0], [0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(pv["skeleton"][1], [0, 0, -0.30], atol=1e-12)
    np.testing.assert_allclose(pv["skeleton"][2], [0, 0, -0.65], atol=1e-12)
    assert pv["reach"] == pytest.approx(0.65)
    assert set(pv["cameras"]) == {"lateral", "frontal"}

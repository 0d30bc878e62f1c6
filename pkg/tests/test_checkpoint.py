import numpy as np
import pytest

from reachsim.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from reachsim.errors import ValidationError


def _sample_checkpoint():
    rng = np.random.Generator(np.random.PCG64(0))
    return Checkpoint(
        step=123_456,
        config_text="schema_version = 1\nname = test\n",
        arrays={
            "net.w": rng.standard_normal((4, 7)).astype(np.float32),
            "net.b": rng.standard_normal(7).astype(np.float32),
            "opt.0.exp_avg": np.zeros((4, 7), dtype=np.float32),
        },
        extra={"adam_steps": {"0": 10}, "status": "ok"},
    )


def test_round_trip_exact(tmp_path):
    path = tmp_path / "ckpt.bin"
    original = _sample_checkpoint()
    save_checkpoint(path, original)
    loaded = load_checkpoint(path)
    assert loaded.step == original.step
    assert loaded.config_text == original.config_text
    assert loaded.version == original.version
    assert loaded.extra == original.extra
    assert set(loaded.arrays) == set(original.arrays)
    for name, arr in original.arrays.items():
        np.testing.assert_array_equal(loaded.arrays[name], arr)
        assert loaded.arrays[name].dtype == np.float32


def test_save_load_save_bitwise_identical(tmp_path):
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(p1, _sample_checkpoint())
    save_checkpoint(p2, load_checkpoint(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValidationError, match="magic"):
        load_checkpoint(path)


def test_wrong_version_rejected(tmp_path):
    path = tmp_path / "v9.bin"
    ckpt = _sample_checkpoint()
    ckpt.version = 9
    save_checkpoint(path, ckpt)
    with pytest.raises(ValidationError, match="version"):
        load_checkpoint(path)


def test_float64_inputs_stored_as_float32(tmp_path):
    path = tmp_path / "f64.bin"
    ckpt = Checkpoint(step=1, config_text="", arrays={"x": np.arange(3, dtype=np.float64)})
    save_checkpoint(path, ckpt)
    out = load_checkpoint(path)
    assert out.arrays["x"].dtype == np.float32
    np.testing.assert_array_equal(out.arrays["x"], [0.0, 1.0, 2.0])

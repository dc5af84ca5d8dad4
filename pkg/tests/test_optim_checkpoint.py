import math

import numpy as np
import pytest

from adiff import tensor as T
from adiff.checkpoint import CheckpointError, load_arrays, save_arrays
from adiff.optim import AdamState, LrSchedule, adam_step, lr_at


def test_first_adam_step_is_lr_sized():
    p = T.parameter([1.0])
    p.grad = np.array([2.0], dtype=np.float32)
    state = AdamState()
    adam_step({"w": p}, state, lr=0.1)
    # bias correction collapses step one to lr * g / (|g| + eps)
    assert abs((1.0 - p.data[0]) - 0.1) < 1e-6
    assert state.step == 1


def test_zero_gradient_keeps_parameter_but_counts_step():
    p = T.parameter([1.5])
    p.grad = np.zeros(1, dtype=np.float32)
    state = AdamState()
    adam_step({"w": p}, state, lr=0.5)
    assert p.data[0] == 1.5
    assert state.step == 1


def test_adam_descends_quadratic_bowl():
    # independent oracle: just run the textbook update rule on f(w) = w^2
    p = T.parameter([1.0])
    state = AdamState()
    for _ in range(100):
        p.grad = (2.0 * p.data).astype(p.data.dtype)
        adam_step({"w": p}, state, lr=0.05)
    assert abs(p.data[0]) < 0.1


def test_adam_shape_mismatch():
    p = T.parameter(np.ones(3))
    p.grad = np.ones(4, dtype=np.float32)
    with pytest.raises(Exception, match="shape"):
        adam_step({"w": p}, AdamState(), lr=0.1)


def _sched(kind, **kw):
    base = dict(kind=kind, base=1e-3, warmup_steps=10, total_steps=100)
    base.update(kw)
    return LrSchedule(**base)


def test_warmup_starts_at_zero_and_hits_base():
    s = _sched("warmup_cosine")
    assert lr_at(s, 0) == 0.0
    assert lr_at(s, 10) == pytest.approx(1e-3)


def test_warmup_is_continuous_at_the_boundary():
    for kind in ("warmup_cosine", "warmup_step_decay"):
        s = _sched(kind)
        left = lr_at(s, 9)
        right = lr_at(s, 10)
        assert abs(right - left) < s.base * 0.2  # one warmup increment


def test_cosine_lands_on_floor():
    s = _sched("warmup_cosine", floor=1e-6)
    assert lr_at(s, 100) == pytest.approx(1e-6)
    assert lr_at(s, 500) == pytest.approx(1e-6)


def test_step_decay_halves_per_period():
    s = _sched("warmup_step_decay", decay_every=30, decay_factor=0.5)
    assert lr_at(s, 10) == pytest.approx(1e-3)
    assert lr_at(s, 40) == pytest.approx(5e-4)
    assert lr_at(s, 70) == pytest.approx(2.5e-4)


def test_rates_never_negative():
    for kind in ("warmup_cosine", "warmup_step_decay"):
        s = _sched(kind, floor=0.0)
        assert all(lr_at(s, t) >= 0.0 for t in range(0, 300, 7))


def test_checkpoint_roundtrip_is_bit_exact(tmp_path, rng):
    arrays = {
        "a.w": rng.standard_normal((3, 4)).astype(np.float32),
        "b.bias": rng.standard_normal(7).astype(np.float32),
        "scalar": np.float32(rng.standard_normal(1)),
    }
    path = tmp_path / "model.ckpt"
    save_arrays(arrays, path)
    loaded = load_arrays(path)
    assert set(loaded) == set(arrays)
    for k in arrays:
        assert np.asarray(arrays[k]).tobytes() == loaded[k].tobytes()
        assert loaded[k].dtype == np.float32


def test_checkpoint_roundtrip_float64(tmp_path, rng):
    arrays = {"w": rng.standard_normal((5, 2))}
    path = tmp_path / "m64.ckpt"
    save_arrays(arrays, path)
    loaded = load_arrays(path)
    assert loaded["w"].dtype == np.float64
    assert loaded["w"].tobytes() == arrays["w"].tobytes()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOTADIFF" + b"\x00" * 20)
    with pytest.raises(CheckpointError, match="magic"):
        load_arrays(path)


def test_checkpoint_truncated(tmp_path, rng):
    path = tmp_path / "trunc.ckpt"
    save_arrays({"w": rng.standard_normal((8, 8)).astype(np.float32)}, path)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 9])
    with pytest.raises(CheckpointError, match="truncated"):
        load_arrays(path)


def test_checkpoint_rejects_mixed_precision(tmp_path):
    with pytest.raises(CheckpointError, match="precision"):
        save_arrays({"a": np.zeros(2, np.float32), "b": np.zeros(2, np.float64)}, tmp_path / "x")

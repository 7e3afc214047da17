"""Binary checkpoint format: round trips and corruption handling."""
import numpy as np
import pytest

from bioevent.checkpoint import CheckpointError, load_checkpoint, save_checkpoint


def sample_state() -> dict[str, np.ndarray]:
    rng = np.random.default_rng(5)
    return {
        "embed": rng.normal(size=(7, 3)),
        "enc.0.attn.wq.w": rng.normal(size=(3, 3)),
        "scalar": np.array(2.5),
    }


def test_round_trip_exact(tmp_path):
    path = tmp_path / "model.bin"
    state = sample_state()
    save_checkpoint(path, state)
    loaded = load_checkpoint(path)
    assert set(loaded) == set(state)
    for name, array in state.items():
        assert loaded[name].dtype == np.float64
        assert loaded[name].shape == array.shape
        np.testing.assert_array_equal(loaded[name], array)


def test_save_is_name_order_independent(tmp_path):
    state = sample_state()
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(a, state)
    save_checkpoint(b, dict(reversed(list(state.items()))))
    assert a.read_bytes() == b.read_bytes()


def test_empty_state_round_trips(tmp_path):
    path = tmp_path / "empty.bin"
    save_checkpoint(path, {})
    assert load_checkpoint(path) == {}


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.bin"
    save_checkpoint(path, sample_state())
    data = bytearray(path.read_bytes())
    data[:4] = b"NOPE"
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_rejects_unknown_version(tmp_path):
    path = tmp_path / "bad.bin"
    save_checkpoint(path, sample_state())
    data = bytearray(path.read_bytes())
    data[4:8] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_rejects_truncation(tmp_path):
    path = tmp_path / "bad.bin"
    save_checkpoint(path, sample_state())
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 9])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_rejects_trailing_bytes(tmp_path):
    path = tmp_path / "bad.bin"
    save_checkpoint(path, sample_state())
    path.write_bytes(path.read_bytes() + b"extra")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)

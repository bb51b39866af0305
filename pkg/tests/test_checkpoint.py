import numpy as np
import pytest

from scenerel.checkpoint import CheckpointError, load_checkpoint, save_checkpoint


def test_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "a.w0": rng.normal(size=(4, 7)),
        "a.b0": rng.normal(size=7),
        "scalar-ish": rng.normal(size=(1,)),
    }
    # include awkward values
    tensors["a.w0"][0, 0] = 1e-308
    tensors["a.w0"][0, 1] = -0.0
    config = {"seed": 3, "k": 8, "note": "trained"}
    path = tmp_path / "model.bin"
    save_checkpoint(path, tensors, config)
    loaded, loaded_config = load_checkpoint(path)
    assert loaded_config == config
    assert set(loaded) == set(tensors)
    for name in tensors:
        assert loaded[name].shape == tensors[name].shape
        assert np.array_equal(loaded[name], tensors[name])
        # -0.0 must survive exactly
    assert np.signbit(loaded["a.w0"][0, 1])


def test_rejects_non_checkpoint_file(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_rejects_truncated_payload(tmp_path):
    path = tmp_path / "model.bin"
    save_checkpoint(path, {"w": np.ones((10, 10))}, {})
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_rejects_trailing_bytes(tmp_path):
    path = tmp_path / "model.bin"
    save_checkpoint(path, {"w": np.ones(3)}, {})
    path.write_bytes(path.read_bytes() + b"extra")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_rejects_unknown_version(tmp_path):
    import json
    import struct

    from scenerel.checkpoint import MAGIC

    header = json.dumps({"format_version": 99, "config": {}, "tensors": []}).encode()
    path = tmp_path / "model.bin"
    path.write_bytes(MAGIC + struct.pack("<Q", len(header)) + header)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_save_is_deterministic(tmp_path):
    rng = np.random.default_rng(1)
    tensors = {"w": rng.normal(size=(3, 3)), "b": rng.normal(size=3)}
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(p1, tensors, {"seed": 1})
    save_checkpoint(p2, tensors, {"seed": 1})
    assert p1.read_bytes() == p2.read_bytes()

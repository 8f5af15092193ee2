import numpy as np
import pytest

from modules.errors import CheckpointError
from modules.infrastructure.io.checkpoint_io import MAGIC, Checkpoint, load_checkpoint, save_checkpoint


def test_save_and_load(tmp_path):
    tensors = {
        "w": np.arange(6, dtype=np.float32).reshape(2, 3),
        "h": np.array([[0.1, 0.2]], dtype=np.float64),
        "ids": np.array([3, 1, 2], dtype=np.int64),
        "mask": np.array([True, False]),
        "step": np.array(7.0, dtype=np.float32),
    }
    path = save_checkpoint(Checkpoint(tensors, {"epoch": 4, "config_hash": "deadbeef"}), tmp_path / "c.hgv")
    assert path.read_bytes()[:4] == MAGIC
    ckpt = load_checkpoint(path)
    assert ckpt.epoch == 4
    assert ckpt.config_hash == "deadbeef"
    assert list(ckpt.tensors) == list(tensors)
    for k, v in tensors.items():
        assert ckpt.tensors[k].dtype == v.dtype
        np.testing.assert_array_equal(ckpt.tensors[k], v)


def test_bad_magic(tmp_path):
    (tmp_path / "x.hgv").write_bytes(b"NOPE" + b"\0" * 8)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "x.hgv")


def test_truncated(tmp_path):
    path = save_checkpoint(Checkpoint({"w": np.ones(10, dtype=np.float32)}), tmp_path / "c.hgv")
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_missing(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "none.hgv")


def test_unsupported_dtype(tmp_path):
    with pytest.raises(CheckpointError):
        save_checkpoint(Checkpoint({"s": np.array(["a"])}), tmp_path / "c.hgv")

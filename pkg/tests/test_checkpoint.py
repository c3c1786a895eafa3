import numpy as np
import pytest

from synvolution.checkpoint import CheckpointError, load_checkpoint, save_checkpoint


def test_round_trip(tmp_path):
    params = {"a": np.arange(6.0).reshape(2, 3), "b": np.array(3.5), "c": np.array([1e-300, -0.0])}
    path = save_checkpoint(tmp_path / "x.ckpt", params, {"lr": 0.001, "task": "pattern", "N": 16})
    loaded, cfg = load_checkpoint(path)
    assert list(loaded) == list(params)
    for k in params:
        assert loaded[k].shape == params[k].shape
        assert loaded[k].tobytes() == params[k].tobytes()
    assert cfg == {"N": "16", "lr": "0.001", "task": "pattern"}
    assert not (tmp_path / "x.ckpt.tmp").exists()


def test_corrupt_files(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"hello\nend\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    path = save_checkpoint(tmp_path / "t.ckpt", {"a": np.ones(4)}, {})
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    with pytest.raises(CheckpointError):
        save_checkpoint(tmp_path / "s.ckpt", {}, {"name": "two words"})

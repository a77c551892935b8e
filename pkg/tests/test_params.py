"""ParameterSet ordering/uniqueness and bit-exact checkpoint round-trips."""

import numpy as np
import pytest

from tckd.params import (CHECKPOINT_MAGIC, CheckpointError, ParameterSet, load_checkpoint,
                         save_checkpoint, xavier_uniform)
from tckd.tensor import Tensor


def sample_params(seed=0):
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    params.add("z.last", Tensor(rng.normal(size=(3, 2))))
    params.add("a.first", Tensor(rng.normal(size=(1, 5))))
    params.add("m.middle", Tensor(rng.normal(size=(4,))))
    return params


def test_iteration_is_lexicographic():
    params = sample_params()
    assert params.names() == ["a.first", "m.middle", "z.last"]
    assert [n for n, _ in params.items()] == ["a.first", "m.middle", "z.last"]


def test_duplicate_names_rejected():
    params = sample_params()
    with pytest.raises(ValueError, match="duplicate"):
        params.add("a.first", Tensor(np.zeros(2)))


def test_copy_is_deep():
    params = sample_params()
    clone = params.copy()
    clone["a.first"].data[0, 0] += 1.0
    assert params["a.first"].data[0, 0] != clone["a.first"].data[0, 0]


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    params = sample_params(seed=3)
    # awkward values that must survive exactly
    params["a.first"].data[0, 0] = np.nextafter(1.0, 2.0)
    params["a.first"].data[0, 1] = -0.0
    meta = {"note": "fixture", "nested": {"k": [1, 2, 3]}}
    path = tmp_path / "weights.tckpt"
    save_checkpoint(params, path, meta)
    loaded, loaded_meta = load_checkpoint(path)
    assert loaded_meta == meta
    assert loaded.names() == params.names()
    for name, t in params.items():
        assert loaded[name].data.shape == t.data.shape
        assert loaded[name].data.tobytes() == t.data.tobytes()


def test_checkpoint_header_magic(tmp_path):
    path = tmp_path / "weights.tckpt"
    save_checkpoint(sample_params(), path)
    assert path.read_bytes().startswith(CHECKPOINT_MAGIC)


def test_tampered_header_rejected(tmp_path):
    path = tmp_path / "weights.tckpt"
    save_checkpoint(sample_params(), path)
    blob = bytearray(path.read_bytes())
    blob[0] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="header"):
        load_checkpoint(path)


def test_truncated_data_rejected(tmp_path):
    path = tmp_path / "weights.tckpt"
    save_checkpoint(sample_params(), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_xavier_bounds():
    rng = np.random.default_rng(0)
    w = xavier_uniform(rng, 30, 50).data
    limit = np.sqrt(6.0 / 80.0)
    assert w.shape == (30, 50)
    assert np.all(np.abs(w) <= limit)

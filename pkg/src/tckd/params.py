"""Named parameter collections, initializers, and the TCKPT1 checkpoint format."""

from __future__ import annotations

import json

import numpy as np

from .tensor import Tensor

CHECKPOINT_MAGIC = b"TCKPT1\n"


class CheckpointError(ValueError):
    """Checkpoint file is missing, corrupt, or inconsistent with expectations."""


class ParameterSet:
    """Uniquely-named trainable tensors; iteration is always lexicographic."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name: {name}")
        tensor.requires_grad = True
        self._entries[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def items(self):
        for name in self.names():
            yield name, self._entries[name]

    def copy(self) -> "ParameterSet":
        out = ParameterSet()
        for name, t in self.items():
            out.add(name, Tensor(t.data.copy(), requires_grad=True))
        return out

    def zero_grads(self) -> None:
        for _, t in self.items():
            t.grad = None

    def fill_missing_grads(self) -> list[str]:
        """Zero-fill grads of parameters the loss provably does not reach.

        Some parameters are structurally outside a given loss (e.g. a final
        interaction split feeding a discarded stream, or temporal matrices in
        char-only mode). Their true gradient is zero; returns the names filled.
        """
        filled = []
        for name, t in self.items():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
                filled.append(name)
        return filled


# ---------------------------------------------------------------------------
# initialization


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)))


def normal_embedding(rng: np.random.Generator, rows: int, cols: int, std: float = 0.02) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=(rows, cols)))


def zeros(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape))


def ones(*shape: int) -> Tensor:
    return Tensor(np.ones(shape))


# ---------------------------------------------------------------------------
# checkpoint io
#
# Layout:  magic "TCKPT1\n"
#          uint64 LE header length
#          header JSON: {"meta": {...}, "params": [{"name", "shape"}, ...]}
#          raw float64 little-endian C-order arrays, in header order


def save_checkpoint(params: ParameterSet, path, meta: dict | None = None) -> None:
    index = [{"name": name, "shape": list(t.data.shape)} for name, t in params.items()]
    header = json.dumps({"meta": meta or {}, "params": index}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for _, t in params.items():
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ParameterSet, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: bad checkpoint header {magic!r}")
        (hlen,) = (int.from_bytes(fh.read(8), "little"),)
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt checkpoint metadata: {exc}") from exc
        params = ParameterSet()
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise CheckpointError(f"{path}: truncated data for parameter {entry['name']}")
            arr = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
            params.add(entry["name"], Tensor(arr, requires_grad=True))
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after parameter data")
    return params, header["meta"]

"""Dense float64 tensors with taped reverse-mode automatic differentiation.

Everything is a numpy float64 array: 2-D matrices in model code, 0-d scalars
for losses. Elementwise ops take equal shapes or a Python scalar; row-wise
affine helpers (add_bias, mul_rows) are their own ops instead of general
broadcasting. The tape is the implicit DAG hanging off each output tensor,
rebuilt on every forward pass and torn down by backward().
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "constant",
    "add",
    "sub",
    "neg",
    "mul",
    "matmul",
    "transpose",
    "concat_cols",
    "vstack",
    "slice_rows",
    "slice_cols",
    "row",
    "sigmoid",
    "tanh",
    "gelu",
    "softmax",
    "layer_norm",
    "embedding",
    "reduce_sum",
    "reduce_mean",
    "add_bias",
    "mul_rows",
    "cross_entropy",
    "backward",
]


class ShapeError(ValueError):
    """Operand shapes do not conform for an operation."""


def _shape_error(op: str, *shapes) -> ShapeError:
    return ShapeError(f"{op}: incompatible shapes " + " vs ".join(str(tuple(s)) for s in shapes))


class Tensor:
    """A float64 array plus optional gradient and tape linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars allowed on the right
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data) -> Tensor:
    """A tensor that never takes gradients (masks, raw features)."""
    return Tensor(data, requires_grad=False)


def _tracked(t: Tensor) -> bool:
    # gradient must flow into t: either a leaf wanting grads or an op output
    return t.requires_grad or t._backward is not None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not _tracked(t):
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    if any(_tracked(p) for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def backward(loss: Tensor) -> None:
    """Populate grads of every tensor reachable from a scalar loss, then clear the tape."""
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in order:
        node._parents = ()
        node._backward = None


# ---------------------------------------------------------------------------
# arithmetic


def _check_elementwise(op: str, a: Tensor, b) -> float | None:
    """Return scalar value if b is a Python number, else None after shape check."""
    if isinstance(b, (int, float)):
        return float(b)
    if not isinstance(b, Tensor):
        raise TypeError(f"{op}: expected Tensor or scalar, got {type(b).__name__}")
    if a.data.shape != b.data.shape:
        raise _shape_error(op, a.data.shape, b.data.shape)
    return None


def add(a: Tensor, b) -> Tensor:
    s = _check_elementwise("add", a, b)
    if s is not None:
        def bwd(g, a=a):
            _accumulate(a, g)
        return _make(a.data + s, (a,), bwd)

    def bwd(g, a=a, b=b):
        _accumulate(a, g)
        _accumulate(b, g)
    return _make(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b) -> Tensor:
    s = _check_elementwise("sub", a, b)
    if s is not None:
        def bwd(g, a=a):
            _accumulate(a, g)
        return _make(a.data - s, (a,), bwd)

    def bwd(g, a=a, b=b):
        _accumulate(a, g)
        _accumulate(b, -g)
    return _make(a.data - b.data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g, a=a):
        _accumulate(a, -g)
    return _make(-a.data, (a,), bwd)


def mul(a: Tensor, b) -> Tensor:
    s = _check_elementwise("mul", a, b)
    if s is not None:
        def bwd(g, a=a, s=s):
            _accumulate(a, g * s)
        return _make(a.data * s, (a,), bwd)

    def bwd(g, a=a, b=b):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)
    return _make(a.data * b.data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise _shape_error("matmul (2-D only)", a.data.shape, b.data.shape)
    if a.data.shape[1] != b.data.shape[0]:
        raise _shape_error("matmul inner dims", a.data.shape, b.data.shape)

    def bwd(g, a=a, b=b):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)
    return _make(a.data @ b.data, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise _shape_error("transpose (2-D only)", a.data.shape)

    def bwd(g, a=a):
        _accumulate(a, g.T)
    return _make(a.data.T.copy(), (a,), bwd)


# ---------------------------------------------------------------------------
# shape ops


def concat_cols(tensors) -> Tensor:
    ts = list(tensors)
    if not ts:
        raise ValueError("concat_cols: empty input")
    rows = ts[0].data.shape[0]
    for t in ts:
        if t.data.ndim != 2 or t.data.shape[0] != rows:
            raise _shape_error("concat_cols", *(t.data.shape for t in ts))
    widths = [t.data.shape[1] for t in ts]
    offsets = np.cumsum([0] + widths)

    def bwd(g, ts=ts, offsets=offsets):
        for t, a, b in zip(ts, offsets[:-1], offsets[1:]):
            _accumulate(t, g[:, a:b])
    return _make(np.concatenate([t.data for t in ts], axis=1), tuple(ts), bwd)


def vstack(tensors) -> Tensor:
    ts = list(tensors)
    if not ts:
        raise ValueError("vstack: empty input")
    cols = ts[0].data.shape[-1]
    for t in ts:
        if t.data.ndim != 2 or t.data.shape[1] != cols:
            raise _shape_error("vstack", *(t.data.shape for t in ts))
    heights = [t.data.shape[0] for t in ts]
    offsets = np.cumsum([0] + heights)

    def bwd(g, ts=ts, offsets=offsets):
        for t, a, b in zip(ts, offsets[:-1], offsets[1:]):
            _accumulate(t, g[a:b])
    return _make(np.concatenate([t.data for t in ts], axis=0), tuple(ts), bwd)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2:
        raise _shape_error("slice_rows (2-D only)", a.data.shape)

    def bwd(g, a=a, start=start, stop=stop):
        if _tracked(a):
            full = np.zeros_like(a.data)
            full[start:stop] = g
            _accumulate(a, full)
    return _make(a.data[start:stop].copy(), (a,), bwd)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.data.ndim != 2:
        raise _shape_error("slice_cols (2-D only)", a.data.shape)

    def bwd(g, a=a, start=start, stop=stop):
        if _tracked(a):
            full = np.zeros_like(a.data)
            full[:, start:stop] = g
            _accumulate(a, full)
    return _make(a.data[:, start:stop].copy(), (a,), bwd)


def row(a: Tensor, i: int) -> Tensor:
    return slice_rows(a, i, i + 1)


# ---------------------------------------------------------------------------
# nonlinearities


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd(g, a=a, out=out):
        _accumulate(a, g * out * (1.0 - out))
    return _make(out, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bwd(g, a=a, out=out):
        _accumulate(a, g * (1.0 - out * out))
    return _make(out, (a,), bwd)


_GELU_C = float(np.sqrt(2.0 / np.pi))
_GELU_A = 0.044715


def gelu(a: Tensor) -> Tensor:
    """tanh-form GELU; smooth, self-contained, derivative in closed form."""
    x = a.data
    inner = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def bwd(g, a=a, x=x, t=t):
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
        _accumulate(a, g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner))
    return _make(out, (a,), bwd)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, numerically stable."""
    x = a.data
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def bwd(g, a=a, out=out):
        _accumulate(a, out * (g - (g * out).sum(axis=-1, keepdims=True)))
    return _make(out, (a,), bwd)


_LN_EPS = 1e-12


def layer_norm(a: Tensor) -> Tensor:
    """Normalize the last axis to zero mean, unit variance (no learned affine)."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    out = xc * inv

    def bwd(g, a=a, out=out, inv=inv):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * out).mean(axis=-1, keepdims=True)
        _accumulate(a, inv * (g - gm - out * gy))
    return _make(out, (a,), bwd)


# ---------------------------------------------------------------------------
# lookups, reductions, row-wise affine


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup: out[k] = table[ids[k]]. Gradient scatters back into looked-up rows."""
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1:
        raise _shape_error("embedding ids (1-D only)", idx.shape)
    n = table.data.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"embedding: id out of range [0, {n}) in {idx.tolist()}")

    def bwd(g, table=table, idx=idx):
        if _tracked(table):
            full = np.zeros_like(table.data)
            np.add.at(full, idx, g)
            _accumulate(table, full)
    return _make(table.data[idx], (table,), bwd)


def reduce_sum(a: Tensor) -> Tensor:
    def bwd(g, a=a):
        _accumulate(a, np.full_like(a.data, float(g)))
    return _make(np.asarray(a.data.sum()), (a,), bwd)


def reduce_mean(a: Tensor) -> Tensor:
    n = a.data.size

    def bwd(g, a=a, n=n):
        _accumulate(a, np.full_like(a.data, float(g) / n))
    return _make(np.asarray(a.data.mean()), (a,), bwd)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x[m,n] + b[1,n], broadcast over rows."""
    if x.data.ndim != 2 or b.data.shape != (1, x.data.shape[1]):
        raise _shape_error("add_bias", x.data.shape, b.data.shape)

    def bwd(g, x=x, b=b):
        _accumulate(x, g)
        _accumulate(b, g.sum(axis=0, keepdims=True))
    return _make(x.data + b.data, (x, b), bwd)


def mul_rows(x: Tensor, v: Tensor) -> Tensor:
    """x[m,n] * v[1,n], broadcast over rows."""
    if x.data.ndim != 2 or v.data.shape != (1, x.data.shape[1]):
        raise _shape_error("mul_rows", x.data.shape, v.data.shape)

    def bwd(g, x=x, v=v):
        _accumulate(x, g * v.data)
        _accumulate(v, (g * x.data).sum(axis=0, keepdims=True))
    return _make(x.data * v.data, (x, v), bwd)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    y = np.asarray(labels, dtype=np.intp)
    if logits.data.ndim != 2 or y.shape != (logits.data.shape[0],):
        raise _shape_error("cross_entropy", logits.data.shape, y.shape)
    x = logits.data
    m = x.max(axis=-1, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=-1)) + m[:, 0]
    nll = lse - x[np.arange(len(y)), y]
    out = np.asarray(nll.mean())

    def bwd(g, logits=logits, y=y, z=z):
        p = np.exp(z)
        p /= p.sum(axis=-1, keepdims=True)
        p[np.arange(len(y)), y] -= 1.0
        _accumulate(logits, float(g) * p / len(y))
    return _make(out, (logits,), bwd)

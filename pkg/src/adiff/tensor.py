"""Minimal reverse-mode automatic differentiation on numpy arrays.

The graph is built define-by-run: every operation returns a new ``Tensor``
holding the forward value plus a closure that propagates gradients to its
parents. ``backward`` walks the graph once in reverse topological order.
Training runs in float32 by default; gradient checks switch to float64 via
``set_default_dtype`` or the ``precision`` context manager.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "set_default_dtype",
    "get_default_dtype",
    "precision",
    "parameter",
    "constant",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "slice_axis",
    "softmax",
    "log_softmax",
    "sigmoid",
    "tanh",
    "gelu",
    "softplus",
    "layer_norm",
    "embedding",
    "take_per_row",
    "sum_all",
    "mean_all",
    "sum_axis",
    "mean_axis",
    "backward",
    "zero_grads",
    "finite_difference_check",
]

_default_dtype = np.float32


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _default_dtype = dtype.type


def get_default_dtype():
    return _default_dtype


@contextmanager
def precision(dtype):
    """Temporarily switch the dtype used for newly created tensors."""
    prev = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


class Tensor:
    """A node in the computation graph: value, optional grad, op record."""

    __slots__ = ("data", "grad", "parents", "requires_grad", "name", "_bwd")

    def __init__(self, data, parents=(), requires_grad=False, name=None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(_default_dtype)
        self.data = arr
        self.grad = None
        self.parents = tuple(parents)
        self.requires_grad = requires_grad
        self.name = name
        self._bwd = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, grad={self.grad is not None}{tag})"

    # Operator sugar; scalar operands are wrapped as constants.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=_default_dtype))


def parameter(data, name=None) -> Tensor:
    """A leaf tensor that receives gradients and optimizer updates."""
    return Tensor(np.array(data, copy=True), requires_grad=True, name=name)


def constant(data) -> Tensor:
    """A leaf tensor excluded from gradient propagation."""
    return Tensor(data)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape of a broadcast operand."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _node(data, parents, bwd) -> Tensor:
    req = any(p.requires_grad for p in parents)
    out = Tensor(data, parents=parents if req else (), requires_grad=req)
    if req:
        out._bwd = bwd
    return out


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError as e:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from e

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.shape))

    return _node(data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            _accum(a, -g)

    return _node(-a.data, (a,), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, neg(b))


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError as e:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from e

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.shape))

    return _node(data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _node(data, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            _accum(a, g.T)

    return _node(a.data.T, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    old = a.shape

    def bwd(g):
        if a.requires_grad:
            _accum(a, g.reshape(old))

    return _node(a.data.reshape(shape), (a,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat of zero tensors")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]

    def bwd(g):
        offset = 0
        for t, size in zip(tensors, sizes):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(offset, offset + size)
                _accum(t, g[tuple(idx)])
            offset += size

    return _node(data, tuple(tensors), bwd)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[idx] = g
            _accum(a, full)

    return _node(a.data[idx], (a,), bwd)


# ---------------------------------------------------------------------------
# nonlinearities


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        if a.requires_grad:
            _accum(a, (g - (g * y).sum(axis=axis, keepdims=True)) * y)

    return _node(y, (a,), bwd)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    # Stable form: x - max - log(sum(exp(x - max))).
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - logz

    def bwd(g):
        if a.requires_grad:
            _accum(a, g - np.exp(y) * g.sum(axis=axis, keepdims=True))

    return _node(y, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        if a.requires_grad:
            _accum(a, g * y * (1.0 - y))

    return _node(y, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bwd(g):
        if a.requires_grad:
            _accum(a, g * (1.0 - y * y))

    return _node(y, (a,), bwd)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu_np(x: np.ndarray) -> np.ndarray:
    """Forward of the tanh-form GELU, shared with non-autodiff code paths."""
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x**3)))


def gelu(a: Tensor) -> Tensor:
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    y = 0.5 * x * (1.0 + t)

    def bwd(g):
        if a.requires_grad:
            dinner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
            dy = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
            _accum(a, g * dy)

    return _node(y, (a,), bwd)


def softplus(a: Tensor) -> Tensor:
    y = np.logaddexp(0.0, a.data)

    def bwd(g):
        if a.requires_grad:
            _accum(a, g / (1.0 + np.exp(-a.data)))

    return _node(y, (a,), bwd)


def layer_norm(a: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean, unit variance (no affine part).

    A constant row normalizes to all zeros: the variance term vanishes and
    eps keeps the division finite.
    """
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv

    def bwd(g):
        if a.requires_grad:
            gm = g.mean(axis=-1, keepdims=True)
            gx = (g * xhat).mean(axis=-1, keepdims=True)
            _accum(a, inv * (g - gm - xhat * gx))

    return _node(xhat, (a,), bwd)


# ---------------------------------------------------------------------------
# lookups and reductions


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup into an embedding table; gradients scatter-add back."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError(f"embedding ids must be 1-d, got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range for table of {table.shape[0]} rows")
    data = table.data[ids]

    def bwd(g):
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            _accum(table, full)

    return _node(data, (table,), bwd)


def take_per_row(a: Tensor, cols) -> Tensor:
    """Pick one column per row: out[i] = a[i, cols[i]]."""
    cols = np.asarray(cols, dtype=np.int64)
    if a.data.ndim != 2 or cols.ndim != 1 or cols.size != a.shape[0]:
        raise ShapeError(f"take_per_row: got {a.shape} with {cols.size} indices")
    if cols.size and (cols.min() < 0 or cols.max() >= a.shape[1]):
        raise IndexError(f"column id out of range for {a.shape[1]} columns")
    rows = np.arange(a.shape[0])
    data = a.data[rows, cols]

    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[rows, cols] = g
            _accum(a, full)

    return _node(data, (a,), bwd)


def sum_all(a: Tensor) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            _accum(a, np.full_like(a.data, float(g)))

    return _node(a.data.sum(), (a,), bwd)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def bwd(g):
        if a.requires_grad:
            _accum(a, np.full_like(a.data, float(g) / n))

    return _node(a.data.mean(), (a,), bwd)


def sum_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, a.shape).copy())

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def mean_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    return sum_axis(a, axis, keepdims) * (1.0 / a.shape[axis])


# ---------------------------------------------------------------------------
# backward pass


def _toposort(root: Tensor) -> list[Tensor]:
    """Iterative post-order over grad-requiring nodes (graphs get deep)."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params=None) -> None:
    """Populate gradients of everything reachable from a scalar loss.

    When ``params`` is given, parameters the loss does not depend on get a
    zero gradient buffer instead of None.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.requires_grad:
        order = _toposort(loss)
        loss.grad = np.ones_like(loss.data)
        for node in reversed(order):
            if node._bwd is not None:
                node._bwd(node.grad)
    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# independent gradient oracle


def finite_difference_check(
    fn,
    params,
    eps: float = 1e-5,
    max_entries_per_param: int | None = None,
    rng: np.random.Generator | None = None,
):
    """Compare analytic gradients of ``fn()`` against central differences.

    ``fn`` must rebuild the scalar loss from the current contents of
    ``params`` on every call; the numeric side only ever evaluates forward
    values, so it is independent of the backward implementation. Returns the
    maximum relative error over the checked entries.
    """
    params = list(params)
    zero_grads(params)
    loss = fn()
    backward(loss, params)
    analytic = {id(p): p.grad.copy() for p in params}

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        if max_entries_per_param is not None and n > max_entries_per_param:
            idxs = rng.choice(n, size=max_entries_per_param, replace=False)
        else:
            idxs = np.arange(n)
        ana = analytic[id(p)].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            up = fn().item()
            flat[i] = orig - eps
            down = fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(numeric), abs(ana[i]), 1e-6)
            worst = max(worst, abs(numeric - ana[i]) / denom)
    return worst

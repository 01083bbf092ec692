"""Array-valued reverse-mode automatic differentiation on top of numpy.

A :class:`Tensor` records the op that produced it and a closure mapping the
output gradient to parent gradients. :func:`backward` walks the graph in
reverse topological order. Every op checks its output for NaN/Inf unless run
inside :func:`unchecked`.
"""
from __future__ import annotations

import contextlib
import threading

import numpy as np

from ..errors import NumericsError, ShapeError, UsageError

_state = threading.local()  # per thread, so concurrent inference cannot leak the flags


def grad_enabled() -> bool:
    return getattr(_state, "grad", True)


def finite_checks_enabled() -> bool:
    return getattr(_state, "check", True)


@contextlib.contextmanager
def unchecked():
    """Skip the per-op NaN/Inf scan in the calling thread; the caller checks results itself."""
    prev, _state.check = finite_checks_enabled(), False
    try:
        yield
    finally:
        _state.check = prev


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference) for the calling thread."""
    prev, _state.grad = grad_enabled(), False
    try:
        yield
    finally:
        _state.grad = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # arithmetic sugar
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __neg__(self): return mul(self, -1.0)
    def __matmul__(self, o): return matmul(self, o)
    def __getitem__(self, idx): return getitem(self, idx)

    def sum(self, axis=None, keepdims=False): return sum_(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 else shape)
    def transpose(self, *axes): return transpose(self, axes[0] if len(axes) == 1 else axes)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if dtype is None:
        return Tensor(np.asarray(x, dtype=np.float64))
    return Tensor(np.asarray(x, dtype=dtype))


def _pair(a, b) -> tuple[Tensor, Tensor]:
    """Coerce operands; a bare scalar/array takes the dtype of its Tensor partner."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, Tensor(np.asarray(b, dtype=a.dtype))
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return Tensor(np.asarray(a, dtype=b.dtype)), b
    return as_tensor(a), as_tensor(b)


def _make(data, parents, backward, op) -> Tensor:
    if finite_checks_enabled() and not np.all(np.isfinite(data)):
        raise NumericsError(f"non-finite values produced by op '{op}'")
    out = Tensor(data)
    out.op = op
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad = t.grad + g


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` of every tensor reachable from scalar ``loss``."""
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    order, seen = [], set()
    stack = [(loss, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# -- elementwise arithmetic ---------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))
    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))
    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.shape))
    return _make(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return _make(a.data / b.data, (a, b), bw, "div")


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    out = a.data ** p

    def bw(g):
        _accumulate(a, g * p * a.data ** (p - 1))
    return _make(out, (a,), bw, "power")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: _accumulate(a, g * out), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: _accumulate(a, g / a.data), "log")


def abs_(a) -> Tensor:
    """|x| with subgradient 0 at x = 0."""
    a = as_tensor(a)
    return _make(np.abs(a.data), (a,), lambda g: _accumulate(a, g * np.sign(a.data)), "abs")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: _accumulate(a, g * mask), "relu")


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope).astype(a.data.dtype)
    return _make(a.data * scale, (a,), lambda g: _accumulate(a, g * scale), "leaky_relu")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))  # overflow-free logistic
    return _make(out, (a,), lambda g: _accumulate(a, g * out * (1.0 - out)), "sigmoid")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: _accumulate(a, g * (1.0 - out * out)), "tanh")


# -- reductions and shape ops -------------------------------------------------

def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape))
    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw, "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g / n, a.shape))
    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), bw, "mean")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: _accumulate(a, g.reshape(a.shape)), "reshape")


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,), lambda g: _accumulate(a, g.transpose(inv)), "transpose")


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)

    basic = all(isinstance(i, (slice, int, type(Ellipsis), type(None)))
                for i in (idx if isinstance(idx, tuple) else (idx,)))

    def bw(g):
        full = np.zeros_like(a.data)
        if basic:  # no repeated positions, plain assignment suffices
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        _accumulate(a, full)
    return _make(a.data[idx], (a,), bw, "getitem")


def concat(tensors, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(ts, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)
    return _make(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), bw, "concat")


def pad_time_left(a, n: int) -> Tensor:
    """Prepend ``n`` zero frames along axis -2."""
    a = as_tensor(a)
    if n == 0:
        return a
    widths = [(0, 0)] * a.ndim
    widths[-2] = (n, 0)

    def bw(g):
        _accumulate(a, g[..., n:, :])
    return _make(np.pad(a.data, widths), (a,), bw, "pad_left")


# -- linear algebra -----------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def bw(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))
    return _make(a.data @ b.data, (a, b), bw, "matmul")


def linear(x, w, b=None) -> Tensor:
    """x @ w + b for x of shape (..., in); folds leading axes into one GEMM."""
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: input width {x.shape[-1]} does not match weight {w.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, x.shape[-1])
    out = x2 @ w.data
    if b is not None:
        b = as_tensor(b)
        out = out + b.data

    def bw(g):
        g2 = g.reshape(-1, w.shape[1])
        if x.requires_grad:
            _accumulate(x, (g2 @ w.data.T).reshape(x.shape))
        if w.requires_grad:
            _accumulate(w, x2.T @ g2)
        if b is not None and b.requires_grad:
            _accumulate(b, g2.sum(axis=0))
    parents = (x, w) if b is None else (x, w, b)
    return _make(out.reshape(*lead, w.shape[1]), parents, bw, "linear")


# -- softmax family -----------------------------------------------------------

def softmax(a, axis: int = -1, mask=None) -> Tensor:
    """Softmax along ``axis``; where boolean ``mask`` is True the weight is exactly 0."""
    a = as_tensor(a)
    z = a.data if mask is None else np.where(mask, -np.inf, a.data)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        _accumulate(a, out * (g - (g * out).sum(axis=axis, keepdims=True)))
    return _make(out, (a,), bw, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def bw(g):
        _accumulate(a, g - np.exp(out) * g.sum(axis=axis, keepdims=True))
    return _make(out, (a,), bw, "log_softmax")


# -- losses -------------------------------------------------------------------

def mae_loss(pred, target) -> Tensor:
    """Mean absolute error; subgradient 0 where pred == target."""
    return mean(abs_(sub(pred, target)))


def mse_loss(pred, target) -> Tensor:
    d = sub(pred, target)
    return mean(mul(d, d))


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(``logits``), last axis."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    flat = logits.data.reshape(-1, logits.shape[-1])
    if flat.shape[0] != labels.size:
        raise ShapeError(f"{flat.shape[0]} logit rows for {labels.size} labels")
    z = flat - flat.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(labels.size)
    loss = -logp[rows, labels].mean()

    def bw(g):
        grad = np.exp(logp)
        grad[rows, labels] -= 1.0
        _accumulate(logits, (grad * (g / labels.size)).reshape(logits.shape))
    return _make(np.asarray(loss), (logits,), bw, "cross_entropy")

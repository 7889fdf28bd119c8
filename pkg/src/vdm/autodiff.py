"""Array-valued reverse-mode automatic differentiation over numpy float64.

A ``Tape`` records every primitive executed while it is active; ``backward``
replays the records in exact reverse order, accumulating gradients additively
at fan-out points.  With no tape active all operations are plain numpy
evaluations, which keeps rollout / evaluation paths cheap.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "Tape",
    "Tensor",
    "as_tensor",
    "backward",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "relu",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "square",
    "clamp",
    "reduce_sum",
    "reduce_mean",
    "concat",
    "reshape",
    "narrow",
    "expand_dim",
    "logsumexp",
]

_ACTIVE_TAPE = None


class Tape:
    """Ordered record of primitive operations from one forward pass."""

    def __init__(self):
        self.records = []  # (out, parents, backward_fn) in execution order

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a Tape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    class pause:
        """Temporarily deactivate the active tape (constant-only regions)."""

        def __enter__(self):
            global _ACTIVE_TAPE
            self._saved = _ACTIVE_TAPE
            _ACTIVE_TAPE = None
            return self

        def __exit__(self, *exc):
            global _ACTIVE_TAPE
            _ACTIVE_TAPE = self._saved
            return False


class Tensor:
    """A float64 array plus a gradient slot for leaf parameters."""

    __slots__ = ("value", "requires_grad", "grad", "_from_tape")

    def __init__(self, value, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.value) if requires_grad else None
        self._from_tape = False

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self):
        return float(self.value)

    def detach(self):
        return Tensor(self.value)

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and ndarrays are lifted to constant tensors
    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, as_tensor(other))

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __neg__(self):
        return neg(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(value, parents, backward_fn):
    out = Tensor(value)
    tape = _ACTIVE_TAPE
    if tape is not None:
        out._from_tape = True
        tape.records.append((out, parents, backward_fn))
    return out


def _unbroadcast(grad, shape):
    """Reduce a broadcasted gradient back to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(name, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(
            f"{name}: shapes {a.shape} and {b.shape} do not broadcast"
        ) from None


def backward(tape, loss):
    """Populate ``grad`` on every requires_grad leaf reachable from ``loss``.

    ``loss`` must be a scalar produced under ``tape``.  Gradients of leaf
    tensors accumulate (+=); call ``zero_grad`` between independent passes.
    """
    if loss.value.ndim != 0:
        raise ValueError(f"backward: loss must be a scalar, got shape {loss.value.shape}")
    grads = {id(loss): np.ones((), dtype=np.float64)}

    def deposit(t, g):
        if t._from_tape:
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
        elif t.requires_grad:
            t.grad += _unbroadcast(np.asarray(g, dtype=np.float64), t.value.shape)

    for out, parents, backward_fn in reversed(tape.records):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for parent, pg in zip(parents, backward_fn(g)):
            if pg is not None:
                deposit(parent, pg)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b):
    _check_broadcast("add", a.value, b.value)
    return _emit(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)),
    )


def sub(a, b):
    _check_broadcast("sub", a.value, b.value)
    return _emit(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), -_unbroadcast(g, b.value.shape)),
    )


def mul(a, b):
    _check_broadcast("mul", a.value, b.value)
    return _emit(
        a.value * b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def div(a, b):
    _check_broadcast("div", a.value, b.value)
    inv = 1.0 / b.value
    return _emit(
        a.value * inv,
        (a, b),
        lambda g: (
            _unbroadcast(g * inv, a.value.shape),
            _unbroadcast(-g * a.value * inv * inv, b.value.shape),
        ),
    )


def neg(a):
    return _emit(-a.value, (a,), lambda g: (-g,))


def matmul(a, b):
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ValueError(
            f"matmul: incompatible shapes {a.value.shape} and {b.value.shape}"
        )
    av, bv = a.value, b.value
    return _emit(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def relu(a):
    mask = a.value > 0.0
    return _emit(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a):
    x = a.value
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _emit(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    out = np.tanh(a.value)
    return _emit(out, (a,), lambda g: (g * (1.0 - out * out),))


def exp(a):
    out = np.exp(a.value)
    return _emit(out, (a,), lambda g: (g * out,))


def log(a):
    if np.any(a.value <= 0.0):
        raise ValueError("log: input must be strictly positive")
    av = a.value
    return _emit(np.log(av), (a,), lambda g: (g / av,))


def square(a):
    av = a.value
    return _emit(av * av, (a,), lambda g: (2.0 * g * av,))


def clamp(a, lo, hi):
    """Elementwise clip; gradient passes only through the interior."""
    mask = (a.value > lo) & (a.value < hi)
    return _emit(np.clip(a.value, lo, hi), (a,), lambda g: (g * mask,))


def reduce_sum(a, axis=None, keepdims=False):
    shape = a.value.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        g_exp = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g_exp, shape).copy(),)

    return _emit(a.value.sum(axis=axis, keepdims=keepdims), (a,), back)


def reduce_mean(a, axis=None, keepdims=False):
    shape = a.value.shape
    n = a.value.size if axis is None else shape[axis]

    def back(g):
        if axis is None:
            return (np.broadcast_to(g / n, shape).copy(),)
        g_exp = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g_exp / n, shape).copy(),)

    return _emit(a.value.mean(axis=axis, keepdims=keepdims), (a,), back)


def concat(tensors, axis=-1):
    tensors = tuple(tensors)
    values = [t.value for t in tensors]
    base = values[0].ndim
    if any(v.ndim != base for v in values):
        raise ValueError(
            f"concat: rank mismatch {[v.shape for v in values]}"
        )
    sizes = [v.shape[axis] for v in values]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return _emit(np.concatenate(values, axis=axis), tensors, back)


def reshape(a, shape):
    old = a.value.shape
    return _emit(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def narrow(a, axis, start, size):
    """Contiguous slice of ``size`` entries along ``axis`` starting at ``start``."""
    idx = [slice(None)] * a.value.ndim
    idx[axis] = slice(start, start + size)
    idx = tuple(idx)
    shape = a.value.shape

    def back(g):
        full = np.zeros(shape, dtype=np.float64)
        full[idx] = g
        return (full,)

    return _emit(a.value[idx].copy(), (a,), back)


def expand_dim(a, axis, reps):
    """Insert an axis of length ``reps`` by broadcasting; gradient sums it out."""
    expanded = np.expand_dims(a.value, axis)
    target = list(expanded.shape)
    target[axis] = reps
    return _emit(
        np.broadcast_to(expanded, target).copy(),
        (a,),
        lambda g: (g.sum(axis=axis),),
    )


def logsumexp(a, axis):
    """Numerically stable log-sum-exp along ``axis`` (max shift is constant)."""
    m = np.max(a.value, axis=axis, keepdims=True)
    shifted = exp(sub(a, Tensor(m)))
    return add(log(reduce_sum(shifted, axis=axis)), Tensor(np.squeeze(m, axis=axis)))

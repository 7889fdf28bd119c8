"""Named parameter storage and the Adam optimizer."""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor

__all__ = ["ParameterStore", "adam_step"]


class ParameterStore:
    """Named parameter tensors with gradient slots and Adam moment buffers.

    Every parameter carries a gradient array and first/second moment arrays of
    identical shape; the step counter advances by exactly one per optimizer
    step.
    """

    def __init__(self):
        self.params = {}  # name -> Tensor(requires_grad=True)
        self.m = {}
        self.v = {}
        self.step_count = 0

    def add(self, name, value):
        if name in self.params:
            raise ValueError(f"parameter {name!r} already registered")
        t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.value)
        self.v[name] = np.zeros_like(t.value)
        return t

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def names(self):
        return list(self.params)

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def size(self):
        return sum(t.value.size for t in self.params.values())

    def copy(self):
        out = ParameterStore()
        for name, t in self.params.items():
            out.add(name, t.value.copy())
            out.m[name] = self.m[name].copy()
            out.v[name] = self.v[name].copy()
        out.step_count = self.step_count
        return out

    def load_values(self, arrays):
        for name, arr in arrays.items():
            t = self.params[name]
            if t.value.shape != np.asarray(arr).shape:
                raise ValueError(
                    f"parameter {name!r}: shape {np.asarray(arr).shape} != {t.value.shape}"
                )
            t.value[...] = arr


def adam_step(store, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    """In-place bias-corrected Adam update; gradients are zeroed afterwards."""
    b1, b2 = betas
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in store.params.items():
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in parameter {name!r}")
        m = store.m[name]
        v = store.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    store.zero_grad()
    return store

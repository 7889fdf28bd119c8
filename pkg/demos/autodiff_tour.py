#!/usr/bin/env python3
# A walk through the numeric core: record a computation on a tape, pull
# gradients back through it, check one against finite differences, and take a
# few optimizer steps on a toy curve fit.

import numpy as np

import vdm.autodiff as ad
from vdm.autodiff import Tape, Tensor, backward
from vdm.optim import ParameterStore, adam_step

rng = np.random.default_rng(0)

# --- gradients of a small expression -------------------------------------
store = ParameterStore()
w = store.add("w", rng.normal(size=(3, 2)))
x = Tensor(rng.normal(size=(5, 3)))

with Tape() as tape:
    y = ad.tanh(ad.matmul(x, w))
    loss = ad.reduce_mean(ad.square(y))
    backward(tape, loss)

print("loss:", float(loss.value))
print("dloss/dw[0,0]:", w.grad[0, 0])

# finite-difference check of the same entry
eps = 1e-6
w.value[0, 0] += eps
up = float(ad.reduce_mean(ad.square(ad.tanh(ad.matmul(x, w)))).value)
w.value[0, 0] -= 2 * eps
down = float(ad.reduce_mean(ad.square(ad.tanh(ad.matmul(x, w)))).value)
w.value[0, 0] += eps
print("finite difference:", (up - down) / (2 * eps))

# --- fit y = sin(x) with a tiny two-layer net ----------------------------
xs = np.linspace(-2, 2, 64)[:, None]
ys = np.sin(xs * np.pi / 2)

net = ParameterStore()
net.add("w1", rng.uniform(-0.5, 0.5, size=(1, 16)))
net.add("b1", np.zeros(16))
net.add("w2", rng.uniform(-0.5, 0.5, size=(16, 1)))
net.add("b2", np.zeros(1))

inputs, targets = Tensor(xs), Tensor(ys)
for step in range(400):
    with Tape() as tape:
        h = ad.tanh(ad.matmul(inputs, net["w1"]) + net["b1"])
        pred = ad.matmul(h, net["w2"]) + net["b2"]
        loss = ad.reduce_mean(ad.square(pred - targets))
        backward(tape, loss)
    adam_step(net, lr=1e-2)
    if step % 100 == 0:
        print(f"step {step}: mse={float(loss.value):.5f}")
print(f"final mse: {float(loss.value):.5f}")

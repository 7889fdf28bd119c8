"""Diagonal Gaussians: the building block of every distribution in the model."""
from __future__ import annotations

import numpy as np

from .autodiff import as_tensor, log, reduce_sum, square

__all__ = ["LOG_2PI", "DiagGaussian", "gaussian_log_pdf", "gaussian_kl"]

LOG_2PI = float(np.log(2.0 * np.pi))


class DiagGaussian:
    """Mean/std pair over the last axis; std must be strictly positive."""

    __slots__ = ("mean", "std")

    def __init__(self, mean, std):
        self.mean = as_tensor(mean)
        self.std = as_tensor(std)
        if self.mean.shape != self.std.shape:
            raise ValueError(
                f"DiagGaussian: mean shape {self.mean.shape} != std shape {self.std.shape}"
            )
        if not np.all(np.isfinite(self.mean.value)) or not np.all(np.isfinite(self.std.value)):
            raise ValueError("DiagGaussian: parameters must be finite")
        if np.any(self.std.value <= 0.0):
            raise ValueError("DiagGaussian: std must be strictly positive")

    @property
    def dim(self):
        return self.mean.shape[-1]

    def detach(self):
        return DiagGaussian(self.mean.detach(), self.std.detach())

    def sample(self, rng):
        """One reparameterization-free draw as a plain array."""
        eps = rng.standard_normal(self.mean.shape)
        return self.mean.value + self.std.value * eps

    def __repr__(self):
        return f"DiagGaussian(dim={self.dim}, batch={self.mean.shape[:-1]})"


def gaussian_log_pdf(x, g):
    """log N(x; g.mean, diag(g.std**2)), summed over the last axis.

    Differentiable in x and in the Gaussian parameters.  For 1-d inputs the
    result is a scalar; batched inputs reduce only the trailing axis.
    """
    x = as_tensor(x)
    z = (x - g.mean) / g.std
    per_dim = -0.5 * LOG_2PI - log(g.std) - 0.5 * square(z)
    return reduce_sum(per_dim, axis=-1)


def gaussian_kl(q, p):
    """Closed-form KL(q || p) between diagonal Gaussians, summed over the last axis."""
    var_ratio = square(q.std / p.std)
    mean_term = square((q.mean - p.mean) / p.std)
    per_dim = 0.5 * (var_ratio + mean_term - 1.0) + log(p.std) - log(q.std)
    return reduce_sum(per_dim, axis=-1)

"""Model configuration and the six parameterized networks.

All networks are pure functions of (parameters, inputs).  Inputs may be a
single vector ``(d,)`` or a batch ``(B, d)``; outputs follow the input rank.
Standard deviations are produced as ``exp(raw)`` with the raw output clamped
to [-10, 10] to guard overflow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .gaussians import DiagGaussian
from .optim import ParameterStore

__all__ = ["ModelConfig", "VdmModel", "parameter_counts"]

RAW_STD_CLAMP = 10.0

WEIGHTING_MODES = ("delta", "categorical")
SAMPLER_MODES = ("sca", "monte_carlo")
BRANCH_LIKELIHOOD_MODES = ("prior_mean", "prior_sample")


@dataclass
class ModelConfig:
    """Dimensions, sample count and training weights for one model instance."""

    d_x: int
    d_z: int
    d_h: int
    k: int
    kappa: float = 0.5
    weighting_mode: str = "delta"
    sampler_mode: str = "sca"
    branch_likelihood: str = "prior_mean"
    omega1: float = 1.0
    omega2: float = 1.0
    lr: float = 1e-3

    def __post_init__(self):
        for name in ("d_x", "d_z", "d_h", "k"):
            if getattr(self, name) < 1:
                raise ValueError(f"ModelConfig: {name} must be a positive integer")
        if self.kappa <= 0:
            raise ValueError("ModelConfig: kappa must be positive")
        if self.weighting_mode not in WEIGHTING_MODES:
            raise ValueError(f"ModelConfig: unknown weighting_mode {self.weighting_mode!r}")
        if self.sampler_mode not in SAMPLER_MODES:
            raise ValueError(f"ModelConfig: unknown sampler_mode {self.sampler_mode!r}")
        if self.branch_likelihood not in BRANCH_LIKELIHOOD_MODES:
            raise ValueError(
                f"ModelConfig: unknown branch_likelihood {self.branch_likelihood!r}"
            )
        if self.k == 1 and self.sampler_mode == "sca":
            raise ValueError("ModelConfig: k=1 requires monte_carlo sampling")
        if self.sampler_mode == "sca" and self.k != 2 * self.d_z + 1:
            raise ValueError(
                f"ModelConfig: sca sampling requires k = 2*d_z+1 = {2 * self.d_z + 1}, got k={self.k}"
            )
        if self.omega1 < 0 or self.omega2 < 0:
            raise ValueError("ModelConfig: omega1/omega2 must be nonnegative")
        if self.lr <= 0:
            raise ValueError("ModelConfig: lr must be positive")

    def to_dict(self):
        return {
            "d_x": self.d_x,
            "d_z": self.d_z,
            "d_h": self.d_h,
            "k": self.k,
            "kappa": self.kappa,
            "weighting_mode": self.weighting_mode,
            "sampler_mode": self.sampler_mode,
            "branch_likelihood": self.branch_likelihood,
            "omega1": self.omega1,
            "omega2": self.omega2,
            "lr": self.lr,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _init_linear(store, name, fan_in, fan_out, rng):
    # biases share the uniform fan-in bound so no hidden unit starts exactly
    # on a relu kink when an input (e.g. h_0) is identically zero
    bound = 1.0 / np.sqrt(fan_in)
    store.add(f"{name}.w", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    store.add(f"{name}.b", rng.uniform(-bound, bound, size=fan_out))


def _init_gru(store, prefix, d_in, d_h, rng):
    bound = 1.0 / np.sqrt(d_in + d_h)
    for gate in ("r", "u", "c"):
        store.add(f"{prefix}.w{gate}", rng.uniform(-bound, bound, size=(d_in + d_h, d_h)))
        store.add(f"{prefix}.b{gate}", rng.uniform(-bound, bound, size=d_h))


def _linear(store, name, x):
    return ad.matmul(x, store[f"{name}.w"]) + store[f"{name}.b"]


def _mlp3(store, prefix, x):
    """Three linear layers with ReLU on the two hidden layers."""
    h = ad.relu(_linear(store, f"{prefix}0", x))
    h = ad.relu(_linear(store, f"{prefix}1", h))
    return _linear(store, f"{prefix}2", h)


def _gaussian_head(raw, d):
    mean = ad.narrow(raw, -1, 0, d)
    std = ad.exp(ad.clamp(ad.narrow(raw, -1, d, d), -RAW_STD_CLAMP, RAW_STD_CLAMP))
    return DiagGaussian(mean, std)


def _check_input(name, x, dim):
    v = x.value if isinstance(x, Tensor) else np.asarray(x)
    if v.shape[-1] != dim:
        raise ValueError(f"{name}: expected trailing dimension {dim}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name}: non-finite input")


def _as_batch(x):
    """Lift to (B, d); report whether the caller passed a single vector."""
    t = as_tensor(x)
    if t.ndim == 1:
        return ad.reshape(t, (1, t.shape[0])), True
    return t, False


def _squeeze_gaussian(g, single):
    if not single:
        return g
    d = g.mean.shape[-1]
    return DiagGaussian(ad.reshape(g.mean, (d,)), ad.reshape(g.std, (d,)))


def _gru_cell(store, prefix, x, h_prev):
    """One gated-recurrent-unit update.

    Update gate u acts as the carry gate: u -> 1 passes h_prev through
    unchanged, so h' = u * h_prev + (1 - u) * candidate.
    """
    xh = ad.concat([x, h_prev], axis=-1)
    # gates share the concatenated input; candidate sees the reset-scaled state
    r = ad.sigmoid(ad.matmul(xh, store[f"{prefix}.wr"]) + store[f"{prefix}.br"])
    u = ad.sigmoid(ad.matmul(xh, store[f"{prefix}.wu"]) + store[f"{prefix}.bu"])
    xrh = ad.concat([x, r * h_prev], axis=-1)
    c = ad.tanh(ad.matmul(xrh, store[f"{prefix}.wc"]) + store[f"{prefix}.bc"])
    return u * h_prev + (1.0 - u) * c


class VdmModel:
    """Bundle of config plus model and discriminator parameter stores."""

    def __init__(self, config, params, disc):
        self.config = config
        self.params = params
        self.disc = disc

    @classmethod
    def initialize(cls, config, rng):
        params = ParameterStore()
        _init_linear(params, "enc0", config.d_x, 32, rng)
        _init_linear(params, "enc1", 32, 32, rng)
        _init_linear(params, "enc2", 32, 2 * config.d_z, rng)
        _init_linear(params, "tra0", config.d_h, 64, rng)
        _init_linear(params, "tra1", 64, 64, rng)
        _init_linear(params, "tra2", 64, 2 * config.d_z, rng)
        _init_linear(params, "dec0", config.d_z + config.d_h, 32, rng)
        _init_linear(params, "dec1", 32, 32, rng)
        _init_linear(params, "dec2", 32, 2 * config.d_x, rng)
        _init_linear(params, "inf0", config.d_h + config.d_x, 64, rng)
        _init_linear(params, "inf1", 64, 64, rng)
        _init_linear(params, "inf2", 64, 2 * config.d_z, rng)
        _init_gru(params, "gru", config.d_z, config.d_h, rng)

        disc = ParameterStore()
        _init_gru(disc, "gru", config.d_x, config.d_h, rng)
        _init_linear(disc, "mlp0", config.d_h + config.d_x, 32, rng)
        _init_linear(disc, "mlp1", 32, 32, rng)
        _init_linear(disc, "mlp2", 32, 1, rng)
        return cls(config, params, disc)

    # ------------------------------------------------------------------
    # generative / inference networks (shared parameters)
    # ------------------------------------------------------------------

    def encode_initial(self, x):
        """Belief over z from the first observation of a sequence."""
        _check_input("encode_initial", x, self.config.d_x)
        xb, single = _as_batch(x)
        g = _gaussian_head(_mlp3(self.params, "enc", xb), self.config.d_z)
        return _squeeze_gaussian(g, single)

    def transition_prior(self, h):
        """p(z_t | h_{t-1}) as a diagonal Gaussian."""
        _check_input("transition_prior", h, self.config.d_h)
        hb, single = _as_batch(h)
        g = _gaussian_head(_mlp3(self.params, "tra", hb), self.config.d_z)
        return _squeeze_gaussian(g, single)

    def gru_advance(self, z, h_prev):
        """One recurrent update; the same parameters serve generation and inference."""
        _check_input("gru_advance", z, self.config.d_z)
        _check_input("gru_advance", h_prev, self.config.d_h)
        zb, single = _as_batch(z)
        hb, _ = _as_batch(h_prev)
        out = _gru_cell(self.params, "gru", zb, hb)
        if single:
            return ad.reshape(out, (self.config.d_h,))
        return out

    def emit(self, z, h_prev):
        """Emission density p(x_t | z_t, h_{t-1}); h is the previous recurrent state."""
        _check_input("emit", z, self.config.d_z)
        _check_input("emit", h_prev, self.config.d_h)
        zb, single = _as_batch(z)
        hb, _ = _as_batch(h_prev)
        g = _gaussian_head(
            _mlp3(self.params, "dec", ad.concat([zb, hb], axis=-1)), self.config.d_x
        )
        return _squeeze_gaussian(g, single)

    def infer_component(self, s, x):
        """One mixture component q(z_t | s_{t-1}, x_t)."""
        _check_input("infer_component", s, self.config.d_h)
        _check_input("infer_component", x, self.config.d_x)
        sb, single = _as_batch(s)
        xb, _ = _as_batch(x)
        g = _gaussian_head(
            _mlp3(self.params, "inf", ad.concat([sb, xb], axis=-1)), self.config.d_z
        )
        return _squeeze_gaussian(g, single)

    # ------------------------------------------------------------------
    # discriminator (disjoint parameters)
    # ------------------------------------------------------------------

    def disc_initial_state(self, batch=None):
        shape = (self.config.d_h,) if batch is None else (batch, self.config.d_h)
        return Tensor(np.zeros(shape))

    def disc_step(self, x, h_prev):
        """Advance the discriminator's own prefix summarizer by one observation."""
        _check_input("disc_step", x, self.config.d_x)
        xb, single = _as_batch(x)
        hb, _ = _as_batch(h_prev)
        out = _gru_cell(self.disc, "gru", xb, hb)
        if single:
            return ad.reshape(out, (self.config.d_h,))
        return out

    def discriminate(self, prefix_summary, x):
        """Probability in (0,1) that x is a real continuation of the prefix."""
        _check_input("discriminate", prefix_summary, self.config.d_h)
        _check_input("discriminate", x, self.config.d_x)
        hb, single = _as_batch(prefix_summary)
        xb, _ = _as_batch(x)
        logit = _mlp3(self.disc, "mlp", ad.concat([hb, xb], axis=-1))
        p = ad.sigmoid(logit)
        if single:
            return ad.reshape(p, (1,))
        return p


def parameter_counts(config):
    """Analytic parameter counts for (model, discriminator); init-independent."""

    def lin(i, o):
        return i * o + o

    model = (
        lin(config.d_x, 32) + lin(32, 32) + lin(32, 2 * config.d_z)
        + lin(config.d_h, 64) + lin(64, 64) + lin(64, 2 * config.d_z)
        + lin(config.d_z + config.d_h, 32) + lin(32, 32) + lin(32, 2 * config.d_x)
        + lin(config.d_h + config.d_x, 64) + lin(64, 64) + lin(64, 2 * config.d_z)
        + 3 * lin(config.d_z + config.d_h, config.d_h)
    )
    disc = (
        3 * lin(config.d_x + config.d_h, config.d_h)
        + lin(config.d_h + config.d_x, 32) + lin(32, 32) + lin(32, 1)
    )
    return model, disc

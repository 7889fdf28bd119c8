"""The filtering recursion: mixture beliefs, weighting, forecasting.

All public entry points accept batched observations with a leading batch
axis; a single trajectory is the B = 1 case.  The recursion alternates:
sample latents from the previous collapsed posterior, push each through the
recurrent cell, build one mixture component per sample from the new
observation, pick indicator weights from branch likelihoods, and carry the
selected component plus the expected recurrent state forward.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .gaussians import DiagGaussian, gaussian_log_pdf
from .sampling import latent_sample_batch, sigma_points

__all__ = [
    "MixtureBelief",
    "StepInfo",
    "compute_weights",
    "weights_from_loglik",
    "belief_init",
    "belief_step",
    "filter_sequence",
    "generate",
    "one_step_predictive",
    "PredictiveMixture",
    "export_predictive_prior",
]


@dataclass
class MixtureBelief:
    """Filtering state after absorbing one observation.

    components: (B, k, d_z) mixture over z_t
    weights:    (B, k) simplex, exactly one-hot per row under indicator modes
    branch_states: (B, k, d_h) recurrent samples s_{t-1}
    expected_h: (B, d_h) convex combination of branch states
    collapsed:  (B, d_z) single Gaussian carried to the next step
    """

    components: DiagGaussian
    weights: np.ndarray
    branch_states: Tensor
    expected_h: Tensor
    collapsed: DiagGaussian

    @property
    def batch(self):
        return self.weights.shape[0]

    @property
    def k(self):
        return self.weights.shape[1]


@dataclass
class StepInfo:
    """Intermediate tensors of one belief step, reused by the training losses."""

    z_samples: Tensor          # (B, k, d_z) latents drawn from the previous posterior
    branch_states_flat: Tensor  # (B*k, d_h)
    q_flat: DiagGaussian       # (B*k, d_z) mixture components
    prior_flat: DiagGaussian   # (B*k, d_z) transition priors at each branch
    branch_loglik: Tensor      # (B, k) log p(x_t | h_{t-1} = s^{(j)})
    weights: np.ndarray        # (B, k)
    recon_eps: np.ndarray | None = None  # reparameterization noise for the bound


def _as_batch_array(x, dim, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"{name}: expected (B, {dim}) observations, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite observation")
    return arr


def _branch_likelihood(model, s_flat, x, k):
    """Differentiable log p(x_t | h_{t-1}=s) per branch, plus the branch priors.

    The latent is resolved at the transition prior's mean (deterministic,
    cheap); ``prior_sample`` in the config swaps in a single driverless draw,
    which callers provide through the rng hook on belief_step.
    """
    b = x.shape[0]
    prior_flat = model.transition_prior(s_flat)
    z_branch = prior_flat.mean
    em = model.emit(z_branch, s_flat)
    x_rep = Tensor(np.repeat(x, k, axis=0))
    ll_flat = gaussian_log_pdf(x_rep, em)
    return ad.reshape(ll_flat, (b, k)), prior_flat


def weights_from_loglik(loglik, mode, rng=None):
    """Indicator weights (B, k) from branch log-likelihoods.

    delta: one-hot at the argmax (lowest index wins ties).  categorical:
    one-hot at an index drawn with probability proportional to likelihood.
    """
    ll = np.asarray(loglik, dtype=np.float64)
    if ll.ndim == 1:
        ll = ll[None, :]
    if np.any(np.isnan(ll)) or np.any(np.all(np.isneginf(ll), axis=1)):
        raise FloatingPointError("weights_from_loglik: degenerate branch likelihoods")
    b, k = ll.shape
    if mode == "delta":
        idx = np.argmax(ll, axis=1)
    elif mode == "categorical":
        if rng is None:
            raise ValueError("weights_from_loglik: categorical mode needs an rng")
        shifted = ll - ll.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        u = rng.random((b, 1))
        idx = (u > np.cumsum(probs, axis=1)).sum(axis=1)
        idx = np.minimum(idx, k - 1)
    else:
        raise ValueError(f"weights_from_loglik: unknown mode {mode!r}")
    weights = np.zeros((b, k))
    weights[np.arange(b), idx] = 1.0
    return weights


def compute_weights(branch_states, x, mode, model, rng=None):
    """Weights for explicit branch states; gradients are never taken here."""
    s = branch_states.value if isinstance(branch_states, Tensor) else np.asarray(branch_states)
    single = s.ndim == 2
    if single:
        s = s[None, ...]
    b, k, d_h = s.shape
    x_arr = _as_batch_array(x, model.config.d_x, "compute_weights")
    with Tape.pause():
        ll, _ = _branch_likelihood(model, Tensor(s.reshape(b * k, d_h)), x_arr, k)
    weights = weights_from_loglik(ll.value, mode, rng)
    return weights[0] if single else weights


def belief_init(model, x_first):
    """Single-component belief from the initial-observation encoder; h_0 = 0."""
    x = _as_batch_array(x_first, model.config.d_x, "belief_init")
    b = x.shape[0]
    g = model.encode_initial(Tensor(x))
    comp = DiagGaussian(ad.expand_dim(g.mean, 1, 1), ad.expand_dim(g.std, 1, 1))
    return MixtureBelief(
        components=comp,
        weights=np.ones((b, 1)),
        branch_states=Tensor(np.zeros((b, 1, model.config.d_h))),
        expected_h=Tensor(np.zeros((b, model.config.d_h))),
        collapsed=g,
    )


def belief_step(model, belief, x, rng, weights_override=None):
    """Advance the belief by one observation; returns the new belief and
    the intermediate quantities the training losses reuse.

    ``weights_override`` replaces the computed indicator weights (used by
    gradient checks that must hold the branch selection fixed).
    """
    cfg = model.config
    x_arr = _as_batch_array(x, cfg.d_x, "belief_step")
    b = x_arr.shape[0]
    k = cfg.k

    z = latent_sample_batch(belief.collapsed, cfg, rng)           # (B, k, d_z)
    z_flat = ad.reshape(z, (b * k, cfg.d_z))
    h_rep = ad.reshape(ad.expand_dim(belief.expected_h, 1, k), (b * k, cfg.d_h))
    s_flat = model.gru_advance(z_flat, h_rep)                      # (B*k, d_h)
    s = ad.reshape(s_flat, (b, k, cfg.d_h))

    x_rep = Tensor(np.repeat(x_arr, k, axis=0))
    q_flat = model.infer_component(s_flat, x_rep)                  # (B*k, d_z)

    loglik, prior_flat = _branch_likelihood(model, s_flat, x_arr, k)
    if cfg.branch_likelihood == "prior_sample":
        # re-resolve the branch latent with one reparameterized draw
        eps = rng.standard_normal((b * k, cfg.d_z))
        z_draw = prior_flat.mean + prior_flat.std * Tensor(eps)
        em = model.emit(z_draw, s_flat)
        loglik = ad.reshape(gaussian_log_pdf(x_rep, em), (b, k))
    if weights_override is not None:
        weights = np.asarray(weights_override, dtype=np.float64)
    else:
        weights = weights_from_loglik(loglik.value, cfg.weighting_mode, rng)

    w3 = Tensor(weights[:, :, None])
    expected_h = ad.reduce_sum(w3 * s, axis=1)                     # (B, d_h)

    q_mean = ad.reshape(q_flat.mean, (b, k, cfg.d_z))
    q_std = ad.reshape(q_flat.std, (b, k, cfg.d_z))
    collapsed = DiagGaussian(
        ad.reduce_sum(w3 * q_mean, axis=1),
        ad.reduce_sum(w3 * q_std, axis=1),
    )

    new_belief = MixtureBelief(
        components=DiagGaussian(q_mean, q_std),
        weights=weights,
        branch_states=s,
        expected_h=expected_h,
        collapsed=collapsed,
    )
    info = StepInfo(
        z_samples=z,
        branch_states_flat=s_flat,
        q_flat=q_flat,
        prior_flat=prior_flat,
        branch_loglik=loglik,
        weights=weights,
    )
    return new_belief, info


def filter_sequence(model, x_prefix, rng):
    """Run the recursion over x_{1:tau}; returns the final and per-step beliefs."""
    arr = np.asarray(x_prefix, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, ...]
    if arr.ndim != 3 or arr.shape[1] < 1:
        raise ValueError(f"filter_sequence: expected (B, T>=1, d_x), got {arr.shape}")
    belief = belief_init(model, arr[:, 0])
    beliefs = [belief]
    for t in range(1, arr.shape[1]):
        belief, _ = belief_step(model, belief, arr[:, t], rng)
        beliefs.append(belief)
    return belief, beliefs


def generate(model, belief, horizon, rng):
    """Sample a (B, horizon, d_x) continuation from the generative model.

    Runs tape-free: forecasts are never differentiated through.
    """
    if horizon < 1:
        raise ValueError("generate: horizon must be >= 1")
    cfg = model.config
    with Tape.pause():
        b = belief.batch
        z = Tensor(belief.collapsed.detach().sample(rng))
        h = Tensor(belief.expected_h.value.copy())
        h = model.gru_advance(z, h)
        out = np.empty((b, horizon, cfg.d_x))
        for t in range(horizon):
            prior = model.transition_prior(h)
            z = Tensor(prior.sample(rng))
            em = model.emit(z, h)
            out[:, t] = em.sample(rng)
            h = model.gru_advance(z, h)
    return out


@dataclass
class PredictiveMixture:
    """Equal-weight Gaussian mixture over the next observation."""

    means: np.ndarray  # (B, m, d_x)
    stds: np.ndarray   # (B, m, d_x)

    @property
    def n_components(self):
        return self.means.shape[1]

    def log_density(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        z = (x[:, None, :] - self.means) / self.stds
        comp = -0.5 * np.log(2.0 * np.pi) - np.log(self.stds) - 0.5 * z * z
        comp_ll = comp.sum(axis=2)  # (B, m)
        m = comp_ll.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(comp_ll - m).sum(axis=1))
        return lse - np.log(self.n_components)


def one_step_predictive(model, belief):
    """Closed-form next-observation mixture, one component per branch.

    Draw-free: latents are the noise-free sigma points of the collapsed
    posterior (the posterior mean alone under monte_carlo sampling), and
    each branch resolves z at the transition prior's mean.
    """
    cfg = model.config
    with Tape.pause():
        mean = belief.collapsed.mean.value
        std = belief.collapsed.std.value
        b = mean.shape[0]
        if cfg.sampler_mode == "sca":
            xi, _ = sigma_points(cfg.d_z, cfg.kappa)
            m = xi.shape[0]
            z_pts = mean[:, None, :] + std[:, None, :] * xi[None, :, :]
        else:
            m = 1
            z_pts = mean[:, None, :]
        z_flat = Tensor(z_pts.reshape(b * m, cfg.d_z))
        h_rep = Tensor(np.repeat(belief.expected_h.value, m, axis=0))
        s_flat = model.gru_advance(z_flat, h_rep)
        prior = model.transition_prior(s_flat)
        em = model.emit(prior.mean, s_flat)
        means = em.mean.value.reshape(b, m, cfg.d_x)
        stds = em.std.value.reshape(b, m, cfg.d_x)
    return PredictiveMixture(means=means.copy(), stds=stds.copy())


def export_predictive_prior(model, beliefs, n_draws=1000, rng=None):
    """Per-step latent draws from the equal-weight mixture of branch priors.

    Operates on a single trajectory's beliefs (batch of one); returns one
    (n_draws, d_z) array per step, suitable for external density plotting.
    """
    rng = np.random.default_rng() if rng is None else rng
    cfg = model.config
    out = []
    with Tape.pause():
        for belief in beliefs:
            if belief.batch != 1:
                raise ValueError("export_predictive_prior: expects single-trajectory beliefs")
            s = belief.branch_states.value[0]  # (k, d_h)
            k = s.shape[0]
            prior = model.transition_prior(Tensor(s))
            means = prior.mean.value
            stds = prior.std.value
            idx = rng.integers(0, k, size=n_draws)
            eps = rng.standard_normal((n_draws, cfg.d_z))
            out.append(means[idx] + stds[idx] * eps)
    return out

"""Training losses and the minibatch training loop.

Per step the loss combines the evidence bound of the filtering recursion, a
predictive-likelihood regularizer over the branch samples, and an optional
adversarial term driven by a conditional discriminator.  The minimized
objective is  total = -elbo - omega1 * pred + omega2 * adv, summed over steps
and averaged over the minibatch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, backward
from .gaussians import gaussian_kl, gaussian_log_pdf
from .inference import belief_init, belief_step
from .nets import VdmModel
from .optim import adam_step

__all__ = [
    "LossBreakdown",
    "elbo_step",
    "pred_regularizer",
    "adv_regularizer",
    "total_loss",
    "train",
    "TrainResult",
]

DISC_PROB_FLOOR = 1e-6


@dataclass
class LossBreakdown:
    """Scalar loss terms plus per-step values for diagnostics.

    Sign convention: ``total`` is the minimized quantity,
    total = -elbo - omega1 * pred + omega2 * adv.
    """

    elbo: float
    pred: float
    adv: float
    total: float
    per_step_elbo: list = field(default_factory=list)
    per_step_pred: list = field(default_factory=list)
    per_step_adv: list = field(default_factory=list)
    step_weights: list = field(default_factory=list)
    total_node: Tensor | None = None
    disc_loss: float = 0.0
    disc_node: Tensor | None = None


def _select(weights, per_branch):
    """Reduce a (B, k) tensor to (B,) under constant indicator weights."""
    return ad.reduce_sum(Tensor(weights) * per_branch, axis=1)


def _elbo_from_info(model, info, x_arr):
    """Per-trajectory evidence bound for one step, shape (B,).

    The active branch receives full weight (the weighting function evaluates
    to k at the selected index and 0 elsewhere, cancelling the 1/k front
    factor), and the weight normalization contributes the constant -log k.
    """
    cfg = model.config
    b, k = info.weights.shape
    rng_eps = info.recon_eps
    z_tilde = info.q_flat.mean + info.q_flat.std * Tensor(rng_eps)
    em = model.emit(z_tilde, info.branch_states_flat)
    x_rep = Tensor(np.repeat(x_arr, k, axis=0))
    recon = ad.reshape(gaussian_log_pdf(x_rep, em), (b, k))
    kl = ad.reshape(gaussian_kl(info.q_flat, info.prior_flat), (b, k))
    return _select(info.weights, recon) - _select(info.weights, kl) - math.log(k)


def elbo_step(model, belief_prev, x, rng, weights_override=None):
    """One-step evidence bound; returns a (B,) tensor.

    Runs the belief update internally so branch samples and weights are the
    ones the bound is defined over.
    """
    new_belief, info = belief_step(model, belief_prev, x, rng, weights_override)
    x_arr = x if isinstance(x, np.ndarray) else np.asarray(x, dtype=np.float64)
    if x_arr.ndim == 1:
        x_arr = x_arr[None, :]
    info.recon_eps = rng.standard_normal((x_arr.shape[0] * model.config.k, model.config.d_z))
    value = _elbo_from_info(model, info, x_arr)
    if not np.all(np.isfinite(value.value)):
        raise FloatingPointError("elbo_step: non-finite bound")
    return value, new_belief, info


def pred_regularizer(info):
    """log of the mean branch predictive likelihood, shape (B,).

    Stabilized as logsumexp over branches minus log k.
    """
    k = info.weights.shape[1]
    return ad.logsumexp(info.branch_loglik, axis=1) - math.log(k)


def _clamped_log(p):
    return ad.log(ad.clamp(p, DISC_PROB_FLOOR, 1.0 - DISC_PROB_FLOOR))


def adv_regularizer(model, prefix_summary, x_real, x_gen):
    """Non-saturating conditional GAN losses, each shape (B,).

    generator: -log D(prefix, x_gen); discriminator: -log D(prefix, x_real)
    - log(1 - D(prefix, x_gen)) with the generated sample detached.
    """
    d_gen = model.discriminate(prefix_summary, x_gen)
    gen_loss = -_clamped_log(d_gen)
    d_real = model.discriminate(prefix_summary, Tensor(np.asarray(x_real, dtype=np.float64)))
    d_fake = model.discriminate(prefix_summary, x_gen.detach() if isinstance(x_gen, Tensor) else Tensor(x_gen))
    disc_loss = -_clamped_log(d_real) - _clamped_log(1.0 - d_fake)
    return ad.reshape(gen_loss, (gen_loss.shape[0],)), ad.reshape(disc_loss, (disc_loss.shape[0],))


def total_loss(model, batch, rng, weights_override=None):
    """Loss breakdown for a (B, T, d_x) batch; one filtering pass computes all terms.

    ``weights_override`` is an optional list with one (B, k) indicator array
    per step t >= 1, used by gradient checks to freeze branch selection.
    """
    cfg = model.config
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, ...]
    b, t_len, _ = arr.shape
    if t_len < 2:
        raise ValueError("total_loss: trajectory length must be >= 2")

    belief = belief_init(model, arr[:, 0])
    use_adv = cfg.omega2 > 0.0
    if use_adv:
        h_disc = model.disc_initial_state(b)

    elbo_terms, pred_terms, gen_terms, disc_terms = [], [], [], []
    breakdown = LossBreakdown(0.0, 0.0, 0.0, 0.0)
    for t in range(1, t_len):
        x_t = arr[:, t]
        override = weights_override[t - 1] if weights_override is not None else None
        try:
            elbo_t, belief, info = elbo_step(model, belief, x_t, rng, override)
        except FloatingPointError as err:
            raise FloatingPointError(f"total_loss: {err} at step {t}") from None
        pred_t = pred_regularizer(info)
        breakdown.step_weights.append(info.weights)

        if use_adv:
            # one-step generative sample conditioned on x_{<t}: a uniformly
            # chosen branch state (no reweighting by x_t leaks in)
            h_disc = model.disc_step(Tensor(arr[:, t - 1]), h_disc)
            k = cfg.k
            pick = np.zeros((b, k, 1))
            pick[np.arange(b), rng.integers(0, k, size=b), 0] = 1.0
            s_branch = ad.reshape(info.branch_states_flat, (b, k, cfg.d_h))
            s_sel = ad.reduce_sum(Tensor(pick) * s_branch, axis=1)
            prior = model.transition_prior(s_sel)
            z_gen = prior.mean + prior.std * Tensor(rng.standard_normal((b, cfg.d_z)))
            em = model.emit(z_gen, s_sel)
            x_gen = em.mean + em.std * Tensor(rng.standard_normal((b, cfg.d_x)))
            gen_t, disc_t = adv_regularizer(model, h_disc, x_t, x_gen)

        elbo_terms.append(ad.reduce_mean(elbo_t))
        pred_terms.append(ad.reduce_mean(pred_t))
        breakdown.per_step_elbo.append(float(elbo_terms[-1].value))
        breakdown.per_step_pred.append(float(pred_terms[-1].value))
        if use_adv:
            gen_terms.append(ad.reduce_mean(gen_t))
            disc_terms.append(ad.reduce_mean(disc_t))
            breakdown.per_step_adv.append(float(gen_terms[-1].value))

    def _accum(terms):
        out = terms[0]
        for term in terms[1:]:
            out = out + term
        return out

    elbo_sum = _accum(elbo_terms)
    pred_sum = _accum(pred_terms)
    total = -1.0 * elbo_sum - cfg.omega1 * pred_sum
    if use_adv:
        gen_sum = _accum(gen_terms)
        total = total + cfg.omega2 * gen_sum
        breakdown.adv = float(gen_sum.value)
        disc_sum = _accum(disc_terms)
        breakdown.disc_loss = float(disc_sum.value)
        breakdown.disc_node = disc_sum
    breakdown.elbo = float(elbo_sum.value)
    breakdown.pred = float(pred_sum.value)
    breakdown.total = float(total.value)
    breakdown.total_node = total
    if not math.isfinite(breakdown.total):
        raise FloatingPointError("total_loss: non-finite total")
    return breakdown


@dataclass
class TrainResult:
    checkpoint: object
    history: list
    aborted: bool = False


def _dataset_array(dataset):
    return dataset if isinstance(dataset, np.ndarray) else dataset.data


def train(
    dataset,
    config,
    rng,
    val_dataset=None,
    epochs=20,
    batch_size=64,
    patience=10,
    val_forecasts=100,
    normalize=True,
    nll_reduction="mean",
    verbose=False,
):
    """Minibatch Adam over the full objective with 1:1 discriminator updates.

    Observations are standardized per dimension with training-set statistics
    (stored on the checkpoint); validation multi-step NLL is tracked per
    epoch and the best-validation parameters are retained.
    """
    from .checkpoint import Checkpoint  # local import to avoid a cycle
    from .evaluation import dataset_multi_step_nll

    data = _dataset_array(dataset)
    prefix_len = getattr(dataset, "prefix_len", max(1, data.shape[1] // 2))
    if data.ndim != 3 or data.shape[0] == 0:
        raise ValueError("train: dataset must be a nonempty (N, T, d_x) array")
    if normalize:
        obs_mean = data.reshape(-1, data.shape[2]).mean(axis=0)
        obs_std = data.reshape(-1, data.shape[2]).std(axis=0)
        obs_std = np.where(obs_std < 1e-12, 1.0, obs_std)
    else:
        obs_mean = np.zeros(data.shape[2])
        obs_std = np.ones(data.shape[2])
    scaled = (data - obs_mean) / obs_std
    val_scaled = None
    if val_dataset is not None:
        val_arr = _dataset_array(val_dataset)
        val_scaled = (val_arr - obs_mean) / obs_std

    model = VdmModel.initialize(config, rng)
    best_params = model.params.copy()
    best_disc = model.disc.copy()
    best_val = math.inf
    best_epoch = 0
    history = []
    aborted = False
    stale = 0
    n = scaled.shape[0]

    def _validate():
        if val_scaled is None:
            return math.nan
        val_rng = np.random.default_rng(12345)
        return dataset_multi_step_nll(
            model, val_scaled, prefix_len, val_forecasts, val_rng, reduction=nll_reduction
        )

    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_terms = np.zeros(4)  # total, elbo, pred, adv
        batches = 0
        try:
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                with Tape() as tape:
                    bd = total_loss(model, scaled[idx], rng)
                    backward(tape, bd.total_node)
                    if bd.disc_node is not None:
                        model.disc.zero_grad()
                        backward(tape, bd.disc_node)
                adam_step(model.params, lr=config.lr)
                if bd.disc_node is not None:
                    adam_step(model.disc, lr=config.lr)
                else:
                    model.disc.zero_grad()
                epoch_terms += (bd.total, bd.elbo, bd.pred, bd.adv)
                batches += 1
        except (FloatingPointError, ValueError) as err:
            # non-finite values anywhere in the pass mean the run diverged
            if isinstance(err, ValueError) and "finite" not in str(err):
                raise
            if verbose:
                print(f"epoch {epoch}: aborted on divergence: {err}")
            aborted = True

        epoch_terms /= max(batches, 1)
        val_nll = _validate()
        history.append(
            {
                "epoch": epoch,
                "total": epoch_terms[0],
                "elbo": epoch_terms[1],
                "pred": epoch_terms[2],
                "adv": epoch_terms[3],
                "val_nll": val_nll,
            }
        )
        if verbose:
            print(
                f"epoch {epoch}: total={epoch_terms[0]:.4f} elbo={epoch_terms[1]:.4f} "
                f"pred={epoch_terms[2]:.4f} adv={epoch_terms[3]:.4f} val_nll={val_nll:.4f}"
            )
        if aborted:
            break
        if not math.isnan(val_nll) and val_nll < best_val:
            best_val = val_nll
            best_params = model.params.copy()
            best_disc = model.disc.copy()
            best_epoch = epoch
            stale = 0
        elif math.isnan(val_nll):
            best_params = model.params.copy()
            best_disc = model.disc.copy()
            best_epoch = epoch
        else:
            stale += 1
            if stale >= patience:
                if verbose:
                    print(f"epoch {epoch}: early stop (patience {patience})")
                break

    ckpt = Checkpoint.from_stores(
        config=config,
        params=best_params,
        disc=best_disc,
        obs_mean=obs_mean,
        obs_std=obs_std,
        rng_state=rng.bit_generator.state,
        provenance={
            "epoch": best_epoch,
            "val_nll": None if math.isinf(best_val) or math.isnan(best_val) else best_val,
        },
    )
    return TrainResult(checkpoint=ckpt, history=history, aborted=aborted)

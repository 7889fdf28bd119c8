"""Forecast evaluation: sample NLL, one-step NLL, empirical Wasserstein distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .gaussians import LOG_2PI
from .inference import MixtureBelief, filter_sequence, generate, one_step_predictive
from .util import parallel_map

__all__ = [
    "ForecastBundle",
    "multi_step_nll",
    "dataset_multi_step_nll",
    "one_step_nll",
    "wasserstein",
    "w_distance_protocol",
    "forecast_dataset",
]


@dataclass
class ForecastBundle:
    """n sampled continuations paired with their ground truth."""

    ground_truth: np.ndarray  # (horizon, d_x)
    forecasts: np.ndarray     # (n, horizon, d_x)

    def __post_init__(self):
        self.ground_truth = np.asarray(self.ground_truth, dtype=np.float64)
        self.forecasts = np.asarray(self.forecasts, dtype=np.float64)
        if self.forecasts.ndim != 3 or self.forecasts.shape[1:] != self.ground_truth.shape:
            raise ValueError(
                f"ForecastBundle: forecasts {self.forecasts.shape} do not match "
                f"ground truth {self.ground_truth.shape}"
            )


def multi_step_nll(bundle, reduction="mean"):
    """Sample-based NLL of the ground truth under a Gaussian forecast kernel.

    -log( (1/n) sum_i (2pi)^{-1/2} exp(-e_i / 2) ) where e_i reduces the
    squared forecast error over horizon and dimensions; ``reduction`` picks
    the mean (default) or sum reduction.  Computed via log-sum-exp.
    """
    diff = bundle.forecasts - bundle.ground_truth[None]
    sq = diff * diff
    if reduction == "mean":
        err = sq.mean(axis=(1, 2))
    elif reduction == "sum":
        err = sq.sum(axis=(1, 2))
    else:
        raise ValueError(f"multi_step_nll: unknown reduction {reduction!r}")
    n = err.shape[0]
    m = (-err / 2.0).max()
    lse = m + np.log(np.exp(-err / 2.0 - m).sum())
    return 0.5 * LOG_2PI + np.log(n) - lse


def _repeat_belief(belief, reps):
    """Tile a tape-free belief along the batch axis (plain values only)."""
    from .autodiff import Tensor
    from .gaussians import DiagGaussian

    def rep(a):
        return np.repeat(a, reps, axis=0)

    return MixtureBelief(
        components=DiagGaussian(
            Tensor(rep(belief.components.mean.value)), Tensor(rep(belief.components.std.value))
        ),
        weights=rep(belief.weights),
        branch_states=Tensor(rep(belief.branch_states.value)),
        expected_h=Tensor(rep(belief.expected_h.value)),
        collapsed=DiagGaussian(
            Tensor(rep(belief.collapsed.mean.value)), Tensor(rep(belief.collapsed.std.value))
        ),
    )


def forecast_dataset(model, data, prefix_len, n_forecasts, horizon, rng):
    """(N, n_forecasts, horizon, d_x) continuations after filtering each prefix."""
    data = np.asarray(data, dtype=np.float64)
    n_traj = data.shape[0]
    belief, _ = filter_sequence(model, data[:, :prefix_len], rng)
    tiled = _repeat_belief(belief, n_forecasts)
    out = generate(model, tiled, horizon, rng)
    return out.reshape(n_traj, n_forecasts, horizon, data.shape[2])


def dataset_multi_step_nll(model, data, prefix_len, n_forecasts, rng, reduction="mean"):
    """Mean multi-step NLL over a (N, T, d_x) array of trajectories."""
    data = np.asarray(data, dtype=np.float64)
    horizon = data.shape[1] - prefix_len
    if horizon < 1:
        raise ValueError("dataset_multi_step_nll: no continuation to score")
    fc = forecast_dataset(model, data, prefix_len, n_forecasts, horizon, rng)
    vals = [
        multi_step_nll(ForecastBundle(data[i, prefix_len:], fc[i]), reduction=reduction)
        for i in range(data.shape[0])
    ]
    return float(np.mean(vals))


def one_step_nll(model, dataset, rng, prefix_len=None):
    """Average next-step NLL over continuation steps, filtering with the true past."""
    data = dataset if isinstance(dataset, np.ndarray) else dataset.data
    if prefix_len is None:
        prefix_len = getattr(dataset, "prefix_len", 1)
    t_len = data.shape[1]
    if t_len - prefix_len < 1:
        raise ValueError("one_step_nll: no continuation to score")
    _, beliefs = filter_sequence(model, data, rng)
    totals = []
    for t in range(prefix_len, t_len):
        mixture = one_step_predictive(model, beliefs[t - 1])
        totals.append(-mixture.log_density(data[:, t]))
    return float(np.mean(totals))


def wasserstein(p, q):
    """Exact empirical Wasserstein distance between equal-size sample sets.

    Solves the optimal assignment on the Euclidean cost matrix and averages
    the matched costs.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 2 or q.ndim != 2 or p.shape != q.shape:
        raise ValueError(f"wasserstein: expected matching (n, d) sets, got {p.shape} and {q.shape}")
    cost = cdist(p, q)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def w_distance_protocol(model, groups, rng, forecasts_per_truth=10, forecast_fn=None):
    """Grouped empirical W-distance: mean and standard error over groups.

    Per group of n truths with similar prefixes, each truth contributes
    ``forecasts_per_truth`` forecasts; the j-th forecasts of all truths form
    set j, scored against the n true continuations, and the j-scores are
    averaged before averaging over groups.  ``forecast_fn`` substitutes the
    model's forecaster (test doubles); it must match forecast_dataset's
    signature minus the model argument.
    """
    seeds = rng.integers(0, 2**63 - 1, size=len(groups))
    if forecast_fn is None:
        def forecast_fn(data, prefix_len, n_forecasts, horizon, grp_rng):
            return forecast_dataset(model, data, prefix_len, n_forecasts, horizon, grp_rng)

    def score(args):
        gi, group = args
        data = group.data
        n = data.shape[0]
        prefix_len = group.prefix_len
        horizon = data.shape[1] - prefix_len
        grp_rng = np.random.default_rng(int(seeds[gi]))
        fc = forecast_fn(data, prefix_len, forecasts_per_truth, horizon, grp_rng)
        truths = data[:, prefix_len:].reshape(n, -1)
        dists = [
            wasserstein(fc[:, j].reshape(n, -1), truths) for j in range(forecasts_per_truth)
        ]
        return float(np.mean(dists))

    per_group = parallel_map(score, list(enumerate(groups)))
    per_group = np.asarray(per_group)
    stderr = per_group.std(ddof=1) / np.sqrt(len(per_group)) if len(per_group) > 1 else 0.0
    return float(per_group.mean()), float(stderr)

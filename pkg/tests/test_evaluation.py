"""Metrics: frozen NLL values, assignment solver vs factorial enumeration,
grouped W-distance protocol."""
import itertools
import math

import numpy as np
import pytest

from vdm.data import Dataset
from vdm.evaluation import (
    ForecastBundle,
    multi_step_nll,
    one_step_nll,
    w_distance_protocol,
    wasserstein,
)
from vdm.nets import ModelConfig, VdmModel

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def brute_force_wasserstein(p, q):
    """Factorial enumeration over all matchings; oracle for n <= 6."""
    n = len(p)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        cost = np.mean([np.linalg.norm(p[i] - q[perm[i]]) for i in range(n)])
        best = min(best, cost)
    return best


# ---------------------------------------------------------------------------
# sample NLL
# ---------------------------------------------------------------------------

def test_perfect_single_forecast_value():
    truth = np.array([[0.4, -0.2], [1.0, 0.0]])
    bundle = ForecastBundle(truth, truth[None])
    np.testing.assert_allclose(multi_step_nll(bundle), HALF_LOG_2PI, rtol=1e-12)


def test_duplicating_forecasts_leaves_value_unchanged():
    rng = np.random.default_rng(0)
    truth = rng.normal(size=(5, 2))
    fc = rng.normal(size=(7, 5, 2))
    a = multi_step_nll(ForecastBundle(truth, fc))
    b = multi_step_nll(ForecastBundle(truth, np.concatenate([fc, fc])))
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_two_forecast_hand_value():
    """n=2 with squared errors {0, 8} on one step of one dim:
    -log(0.5 * (2 pi)^{-1/2} * (1 + e^{-4})) = 1.5939357858..."""
    truth = np.zeros((1, 1))
    fc = np.array([[[0.0]], [[np.sqrt(8.0)]]])
    got = multi_step_nll(ForecastBundle(truth, fc))
    want = -np.log(0.5 / np.sqrt(2 * np.pi) * (1.0 + np.exp(-4.0)))
    np.testing.assert_allclose(got, want, rtol=1e-12)
    np.testing.assert_allclose(got, 1.5939358, atol=5e-8)


def test_reductions_agree_on_single_cell():
    truth = np.zeros((1, 1))
    fc = np.array([[[1.3]]])
    a = multi_step_nll(ForecastBundle(truth, fc), reduction="mean")
    b = multi_step_nll(ForecastBundle(truth, fc), reduction="sum")
    np.testing.assert_allclose(a, b, rtol=1e-15)


def test_forecast_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="match"):
        ForecastBundle(np.zeros((4, 2)), np.zeros((3, 5, 2)))


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    truth = rng.normal(size=(4, 3))
    fc = rng.normal(size=(9, 4, 3))
    a = multi_step_nll(ForecastBundle(truth, fc))
    b = multi_step_nll(ForecastBundle(truth, fc[rng.permutation(9)]))
    np.testing.assert_allclose(a, b, rtol=1e-12)


# ---------------------------------------------------------------------------
# one-step NLL
# ---------------------------------------------------------------------------

def test_one_step_nll_calibrated_unit_gaussian():
    """Zero-weight nets give a N(0, I) predictive; truth at the mean scores
    the textbook value per dimension."""
    cfg = ModelConfig(d_x=1, d_z=2, d_h=4, k=5)
    model = VdmModel.initialize(cfg, np.random.default_rng(0))
    for store in (model.params, model.disc):
        for t in store.params.values():
            t.value[...] = 0.0
    ds = Dataset(np.zeros((3, 4, 1)), prefix_len=1)
    got = one_step_nll(model, ds, np.random.default_rng(1))
    np.testing.assert_allclose(got, HALF_LOG_2PI, rtol=1e-12)


def test_one_step_nll_k1_gaussian_predictive():
    cfg = ModelConfig(d_x=2, d_z=2, d_h=4, k=1, sampler_mode="monte_carlo")
    model = VdmModel.initialize(cfg, np.random.default_rng(2))
    ds = Dataset(np.random.default_rng(3).normal(size=(4, 5, 2)), prefix_len=2)
    val = one_step_nll(model, ds, np.random.default_rng(4))
    assert math.isfinite(val)


def test_one_step_nll_deterministic():
    cfg = ModelConfig(d_x=2, d_z=2, d_h=4, k=5)
    model = VdmModel.initialize(cfg, np.random.default_rng(5))
    ds = Dataset(np.random.default_rng(6).normal(size=(3, 6, 2)), prefix_len=2)
    a = one_step_nll(model, ds, np.random.default_rng(7))
    b = one_step_nll(model, ds, np.random.default_rng(7))
    assert a == b


# ---------------------------------------------------------------------------
# Wasserstein distance
# ---------------------------------------------------------------------------

def test_identical_sets_zero():
    p = np.random.default_rng(2).normal(size=(8, 3))
    assert wasserstein(p, p.copy()) == 0.0


def test_one_dimensional_hand_instance():
    p = np.array([[0.0], [1.0]])
    q = np.array([[0.0], [3.0]])
    np.testing.assert_allclose(wasserstein(p, q), 1.0, rtol=1e-15)


def test_matches_brute_force_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 7))
        d = int(rng.integers(1, 4))
        p = rng.normal(size=(n, d))
        q = rng.normal(size=(n, d))
        got = wasserstein(p, q)
        want = brute_force_wasserstein(p, q)
        assert abs(got - want) < 1e-9


def test_symmetry():
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = rng.normal(size=(6, 2))
        q = rng.normal(size=(6, 2))
        assert abs(wasserstein(p, q) - wasserstein(q, p)) < 1e-12


def test_triangle_inequality():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        p, q, r = (rng.normal(size=(n, 3)) for _ in range(3))
        assert wasserstein(p, r) <= wasserstein(p, q) + wasserstein(q, r) + 1e-9


def test_size_mismatch_rejected():
    with pytest.raises(ValueError, match="matching"):
        wasserstein(np.zeros((3, 2)), np.zeros((4, 2)))


# ---------------------------------------------------------------------------
# grouped protocol
# ---------------------------------------------------------------------------

def _toy_groups(rng, n_groups=3, n=6, t_len=5, d_x=2, prefix_len=2):
    return [
        Dataset(rng.normal(size=(n, t_len, d_x)), prefix_len=prefix_len)
        for _ in range(n_groups)
    ]


def test_replay_oracle_scores_zero():
    rng = np.random.default_rng(8)
    groups = _toy_groups(rng)

    def replay(data, prefix_len, n_forecasts, horizon, grp_rng):
        truth = data[:, prefix_len:]
        return np.repeat(truth[:, None], n_forecasts, axis=1)

    mean, stderr = w_distance_protocol(None, groups, np.random.default_rng(9),
                                       forecast_fn=replay)
    assert mean == 0.0
    assert stderr == 0.0


def test_constant_model_matches_direct_evaluation():
    """Constant forecasts score exactly the mean distance to the truths."""
    rng = np.random.default_rng(10)
    groups = _toy_groups(rng, n_groups=2)
    const = np.full(groups[0].data[:, 2:].shape[1:], 0.7)

    def constant(data, prefix_len, n_forecasts, horizon, grp_rng):
        n = data.shape[0]
        return np.broadcast_to(const, (n, n_forecasts) + const.shape).copy()

    mean, _ = w_distance_protocol(None, groups, np.random.default_rng(11),
                                  forecast_fn=constant)
    flat_const = const.reshape(-1)
    want = np.mean(
        [
            np.linalg.norm(g.data[:, 2:].reshape(len(g), -1) - flat_const, axis=1).mean()
            for g in groups
        ]
    )
    np.testing.assert_allclose(mean, want, rtol=1e-12)
    assert mean > 0.0


def test_protocol_with_real_model_deterministic():
    cfg = ModelConfig(d_x=2, d_z=2, d_h=4, k=5)
    model = VdmModel.initialize(cfg, np.random.default_rng(12))
    groups = _toy_groups(np.random.default_rng(13), n_groups=2, n=4)
    a = w_distance_protocol(model, groups, np.random.default_rng(14), forecasts_per_truth=3)
    b = w_distance_protocol(model, groups, np.random.default_rng(14), forecasts_per_truth=3)
    assert a == b
    assert a[0] > 0.0

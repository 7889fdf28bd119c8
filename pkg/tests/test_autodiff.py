"""Reverse-mode engine: primitive values, gradients vs finite differences,
tape replay determinism."""
import numpy as np
import pytest

import vdm.autodiff as ad
from vdm.autodiff import Tape, Tensor, backward

from helpers import finite_diff_store, rel_error


def test_relu_values():
    out = ad.relu(Tensor([-1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(out.value, [0.0, 0.0, 2.0])


def test_sigmoid_symmetry_point():
    assert ad.sigmoid(Tensor([0.0])).value[0] == 0.5


def test_exp_log_inverse_pair():
    np.testing.assert_allclose(ad.exp(ad.log(Tensor([3.5]))).value, [3.5], rtol=1e-15)


def test_matmul_shape_error_names_primitive():
    with pytest.raises(ValueError, match="matmul"):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_add_shape_error():
    with pytest.raises(ValueError, match="add"):
        ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))


def test_backward_requires_scalar():
    p = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = ad.square(p)
    with pytest.raises(ValueError, match="scalar"):
        backward(tape, y)


def test_backward_sum_is_ones():
    p = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    with Tape() as tape:
        loss = ad.reduce_sum(p)
        backward(tape, loss)
    np.testing.assert_array_equal(p.grad, np.ones(3))


def test_backward_square_power_rule():
    p = Tensor(np.array([3.0]), requires_grad=True)
    with Tape() as tape:
        loss = ad.reduce_sum(ad.square(p))
        backward(tape, loss)
    np.testing.assert_allclose(p.grad, [6.0], rtol=1e-15)


def test_fanout_accumulates_additively():
    p = Tensor(np.array([2.0]), requires_grad=True)
    with Tape() as tape:
        y = p * p + p  # p used three times
        backward(tape, ad.reduce_sum(y))
    np.testing.assert_allclose(p.grad, [5.0], rtol=1e-15)


def _random_unary_cases():
    return [
        ("relu", ad.relu),
        ("sigmoid", ad.sigmoid),
        ("tanh", ad.tanh),
        ("exp", ad.exp),
        ("square", ad.square),
        ("clamp", lambda t: ad.clamp(t, -1.5, 1.5)),
    ]


@pytest.mark.parametrize("name,op", _random_unary_cases())
def test_unary_gradients_match_finite_differences(name, op):
    rng = np.random.default_rng(hash(name) % 2**32)
    x = rng.uniform(-2.0, 2.0, size=(4, 3))
    from vdm.optim import ParameterStore

    store = ParameterStore()
    p = store.add("x", x)

    def run():
        with Tape() as tape:
            loss = ad.reduce_sum(ad.square(op(p)))
        return float(loss.value)

    with Tape() as tape:
        loss = ad.reduce_sum(ad.square(op(p)))
        backward(tape, loss)
    fd = finite_diff_store(store, run)
    assert rel_error(p.grad, fd["x"]) < 1e-4


def test_div_sub_gradients_match_finite_differences():
    from vdm.optim import ParameterStore

    rng = np.random.default_rng(21)
    store = ParameterStore()
    a = store.add("a", rng.uniform(-2, 2, size=(3, 4)))
    b = store.add("b", rng.uniform(0.5, 2.0, size=(3, 4)))

    def forward():
        return ad.reduce_sum(ad.square(ad.sub(ad.div(a, b), ad.neg(b))))

    def run():
        with Tape():
            return float(forward().value)

    with Tape() as tape:
        backward(tape, forward())
    fd = finite_diff_store(store, run)
    assert rel_error(a.grad, fd["a"]) < 1e-4
    assert rel_error(b.grad, fd["b"]) < 1e-4


def test_log_gradient_positive_domain():
    from vdm.optim import ParameterStore

    rng = np.random.default_rng(3)
    store = ParameterStore()
    p = store.add("x", rng.uniform(0.2, 2.0, size=(5,)))

    def run():
        with Tape():
            loss = ad.reduce_sum(ad.log(p))
        return float(loss.value)

    with Tape() as tape:
        loss = ad.reduce_sum(ad.log(p))
        backward(tape, loss)
    fd = finite_diff_store(store, run)
    assert rel_error(p.grad, fd["x"]) < 1e-4


def test_three_layer_mlp_gradient_oracle():
    """Random MLP loss gradient vs central differences, step 1e-5."""
    from vdm.optim import ParameterStore

    rng = np.random.default_rng(42)
    store = ParameterStore()
    w1 = store.add("w1", rng.uniform(-0.5, 0.5, size=(4, 8)))
    b1 = store.add("b1", rng.uniform(-0.5, 0.5, size=8))
    w2 = store.add("w2", rng.uniform(-0.5, 0.5, size=(8, 8)))
    b2 = store.add("b2", rng.uniform(-0.5, 0.5, size=8))
    w3 = store.add("w3", rng.uniform(-0.5, 0.5, size=(8, 2)))
    b3 = store.add("b3", rng.uniform(-0.5, 0.5, size=2))
    x = Tensor(rng.uniform(-2.0, 2.0, size=(6, 4)))

    def forward():
        h = ad.relu(ad.matmul(x, w1) + b1)
        h = ad.tanh(ad.matmul(h, w2) + b2)
        return ad.reduce_sum(ad.square(ad.matmul(h, w3) + b3))

    def run():
        with Tape():
            return float(forward().value)

    with Tape() as tape:
        backward(tape, forward())
    fd = finite_diff_store(store, run)
    for name in store.names():
        assert rel_error(store[name].grad, fd[name]) < 1e-4, name


@pytest.mark.parametrize("axis", [None, 0, 1])
def test_reductions_and_shapes(axis):
    from vdm.optim import ParameterStore

    rng = np.random.default_rng(11)
    store = ParameterStore()
    p = store.add("x", rng.uniform(-2, 2, size=(3, 4)))

    for reducer in (ad.reduce_sum, ad.reduce_mean):
        def run():
            with Tape():
                return float(ad.reduce_sum(ad.square(reducer(p, axis=axis))).value)

        store.zero_grad()
        with Tape() as tape:
            backward(tape, ad.reduce_sum(ad.square(reducer(p, axis=axis))))
        fd = finite_diff_store(store, run)
        assert rel_error(p.grad, fd["x"]) < 1e-4


def test_concat_narrow_reshape_expand_gradients():
    from vdm.optim import ParameterStore

    rng = np.random.default_rng(12)
    store = ParameterStore()
    a = store.add("a", rng.uniform(-2, 2, size=(3, 2)))
    b = store.add("b", rng.uniform(-2, 2, size=(3, 5)))

    def forward():
        cat = ad.concat([a, b], axis=1)           # (3, 7)
        left = ad.narrow(cat, 1, 1, 4)            # (3, 4)
        grown = ad.expand_dim(left, 1, 3)         # (3, 3, 4)
        flat = ad.reshape(grown, (9, 4))
        return ad.reduce_sum(ad.square(flat))

    def run():
        with Tape():
            return float(forward().value)

    with Tape() as tape:
        backward(tape, forward())
    fd = finite_diff_store(store, run)
    assert rel_error(a.grad, fd["a"]) < 1e-4
    assert rel_error(b.grad, fd["b"]) < 1e-4


def test_logsumexp_matches_dense_evaluation():
    rng = np.random.default_rng(13)
    x = rng.uniform(-5, 5, size=(4, 6))
    got = ad.logsumexp(Tensor(x), axis=1).value
    want = np.log(np.exp(x).sum(axis=1))
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_broadcast_mul_gradient():
    from vdm.optim import ParameterStore

    rng = np.random.default_rng(14)
    store = ParameterStore()
    w = store.add("w", rng.uniform(-2, 2, size=(3, 4, 1)))
    x = Tensor(rng.uniform(-2, 2, size=(3, 4, 5)))

    def run():
        with Tape():
            return float(ad.reduce_sum(ad.square(w * x)).value)

    with Tape() as tape:
        backward(tape, ad.reduce_sum(ad.square(w * x)))
    fd = finite_diff_store(store, run)
    assert rel_error(w.grad, fd["w"]) < 1e-4


def test_tape_replay_determinism():
    """Same inputs and parameters give bit-identical loss and gradients."""
    from vdm.optim import ParameterStore

    def run():
        rng = np.random.default_rng(99)
        store = ParameterStore()
        w = store.add("w", rng.uniform(-1, 1, size=(5, 5)))
        x = Tensor(rng.uniform(-1, 1, size=(7, 5)))
        with Tape() as tape:
            loss = ad.reduce_sum(ad.square(ad.sigmoid(ad.matmul(x, w))))
            backward(tape, loss)
        return float(loss.value), w.grad.copy()

    l1, g1 = run()
    l2, g2 = run()
    assert l1 == l2
    np.testing.assert_array_equal(g1, g2)


def test_tapes_do_not_nest():
    with Tape():
        with pytest.raises(RuntimeError, match="already active"):
            with Tape():
                pass


def test_pause_suppresses_recording():
    p = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        with Tape.pause():
            _ = ad.square(p)
        assert len(tape.records) == 0

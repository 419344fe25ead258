import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from autoal.diffcore import (
    MLP, SGD, Adam, cross_entropy, cross_entropy_grad, mc_dropout_predict, softmax_rows,
)
from autoal.errors import InputError, ShapeError, StateError

from conftest import gradcheck


def test_zero_weight_net_returns_bias():
    net = MLP([3, 2], seed=0)
    net.weights[0][:] = 0.0
    net.biases[0][:] = [0.5, -1.5]
    logits, _ = net.forward(np.random.default_rng(0).normal(size=(4, 3)), mode="eval")
    assert np.array_equal(logits, np.tile([0.5, -1.5], (4, 1)))


def test_identity_layer():
    net = MLP([3, 3], seed=0)
    net.weights[0] = np.eye(3)
    x = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(net.forward(x, mode="eval")[0], x)


def test_forward_matches_explicit_loops():
    net = MLP([2, 3, 2], activation="tanh", seed=7)
    x = np.array([[0.3, -1.2], [2.0, 0.5]])
    logits, _ = net.forward(x, mode="eval")
    W1, b1, W2, b2 = net.parameters()
    for r in range(2):
        hidden = []
        for j in range(3):
            hidden.append(math.tanh(sum(x[r, i] * W1[i, j] for i in range(2)) + b1[j]))
        for k in range(2):
            expected = sum(hidden[j] * W2[j, k] for j in range(3)) + b2[k]
            assert logits[r, k] == pytest.approx(expected, abs=1e-13)


def test_forward_errors():
    net = MLP([2, 2])
    with pytest.raises(ShapeError):
        net.forward(np.zeros((3, 4)))
    with pytest.raises(InputError):
        net.forward(np.array([[np.nan, 0.0]]))


def test_eval_mode_is_deterministic():
    net = MLP([4, 8, 3], dropout=0.5, seed=1)
    x = np.random.default_rng(0).normal(size=(5, 4))
    a, _ = net.forward(x, mode="eval")
    b, _ = net.forward(x, mode="eval")
    assert np.array_equal(a, b)
    c, _ = net.forward(x, mode="train")
    assert not np.array_equal(a, c)


def test_softmax_examples():
    assert np.allclose(softmax_rows([[0.0, 0.0]]), [[0.5, 0.5]])
    big = softmax_rows([[1000.0, 0.0]])
    assert np.all(np.isfinite(big)) and big[0, 0] == pytest.approx(1.0) and big[0, 1] < 1e-300
    assert np.allclose(softmax_rows([[1.0, 2.0, 3.0]]),
                       [[0.09003057317038046, 0.24472847105479767, 0.6652409557748219]],
                       atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 5), elements=st.floats(-50, 50)))
def test_softmax_rows_normalized(logits):
    p = softmax_rows(logits)
    assert np.all(np.abs(p.sum(axis=1) - 1) < 1e-9)
    assert np.all(p >= 0)


def test_cross_entropy_examples():
    per, mean = cross_entropy(np.array([[0.0, 1.0]]), [1])
    assert per[0] == 0.0 and mean == 0.0
    for p in (2, 3, 10):
        per, _ = cross_entropy(np.full((3, p), 1.0 / p), [0, 1, p - 1])
        assert np.allclose(per, math.log(p), atol=1e-12)
    per, _ = cross_entropy(np.array([[0.7, 0.2, 0.1]]), [1])
    assert per[0] == pytest.approx(1.6094379124341003, abs=1e-12)
    with pytest.raises(InputError):
        cross_entropy(np.array([[0.5, 0.5]]), [2])
    per, _ = cross_entropy(np.array([[1.0, 0.0]]), [1])
    assert per[0] == pytest.approx(-math.log(1e-12))


def test_backward_zero_upstream():
    net = MLP([3, 4, 2], seed=0)
    _, tape = net.forward(np.ones((2, 3)), mode="eval")
    grads, _ = net.backward(tape, np.zeros((2, 2)))
    assert all(not g.any() for g in grads)


def test_backward_linear_sum():
    net = MLP([3, 2], seed=0)
    x = np.random.default_rng(0).normal(size=(5, 3))
    _, tape = net.forward(x, mode="eval")
    (dW, db), _ = net.backward(tape, np.ones((5, 2)))
    assert np.allclose(dW, np.outer(x.sum(axis=0), np.ones(2)))
    assert np.allclose(db, [5, 5])


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_backward_cross_entropy_gradcheck(activation):
    net = MLP([2, 4, 3], activation=activation, seed=3)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 2))
    y = rng.integers(0, 3, size=6)

    def loss():
        return cross_entropy(softmax_rows(net.forward(x, mode="eval")[0]), y)[1]

    logits, tape = net.forward(x, mode="eval")
    grads, _ = net.backward(tape, cross_entropy_grad(softmax_rows(logits), y) / len(y))
    assert gradcheck(loss, net.parameters(), grads, n_coords=100) < 1e-4


def test_backward_with_dropout_mask_gradcheck():
    net = MLP([3, 5, 5, 2], activation="tanh", dropout=0.3, seed=2)
    x = np.random.default_rng(0).normal(size=(4, 3))
    y = np.array([0, 1, 1, 0])

    def loss():
        logits, _ = net.forward(x, mode="train", rng=np.random.default_rng(99))
        return cross_entropy(softmax_rows(logits), y)[1]

    logits, tape = net.forward(x, mode="train", rng=np.random.default_rng(99))
    grads, _ = net.backward(tape, cross_entropy_grad(softmax_rows(logits), y) / 4)
    assert gradcheck(loss, net.parameters(), grads, n_coords=100) < 1e-4


def test_hidden_gradients_gradcheck():
    net = MLP([3, 4, 4, 2], activation="tanh", seed=4)
    x = np.random.default_rng(1).normal(size=(5, 3))
    v = [np.random.default_rng(2).normal(size=4) for _ in range(2)]

    def loss():
        out, tape = net.forward(x, mode="eval")
        return out.sum() + sum((h @ vi).sum() for h, vi in zip(tape.hidden, v))

    _, tape = net.forward(x, mode="eval")
    grads, _ = net.backward(tape, np.ones((5, 2)), [np.tile(vi, (5, 1)) for vi in v])
    assert gradcheck(loss, net.parameters(), grads) < 1e-4


def test_stale_tape_rejected():
    net = MLP([2, 2])
    _, tape = net.forward(np.ones((1, 2)))
    net.forward(np.ones((1, 2)))
    with pytest.raises(StateError):
        net.backward(tape, np.ones((1, 2)))
    other = MLP([2, 2])
    _, tape = other.forward(np.ones((1, 2)))
    with pytest.raises(StateError):
        net.backward(tape, np.ones((1, 2)))


def test_optimizer_examples():
    theta = np.array([1.0])
    SGD(0.1).step([theta], [np.array([2.0])])
    assert theta[0] == pytest.approx(0.8, abs=1e-15)

    theta = np.array([1.0])
    Adam(0.1).step([theta], [np.array([2.0])])
    assert theta[0] == pytest.approx(0.9000000005, abs=1e-15)

    for opt in (SGD(0.1), Adam(0.1)):
        theta = np.array([1.0, -2.0])
        opt.step([theta], [np.zeros(2)])
        assert np.array_equal(theta, [1.0, -2.0])

    with pytest.raises(ShapeError):
        SGD(0.1).step([np.zeros(2)], [np.zeros(3)])
    with pytest.raises(InputError):
        Adam(0.0)


@pytest.mark.parametrize("make_opt", [lambda: SGD(1e-3), lambda: SGD(1e-3, momentum=0.9),
                                      lambda: Adam(1e-3)])
def test_optimizers_decrease_convex_quadratic(make_opt):
    A = np.array([[3.0, 0.5], [0.5, 1.0]])
    theta = np.array([1.0, -1.0])
    opt = make_opt()
    prev = 0.5 * theta @ A @ theta
    for _ in range(100):
        opt.step([theta], [A @ theta])
        cur = 0.5 * theta @ A @ theta
        assert cur < prev
        prev = cur


def test_mc_dropout():
    x = np.random.default_rng(0).normal(size=(3, 4))
    net = MLP([4, 8, 3], dropout=0.0, seed=0)
    stack = mc_dropout_predict(net, x, 5, seed=1)
    assert all(np.array_equal(stack[0], s) for s in stack)

    net = MLP([4, 8, 3], dropout=0.2, seed=0)
    a = mc_dropout_predict(net, x, 5, seed=1)
    b = mc_dropout_predict(net, x, 5, seed=1)
    assert np.array_equal(a, b)
    assert a.shape == (5, 3, 3)
    with pytest.raises(InputError):
        mc_dropout_predict(net, x, 1, seed=0)


def test_mc_dropout_mean_approaches_eval():
    net = MLP([4, 16, 3], activation="tanh", dropout=0.2, seed=0)
    x = np.random.default_rng(0).normal(size=(10, 4))
    mean = mc_dropout_predict(net, x, 1000, seed=3).mean(axis=0)
    assert np.abs(mean - net.predict_proba(x)).max() < 0.05


def test_training_replay_is_bit_identical():
    def train():
        net = MLP([2, 6, 2], dropout=0.2, seed=11)
        opt = Adam(0.01)
        x = np.random.default_rng(0).normal(size=(8, 2))
        y = (x[:, 0] > 0).astype(int)
        for _ in range(20):
            logits, tape = net.forward(x, mode="train")
            grads, _ = net.backward(tape, cross_entropy_grad(softmax_rows(logits), y))
            opt.step(net.parameters(), grads)
        return net.parameters()

    assert all(np.array_equal(a, b) for a, b in zip(train(), train()))


def test_weight_init_bounds():
    net = MLP([10, 30, 5], seed=0)
    for w, (fi, fo) in zip(net.weights, [(10, 30), (30, 5)]):
        assert np.abs(w).max() <= math.sqrt(6 / (fi + fo))

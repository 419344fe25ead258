"""Training and evaluation of the task classifier."""

import numpy as np

from .diffcore import MLP, Adam, cross_entropy, cross_entropy_grad, softmax_rows
from .errors import TrainingError


def standardize(x, stats):
    mean, std = stats
    return (x - mean) / std


def fit_stats(x):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-12] = 1.0
    return mean, std


def train_classifier(x, y, num_classes, hidden=(64, 64), epochs=100, batch_size=32,
                     lr=0.01, dropout=0.2, seed=0, activation="relu"):
    """Fresh MLP trained with Adam on minibatches; returns the network."""
    net = MLP([x.shape[1], *hidden, num_classes], activation=activation,
              dropout=dropout, seed=seed)
    opt = Adam(lr)
    rng = np.random.default_rng(seed + 1)
    n = len(y)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            logits, tape = net.forward(x[rows], mode="train")
            probs = softmax_rows(logits)
            grad = cross_entropy_grad(probs, y[rows]) / len(rows)
            grads, _ = net.backward(tape, grad)
            opt.step(net.parameters(), grads)
    if not all(np.all(np.isfinite(p)) for p in net.parameters()):
        raise TrainingError("task model parameters became non-finite")
    return net


def accuracy(net, x, y):
    return float((net.predict_proba(x).argmax(axis=1) == y).mean())


def mean_loss(net, x, y):
    return cross_entropy(net.predict_proba(x), y)[1]

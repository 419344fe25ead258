"""Small dense MLP engine: forward/backward passes, softmax, cross-entropy,
SGD/Adam and Monte-Carlo dropout.

Everything runs in float64 numpy. Parameters of an :class:`MLP` are exposed
as a flat list ``[W0, b0, W1, b1, ...]`` with ``W[l]`` of shape
``(dims[l], dims[l+1])``; gradients use the same layout.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ShapeError, StateError

PROB_FLOOR = 1e-12
MODES = ("train", "eval", "mc")
ACTIVATIONS = ("tanh", "relu")


def _check_finite(x, what):
    if not np.all(np.isfinite(x)):
        raise InputError(f"{what} contains non-finite values")


@dataclass
class Tape:
    """Cached activations of one forward pass.

    ``acts[0]`` is the network input and ``acts[l]`` the (post-dropout)
    input to layer ``l``; ``pre[l]`` is the pre-activation of hidden layer
    ``l`` and ``masks[l]`` its dropout mask (``None`` when no dropout was
    applied).
    """

    acts: list
    pre: list
    masks: list
    serial: int
    owner: int

    @property
    def hidden(self):
        return self.acts[1:]


class MLP:
    """Fully connected network with a linear output layer.

    Hidden layers use ``activation`` followed by inverted dropout at
    ``dropout`` rate. Dropout masks are drawn only in ``train`` and ``mc``
    modes; ``eval`` is deterministic.
    """

    def __init__(self, dims, activation="relu", dropout=0.0, seed=0):
        dims = [int(d) for d in dims]
        if len(dims) < 2 or min(dims) < 1:
            raise InputError(f"invalid layer dims {dims}")
        if activation not in ACTIVATIONS:
            raise InputError(f"activation must be one of {ACTIVATIONS}")
        if not 0.0 <= dropout < 1.0:
            raise InputError("dropout rate must lie in [0, 1)")
        self.dims = dims
        self.activation = activation
        self.dropout = float(dropout)
        self.mode = "train"
        self.rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(self.rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._serial = 0

    @property
    def n_layers(self):
        return len(self.weights)

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_mode(self, mode):
        if mode not in MODES:
            raise InputError(f"mode must be one of {MODES}")
        self.mode = mode
        return self

    def _act(self, z):
        return np.tanh(z) if self.activation == "tanh" else np.maximum(z, 0.0)

    def _act_grad(self, z):
        if self.activation == "tanh":
            return 1.0 - np.tanh(z) ** 2
        return (z > 0).astype(float)

    def forward(self, x, mode=None, rng=None):
        """Return ``(logits, tape)`` for a batch ``x`` of shape ``(B, d)``."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.dims[0] or x.shape[0] < 1:
            raise ShapeError(f"expected input of shape (B>=1, {self.dims[0]}), got {x.shape}")
        _check_finite(x, "input")
        mode = self.mode if mode is None else mode
        if mode not in MODES:
            raise InputError(f"mode must be one of {MODES}")
        rng = self.rng if rng is None else rng
        drop = self.dropout > 0 and mode != "eval"

        acts, pre, masks = [x], [], []
        a = x
        last = self.n_layers - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            if l == last:
                a = z
                break
            h = self._act(z)
            mask = None
            if drop:
                mask = (rng.random(h.shape) >= self.dropout) / (1.0 - self.dropout)
                h = h * mask
            pre.append(z)
            masks.append(mask)
            acts.append(h)
            a = h
        self._serial += 1
        return a, Tape(acts, pre, masks, self._serial, id(self))

    def backward(self, tape, grad_out, hidden_grads=None):
        """Gradients of a scalar loss w.r.t. all parameters.

        ``grad_out`` is dLoss/dlogits. ``hidden_grads`` optionally supplies
        extra upstream gradients on each hidden activation ``tape.hidden[l]``
        (``None`` entries are skipped). Returns ``(grads, grad_input)``.
        """
        if tape.owner != id(self) or tape.serial != self._serial:
            raise StateError("tape does not belong to the latest forward pass of this network")
        g = np.asarray(grad_out, dtype=float)
        batch = tape.acts[0].shape[0]
        if g.shape != (batch, self.dims[-1]):
            raise ShapeError(f"upstream gradient shape {g.shape} != {(batch, self.dims[-1])}")
        n_hidden = self.n_layers - 1
        if hidden_grads is not None and len(hidden_grads) != n_hidden:
            raise ShapeError(f"expected {n_hidden} hidden gradients")

        grads = [None] * (2 * self.n_layers)
        for l in range(self.n_layers - 1, -1, -1):
            grads[2 * l] = tape.acts[l].T @ g
            grads[2 * l + 1] = g.sum(axis=0)
            g = g @ self.weights[l].T
            if l == 0:
                break
            if hidden_grads is not None and hidden_grads[l - 1] is not None:
                g = g + hidden_grads[l - 1]
            if tape.masks[l - 1] is not None:
                g = g * tape.masks[l - 1]
            g = g * self._act_grad(tape.pre[l - 1])
        return grads, g

    def predict_proba(self, x):
        logits, _ = self.forward(x, mode="eval")
        return softmax_rows(logits)

    def embed(self, x):
        """Last hidden layer activations in eval mode."""
        _, tape = self.forward(x, mode="eval")
        return tape.acts[-1]

    def copy_state(self):
        return [p.copy() for p in self.parameters()]


def softmax_rows(logits):
    logits = np.asarray(logits, dtype=float)
    _check_finite(logits, "logits")
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, labels):
    """Per-sample ``-log p[j, y_j]`` (floored at 1e-12) and its mean."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (probs.shape[0],):
        raise ShapeError("one label per probability row required")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise InputError("label out of range")
    picked = probs[np.arange(len(labels)), labels]
    per_sample = -np.log(np.maximum(picked, PROB_FLOOR))
    return per_sample, float(per_sample.mean()) if len(per_sample) else 0.0


def cross_entropy_grad(probs, labels, weights=None):
    """d(sum_j w_j * CE_j)/dlogits for softmax outputs ``probs``."""
    probs = np.asarray(probs, dtype=float)
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    if weights is not None:
        g *= np.asarray(weights, dtype=float)[:, None]
    return g


class SGD:
    def __init__(self, lr, momentum=0.0):
        if lr <= 0:
            raise InputError("learning rate must be positive")
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.velocity = None

    def step(self, params, grads):
        _check_pairs(params, grads)
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.velocity):
            if self.momentum:
                v *= self.momentum
                v += g
                p -= self.lr * v
            else:
                p -= self.lr * g


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise InputError("learning rate must be positive")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        _check_pairs(params, grads)
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _check_pairs(params, grads):
    if len(params) != len(grads):
        raise ShapeError("parameter and gradient lists differ in length")
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise ShapeError(f"gradient shape {np.shape(g)} != parameter shape {np.shape(p)}")


def mc_dropout_predict(net, x, n_samples, seed):
    """Stack of ``n_samples`` softmax outputs drawn with dropout active.

    Returns an array of shape ``(n_samples, B, classes)``.
    """
    if n_samples < 2:
        raise InputError("MC dropout needs at least 2 samples")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_samples):
        logits, _ = net.forward(x, mode="mc", rng=rng)
        out.append(softmax_rows(logits))
    return np.stack(out)

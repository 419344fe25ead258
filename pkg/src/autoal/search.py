"""Differentiable query-strategy search.

A SearchNet maps each sample to one logit per candidate strategy. Candidate
scores are shifted by a threshold drawn from a Gaussian mixture over the
scores, gated by ``sigmoid(logit)`` and mixed into one ranking score::

    shaped[j, k] = (S[j, k] - threshold) * sigmoid(theta[j, k])
    mixed[j]     = sum_k lam * sigmoid(theta[j, k]) * shaped[j, k]

SearchNet and FitNet are trained alternately on halves of the labeled set:
FitNet minimizes the mixed-score-weighted task loss, SearchNet maximizes
the mixed score on samples FitNet finds hard. A loss-prediction head on the
SearchNet hidden layers adds a pairwise ranking signal.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import gmixture
from .diffcore import MLP, SGD, Adam, cross_entropy, cross_entropy_grad, softmax_rows
from .errors import InputError, ShapeError, StateError, TrainingError
from .pool import split_labeled
from .seeding import derive_rng, derive_seed
from .strategies import CANDIDATES, StrategyId, build_score_table, predict_bundle, top_indices
from .task import fit_stats, standardize


@dataclass
class AutoALConfig:
    budget: int = 50
    rounds: int = 8
    cycles: int = 1
    lam: float = 1.0
    lam_bar: float = 1.0
    warmup_epochs: int = 200
    joint_epochs: int = 40
    batch_size: int = 10
    lr_search: float = 0.005
    lr_fit: float = 0.005
    score_mode: str = "continuous"
    gmm_input: str = "pooled"
    gmm_components: int = None
    gmm_sample_factor: int = 10
    gmm_max_iters: int = 200
    gmm_tol: float = 1e-6
    loss_pred: bool = True
    margin: float = 1.0
    temperature: float = 0.1
    candidates: tuple = CANDIDATES
    hidden: tuple = (64, 64)
    dropout: float = 0.2
    mc_samples: int = 10
    persist_nets: bool = False

    def __post_init__(self):
        self.candidates = tuple(StrategyId(c) for c in self.candidates)
        self.hidden = tuple(int(h) for h in self.hidden)

    def validate(self):
        if self.budget < 1 or self.rounds < 0 or self.cycles < 1:
            raise InputError("budget and cycles must be >= 1, rounds >= 0")
        if self.batch_size < 2 or self.batch_size % 2:
            raise InputError("batch size must be even and >= 2")
        if self.score_mode not in ("continuous", "binary"):
            raise InputError("score_mode must be 'continuous' or 'binary'")
        if self.gmm_input not in ("pooled", "per_sample_sum"):
            raise InputError("gmm_input must be 'pooled' or 'per_sample_sum'")
        if not self.candidates or StrategyId.RANDOM in self.candidates:
            raise InputError("candidates must be a non-empty list of non-random strategies")
        if self.temperature <= 0 or self.lr_search <= 0 or self.lr_fit <= 0:
            raise InputError("temperature and learning rates must be positive")
        return self


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def shape_scores(scores, threshold, weights):
    scores = np.asarray(scores, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if scores.shape != weights.shape:
        raise ShapeError(f"score shape {scores.shape} != weight shape {weights.shape}")
    return (scores - threshold) * weights


def mix_scores(shaped, theta, lam):
    shaped = np.asarray(shaped, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if shaped.shape != theta.shape:
        raise ShapeError(f"shaped scores {shaped.shape} != logits {theta.shape}")
    return (lam * sigmoid(theta) * shaped).sum(axis=1)


def mixed_from_logits(scores, threshold, theta, lam):
    """Mixed score with the gate ``sigmoid(theta)`` used for both the
    per-strategy weight and the relaxation."""
    return mix_scores(shape_scores(scores, threshold, sigmoid(theta)), theta, lam)


def mixed_grad_logits(scores, threshold, theta, lam):
    """d mixed[j] / d theta[j, k]."""
    s = sigmoid(theta)
    return lam * 2.0 * s * s * (1.0 - s) * (np.asarray(scores) - threshold)


def soft_select_count(mixed, temperature=0.1):
    return float(sigmoid(np.asarray(mixed) / temperature).sum())


def soft_select_count_grad(mixed, temperature=0.1):
    s = sigmoid(np.asarray(mixed) / temperature)
    return s * (1.0 - s) / temperature


def _decay(z):
    # 1 / (1 + exp(z)) for z >= 0, without overflow
    e = math.exp(-z)
    return e / (1.0 + e)


def regularization_loss(alpha, t, batch):
    return _decay(0.5 * abs(alpha - t * batch)) - 0.5


def regularization_grad(alpha, t, batch):
    dev = alpha - t * batch
    g = _decay(0.5 * abs(dev))
    return -g * (1.0 - g) * 0.5 * float(np.sign(dev))


def fitnet_loss(fit_losses, mixed_detached, lam_bar, l_re):
    """Mixed-score-weighted mean task loss plus the (gradient-inert) regularizer."""
    fit_losses = np.asarray(fit_losses, dtype=float)
    return float(np.mean(np.asarray(mixed_detached) * fit_losses) + lam_bar * l_re)


def searchnet_loss(fit_losses_detached, mixed, lam_bar, l_re):
    return float(-np.mean(np.asarray(mixed) * np.asarray(fit_losses_detached)) - lam_bar * l_re)


def search_objective(scores, threshold, theta, losses, lam, lam_bar, t, temperature):
    """Value of the SearchNet loss and its gradient w.r.t. the logits."""
    losses = np.asarray(losses, dtype=float)
    batch = len(losses)
    mixed = mixed_from_logits(scores, threshold, theta, lam)
    alpha = soft_select_count(mixed, temperature)
    l_re = regularization_loss(alpha, t, batch)
    value = searchnet_loss(losses, mixed, lam_bar, l_re)
    d_mixed = -losses / batch - lam_bar * regularization_grad(alpha, t, batch) \
        * soft_select_count_grad(mixed, temperature)
    grad = d_mixed[:, None] * mixed_grad_logits(scores, threshold, theta, lam)
    return value, grad, {"mixed": mixed, "alpha": alpha, "l_re": l_re, "d_mixed": d_mixed}


def loss_prediction_loss(pred, target, margin=1.0):
    """Pairwise ranking loss; sample ``i`` of the first half is paired with
    sample ``i`` of the second half. Returns ``(value, d value / d pred)``."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if len(pred) % 2 or len(pred) != len(target):
        raise InputError("ranking loss needs an even batch with one target per prediction")
    half = len(pred) // 2
    sign = np.sign(target[:half] - target[half:])
    hinge = -sign * (pred[:half] - pred[half:]) + margin
    active = hinge > 0
    value = float(np.where(active, hinge, 0.0).mean()) if half else 0.0
    grad = np.zeros_like(pred)
    if half:
        grad[:half] = np.where(active, -sign, 0.0) / half
        grad[half:] = np.where(active, sign, 0.0) / half
    return value, grad


class SearchHead:
    """SearchNet (one logit per strategy) plus a loss-prediction head that
    sums a linear projection of every hidden layer."""

    def __init__(self, dim, n_strategies, hidden=(64, 64), seed=0, loss_pred=True,
                 activation="tanh"):
        self.net = MLP([dim, *hidden, n_strategies], activation=activation, dropout=0.0, seed=seed)
        self.net.set_mode("eval")
        self.loss_pred = loss_pred
        rng = np.random.default_rng(derive_seed(seed, "lp"))
        self.lp_weights = [rng.uniform(-1, 1, size=h) / np.sqrt(h) for h in hidden]
        self.lp_bias = np.zeros(1)

    @property
    def n_strategies(self):
        return self.net.dims[-1]

    def parameters(self):
        return self.net.parameters() + self.lp_weights + [self.lp_bias]

    def forward(self, x):
        theta, tape = self.net.forward(x, mode="eval")
        pred = self.lp_bias[0] + sum(h @ v for h, v in zip(tape.hidden, self.lp_weights))
        return theta, pred, tape

    def theta(self, x):
        return self.net.forward(x, mode="eval")[0]

    def backward(self, tape, grad_theta, grad_pred=None):
        if grad_pred is None:
            grad_pred = np.zeros(tape.acts[0].shape[0])
        hidden_grads = [grad_pred[:, None] * v[None, :] for v in self.lp_weights]
        net_grads, _ = self.net.backward(tape, grad_theta, hidden_grads)
        lp_grads = [h.T @ grad_pred for h in tape.hidden]
        return net_grads + lp_grads + [np.array([grad_pred.sum()])]


def param_digest(params):
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p).tobytes())
    return h.hexdigest()


@dataclass
class RoundState:
    """Everything a trained round hands to query selection."""

    search: SearchHead
    fitnet: MLP
    gmm: gmixture.GaussianMixture
    threshold: float
    t: float
    stats: tuple
    history: list = field(default_factory=list)
    fit_reports: list = field(default_factory=list)


def _window(order, n, size):
    idx = (np.arange(size) + n * size) % len(order)
    return order[idx]


def _gmm_threshold(table, config, n_labeled, t, seed):
    s = table.scores(config.score_mode)
    obs = s.ravel() if config.gmm_input == "pooled" else s.sum(axis=1)
    k = config.gmm_components or len(config.candidates)
    k = max(1, min(k, len(obs)))
    gm, report = gmixture.fit_em(obs, k, config.gmm_max_iters, config.gmm_tol,
                                 seed=derive_seed(seed, "em"))
    draws = gmixture.sample(gm, config.gmm_sample_factor * n_labeled, seed=derive_seed(seed, "draw"))
    return gm, report, gmixture.threshold_top_t(draws, t)


def _check_finite(values, history):
    if not all(np.isfinite(v) for v in values):
        raise TrainingError("non-finite loss during bilevel training", diagnostics=history)


def bilevel_train_round(pool, config, seed, state=None, callback=None):
    """Train SearchNet, the loss-prediction head and FitNet on the labeled set.

    ``callback(phase, search, fitnet)`` is invoked before and after every
    optimizer step with ``phase`` one of ``"fit:before"``, ``"fit:after"``,
    ``"search:before"``, ``"search:after"``.
    """
    config.validate()
    m = pool.n_labeled
    batch = config.batch_size
    if m < 2 * batch:
        raise StateError(f"labeled set of {m} is smaller than twice the batch size {batch}")
    t = config.budget / len(pool.dataset)
    if not 0 < t < 1:
        raise InputError("budget must be smaller than the pool size")

    labeled = pool.labeled
    x_raw, y_all = pool.features(labeled), pool.labels_of(labeled)
    stats = fit_stats(x_raw)
    x_all = standardize(x_raw, stats)
    pos = {int(i): k for k, i in enumerate(labeled)}
    dim, n_classes = x_all.shape[1], pool.dataset.num_classes
    K = len(config.candidates)

    if state is not None and config.persist_nets:
        search, fitnet = state.search, state.fitnet
    else:
        search = SearchHead(dim, K, config.hidden, derive_seed(seed, "search"), config.loss_pred)
        fitnet = MLP([dim, *config.hidden, n_classes], activation="tanh",
                     dropout=config.dropout, seed=derive_seed(seed, "fitnet"))
    fit_opt = Adam(config.lr_fit)
    search_opt = SGD(config.lr_search)
    rng = derive_rng(seed, "split")
    note = callback or (lambda *_: None)

    history, reports = [], []
    gm = threshold = None
    for cycle in range(config.cycles):
        split = split_labeled(pool, rng)
        tr = np.array([pos[int(i)] for i in split.train])
        va = np.array([pos[int(i)] for i in split.validation])

        for epoch in range(config.warmup_epochs):
            order = rng.permutation(va)
            losses = []
            for start in range(0, len(order), batch):
                rows = order[start:start + batch]
                logits, tape = fitnet.forward(x_all[rows], mode="train")
                probs = softmax_rows(logits)
                losses.append(cross_entropy(probs, y_all[rows])[1])
                grads, _ = fitnet.backward(tape, cross_entropy_grad(probs, y_all[rows]) / len(rows))
                note("fit:before", search, fitnet)
                fit_opt.step(fitnet.parameters(), grads)
                note("fit:after", search, fitnet)
            _check_finite(losses, history)
            history.append({"cycle": cycle, "epoch": epoch, "phase": "warmup",
                            "fit_loss": float(np.mean(losses))})

        cyc_seed = derive_seed(seed, "cycle", cycle)
        tables = {}
        for name, rows in (("train", tr), ("validation", va)):
            bundle = predict_bundle(fitnet, x_all[rows], config.mc_samples,
                                    derive_seed(cyc_seed, "mc", name))
            tables[name] = build_score_table(bundle, config.candidates, t,
                                             seed=derive_seed(cyc_seed, "km", name))
        gm, report, threshold = _gmm_threshold(tables["validation"], config, m, t, cyc_seed)
        reports.append(report)
        s_train = dict(zip(tr.tolist(), tables["train"].scores(config.score_mode)))
        s_val = dict(zip(va.tolist(), tables["validation"].scores(config.score_mode)))

        n_windows = m // (2 * batch) + 1
        for epoch in range(config.joint_epochs):
            rec = {"fit_loss": [], "search_loss": [], "alpha": [], "l_re": [], "rank_loss": []}
            for n in range(n_windows):
                # FitNet step on training-half window n+1
                rows = _window(tr, n + 1, batch)
                scores = np.array([s_train[r] for r in rows])
                theta = search.theta(x_all[rows])
                mixed = mixed_from_logits(scores, threshold, theta, config.lam)
                alpha_f = soft_select_count(mixed, config.temperature)
                l_re_f = regularization_loss(alpha_f, t, len(rows))
                weights = np.maximum(mixed, 0.0)
                logits, tape = fitnet.forward(x_all[rows], mode="train")
                probs = softmax_rows(logits)
                ce, _ = cross_entropy(probs, y_all[rows])
                rec["fit_loss"].append(fitnet_loss(ce, weights, config.lam_bar, l_re_f))
                grads, _ = fitnet.backward(
                    tape, cross_entropy_grad(probs, y_all[rows], weights) / len(rows))
                note("fit:before", search, fitnet)
                fit_opt.step(fitnet.parameters(), grads)
                note("fit:after", search, fitnet)

                # SearchNet (+ loss prediction) step on validation-half window n
                rows = _window(va, n, batch)
                scores = np.array([s_val[r] for r in rows])
                ce_val, _ = cross_entropy(fitnet.predict_proba(x_all[rows]), y_all[rows])
                theta, pred, tape = search.forward(x_all[rows])
                value, g_theta, parts = search_objective(
                    scores, threshold, theta, ce_val, config.lam, config.lam_bar, t,
                    config.temperature)
                g_pred = None
                if config.loss_pred:
                    rank, g_pred = loss_prediction_loss(pred, ce_val, config.margin)
                    rec["rank_loss"].append(rank)
                grads = search.backward(tape, g_theta, g_pred)
                note("search:before", search, fitnet)
                search_opt.step(search.parameters(), grads)
                note("search:after", search, fitnet)
                rec["search_loss"].append(value)
                rec["alpha"].append(parts["alpha"])
                rec["l_re"].append(parts["l_re"])
            row = {"cycle": cycle, "epoch": epoch, "phase": "joint"}
            row.update({k: float(np.mean(v)) if v else 0.0 for k, v in rec.items()})
            _check_finite([row[k] for k in rec], history)
            history.append(row)

    return RoundState(search, fitnet, gm, threshold, t, stats, history, reports)


@dataclass
class QueryResult:
    indices: np.ndarray
    mixed: np.ndarray
    candidates: np.ndarray
    theta: np.ndarray
    scores: np.ndarray
    table: object


def select_query(pool, state, config, seed, lam=None):
    """Top-``budget`` unlabeled samples by mixed score (ties -> lower index)."""
    unl = pool.unlabeled
    b = config.budget
    if len(unl) < b:
        raise InputError(f"only {len(unl)} unlabeled samples for a budget of {b}")
    x = standardize(pool.features(unl), state.stats)
    bundle = predict_bundle(state.fitnet, x, config.mc_samples, derive_seed(seed, "mc"))
    table = build_score_table(bundle, config.candidates, state.t, seed=derive_seed(seed, "km"))
    scores = table.scores(config.score_mode)
    theta = state.search.theta(x)
    mixed = mixed_from_logits(scores, state.threshold, theta, config.lam if lam is None else lam)
    chosen = top_indices(mixed, b)
    return QueryResult(unl[chosen], mixed, unl, theta, scores, table)


def strategy_profile(result, threshold):
    """Per-strategy mean of ``sigmoid(theta) * shaped`` over the scored pool."""
    gate = sigmoid(result.theta)
    return (gate * shape_scores(result.scores, threshold, gate)).mean(axis=0)


def normalize_profile(values):
    values = np.asarray(values, dtype=float)
    span = values.max() - values.min()
    if span <= 0:
        return np.ones_like(values)
    return (values - values.min()) / span


class AutoALSelector:
    """Query selector plugging the bilevel search into the AL loop."""

    name = "autoal"

    def __init__(self, config):
        self.config = config.validate()
        self.state = None
        self.last = None

    def select(self, pool, model, stats, round_idx, seed):
        cfg = self.config
        self.state = bilevel_train_round(pool, cfg, derive_seed(seed, "bilevel", round_idx),
                                         state=self.state)
        self.last = select_query(pool, self.state, cfg, derive_seed(seed, "query", round_idx))
        profile = normalize_profile(strategy_profile(self.last, self.state.threshold))
        rows = [(s.value, float(v)) for s, v in zip(cfg.candidates, profile)]
        return self.last.indices, rows


def run_autoal(train, test, config, seed, seed_size=40, task=None, stratified=False):
    """Full AutoAL loop; returns a :class:`autoal.loop.RunRecord`."""
    from .loop import TaskSettings, run_loop

    return run_loop(train, test, seed_size, config.budget, config.rounds,
                    AutoALSelector(config), task or TaskSettings(), seed, stratified)

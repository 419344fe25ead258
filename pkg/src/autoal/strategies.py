"""Candidate acquisition functions and the per-strategy score table.

Every scorer maps a :class:`PredictionBundle` to one real score per sample,
with larger meaning "more worth labeling".
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .diffcore import PROB_FLOOR, mc_dropout_predict
from .errors import InputError


class StrategyId(str, Enum):
    ENTROPY = "entropy"
    MARGIN = "margin"
    LEAST_CONFIDENCE = "least_confidence"
    KMEANS = "kmeans"
    BALD = "bald"
    VAR_RATIO = "var_ratio"
    MEAN_STD = "mean_std"
    RANDOM = "random"


CANDIDATES = (
    StrategyId.ENTROPY,
    StrategyId.MARGIN,
    StrategyId.LEAST_CONFIDENCE,
    StrategyId.KMEANS,
    StrategyId.BALD,
    StrategyId.VAR_RATIO,
    StrategyId.MEAN_STD,
)


def parse_strategy(name):
    try:
        return StrategyId(name)
    except ValueError:
        valid = ", ".join(s.value for s in StrategyId)
        raise InputError(f"unknown strategy {name!r}; valid: {valid}") from None


def ceil_count(fraction, n):
    """``ceil(fraction * n)`` guarded against float noise like 0.1 * 30."""
    return max(1, math.ceil(fraction * n - 1e-9))


def top_indices(scores, k):
    """Positions of the ``k`` largest scores; ties go to the lower position."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    return order[:k]


@dataclass
class PredictionBundle:
    eval_probs: np.ndarray
    mc_probs: np.ndarray = None
    embeddings: np.ndarray = None

    def __len__(self):
        return len(self.eval_probs)

    def take(self, rows):
        rows = np.asarray(rows, dtype=int)
        return PredictionBundle(
            self.eval_probs[rows],
            None if self.mc_probs is None else self.mc_probs[:, rows],
            None if self.embeddings is None else self.embeddings[rows],
        )


def predict_bundle(net, x, mc_samples=10, seed=0):
    return PredictionBundle(
        eval_probs=net.predict_proba(x),
        mc_probs=mc_dropout_predict(net, x, mc_samples, seed),
        embeddings=net.embed(x),
    )


def _entropy(p):
    return -(p * np.log(np.maximum(p, PROB_FLOOR))).sum(axis=-1)


def score_entropy(bundle):
    return _entropy(bundle.eval_probs)


def score_margin(bundle):
    p = bundle.eval_probs
    if p.shape[1] < 2:
        raise InputError("margin needs at least two classes")
    top2 = np.sort(p, axis=1)[:, -2:]
    return -(top2[:, 1] - top2[:, 0])


def score_least_confidence(bundle):
    return 1.0 - bundle.eval_probs.max(axis=1)


def _require_mc(bundle):
    if bundle.mc_probs is None or len(bundle.mc_probs) < 2:
        raise InputError("strategy needs a stack of at least 2 MC-dropout passes")
    return bundle.mc_probs


def score_bald(bundle):
    mc = _require_mc(bundle)
    mean = mc.mean(axis=0)
    score = _entropy(mean) - _entropy(mc).mean(axis=0)
    # Jensen gap can come out as -1e-16 through rounding
    return np.maximum(score, 0.0)


def score_var_ratio(bundle):
    mc = _require_mc(bundle)
    return 1.0 - mc.mean(axis=0).max(axis=1)


def score_mean_std(bundle):
    mc = _require_mc(bundle)
    return mc.std(axis=0).mean(axis=1)


def kmeans_plus_plus(x, k, rng):
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def lloyd(x, k, iters=50, seed=0):
    """k-means with k-means++ seeding.

    Returns ``(centers, assignment, objective_trace)`` where the trace holds
    the within-cluster sum of squares after every assignment step.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if not 1 <= k <= n:
        raise InputError(f"k must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = kmeans_plus_plus(x, k, rng)
    trace = []
    assign = None
    for _ in range(max(1, iters)):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        trace.append(float(d2[np.arange(n), new_assign].sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = assign == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
    return centers, assign, trace


def score_kmeans(bundle, k, iters=50, seed=0):
    """Cluster representatives get ``1 / (1 + distance to centroid)``, all others 0."""
    emb = bundle.embeddings
    if emb is None:
        raise InputError("kmeans needs embeddings")
    n = len(emb)
    if k > n:
        raise InputError(f"k={k} exceeds sample count {n}")
    centers, assign, _ = lloyd(emb, k, iters, seed)
    scores = np.zeros(n)
    for c in range(k):
        members = np.flatnonzero(assign == c)
        if len(members) == 0:
            continue
        dist = np.sqrt(((emb[members] - centers[c]) ** 2).sum(axis=1))
        j = members[np.argmin(dist)]
        scores[j] = 1.0 / (1.0 + dist.min())
    return scores


def score_random(bundle, seed=0):
    return np.random.default_rng(seed).random(len(bundle))


def raw_scores(strategy, bundle, kmeans_k=None, seed=0, kmeans_iters=50):
    strategy = StrategyId(strategy)
    if strategy is StrategyId.KMEANS:
        k = kmeans_k if kmeans_k is not None else max(1, len(bundle) // 10)
        return score_kmeans(bundle, min(k, len(bundle)), kmeans_iters, seed)
    if strategy is StrategyId.RANDOM:
        return score_random(bundle, seed)
    return _SCORERS[strategy](bundle)


_SCORERS = {
    StrategyId.ENTROPY: score_entropy,
    StrategyId.MARGIN: score_margin,
    StrategyId.LEAST_CONFIDENCE: score_least_confidence,
    StrategyId.BALD: score_bald,
    StrategyId.VAR_RATIO: score_var_ratio,
    StrategyId.MEAN_STD: score_mean_std,
}


def minmax_columns(raw):
    raw = np.asarray(raw, dtype=float)
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    out = np.full_like(raw, 0.5)
    ok = span > 0
    out[:, ok] = (raw[:, ok] - lo[ok]) / span[ok]
    return out


@dataclass
class StrategyScoreTable:
    """``raw`` holds min-max normalized scores (n x K); ``binary`` marks each
    strategy's top ``ceil(t_sim * n)`` samples; ``unnormalized`` keeps the
    scorer outputs as returned."""

    raw: np.ndarray
    binary: np.ndarray
    strategies: tuple
    unnormalized: np.ndarray

    def scores(self, mode="continuous"):
        if mode == "continuous":
            return self.raw
        if mode == "binary":
            return self.binary
        raise InputError(f"score mode must be 'continuous' or 'binary', got {mode!r}")


def build_score_table(bundle, strategies, t_sim, seed=0, kmeans_iters=50):
    strategies = tuple(StrategyId(s) for s in strategies)
    if not strategies:
        raise InputError("at least one strategy required")
    n = len(bundle)
    if not 0 < t_sim < 1:
        raise InputError(f"t_sim must lie in (0, 1), got {t_sim}")
    top = ceil_count(t_sim, n)
    cols = [raw_scores(s, bundle, kmeans_k=top, seed=seed, kmeans_iters=kmeans_iters)
            for s in strategies]
    unnormalized = np.column_stack(cols)
    raw = minmax_columns(unnormalized)
    binary = np.zeros_like(raw)
    for c in range(raw.shape[1]):
        binary[top_indices(raw[:, c], top), c] = 1.0
    return StrategyScoreTable(raw, binary, strategies, unnormalized)

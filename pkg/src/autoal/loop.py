"""Generic pool-based AL loop shared by AutoAL and the baseline strategies."""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError
from .pool import init_pool
from .seeding import derive_seed
from .strategies import StrategyId, predict_bundle, raw_scores, top_indices
from .task import accuracy, fit_stats, standardize, train_classifier


@dataclass
class TaskSettings:
    hidden: tuple = (64, 64)
    epochs: int = 100
    batch_size: int = 32
    lr: float = 0.01
    dropout: float = 0.2
    mc_samples: int = 10


@dataclass
class RunRecord:
    run_id: str
    method: str
    seed: int
    rounds: list = field(default_factory=list)            # (round, labeled_count, accuracy)
    strategy_scores: list = field(default_factory=list)   # (round, strategy, normalized score)
    queries: list = field(default_factory=list)
    initial_labeled: tuple = ()
    timings: dict = field(default_factory=dict)
    failed: bool = False
    error: str = ""


class StrategySelector:
    """Top-``b`` of a single acquisition function, scored with the task model."""

    def __init__(self, strategy, budget, mc_samples=10):
        self.strategy = StrategyId(strategy)
        self.name = self.strategy.value
        self.budget = budget
        self.mc_samples = mc_samples

    def select(self, pool, model, stats, round_idx, seed):
        unl = pool.unlabeled
        rs = derive_seed(seed, self.name, round_idx)
        if self.strategy is StrategyId.RANDOM:
            rng = np.random.default_rng(rs)
            return np.sort(rng.choice(unl, size=self.budget, replace=False)), []
        x = standardize(pool.features(unl), stats)
        bundle = predict_bundle(model, x, self.mc_samples, rs)
        scores = raw_scores(self.strategy, bundle, kmeans_k=self.budget, seed=rs)
        return unl[top_indices(scores, self.budget)], []


def _train_task(pool, task, seed, round_idx):
    x, y = pool.labeled_data()
    stats = fit_stats(x)
    net = train_classifier(standardize(x, stats), y, pool.dataset.num_classes,
                           hidden=task.hidden, epochs=task.epochs, batch_size=task.batch_size,
                           lr=task.lr, dropout=task.dropout,
                           seed=derive_seed(seed, "task", round_idx))
    return net, stats


def run_loop(train, test, seed_size, budget, rounds, selector, task, seed, stratified=False,
             run_id=None):
    """Seed the pool, then query/commit/retrain for ``rounds`` rounds.

    Round 0 is the seed-set accuracy. The pool and task-model streams depend
    only on ``seed``, so every method sees the same initial labeled set and
    the same round-0 model.
    """
    record = RunRecord(run_id or f"{selector.name}-s{seed}", selector.name, seed)
    pool = init_pool(train, seed_size, derive_seed(seed, "pool"), stratified)
    record.initial_labeled = tuple(int(i) for i in pool.labeled)
    timings = {"train_task": 0.0, "select": 0.0}

    clock = time.perf_counter()
    model, stats = _train_task(pool, task, seed, 0)
    timings["train_task"] += time.perf_counter() - clock
    record.rounds.append((0, pool.n_labeled, accuracy(model, standardize(test.features, stats),
                                                      test.labels)))
    for r in range(1, rounds + 1):
        try:
            clock = time.perf_counter()
            chosen, profile = selector.select(pool, model, stats, r, seed)
            timings["select"] += time.perf_counter() - clock
            pool.commit(chosen)
            clock = time.perf_counter()
            model, stats = _train_task(pool, task, seed, r)
            timings["train_task"] += time.perf_counter() - clock
        except TrainingError as exc:
            record.failed = True
            record.error = f"round {r}: {exc}"
            break
        record.queries.append(np.asarray(chosen))
        record.strategy_scores.extend((r, s, v) for s, v in profile)
        acc = accuracy(model, standardize(test.features, stats), test.labels)
        record.rounds.append((r, pool.n_labeled, acc))
    record.timings = timings
    return record

"""Dataset construction and multi-seed, multi-method execution."""

import numpy as np

from ..loop import StrategySelector, run_loop
from ..pool import load_csv, load_idx_pair, make_blobs, make_two_moons
from ..search import AutoALSelector


def build_dataset(cfg):
    v = cfg.values
    name = v["dataset"]
    if name == "blobs":
        counts = v["class_counts"] or _even_counts(v["n_points"], v["classes"])
        ds = make_blobs(v["classes"], counts, v["dim"], v["spread"], v["noise"],
                        seed=v["data_seed"], clusters_per_class=v["clusters_per_class"])
    elif name == "moons":
        ds = make_two_moons(v["n_points"], v["noise"], seed=v["data_seed"])
    elif name == "idx":
        ds = load_idx_pair(v["data_path"], v["labels_path"])
    else:
        ds = load_csv(v["data_path"])
    return ds


def _even_counts(n, classes):
    base = [n // classes] * classes
    for i in range(n % classes):
        base[i] += 1
    return base


def train_test_split(ds, test_fraction, seed):
    perm = np.random.default_rng(seed).permutation(len(ds))
    n_test = int(round(test_fraction * len(ds)))
    return ds.subset(perm[n_test:], ds.name), ds.subset(perm[:n_test], ds.name + "-test")


def make_selector(cfg, method):
    if method == "autoal":
        return AutoALSelector(cfg.autoal())
    return StrategySelector(method, cfg["budget"], cfg["mc_samples"])


def run_method(cfg, method, seed, data=None):
    train, test = data or train_test_split(build_dataset(cfg), cfg["test_fraction"], cfg["data_seed"])
    return run_loop(train, test, cfg["seed_size"], cfg["budget"], cfg["rounds"],
                    make_selector(cfg, method), cfg.task(), seed, cfg["stratified"],
                    run_id=f"{method}-s{seed}")


def run_methods(cfg, methods, progress=None):
    """Every method on every seed over one shared train/test split."""
    data = train_test_split(build_dataset(cfg), cfg["test_fraction"], cfg["data_seed"])
    records = []
    for method in methods:
        for seed in cfg["seeds"]:
            rec = run_method(cfg, method, seed, data)
            records.append(rec)
            if progress:
                progress(rec)
    return records


def summarize(records):
    """Mean/std of test accuracy per (method, round) across seeds."""
    grouped = {}
    for rec in records:
        for rnd, labeled, acc in rec.rounds:
            grouped.setdefault((rec.method, rnd), []).append((labeled, acc))
    rows = []
    methods = list(dict.fromkeys(rec.method for rec in records))
    for method in methods:
        rounds = sorted(r for m, r in grouped if m == method)
        for rnd in rounds:
            pairs = grouped[(method, rnd)]
            accs = np.array([a for _, a in pairs])
            rows.append({
                "method": method,
                "round": rnd,
                "labeled_count": pairs[0][0],
                "mean_accuracy": float(accs.mean()),
                "std_accuracy": float(accs.std()),
                "n_seeds": len(accs),
            })
    return rows

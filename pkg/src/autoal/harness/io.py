"""CSV and manifest persistence with fixed headers."""

import csv
from pathlib import Path

from ..errors import FormatError

ROUNDS_HEADER = ["run_id", "method", "seed", "round", "labeled_count", "test_accuracy"]
SCORES_HEADER = ["run_id", "seed", "round", "strategy", "normalized_score"]
COMPARE_HEADER = ["method", "round", "labeled_count", "mean_accuracy", "std_accuracy", "n_seeds"]


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_rounds(path, records):
    rows = []
    for rec in records:
        for rnd, labeled, acc in rec.rounds:
            rows.append([rec.run_id, rec.method, rec.seed, rnd, labeled, repr(float(acc))])
        if rec.failed:
            rows.append([rec.run_id, rec.method, rec.seed, "failed", "", ""])
    return _write(path, ROUNDS_HEADER, rows)


def write_strategy_scores(path, records):
    rows = []
    for rec in records:
        for rnd, strategy, score in rec.strategy_scores:
            rows.append([rec.run_id, rec.seed, rnd, strategy, repr(float(score))])
    return _write(path, SCORES_HEADER, rows)


def write_compare(path, summary):
    rows = [[r["method"], r["round"], r["labeled_count"], repr(r["mean_accuracy"]),
             repr(r["std_accuracy"]), r["n_seeds"]] for r in summary]
    return _write(path, COMPARE_HEADER, rows)


def write_manifest(path, cfg, extra=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(list(cfg.manifest_lines()) + list(extra)) + "\n")
    return path


def read_csv(path, header):
    """Rows as dicts; raises FormatError on a wrong header or no data rows."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            found = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if found != header:
            raise FormatError(f"{path}: expected header {','.join(header)}")
        rows = [dict(zip(header, row)) for row in reader if row]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return rows


def sniff_header(path):
    with open(path, newline="") as f:
        try:
            return next(csv.reader(f))
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None


def read_curves(path):
    """Learning curves from either compare.csv or rounds.csv.

    Returns ``{method: [(labeled_count, mean, std), ...]}`` sorted by round.
    """
    header = sniff_header(path)
    if header == COMPARE_HEADER:
        rows = read_csv(path, COMPARE_HEADER)
        curves = {}
        for r in sorted(rows, key=lambda r: int(r["round"])):
            curves.setdefault(r["method"], []).append(
                (int(r["labeled_count"]), float(r["mean_accuracy"]), float(r["std_accuracy"])))
        return curves
    if header == ROUNDS_HEADER:
        from ..loop import RunRecord
        from .experiment import summarize

        rows = [r for r in read_csv(path, ROUNDS_HEADER) if r["round"] != "failed"]
        records = {}
        for r in rows:
            rec = records.setdefault(r["run_id"], RunRecord(r["run_id"], r["method"], int(r["seed"])))
            rec.rounds.append((int(r["round"]), int(r["labeled_count"]), float(r["test_accuracy"])))
        if not records:
            raise FormatError(f"{path}: no data rows")
        return read_curves_from_summary(summarize(list(records.values())))
    raise FormatError(f"{path}: not a compare.csv or rounds.csv file")


def read_curves_from_summary(summary):
    curves = {}
    for r in summary:
        curves.setdefault(r["method"], []).append(
            (r["labeled_count"], r["mean_accuracy"], r["std_accuracy"]))
    return curves


def read_strategy_scores(path):
    return [
        (r["run_id"], int(r["seed"]), int(r["round"]), r["strategy"], float(r["normalized_score"]))
        for r in read_csv(path, SCORES_HEADER)
    ]

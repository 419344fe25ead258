"""Command-line entry point: ``autoal {run,compare,plot,heatmap,validate-config}``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import AutoALError, FormatError
from . import io, plotting
from .config import METHODS, ConfigError, parse_config_file, resolve
from .experiment import run_methods, summarize

log = logging.getLogger("autoal")

EXIT_CONFIG = 2
EXIT_FAILED = 3

# flag name -> config key
_RUN_FLAGS = {
    "dataset": "dataset", "data-path": "data_path", "labels-path": "labels_path",
    "rounds": "rounds", "budget": "budget", "seed-size": "seed_size", "seeds": "seeds",
    "candidates": "candidates", "score-mode": "score_mode", "lambda": "lambda",
    "lambda-bar": "lambda_bar", "warmup-epochs": "warmup_epochs",
    "joint-epochs": "joint_epochs", "batch-size": "batch_size", "out": "out",
    "task-epochs": "task_epochs", "n-points": "n_points", "test-fraction": "test_fraction",
}


def _add_experiment_flags(p, method_flag):
    for flag, key in _RUN_FLAGS.items():
        p.add_argument(f"--{flag}", dest=key, default=None)
    if method_flag == "method":
        p.add_argument("--method", dest="method", default=None,
                       help=f"one of: {', '.join(METHODS)}")
    else:
        p.add_argument("--methods", dest="methods", default=None,
                       help="comma-separated method list")
    p.add_argument("--config", default=None, help="key = value config file")


def build_parser():
    parser = argparse.ArgumentParser(prog="autoal", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_experiment_flags(sub.add_parser("run", help="run one method over seeds"), "method")
    _add_experiment_flags(sub.add_parser("compare", help="run several methods on shared seeds"),
                          "methods")
    p = sub.add_parser("plot", help="render learning curves to SVG")
    p.add_argument("input")
    p.add_argument("output")
    p = sub.add_parser("heatmap", help="render strategy scores to SVG")
    p.add_argument("input")
    p.add_argument("output")
    p = sub.add_parser("validate-config", help="resolve and check a configuration")
    _add_experiment_flags(p, "method")
    p.add_argument("--methods", dest="methods", default=None)
    return parser


def _resolve(args):
    file_values = parse_config_file(args.config) if args.config else {}
    keys = set(_RUN_FLAGS.values()) | {"method", "methods"}
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    return resolve(file_values, overrides)


def _progress(rec):
    last = rec.rounds[-1]
    status = "FAILED " + rec.error if rec.failed else f"final acc {last[2]:.3f}"
    log.info("%s: %d rounds, %s", rec.run_id, len(rec.rounds) - 1, status)


def _write_outputs(out, cfg, records, summary=None):
    out = Path(out)
    io.write_rounds(out / "rounds.csv", records)
    scored = [r for r in records if r.strategy_scores]
    if scored:
        io.write_strategy_scores(out / "strategy_scores.csv", scored)
        plotting.plot_heatmap(io.read_strategy_scores(out / "strategy_scores.csv"),
                              out / "strategy_scores.svg")
    summary = summary or summarize(records)
    plotting.plot_learning_curves(io.read_curves_from_summary(summary), out / "learning_curve.svg")
    io.write_manifest(out / "manifest.txt", cfg)
    timings = {r.run_id: r.timings for r in records}
    (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")


def cmd_run(args):
    cfg = _resolve(args)
    records = run_methods(cfg, [cfg["method"]], _progress)
    _write_outputs(cfg["out"], cfg, records)
    return EXIT_FAILED if any(r.failed for r in records) else 0


def cmd_compare(args):
    cfg = _resolve(args)
    records = run_methods(cfg, list(cfg["methods"]), _progress)
    summary = summarize(records)
    out = Path(cfg["out"])
    io.write_compare(out / "compare.csv", summary)
    _write_outputs(out, cfg, records, summary)
    return EXIT_FAILED if any(r.failed for r in records) else 0


def cmd_plot(args):
    curves = io.read_curves(args.input)
    plotting.plot_learning_curves(curves, args.output)
    return 0


def cmd_heatmap(args):
    plotting.plot_heatmap(io.read_strategy_scores(args.input), args.output)
    return 0


def cmd_validate(args):
    cfg = _resolve(args)
    print("\n".join(cfg.manifest_lines()))
    return 0


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "plot": cmd_plot,
    "heatmap": cmd_heatmap,
    "validate-config": cmd_validate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AutoALError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line harness.

Exit codes: 0 success, 2 configuration/data error, 3 numeric or strategy
failure, 4 unknown flag.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import ExperimentConfig
from .data import class_histogram, generate_stream, save_csv
from .errors import ConfigurationError, DataError, DriftCLError, EvaluationError, NumericError, StrategyError
from .evaluation import MetricsReport, run_strategy

log = logging.getLogger("driftcl")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_UNKNOWN_FLAG = 4

RESULTS_HEADER = ("strategy", "task", "train_acc", "avg_acc", "avg_forgetting")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigurationError, DataError, EvaluationError, OSError)):
        return EXIT_CONFIG
    if isinstance(exc, (NumericError, StrategyError)):
        return EXIT_NUMERIC
    return 1


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def write_results_csv(reports: list[MetricsReport], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for report in reports:
            for r in report.results:
                writer.writerow(
                    [report.strategy, r.task, f"{r.train_acc:.6f}", f"{r.avg_acc:.6f}", f"{r.avg_forgetting:.6f}"]
                )


def write_curves_csv(reports: list[MetricsReport], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("strategy", "task", "epoch", "current_task_test_acc"))
        for report in reports:
            for task, epoch, acc in report.curves:
                writer.writerow([report.strategy, task, epoch, f"{acc:.6f}"])


def write_matrix_json(reports: list[MetricsReport], config: ExperimentConfig, path: Path) -> None:
    payload = {
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "seed": config.seed,
        "runs": [r.to_dict() for r in reports],
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _write_outputs(reports, config, out_dir: Path, suffix: str = "") -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(reports, out_dir / f"results.csv{suffix}")
    write_curves_csv(reports, out_dir / f"curves.csv{suffix}")
    write_matrix_json(reports, config, out_dir / f"matrix.json{suffix}")


def _run_one(config: ExperimentConfig, stream, name: str) -> MetricsReport:
    log.info("running %s", name)
    strategy = config.build_strategy(name, stream.input_dim)
    report = run_strategy(
        stream,
        strategy,
        config.train_config,
        config.model_config(stream.input_dim),
        seed=config.train_seed,
    )
    report.metadata["config_digest"] = config.digest()
    return report


def cmd_generate(args) -> int:
    config = _load_config(args)
    stream = generate_stream(config.generator_config())
    out = Path(args.out)
    if out.parent != Path("") and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(stream, out)
    hist = class_histogram(stream)
    for task, counts in zip(stream, hist):
        n = len(task.train) + len(task.test)
        print(f"task {task.task_id}: {n} rows, classes {' '.join(str(int(c)) for c in counts)}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load_config(args)
    if args.strategy:
        config = dataclasses.replace(config, strategy=args.strategy)
    stream = config.build_stream()
    report = _run_one(config, stream, config.strategy)
    _write_outputs([report], config, Path(args.out_dir or config.output_dir))
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _load_config(args)
    if args.strategies:
        names = [s.strip() for s in args.strategies.split(",") if s.strip()]
        config = dataclasses.replace(config, strategies=names)
    out_dir = Path(args.out_dir or config.output_dir)
    stream = config.build_stream()
    reports: list[MetricsReport] = []
    try:
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_run_one, config, stream, n) for n in config.strategies]
                for fut in futures:
                    reports.append(fut.result())
        else:
            for name in config.strategies:
                reports.append(_run_one(config, stream, name))
    except DriftCLError:
        if reports:
            _write_outputs(reports, config, out_dir, suffix=".partial")
        raise
    _write_outputs(reports, config, out_dir)
    return EXIT_OK


def cmd_init_config(args) -> int:
    config = ExperimentConfig()
    Path(args.out).write_text(config.dumps(), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftcl", description="Continual learning under real concept drift.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the config's master seed")

    p = sub.add_parser("generate", help="write a synthetic drift dataset as CSV")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run one strategy")
    common(p)
    p.add_argument("--strategy", help="override the config's strategy")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several strategies on the same stream")
    common(p)
    p.add_argument("--strategies", help="comma-separated list, e.g. naive,ewc,gdumb")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("init-config", help="write the full default config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, unknown = parser.parse_known_args(argv)
    if unknown:
        print(f"driftcl: error: unrecognized arguments: {' '.join(unknown)}", file=sys.stderr)
        return EXIT_UNKNOWN_FLAG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (DriftCLError, OSError) as exc:
        print(f"driftcl: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``tailsel rank | benchmark | fit-copula``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from tailsel.copula_core import THETA_MAX, fit_theta_mle, fit_theta_tau, kendall_tau_model
from tailsel.dataprep import binarize_target, load_csv, pseudo_matrix
from tailsel.errors import TailselError
from tailsel.evaluation import run_benchmark
from tailsel.selectors import ga_select, rank_a2, select_mi

SCHEMA_VERSION = 1
log = logging.getLogger("tailsel")


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@dataclass
class RunConfig:
    command: str = "rank"
    input: str | None = None
    target: str | None = None
    k: int = 5
    method: str = "a2"
    seed: int = 42
    estimator: str = "tau"
    select_on: str = "train"
    output: str | None = None
    format: str = "json"
    feature: str | None = None
    repeats: int = 20

    def validate(self) -> None:
        if self.input is None:
            raise UsageError("--input is required")
        if self.k < 1:
            raise UsageError("--k must be >= 1")
        choices = {
            "method": ("a2", "mi", "ga", "all"),
            "estimator": ("tau", "mle"),
            "select_on": ("train", "full"),
            "format": ("json", "text", "csv"),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise UsageError(f"--{name.replace('_', '-')} must be one of {', '.join(allowed)}")
        if self.command == "rank" and self.method == "all":
            raise UsageError("rank needs --method a2, mi or ga")
        if self.command == "fit-copula" and not self.feature:
            raise UsageError("fit-copula needs --feature")
        if self.repeats < 1:
            raise UsageError("--repeats must be >= 1")


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("TAILSEL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"TAILSEL_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _check_paths(cfg: RunConfig) -> None:
    if not Path(cfg.input).is_file():
        raise StageError("load", f"input file not found: {cfg.input}")
    if cfg.output is not None:
        parent = Path(cfg.output).resolve().parent
        if not parent.is_dir():
            raise StageError("write", f"output directory does not exist: {parent}")


def _load(cfg: RunConfig):
    try:
        return binarize_target(load_csv(cfg.input, cfg.target))
    except TailselError as exc:
        raise StageError("load", str(exc)) from exc


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _document(cfg: RunConfig, result: dict, threads: int, started: float) -> dict:
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "command": cfg.command,
        "config": asdict(cfg),
        "result": result,
        "runtime": {"threads": threads, "wall_seconds": round(time.perf_counter() - started, 3)},
    })


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _rows_to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _rows_to_text(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[f"{v:.6f}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells) + "\n"


def _format_table(fmt: str, doc: dict, header: list[str], rows: list[list]) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        return _rows_to_csv(header, rows)
    return _rows_to_text(header, rows)


def cmd_rank(cfg: RunConfig, threads: int) -> None:
    started = time.perf_counter()
    _check_paths(cfg)
    data = _load(cfg)
    try:
        if cfg.method == "a2":
            ranking = rank_a2(pseudo_matrix(data), cfg.k, estimator=cfg.estimator, threads=threads)
            result = ranking.to_dict()
            header = ["rank", "feature", "lambda_u", "theta", "tau_hat", "clamped"]
            rows = [[i + 1, e.feature, e.lambda_u, e.theta, e.tau_hat, e.clamped] for i, e in enumerate(ranking.entries)]
        elif cfg.method == "mi":
            sel = select_mi(data, cfg.k, seed=cfg.seed)
            result = sel.to_dict()
            order = sorted(sel.scores, key=lambda nm: (-sel.scores[nm], data.feature_names.index(nm)))
            header = ["rank", "feature", "mean_mi"]
            rows = [[i + 1, nm, sel.scores[nm]] for i, nm in enumerate(order)]
        else:
            ga = ga_select(data, cfg.k, seed=cfg.seed)
            result = ga.to_dict()
            header = ["feature", "fitness"]
            rows = [[nm, ga.fitness] for nm in ga.features]
    except TailselError as exc:
        raise StageError("select", str(exc)) from exc
    result["method"] = cfg.method
    doc = _document(cfg, result, threads, started)
    _emit(_format_table(cfg.format, doc, header, rows), cfg.output)


def cmd_benchmark(cfg: RunConfig, threads: int) -> None:
    started = time.perf_counter()
    _check_paths(cfg)
    data = _load(cfg)
    try:
        report = run_benchmark(
            data, seed=cfg.seed, k=cfg.k, estimator=cfg.estimator, select_on=cfg.select_on,
            threads=threads, repeats=cfg.repeats,
        )
    except TailselError as exc:
        raise StageError("benchmark", str(exc)) from exc
    doc = _document(cfg, report.to_dict(), threads, started)
    text = json.dumps(doc, indent=2) + "\n"
    if cfg.output is not None:
        out = Path(cfg.output)
        out.write_text(text, encoding="utf-8")
        out.with_suffix(".txt").write_text(report.to_text(), encoding="utf-8")
        out.with_name(out.stem + "_importance.csv").write_text(report.importance_csv(), encoding="utf-8")
        return
    if cfg.format == "json":
        sys.stdout.write(text)
    elif cfg.format == "csv":
        sys.stdout.write(report.importance_csv())
    else:
        sys.stdout.write(report.to_text())


def cmd_fit_copula(cfg: RunConfig, threads: int) -> None:
    started = time.perf_counter()
    _check_paths(cfg)
    data = _load(cfg)
    if cfg.feature not in data.feature_names:
        raise StageError("fit", f"unknown feature {cfg.feature!r}")
    pm = pseudo_matrix(data.select([cfg.feature]))
    try:
        sample = pm.sample(0)
        est = fit_theta_tau(sample)
        if cfg.estimator == "mle":
            est = fit_theta_mle(sample, init=est.theta, tau_hat=est.tau_hat)
    except TailselError as exc:
        raise StageError("fit", str(exc)) from exc
    result = {
        "feature": cfg.feature,
        "n": sample.n,
        **est.to_dict(),
        "diagnostics": {
            "theta_bounds": [1.0, THETA_MAX],
            "achievable_tau": [kendall_tau_model(1.0), kendall_tau_model(THETA_MAX)],
            "distinct_u": int(np.unique(sample.u).size),
            "distinct_v": int(np.unique(sample.v).size),
        },
    }
    doc = _document(cfg, result, threads, started)
    header = ["feature", "theta", "lambda_u", "tau_hat", "method", "clamped"]
    rows = [[cfg.feature, est.theta, est.lambda_u, est.tau_hat, est.method, est.clamped]]
    _emit(_format_table(cfg.format, doc, header, rows), cfg.output)


COMMANDS = {"rank": cmd_rank, "benchmark": cmd_benchmark, "fit-copula": cmd_fit_copula}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tailsel", description="A2-copula tail-dependence feature selection")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, help_text in [
        ("rank", "rank or select features with one method"),
        ("benchmark", "run the 4 feature sets x 4 classifiers benchmark"),
        ("fit-copula", "fit the A2 copula for one feature-target pair"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input")
        p.add_argument("--target")
        p.add_argument("--k", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--estimator")
        p.add_argument("--select-on", dest="select_on")
        p.add_argument("--threads", type=int)
        p.add_argument("--output")
        p.add_argument("--format")
        p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "rank":
            p.add_argument("--method")
        if name == "benchmark":
            p.add_argument("--method", help="accepted for symmetry; the benchmark always runs all methods")
            p.add_argument("--repeats", type=int)
        if name == "fit-copula":
            p.add_argument("--feature")
    return parser


def resolve_config(args: argparse.Namespace) -> tuple[RunConfig, int]:
    values: dict = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read --config {args.config}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known - {"threads"}
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    threads_arg = values.pop("threads", None)
    for name in known:
        val = getattr(args, name, None)
        if val is not None:
            values[name] = val
    if args.threads is not None:
        threads_arg = args.threads
    values["command"] = args.command
    if args.command == "benchmark":
        values["method"] = "all"
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    cfg.validate()
    return cfg, _threads(threads_arg)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: rank, benchmark or fit-copula")
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        cfg, threads = resolve_config(args)
    except UsageError as exc:
        print(f"tailsel: usage error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[cfg.command](cfg, threads)
    except StageError as exc:
        print(f"tailsel: error in stage '{exc.stage}': {exc}", file=sys.stderr)
        return 1
    except (TailselError, OSError) as exc:
        print(f"tailsel: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()

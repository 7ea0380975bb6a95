"""Command-line harness: ``run``, ``verify``, ``sweep`` and ``report``.

Artifacts are CSV with fixed column order:

* trace files ``trace_seed<seed>.csv``: ``k,A,alpha,f,residual,delta,support,wall_ns``
  (one row per iterate, row 0 is the starting point; ``wall_ns`` is the
  only nondeterministic column);
* ``summary.csv``: ``k,A,mean_residual,bound,bound_ratio,delta`` with the
  residual averaged over seeds and the theoretical bound of the run's regime;
* ``sweep.csv`` (sweep only): one row per swept value;
* report output: long format ``series,k,value``.

Exit codes: 0 ok, 1 verification failure, 2 usage or config error,
3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .rstm import solve, theoretical_bound

TRACE_HEADER = ("k", "A", "alpha", "f", "residual", "delta", "support", "wall_ns")
SUMMARY_HEADER = ("k", "A", "mean_residual", "bound", "bound_ratio", "delta")
SWEEP_HEADER = ("param", "value", "iters", "final_residual", "floor", "floor_term", "final_bound", "k_target")
REPORT_HEADER = ("series", "k", "value")
SWEEP_PARAMS = ("delta", "n", "rho", "tau", "epsilon")
SUITE_NAMES = ("coefficients", "gamma", "oracles", "prox", "smoothness", "convergence", "all")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class RuntimeFailure(RuntimeError):
    pass


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class SummaryRow:
    k: int
    A: float
    mean_residual: float
    bound: float
    bound_ratio: float
    delta: float

    def cells(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in SUMMARY_HEADER]


@dataclass
class SeedResult:
    seed: int
    A: list
    residual: list
    delta: list
    P0: float | None
    rho: float


def run_seed(config: ExperimentConfig, seed: int, out_dir: str) -> SeedResult:
    """Build, run and write one seed; runs inside a worker process."""
    problem = config.problem.build()
    run = config.run_config(problem, seed)
    trace = solve(run)
    path = Path(out_dir) / f"trace_seed{seed}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in zip(trace.k, trace.A, trace.alpha, trace.f, trace.residual, trace.delta, trace.support, trace.wall_ns):
            w.writerow([_fmt(c) for c in row])
    return SeedResult(seed, trace.A, trace.residual, trace.delta, trace.P0, trace.rho)


def summarize(config: ExperimentConfig, results: list[SeedResult]) -> list[SummaryRow]:
    lengths = {len(r.A) for r in results}
    if len(lengths) != 1:
        raise RuntimeFailure("seeds produced traces of different lengths")
    first = results[0]
    residual = np.mean(np.array([r.residual for r in results], dtype=float), axis=0)
    P0 = first.P0
    rows = []
    for k, (A, res, delta) in enumerate(zip(first.A, residual, first.delta)):
        if P0 is None:
            bound = math.nan
        else:
            bound = theoretical_bound(k, A, P0, first.rho, delta, config.regime)
        ratio = res / bound if math.isfinite(res) and bound > 0 else math.nan
        if math.isinf(bound) and math.isfinite(res):
            ratio = 0.0
        rows.append(SummaryRow(k, A, float(res), bound, max(ratio, 0.0) if not math.isnan(ratio) else ratio, delta))
    return rows


def write_summary(path: Path, rows: list[SummaryRow]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for row in rows:
            w.writerow(row.cells())


def execute(config: ExperimentConfig, out_dir: Path, seed_offset: int = 0, workers: int = 1) -> list[SummaryRow]:
    """Run every seed of ``config`` into ``out_dir``; returns the summary rows."""
    problem = config.problem.build()
    seeds = [s + seed_offset for s in config.seeds]
    config.run_config(problem, seeds[0])  # validate before spawning work
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(config.dumps())
    try:
        if workers > 1 and len(seeds) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run_seed, [config] * len(seeds), seeds, [str(out_dir)] * len(seeds)))
        else:
            results = [run_seed(config, s, str(out_dir)) for s in seeds]
    except ConfigError:
        raise
    except Exception as exc:
        raise RuntimeFailure(f"{type(exc).__name__}: {exc}") from exc
    rows = summarize(config, results)
    write_summary(out_dir / "summary.csv", rows)
    return rows


def _out_dir(args, config: ExperimentConfig) -> Path:
    if args.out_dir is not None:
        return Path(args.out_dir)
    return Path(config.output) if config.output else Path("runs") / config.name


def cmd_run(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    rows = execute(config, out, args.seed_offset, args.workers)
    last = rows[-1]
    print(f"{config.name}: {len(config.seeds)} seed(s), k={last.k}, mean residual={last.mean_residual:.3e}, "
          f"bound ratio={last.bound_ratio:.3f} -> {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(args.suite)
    for r in results:
        print(r, flush=True)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} claims passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def parse_values(raw: list[str], param: str) -> list:
    items = [tok for chunk in raw for tok in chunk.replace(",", " ").split()]
    if not items:
        raise ConfigError("empty value list")
    try:
        if param == "n":
            return [int(tok) for tok in items]
        return [float(tok) for tok in items]
    except ValueError as exc:
        raise ConfigError(f"bad sweep value: {exc}") from exc


def swept(config: ExperimentConfig, param: str, value) -> ExperimentConfig:
    if param == "delta":
        return config.replace(delta=value)
    if param == "n":
        return config.replace(problem=config.problem.with_size(value))
    if param == "rho":
        return config.replace(rho=value)
    if param == "tau":
        return config.replace(oracle=replace(config.oracle, tau=value))
    return config.replace(epsilon=value, iters=None)


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    values = parse_values(args.values, args.param)
    root = _out_dir(args, config)
    configs = [swept(config, args.param, v) for v in values]
    table = []
    for value, cfg in zip(values, configs):
        rows = execute(cfg, root / f"{args.param}={_fmt(value)}", args.seed_offset, args.workers)
        last = rows[-1]
        K = last.k
        tail = [r.mean_residual for r in rows if r.k >= 0.9 * K] or [last.mean_residual]
        rho = cfg.rho if cfg.rho is not None else _rho_of(cfg)
        floor_term = 4.0 * last.A * rho * rho * last.delta * last.delta
        k_target = ""
        if args.target is not None:
            hits = [r.k for r in rows if r.mean_residual <= args.target]
            k_target = str(hits[0]) if hits else ""
        table.append([args.param, _fmt(value), str(K), _fmt(last.mean_residual), _fmt(float(np.mean(tail))),
                      _fmt(floor_term), _fmt(last.bound), k_target])
        print(f"{args.param}={_fmt(value)}: k={K} final={last.mean_residual:.3e} floor={np.mean(tail):.3e} "
              f"4A rho^2 delta^2={floor_term:.3e}", flush=True)
    with (root / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        w.writerows(table)
    return EXIT_OK


def _rho_of(cfg: ExperimentConfig) -> float:
    problem = cfg.problem.build()
    return cfg.run_config(problem, cfg.seeds[0]).rho


def read_summary(path: Path) -> list[dict]:
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(header or ()) != SUMMARY_HEADER:
                raise ConfigError(f"{path}: not a summary file (header {header})")
            rows = []
            for line, cells in enumerate(reader, start=2):
                if len(cells) != len(SUMMARY_HEADER):
                    raise ConfigError(f"{path}:{line}: expected {len(SUMMARY_HEADER)} columns")
                row = dict(zip(SUMMARY_HEADER, cells))
                row["k"] = int(row["k"])
                for key in SUMMARY_HEADER[1:]:
                    row[key] = float(row[key])
                rows.append(row)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: malformed value ({exc})") from exc
    return rows


def series_labels(paths: list[Path]) -> list[str]:
    labels = [p.parent.name if p.stem == "summary" and p.parent.name else p.stem for p in paths]
    if len(set(labels)) < len(labels):
        labels = [str(p) for p in paths]
    return labels


def cmd_report(args) -> int:
    paths = [Path(p) for p in args.files]
    if not paths:
        raise ConfigError("no summary files given")
    data = [read_summary(p) for p in paths]
    out = Path(args.output) if args.output else Path(args.out_dir or ".") / "report.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for label, rows in zip(series_labels(paths), data):
            for metric in ("mean_residual", "bound", "bound_ratio"):
                for row in rows:
                    w.writerow([f"{label}:{metric}", str(row["k"]), _fmt(row[metric])])
    print(f"wrote {out}")
    return EXIT_OK


def _add_globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed-offset", type=int, default=default(0), help="added to every configured seed")
    parser.add_argument("--workers", type=int, default=default(1), help="worker processes for seeds")
    parser.add_argument("--out-dir", default=default(None), help="output directory (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simtri", description="Randomized similar triangles method experiments.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    _add_globals(p, suppress=True)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=SUITE_NAMES)
    _add_globals(p, suppress=True)

    p = sub.add_parser("sweep", help="run a config for several values of one parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", nargs="*", default=[], help="comma or space separated values")
    p.add_argument("--target", type=float, default=None, help="report the first k with mean residual below this")
    _add_globals(p, suppress=True)

    p = sub.add_parser("report", help="merge summaries into long-format plot data")
    p.add_argument("files", nargs="*")
    p.add_argument("-o", "--output", default=None, help="output CSV (default <out-dir>/report.csv)")
    _add_globals(p, suppress=True)
    return parser


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeFailure as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

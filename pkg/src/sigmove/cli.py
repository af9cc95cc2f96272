"""Command-line entry point: ``sigmove <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .features import DEFAULT_TRAIN_RATIO, build_dataset, compute_log_returns, write_dataset_csv
from .forest import ForestConfig, save_forest
from .harness import experiment, grid, report, synthetic
from .indicators import wilder_rsi, write_rsi_csv
from .market_data import DataError, parse_price_csv, validate_series, write_price_csv
from .neuralnet import TrainConfig, save_network

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("sigmove")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out(path):
    """Open ``path`` for writing, or stdout for None / '-'."""
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", encoding="utf-8")


# -- commands --------------------------------------------------------------------


def cmd_validate(args) -> int:
    series = parse_price_csv(args.csv)
    rep = validate_series(series)
    print(f"{series.ticker}: {rep.row_count} rows, {series.dates[0]} .. {series.dates[-1]}")
    for err in rep.errors:
        print(f"  index {err.row}: {err.kind}: {err.message}")
    print("ok" if rep.ok else f"{len(rep.errors)} problem(s)")
    return EXIT_OK if rep.ok else EXIT_DATA


def cmd_returns(args) -> int:
    r = compute_log_returns(parse_price_csv(args.csv))
    fh = _out(args.out)
    try:
        fh.write("date,log_return\n")
        for day, value in zip(r.dates, r.returns):
            fh.write(f"{day.isoformat()},{float(value)!r}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_rsi(args) -> int:
    rsi = wilder_rsi(parse_price_csv(args.csv), args.lookback)
    if args.out in (None, "-"):
        sys.stdout.write("date,rsi\n")
        for day, v in zip(rsi.dates, rsi.values):
            sys.stdout.write(f"{day.isoformat()},{'' if math.isnan(v) else repr(float(v))}\n")
    else:
        write_rsi_csv(rsi, args.out)
    return EXIT_OK


def cmd_label(args) -> int:
    series = parse_price_csv(args.csv)
    if not args.fraction > 0 or args.window < 1:
        raise UsageError("--fraction and --window must be positive")
    ds = build_dataset(compute_log_returns(series), args.window, args.fraction, args.direction,
                       args.train_ratio, args.standardize)
    n_pos = int(ds.labels.sum())
    _, y_test = ds.test
    print(f"{ds.ticker}: {ds.n_samples} samples (train {ds.split_index}, test {ds.n_samples - ds.split_index}); "
          f"sigma_train={ds.sigma_train:.6g} threshold={ds.threshold:.6g}; "
          f"{n_pos} significant ({100.0 * n_pos / ds.n_samples:.2f}%), {int(y_test.sum())} in test",
          file=sys.stderr)
    if args.out:
        write_dataset_csv(ds, args.out)
    return EXIT_OK


def _spec_from_args(args, ticker: str) -> experiment.ExperimentSpec:
    seed = args.seed if args.seed is not None else experiment.cell_seed(
        0, ticker, args.model, args.window, args.fraction, args.direction)
    try:
        tc = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr)
        fc = ForestConfig(n_trees=args.n_trees, max_depth=args.max_depth)
        return experiment.ExperimentSpec(
            ticker=ticker, model=args.model, window=args.window, fraction=args.fraction,
            direction=args.direction, seed=seed, train_ratio=args.train_ratio,
            train_config=tc, forest_config=fc, standardize=args.standardize, repeats=args.repeats)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    series = parse_price_csv(args.csv)
    spec = _spec_from_args(args, series.ticker)
    saved = []

    def keep(repeat, model):
        if args.save and repeat == 0 and model is not None:
            if spec.model == "rf":
                save_forest(model, args.save)
            else:
                save_network(model[0], model[1], args.save)
            saved.append(args.save)

    if args.save and spec.model == "rsi":
        raise UsageError("the rsi benchmark has no fitted model to save")
    row = experiment.run_experiment(spec, series, on_model=keep)
    if row.status.startswith(experiment.STATUS_ERROR):
        raise RuntimeError(row.status)
    fields = dict(zip(grid.COLUMNS, grid.row_to_record(row)))
    width = max(map(len, fields))
    for k, v in fields.items():
        print(f"{k:<{width}}  {v}")
    if spec.repeats > 1 and spec.model != "rsi":
        print(f"(auc is the mean over {spec.repeats} independently seeded fits)")
    for path in saved:
        print(f"model saved to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_grid(args) -> int:
    try:
        config = grid.load_grid_config(args.config)
    except (ValueError, TypeError, OSError) as exc:  # includes JSON syntax errors
        raise UsageError(f"{args.config}: {exc}") from None
    if args.parallelism is not None:
        if args.parallelism < 1:
            raise UsageError("--parallelism must be at least 1")
        config = dataclasses.replace(config, parallelism=args.parallelism)
    series = grid.load_series(config)

    def progress(row, done, total):
        auc = f"{row.auc:.4f}" if row.auc_defined else "undefined"
        log.info("[%d/%d] %s %s p=%d c=%s %s auc=%s", done, total, row.ticker, row.model, row.window,
                 experiment.format_fraction(row.fraction), row.direction, auc)

    rows = grid.run_grid(config, series, resume=not args.no_resume, progress=progress)
    out = Path(args.report_dir) if args.report_dir else Path(config.output_dir) / "report"
    paths = report.emit_report(rows, out, fractions=config.fractions, layout=config.chart_layout,
                               record_timing=config.record_timing)
    n_err = sum(r.status.startswith(experiment.STATUS_ERROR) for r in rows)
    n_undef = sum(r.status.startswith(experiment.STATUS_UNDEFINED) for r in rows)
    print(f"{len(rows)} cells: {len(rows) - n_err - n_undef} ok, {n_undef} undefined AUC, {n_err} failed")
    print(f"results: {Path(config.output_dir) / grid.RESULTS_NAME}")
    for p in paths:
        print(f"report: {p}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        rows = grid.read_results(args.results)
    except FileNotFoundError:
        raise DataError(f"missing file: {args.results}") from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if not rows:
        raise DataError(f"{args.results}: no result rows")
    for p in report.emit_report(rows, args.out, fractions=args.fractions, layout=args.layout):
        print(p)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        series = synthetic.generate_synthetic(args.kind, args.n, args.seed, args.ticker)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_price_csv(series, args.out)
    print(f"wrote {len(series)} closes to {args.out}", file=sys.stderr)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sigmove", description="Significant daily move forecasting toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a date,adj_close price file")
    p.add_argument("csv")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("returns", help="daily log returns as CSV")
    p.add_argument("csv")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_returns)

    p = sub.add_parser("rsi", help="Wilder RSI as CSV")
    p.add_argument("csv")
    p.add_argument("--lookback", type=int, default=14)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_rsi)

    def cell_args(p, window_default=7, fraction_default=1.2):
        p.add_argument("--window", type=int, default=window_default)
        p.add_argument("--fraction", type=float, default=fraction_default)
        p.add_argument("--direction", choices=("pos", "neg"), default="pos")
        p.add_argument("--train-ratio", type=float, default=DEFAULT_TRAIN_RATIO)
        p.add_argument("--standardize", action="store_true",
                       help="z-score features with the training mean and sigma")

    p = sub.add_parser("label", help="build the labelled window dataset")
    p.add_argument("csv")
    cell_args(p)
    p.add_argument("--out", help="write feature_1..p,label,date CSV here")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="fit one model and report its test AUC")
    p.add_argument("csv")
    p.add_argument("--model", required=True, choices=experiment.MODELS)
    cell_args(p)
    p.add_argument("--seed", type=int, help="cell seed (default: derived from the cell)")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--repeats", type=int, default=1, help="average AUC over k seeded fits")
    p.add_argument("--save", help="write the fitted model (first repeat) to this file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="run an experiment grid from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--parallelism", type=int, help="override the config's worker count")
    p.add_argument("--no-resume", action="store_true", help="discard existing results first")
    p.add_argument("--report-dir", help="default: <output_dir>/report")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="charts and summary from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--layout", choices=grid.CHART_LAYOUTS, default="lines")
    p.add_argument("--fractions", type=float, nargs="+", help="x-axis grid (default: from results)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a synthetic price series")
    p.add_argument("--kind", required=True, choices=synthetic.KINDS)
    p.add_argument("--n", type=int, default=2500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ticker")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sigmove: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"sigmove: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BrokenPipeError:  # output piped into e.g. head
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except Exception as exc:  # anything else is a runtime failure
        print(f"sigmove: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

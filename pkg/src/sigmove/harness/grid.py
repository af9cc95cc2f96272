"""Experiment grid: configuration, parallel execution and the results file.

The results file is an append-only CSV whose first line is
``# schema_version=1``. Rows land in completion order, so a run can be
interrupted and resumed; :func:`sorted_rows` gives the canonical order.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..features import DEFAULT_TRAIN_RATIO, DEFAULT_WINDOWS, Direction
from ..forest import ForestConfig
from ..market_data import PriceSeries, parse_price_csv
from ..neuralnet import TrainConfig
from .experiment import (
    MODELS,
    ExperimentSpec,
    ResultRow,
    cell_seed,
    failed_row,
    format_fraction,
    run_experiment,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# schema_version={SCHEMA_VERSION}"
COLUMNS = ("ticker", "model", "window", "fraction", "direction", "seed", "auc", "auc_defined",
           "n_train", "n_test", "n_pos_test", "train_seconds", "loss_final", "status")
RESULTS_NAME = "results.csv"
DEFAULT_FRACTIONS = (1.0, 1.1, 1.2, 1.3, 1.4, 1.5)
CHART_LAYOUTS = ("lines", "facets")


@dataclass(frozen=True)
class GridConfig:
    data: dict[str, str]  # ticker -> price CSV path
    windows: tuple[int, ...] = DEFAULT_WINDOWS
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    directions: tuple[str, ...] = ("pos", "neg")
    models: tuple[str, ...] = MODELS
    master_seed: int = 0
    output_dir: str = "results"
    parallelism: int = 1
    train_ratio: float = DEFAULT_TRAIN_RATIO
    train: TrainConfig = field(default_factory=TrainConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    repeats: int = 1
    standardize: bool = False
    record_timing: bool = True  # False leaves train_seconds blank so reruns are byte-identical
    chart_layout: str = "lines"

    def __post_init__(self):
        for name in ("data", "windows", "fractions", "directions", "models"):
            if not getattr(self, name):
                raise ValueError(f"grid axis {name!r} is empty")
        bad = [m for m in self.models if m not in MODELS]
        if bad:
            raise ValueError(f"unknown models {bad}; use {MODELS}")
        for d in self.directions:
            Direction.parse(d)
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        if self.chart_layout not in CHART_LAYOUTS:
            raise ValueError(f"chart_layout must be one of {CHART_LAYOUTS}")

    def cells(self) -> list[ExperimentSpec]:
        specs = []
        for ticker, model, p, c, d in itertools.product(
                sorted(self.data), self.models, self.windows, self.fractions, self.directions):
            specs.append(ExperimentSpec(
                ticker=ticker, model=model, window=p, fraction=c, direction=d,
                seed=cell_seed(self.master_seed, ticker, model, p, c, d),
                train_ratio=self.train_ratio, train_config=self.train, forest_config=self.forest,
                standardize=self.standardize, repeats=self.repeats))
        return specs


_NESTED = {"train": TrainConfig, "forest": ForestConfig}


def _nested(cls, raw: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown keys in {where}: {unknown}")
    return cls(**raw)


def grid_config_from_dict(raw: dict, base_dir: Path | None = None) -> GridConfig:
    known = {f.name for f in fields(GridConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown grid config keys: {unknown}")
    if "data" not in raw:
        raise ValueError("grid config needs a 'data' map of ticker -> price file")
    kw = dict(raw)
    base = base_dir or Path(".")
    kw["data"] = {t: str(base / p) for t, p in raw["data"].items()}
    if "output_dir" in kw:
        kw["output_dir"] = str(base / kw["output_dir"])
    for name in ("windows", "fractions", "directions", "models"):
        if name in kw:
            kw[name] = tuple(kw[name])
    for name, cls in _NESTED.items():
        if name in kw:
            kw[name] = _nested(cls, kw[name], name)
    return GridConfig(**kw)


def load_grid_config(path) -> GridConfig:
    """Read a JSON grid config. Relative paths resolve against the file's directory."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: grid config must be a JSON object")
    return grid_config_from_dict(raw, path.parent)


# -- results file --------------------------------------------------------------


def _fmt_float(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def row_to_record(row: ResultRow, record_timing: bool = True) -> list[str]:
    return [
        row.ticker, row.model, str(row.window), format_fraction(row.fraction), row.direction,
        str(row.seed), _fmt_float(row.auc), "true" if row.auc_defined else "false",
        str(row.n_train), str(row.n_test), str(row.n_pos_test),
        _fmt_float(row.train_seconds) if record_timing else "", _fmt_float(row.loss_final), row.status,
    ]


def record_to_row(rec: dict) -> ResultRow:
    def opt(v):
        return float(v) if v != "" else None
    return ResultRow(
        ticker=rec["ticker"], model=rec["model"], window=int(rec["window"]),
        fraction=float(rec["fraction"]), direction=rec["direction"], seed=int(rec["seed"]),
        auc=float(rec["auc"]) if rec["auc"] != "" else math.nan,
        auc_defined=rec["auc_defined"] == "true",
        n_train=int(rec["n_train"]), n_test=int(rec["n_test"]), n_pos_test=int(rec["n_pos_test"]),
        train_seconds=opt(rec["train_seconds"]), loss_final=opt(rec["loss_final"]), status=rec["status"])


def read_results(path) -> list[ResultRow]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\r\n")
        if first != SCHEMA_LINE:
            raise ValueError(f"{path}: expected '{SCHEMA_LINE}' on the first line, got {first!r}")
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [record_to_row(rec) for rec in reader]


def sorted_rows(rows) -> list[ResultRow]:
    order = {m: i for i, m in enumerate(MODELS)}
    return sorted(rows, key=lambda r: (r.ticker, order.get(r.model, len(order)), r.model,
                                       r.window, r.fraction, r.direction))


def write_results(rows, path, record_timing: bool = True) -> None:
    """Write a complete results file in canonical order."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(SCHEMA_LINE + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in sorted_rows(rows):
            w.writerow(row_to_record(row, record_timing))


class ResultSink:
    """Append-only writer; every row is flushed as soon as it arrives."""

    def __init__(self, path, record_timing: bool = True):
        self.path = Path(path)
        self.record_timing = record_timing
        fresh = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = self.path.open("a", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        if fresh:
            self._fh.write(SCHEMA_LINE + "\n")
            self._writer.writerow(COLUMNS)
            self._fh.flush()

    def write(self, row: ResultRow) -> None:
        self._writer.writerow(row_to_record(row, self.record_timing))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# -- execution -------------------------------------------------------------------

# rough relative cost per cell, used only to start the slowest cells first
_COST = {"lstm": 12.0, "cnn": 2.0, "rf": 1.0, "mlp": 0.2, "rsi": 0.01}


def _cost(spec: ExperimentSpec) -> float:
    return _COST[spec.model] * spec.window * spec.repeats


def _run_cell(spec: ExperimentSpec, series: PriceSeries) -> ResultRow:
    try:
        return run_experiment(spec, series)
    except Exception as exc:  # recorded in the row; the grid carries on
        log.warning("cell %s failed: %s", spec, exc)
        return failed_row(spec, exc)


def load_series(config: GridConfig) -> dict[str, PriceSeries]:
    return {t: parse_price_csv(path, ticker=t) for t, path in sorted(config.data.items())}


def run_grid(config: GridConfig, series: dict[str, PriceSeries] | None = None,
             resume: bool = True, progress=None) -> list[ResultRow]:
    """Run every cell not already present in ``output_dir/results.csv``.

    Each cell's seed depends only on the master seed and its own grid
    coordinates, so results do not depend on scheduling or parallelism.
    Returns all rows (previous and new) in canonical order.
    """
    series = series if series is not None else load_series(config)
    missing = set(config.data) - set(series)
    if missing:
        raise ValueError(f"no price series for tickers {sorted(missing)}")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / RESULTS_NAME
    done: dict[tuple, ResultRow] = {}
    if resume and path.exists() and path.stat().st_size > 0:
        for row in read_results(path):
            done[row.key] = row
    elif path.exists():
        path.unlink()

    cells = config.cells()
    todo = [s for s in cells
            if (s.ticker, s.model, s.window, format_fraction(s.fraction), s.direction.value) not in done]
    todo.sort(key=_cost, reverse=True)
    log.info("grid: %d cells, %d already done, %d to run", len(cells), len(cells) - len(todo), len(todo))

    rows = list(done.values())
    with ResultSink(path, config.record_timing) as sink:
        def accept(row):
            sink.write(row)
            rows.append(row)
            if progress is not None:
                progress(row, len(rows), len(cells))

        if config.parallelism == 1 or len(todo) <= 1:
            for spec in todo:
                accept(_run_cell(spec, series[spec.ticker]))
        else:
            with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
                futures = [pool.submit(_run_cell, spec, series[spec.ticker]) for spec in todo]
                for fut in as_completed(futures):
                    accept(fut.result())
    return sorted_rows(rows)


def lpt_makespan(durations, workers: int) -> float:
    """Makespan of longest-processing-time-first list scheduling on ``workers``."""
    loads = np.zeros(workers)
    for d in sorted(durations, reverse=True):
        loads[np.argmin(loads)] += d
    return float(loads.max())


def default_parallelism() -> int:
    return os.cpu_count() or 1

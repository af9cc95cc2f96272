"""Per-ticker report: sorted results CSV, AUC-vs-fraction SVG charts, best-model summary."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiment import MODELS, ResultRow, format_fraction  # noqa: E402
from .grid import CHART_LAYOUTS, sorted_rows, write_results  # noqa: E402

_COLORS = {"mlp": "#1f77b4", "cnn": "#ff7f0e", "lstm": "#2ca02c", "rf": "#9467bd", "rsi": "#7f7f7f"}
_MARKERS = ("o", "s", "^", "D", "v", "P", "X", "*")
_STYLES = ("-", "--", "-.", ":")
_TITLES = {"pos": "significant positive returns", "neg": "significant negative returns"}
RSI_NOTE = "rsi scores are RSI mapped onto [0, 1]; a choice of this toolkit, not a trained model"


def _model_order(models) -> list[str]:
    return sorted(models, key=lambda m: (MODELS.index(m) if m in MODELS else len(MODELS), m))


def _label(model: str) -> str:
    return "rsi*" if model == "rsi" else model


def _series(rows: list[ResultRow], fractions: list[float]) -> list[float]:
    by_c = {format_fraction(r.fraction): r for r in rows}
    out = []
    for c in fractions:
        r = by_c.get(format_fraction(c))
        out.append(r.auc if r is not None and r.auc_defined else math.nan)  # NaN breaks the line
    return out


def _style_axes(ax, fractions):
    lo, hi = min(fractions), max(fractions)
    pad = 0.05 if lo == hi else 0.0
    ax.set_xlim(lo - pad, hi + pad)
    ax.set_xticks(fractions)
    ax.set_xticklabels([format_fraction(c) for c in fractions])
    ax.set_ylim(0.0, 1.0)
    ax.axhline(0.5, color="#bbbbbb", linewidth=0.8, zorder=0)
    ax.grid(True, linewidth=0.3)


def plot_direction(rows: list[ResultRow], fractions: list[float], path, title: str,
                   layout: str = "lines") -> None:
    """AUC (y) against threshold fraction (x); undefined cells leave gaps."""
    if layout not in CHART_LAYOUTS:
        raise ValueError(f"layout must be one of {CHART_LAYOUTS}")
    groups: dict[tuple[str, int], list[ResultRow]] = defaultdict(list)
    for r in rows:
        groups[(r.model, r.window)].append(r)
    models = _model_order({m for m, _ in groups})
    windows = sorted({w for _, w in groups})
    wstyle = {w: i for i, w in enumerate(windows)}

    if layout == "lines":
        fig, ax = plt.subplots(figsize=(8, 5))
        axes = {m: ax for m in models}
    else:
        fig, grid = plt.subplots(1, len(models), figsize=(3.2 * len(models), 3.8), sharey=True,
                                 squeeze=False)
        axes = dict(zip(models, grid[0]))
    for m in models:
        for w in windows:
            if (m, w) not in groups:
                continue
            i = wstyle[w]
            label = f"{_label(m)} p={w}" if layout == "lines" else f"p={w}"
            axes[m].plot(fractions, _series(groups[(m, w)], fractions), label=label,
                         color=_COLORS.get(m) if layout == "lines" else None,
                         linestyle=_STYLES[i % len(_STYLES)], marker=_MARKERS[i % len(_MARKERS)],
                         markersize=4, linewidth=1.2)
    for m, ax in axes.items():
        _style_axes(ax, fractions)
        if layout == "facets":
            ax.set_xlabel("threshold fraction c")
        else:
            ax.set_xlabel("threshold fraction c (multiples of training sigma)")
        if layout == "facets":
            ax.set_title(_label(m))
            ax.legend(fontsize=7)
    first = next(iter(axes.values()))
    first.set_ylabel("test AUC")
    if layout == "lines":
        first.legend(fontsize=7, ncol=2, loc="lower left")
    fig.suptitle(title)
    fig.text(0.01, 0.005, "* " + RSI_NOTE + "; gaps mark single-class test sets", fontsize=7)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    with plt.rc_context({"svg.hashsalt": "sigmove"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def summary_table(rows: list[ResultRow]) -> str:
    """Markdown table of the best model per (direction, window, fraction)."""
    cells: dict[tuple, list[ResultRow]] = defaultdict(list)
    for r in rows:
        cells[(r.direction, r.window, format_fraction(r.fraction))].append(r)
    lines = ["| direction | window | fraction | best model | AUC | runner-up | AUC | n_pos_test |",
             "|---|---|---|---|---|---|---|---|"]
    n_undefined = 0
    averaged = False
    for key in sorted(cells, key=lambda k: (k[0] != "pos", k[1], float(k[2]))):
        group = [r for r in cells[key] if r.auc_defined]
        averaged |= any(r.status.startswith("ok:") for r in group)
        d, w, c = key
        if not group:
            n_undefined += 1
            lines.append(f"| {d} | {w} | {c} | undefined | | | | {cells[key][0].n_pos_test} |")
            continue
        group.sort(key=lambda r: (-r.auc, MODELS.index(r.model) if r.model in MODELS else 99))
        best = group[0]
        second = group[1] if len(group) > 1 else None
        lines.append(f"| {d} | {w} | {c} | {_label(best.model)} | {best.auc:.4f} | "
                     f"{_label(second.model) if second else ''} | "
                     f"{f'{second.auc:.4f}' if second else ''} | {best.n_pos_test} |")
    notes = ["", f"\\* {RSI_NOTE}."]
    if averaged:
        notes.append("AUC values are means over repeated fits where the status column says so.")
    if n_undefined:
        notes.append(f"{n_undefined} cell(s) have single-class test labels, so no AUC is defined.")
    return "\n".join(lines + notes) + "\n"


def emit_report(results: list[ResultRow], outdir, fractions=None, layout: str = "lines",
                record_timing: bool = True) -> list[Path]:
    """Write ``<ticker>_results.csv``, ``<ticker>_<direction>.svg`` for each
    direction present, and ``<ticker>_summary.md``. Returns written paths.

    ``fractions`` fixes the chart x-axis; by default it is the set of
    fractions present in the results.
    """
    if not results:
        raise ValueError("no results to report")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    by_ticker: dict[str, list[ResultRow]] = defaultdict(list)
    for r in results:
        by_ticker[r.ticker].append(r)
    for ticker, rows in sorted(by_ticker.items()):
        rows = sorted_rows(rows)
        grid_c = sorted(set(fractions)) if fractions is not None else sorted({r.fraction for r in rows})
        csv_path = out / f"{ticker}_results.csv"
        write_results(rows, csv_path, record_timing)
        written.append(csv_path)
        for d in ("pos", "neg"):
            drows = [r for r in rows if r.direction == d]
            if not drows:
                continue
            svg = out / f"{ticker}_{d}.svg"
            plot_direction(drows, grid_c, svg, f"{ticker}: forecast of {_TITLES[d]}", layout)
            written.append(svg)
        md = out / f"{ticker}_summary.md"
        md.write_text(f"# {ticker}: best model per cell\n\n" + summary_table(rows), encoding="utf-8")
        written.append(md)
    return written

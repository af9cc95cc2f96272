"""Synthetic price series used as verification fixtures.

``gaussian``: i.i.d. N(0, 0.01) log returns.

``planted``: base returns are N(0, 0.01) redrawn until ``|r| < 1.5 * 0.01``,
so no ordinary day is large. Whenever an ordinary up day is followed by a
down day, the next return is a fixed +4 * 0.01 jump. Jumps do not count as
the up day, so they never chain. The trigger fires on about a fifth of the
days; jumps inflate the sample standard deviation to about 1.7 * 0.01, which
keeps every ordinary return below the significance threshold for fractions
of 0.9 and above. The up and down days nearly cancel inside a Wilder
average, so RSI sees only a faint trace of the rule.
"""

from __future__ import annotations

import datetime as dt

import numpy as np

from ..market_data import PriceSeries

SIGMA = 0.01
BASE_CLIP = 1.5  # planted base returns satisfy |r| < BASE_CLIP * SIGMA
JUMP = 4.0  # planted jump size in units of SIGMA
START_PRICE = 100.0
START_DATE = dt.date(2009, 1, 2)
KINDS = ("gaussian", "planted")


def trading_days(n: int, start: dt.date = START_DATE) -> tuple[dt.date, ...]:
    """``n`` consecutive weekdays from ``start`` (holidays are not modelled)."""
    days = np.busday_offset(np.datetime64(start), np.arange(n), roll="forward")
    return tuple(d.item() for d in days)


def _truncated_normal(rng: np.random.Generator, size: int, bound: float) -> np.ndarray:
    z = rng.standard_normal(size)
    bad = np.abs(z) >= bound
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) >= bound
    return z


def planted_trigger(returns: np.ndarray) -> np.ndarray:
    """Boolean mask: ``True`` at ``t`` when ``0 < r[t-2] < BASE_CLIP * SIGMA``
    and ``r[t-1] < 0``."""
    r = np.asarray(returns)
    hit = np.zeros(len(r), dtype=bool)
    hit[2:] = (r[:-2] > 0) & (r[:-2] < BASE_CLIP * SIGMA) & (r[1:-1] < 0)
    return hit


def synthetic_returns(kind: str, n_returns: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        return SIGMA * rng.standard_normal(n_returns)
    if kind == "planted":
        r = SIGMA * _truncated_normal(rng, n_returns, BASE_CLIP)
        cap = BASE_CLIP * SIGMA
        for t in range(2, n_returns):
            if 0 < r[t - 2] < cap and r[t - 1] < 0:
                r[t] = JUMP * SIGMA
        return r
    raise ValueError(f"unknown synthetic kind {kind!r}; use one of {KINDS}")


def generate_synthetic(kind: str, n: int, seed: int, ticker: str | None = None) -> PriceSeries:
    """Price series of ``n`` closes built from synthetic log returns."""
    if n < 200:
        raise ValueError(f"synthetic series need n >= 200, got {n}")
    r = synthetic_returns(kind, n - 1, seed)
    closes = START_PRICE * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    return PriceSeries(ticker or f"SYN-{kind.upper()}", trading_days(n), closes)

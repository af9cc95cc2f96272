"""Wilder's RSI and its conversion into classifier-comparable outputs."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import Direction
from .market_data import DataError, PriceSeries

OVERBOUGHT = 70.0
OVERSOLD = 30.0


@dataclass(frozen=True)
class RsiSeries:
    """RSI aligned to the price index; entries before ``lookback`` are NaN."""

    ticker: str
    lookback: int
    dates: tuple[dt.date, ...]
    values: np.ndarray

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)


def _rsi_from_averages(avg_gain: float, avg_loss: float) -> float:
    if avg_loss == 0.0:
        return 50.0 if avg_gain == 0.0 else 100.0
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)


def wilder_rsi(series: PriceSeries, lookback: int = 14) -> RsiSeries:
    """Wilder RSI seeded with simple means of the first ``lookback`` moves.

    Smoothing afterwards is ``avg = (avg * (n - 1) + current) / n``.
    """
    n = int(lookback)
    if n < 1:
        raise ValueError(f"lookback must be positive, got {lookback}")
    closes = series.closes
    if len(closes) < n + 1:
        raise DataError(f"need at least {n + 1} prices for RSI({n}), got {len(closes)}")
    delta = np.diff(closes)
    gains = np.maximum(delta, 0.0)
    losses = np.maximum(-delta, 0.0)

    values = np.full(len(closes), np.nan)
    avg_gain = float(np.mean(gains[:n]))
    avg_loss = float(np.mean(losses[:n]))
    values[n] = _rsi_from_averages(avg_gain, avg_loss)
    # price index t uses delta[t-1]
    for t in range(n + 1, len(closes)):
        avg_gain = (avg_gain * (n - 1) + gains[t - 1]) / n
        avg_loss = (avg_loss * (n - 1) + losses[t - 1]) / n
        values[t] = _rsi_from_averages(avg_gain, avg_loss)
    values.setflags(write=False)
    return RsiSeries(series.ticker, n, tuple(series.dates), values)


def rsi_signal(rsi: RsiSeries | np.ndarray, direction: Direction | str) -> np.ndarray:
    """30/70 rule: a negative move is flagged at RSI >= 70, a positive one at RSI <= 30."""
    values = rsi.values if isinstance(rsi, RsiSeries) else np.asarray(rsi, dtype=float)
    defined = ~np.isnan(values)
    # expressed through the score so signal and score never disagree by an ulp
    hit = rsi_score(values, direction) >= OVERBOUGHT / 100.0
    return (hit & defined).astype(np.int8)


def rsi_score(rsi: RsiSeries | np.ndarray, direction: Direction | str) -> np.ndarray:
    """Map RSI onto [0, 1] so that larger means "more likely significant".

    Negative task scores RSI/100, positive task (100 - RSI)/100. Warmup
    entries score 0.5. With this mapping the signal fires exactly when the
    score reaches 0.70.
    """
    values = rsi.values if isinstance(rsi, RsiSeries) else np.asarray(rsi, dtype=float)
    if Direction.parse(direction) is Direction.NEGATIVE:
        score = values / 100.0
    else:
        score = (100.0 - values) / 100.0
    return np.where(np.isnan(values), 0.5, score)


def write_rsi_csv(rsi: RsiSeries, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("date,rsi\n")
        for day, value in zip(rsi.dates, rsi.values):
            fh.write(f"{day.isoformat()},{'' if np.isnan(value) else repr(float(value))}\n")

"""Log returns, significance labels, sliding windows and the temporal split."""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .market_data import DataError, PriceSeries

DEFAULT_WINDOWS = (7, 14, 30, 60)
DEFAULT_TRAIN_RATIO = 0.75


class Direction(str, enum.Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, Direction):
            return value
        aliases = {"pos": cls.POSITIVE, "positive": cls.POSITIVE, "+": cls.POSITIVE,
                   "neg": cls.NEGATIVE, "negative": cls.NEGATIVE, "-": cls.NEGATIVE}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown direction {value!r}; use pos or neg") from None


@dataclass(frozen=True)
class ReturnSeries:
    ticker: str
    dates: tuple[dt.date, ...]
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.returns)


@dataclass(frozen=True)
class SignificanceSpec:
    direction: Direction
    fraction: float
    sigma_train: float

    @property
    def threshold(self) -> float:
        return self.fraction * self.sigma_train


@dataclass(frozen=True)
class LabeledDataset:
    """Sliding-window samples; row ``k`` holds returns ``k..k+p-1`` and the
    label of return ``k+p``. Samples before ``split_index`` are training."""

    ticker: str
    window: int
    direction: Direction
    fraction: float
    sigma_train: float
    features: np.ndarray
    labels: np.ndarray
    split_index: int
    sample_dates: tuple[dt.date, ...]

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    @property
    def threshold(self) -> float:
        return self.fraction * self.sigma_train

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[: self.split_index], self.labels[: self.split_index]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[self.split_index:], self.labels[self.split_index:]


def compute_log_returns(series: PriceSeries) -> ReturnSeries:
    closes = series.closes
    if len(closes) < 2:
        raise DataError("need at least 2 prices to form a return")
    returns = np.log(closes[1:] / closes[:-1])
    returns.setflags(write=False)
    return ReturnSeries(series.ticker, tuple(series.dates[1:]), returns)


def temporal_split_index(n_samples: int, train_ratio: float = DEFAULT_TRAIN_RATIO) -> int:
    """``floor(train_ratio * n_samples)``; both sides must be non-empty."""
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    if n_samples < 4:
        raise ValueError(f"need at least 4 samples to split, got {n_samples}")
    idx = math.floor(train_ratio * n_samples)
    if idx <= 0 or idx >= n_samples:
        raise ValueError(f"degenerate split: {idx} train of {n_samples} samples")
    return idx


def training_sigma(returns: ReturnSeries | np.ndarray, split_index_in_returns: int) -> float:
    """Sample standard deviation (ddof=1) of the returns before the split."""
    r = returns.returns if isinstance(returns, ReturnSeries) else np.asarray(returns)
    train = r[:split_index_in_returns]
    if len(train) < 2:
        raise ValueError("need at least 2 training returns for a standard deviation")
    sigma = float(np.std(train, ddof=1))
    if sigma == 0.0:
        raise DataError("zero variance in training returns")
    return sigma


def label_returns(returns: ReturnSeries | np.ndarray, spec: SignificanceSpec) -> np.ndarray:
    r = returns.returns if isinstance(returns, ReturnSeries) else np.asarray(returns)
    threshold = spec.threshold
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if Direction.parse(spec.direction) is Direction.POSITIVE:
        hit = r > threshold
    else:
        hit = r < -threshold
    return hit.astype(np.int8)


def make_windows(
    returns: ReturnSeries,
    labels: np.ndarray,
    p: int,
    train_ratio: float = DEFAULT_TRAIN_RATIO,
    *,
    direction: Direction = Direction.POSITIVE,
    fraction: float = float("nan"),
    sigma_train: float = float("nan"),
) -> LabeledDataset:
    r = returns.returns
    if p < 1:
        raise ValueError(f"window must be positive, got {p}")
    if len(r) <= p + 4:
        raise DataError(f"series too short for window {p}: {len(r)} returns")
    if len(labels) != len(r):
        raise ValueError("labels must align with returns")
    n = len(r) - p
    features = np.lib.stride_tricks.sliding_window_view(r, p)[:n].copy()
    features.setflags(write=False)
    y = np.asarray(labels, dtype=np.int8)[p:].copy()
    y.setflags(write=False)
    return LabeledDataset(
        ticker=returns.ticker,
        window=p,
        direction=Direction.parse(direction),
        fraction=fraction,
        sigma_train=sigma_train,
        features=features,
        labels=y,
        split_index=temporal_split_index(n, train_ratio),
        sample_dates=tuple(returns.dates[p:]),
    )


def build_dataset(
    returns: ReturnSeries,
    window: int,
    fraction: float,
    direction: Direction | str,
    train_ratio: float = DEFAULT_TRAIN_RATIO,
    standardize: bool = False,
) -> LabeledDataset:
    """Full labeling pipeline for one (window, fraction, direction) cell.

    The split is taken on the sample axis; sigma uses every return whose
    index precedes the first test label, so nothing from the test period
    reaches any training artifact.
    """
    direction = Direction.parse(direction)
    if fraction <= 0:
        raise ValueError(f"fraction must be positive, got {fraction}")
    if len(returns) <= window + 4:
        raise DataError(f"series too short for window {window}: {len(returns)} returns")
    n_samples = len(returns) - window
    split = temporal_split_index(n_samples, train_ratio)
    boundary = window + split
    sigma = training_sigma(returns, boundary)
    spec = SignificanceSpec(direction, fraction, sigma)
    labels = label_returns(returns, spec)
    ds = make_windows(returns, labels, window, train_ratio,
                      direction=direction, fraction=fraction, sigma_train=sigma)
    if standardize:
        train_r = returns.returns[:boundary]
        mu, sd = float(np.mean(train_r)), sigma
        scaled = (ds.features - mu) / sd
        scaled.setflags(write=False)
        ds = LabeledDataset(**{**ds.__dict__, "features": scaled})
    return ds


def write_dataset_csv(ds: LabeledDataset, path) -> None:
    cols = [f"feature_{j + 1}" for j in range(ds.window)] + ["label", "date"]
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row, label, day in zip(ds.features, ds.labels, ds.sample_dates):
            values = ",".join(repr(float(v)) for v in row)
            fh.write(f"{values},{int(label)},{day.isoformat()}\n")

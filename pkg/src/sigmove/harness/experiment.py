"""One grid cell: label a series, fit a model on the training part, score the test part."""

from __future__ import annotations

import dataclasses
import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..features import DEFAULT_TRAIN_RATIO, Direction, LabeledDataset, build_dataset, compute_log_returns
from ..forest import ForestConfig, fit_forest, forest_predict_proba
from ..indicators import rsi_score, wilder_rsi
from ..market_data import PriceSeries
from ..metrics import roc_auc
from ..neuralnet import NetworkSpec, TrainConfig, predict_proba, train

MODELS = ("mlp", "cnn", "lstm", "rf", "rsi")
NN_MODELS = ("mlp", "cnn", "lstm")

STATUS_OK = "ok"
STATUS_UNDEFINED = "auc_undefined"
STATUS_ERROR = "error"


def format_fraction(c: float) -> str:
    return f"{c:.10g}"


def cell_seed(master_seed: int, ticker: str, model: str, window: int, fraction: float,
              direction: Direction | str) -> int:
    """Stable 64-bit seed for one cell, independent of run order."""
    key = "|".join([str(int(master_seed)), ticker, model, str(int(window)),
                    format_fraction(fraction), Direction.parse(direction).value])
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big")


def derived_seed(seed: int, *tags: int) -> int:
    """Child seed for a tagged purpose (a training repeat, the label shuffle)."""
    state = np.random.SeedSequence([seed, *tags]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass(frozen=True)
class ExperimentSpec:
    ticker: str
    model: str
    window: int
    fraction: float
    direction: Direction
    seed: int
    train_ratio: float = DEFAULT_TRAIN_RATIO
    train_config: TrainConfig = field(default_factory=TrainConfig)
    forest_config: ForestConfig = field(default_factory=ForestConfig)
    standardize: bool = False
    repeats: int = 1
    shuffle_labels: bool = False  # sanity control: permute labels before fitting

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction.parse(self.direction))
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; use one of {MODELS}")
        if not self.fraction > 0:
            raise ValueError(f"fraction must be positive, got {self.fraction}")
        if self.window < 2:
            raise ValueError(f"window must be at least 2, got {self.window}")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")

    @property
    def lookback(self) -> int:
        """RSI lookback; the rsi model uses the window value for it."""
        return self.window


@dataclass(frozen=True)
class ResultRow:
    ticker: str
    model: str
    window: int
    fraction: float
    direction: str
    seed: int
    auc: float  # nan when undefined; mean over repeats when repeats > 1
    auc_defined: bool
    n_train: int
    n_test: int
    n_pos_test: int
    train_seconds: float | None
    loss_final: float | None
    status: str

    @property
    def key(self) -> tuple:
        return (self.ticker, self.model, self.window, format_fraction(self.fraction), self.direction)


def prepare_dataset(spec: ExperimentSpec, series: PriceSeries) -> LabeledDataset:
    returns = compute_log_returns(series)
    ds = build_dataset(returns, spec.window, spec.fraction, spec.direction,
                       spec.train_ratio, spec.standardize)
    if spec.shuffle_labels:
        rng = np.random.default_rng(derived_seed(spec.seed, 2))
        labels = rng.permutation(ds.labels)
        labels.setflags(write=False)
        ds = dataclasses.replace(ds, labels=labels)
    return ds


def rsi_test_scores(spec: ExperimentSpec, series: PriceSeries, ds: LabeledDataset) -> np.ndarray:
    """Score test sample ``k`` with the RSI of price ``k + p``, the close
    just before the labelled return, so only prior-day data is used."""
    rsi = wilder_rsi(series, spec.lookback)
    scores = rsi_score(rsi, spec.direction)
    start = spec.window + ds.split_index
    return scores[start:spec.window + ds.n_samples]


def fit_and_score(spec: ExperimentSpec, series: PriceSeries, ds: LabeledDataset,
                  repeat: int = 0):
    """``(test scores, final training loss or None, fitted model or None)``.

    The model is a ``(NetworkSpec, Params)`` pair for networks, a
    ``ForestModel`` for the forest and None for RSI.
    """
    X_test, _ = ds.test
    if spec.model == "rsi":
        return rsi_test_scores(spec, series, ds), None, None
    seed = derived_seed(spec.seed, 1, repeat)
    if spec.model == "rf":
        model = fit_forest(ds, dataclasses.replace(spec.forest_config, seed=seed))
        return forest_predict_proba(model, X_test), None, model
    net = NetworkSpec(spec.model, spec.window)
    result = train(net, ds, dataclasses.replace(spec.train_config, seed=seed))
    return predict_proba(net, result.params, X_test), result.final_loss, (net, result.params)


def run_experiment(spec: ExperimentSpec, series: PriceSeries, on_model=None) -> ResultRow:
    """Returns, split, sigma, labels, windows, fit, then test AUC.

    Single-class test labels give a row with ``auc_defined=False`` rather
    than an exception. With ``repeats > 1`` the AUC and final loss are
    means over independently seeded fits. ``on_model(repeat, model)`` is
    called with every fitted model.
    """
    ds = prepare_dataset(spec, series)
    _, y_test = ds.test
    n_pos = int(np.count_nonzero(y_test))
    n_train, n_test = ds.split_index, ds.n_samples - ds.split_index
    defined = 0 < n_pos < n_test

    aucs, losses = [], []
    start = time.perf_counter()
    runs = 1 if spec.model == "rsi" else spec.repeats
    for r in range(runs):
        scores, loss, model = fit_and_score(spec, series, ds, r)
        if on_model is not None:
            on_model(r, model)
        if defined:
            aucs.append(roc_auc(scores, y_test))
        if loss is not None:
            losses.append(loss)
    seconds = time.perf_counter() - start

    if defined:
        status = STATUS_OK if runs == 1 else f"{STATUS_OK}: mean AUC over {runs} fits"
    else:
        status = f"{STATUS_UNDEFINED}: single-class test labels ({n_pos} positive of {n_test})"
    return ResultRow(
        ticker=spec.ticker,
        model=spec.model,
        window=spec.window,
        fraction=spec.fraction,
        direction=spec.direction.value,
        seed=spec.seed,
        auc=float(np.mean(aucs)) if aucs else math.nan,
        auc_defined=defined,
        n_train=n_train,
        n_test=n_test,
        n_pos_test=n_pos,
        train_seconds=seconds,
        loss_final=float(np.mean(losses)) if losses else None,
        status=status,
    )


def failed_row(spec: ExperimentSpec, exc: BaseException) -> ResultRow:
    message = " ".join(f"{type(exc).__name__}: {exc}".split())
    return ResultRow(spec.ticker, spec.model, spec.window, spec.fraction, spec.direction.value,
                     spec.seed, math.nan, False, 0, 0, 0, None, None, f"{STATUS_ERROR}: {message}")

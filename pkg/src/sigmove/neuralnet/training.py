"""Mini-batch Adam training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .network import GradientError, NetworkSpec, Params, init_network, loss_and_grads
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")


@dataclass
class TrainResult:
    params: Params
    loss_history: list[float]

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]


def train_arrays(spec: NetworkSpec, x: np.ndarray, y: np.ndarray, config: TrainConfig) -> TrainResult:
    """Fit ``spec`` on ``(x, y)``; deterministic given ``config.seed``.

    The seed initialises the weights directly; two further streams spawned
    from it drive the epoch shuffles and the dropout masks.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    n_pos = int(y.sum())
    if n_pos in (0, n):
        log.warning("training labels are single-class (%d positives of %d)", n_pos, n)
    params = init_network(spec, config.seed)
    shuffle_seq, dropout_seq = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    state = AdamState()
    history = []
    order = np.arange(n)
    for epoch in range(config.epochs):
        if config.shuffle_each_epoch:
            order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            try:
                loss, grads = loss_and_grads(spec, params, x[idx], y[idx], rng=dropout_rng)
            except GradientError as exc:
                raise GradientError(
                    f"{spec.kind} training diverged at epoch {epoch + 1}, batch starting {start}: {exc}"
                ) from exc
            total += loss * len(idx)
            params, state = adam_step(params, grads, state, config.learning_rate)
        mean_loss = total / n
        if not math.isfinite(mean_loss):
            raise GradientError(f"non-finite mean loss at epoch {epoch + 1}")
        history.append(mean_loss)
        log.debug("%s epoch %d loss %.6f", spec.kind, epoch + 1, mean_loss)
    return TrainResult(params, history)


def train(spec: NetworkSpec, dataset, config: TrainConfig) -> TrainResult:
    """Train on the training partition of a :class:`~sigmove.features.LabeledDataset`."""
    x, y = dataset.train
    return train_arrays(spec, x, y, config)

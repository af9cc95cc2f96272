"""The three classifier architectures and their exact gradients.

Every network maps a ``(batch, p)`` window of returns to one logit; the
output unit is a sigmoid and the loss is binary cross-entropy.

    mlp   Dense(u1, relu) -> Dense(u2, relu) -> Dense(1)
    cnn   Conv1D(u1, k, relu) -> Dropout -> Flatten -> Dense(u2, relu) -> Dropout -> Dense(1)
    lstm  LSTM(u1, sequence) -> Dropout -> LSTM(u2, last) -> Dropout -> Dense(1)

Default sizes are ``u1=64, u2=32, k=7, dropout=0.2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .layers import (
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    dropout,
    lstm_backward_tm,
    lstm_forward_tm,
    relu,
    relu_backward,
    sigmoid,
)

KINDS = ("mlp", "cnn", "lstm")
PROB_EPS = 1e-7


class GradientError(FloatingPointError):
    """Raised when a gradient or loss becomes non-finite."""


@dataclass(frozen=True)
class NetworkSpec:
    kind: str
    input_window: int
    units: tuple[int, int] = (64, 32)
    kernel_size: int = 7
    dropout: float = 0.2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown network kind {self.kind!r}; expected one of {KINDS}")
        if self.input_window < 1:
            raise ValueError("input_window must be positive")
        if self.kind == "cnn" and self.input_window < self.kernel_size:
            raise ValueError(
                f"cnn needs window >= kernel ({self.input_window} < {self.kernel_size})")
        object.__setattr__(self, "units", tuple(int(u) for u in self.units))

    @property
    def uses_dropout(self) -> bool:
        return self.kind != "mlp" and self.dropout > 0

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """Declared parameter order and shapes."""
        p = self.input_window
        u1, u2 = self.units
        if self.kind == "mlp":
            return {"dense1.W": (p, u1), "dense1.b": (u1,),
                    "dense2.W": (u1, u2), "dense2.b": (u2,),
                    "out.W": (u2, 1), "out.b": (1,)}
        if self.kind == "cnn":
            flat = (p - self.kernel_size + 1) * u1
            return {"conv.W": (u1, self.kernel_size), "conv.b": (u1,),
                    "dense.W": (flat, u2), "dense.b": (u2,),
                    "out.W": (u2, 1), "out.b": (1,)}
        return {"lstm1.W": (1, 4 * u1), "lstm1.U": (u1, 4 * u1), "lstm1.b": (4 * u1,),
                "lstm2.W": (u1, 4 * u2), "lstm2.U": (u2, 4 * u2), "lstm2.b": (4 * u2,),
                "out.W": (u2, 1), "out.b": (1,)}

    def param_count(self) -> int:
        return sum(math.prod(s) for s in self.param_shapes().values())


@dataclass
class Params:
    arrays: dict[str, np.ndarray]
    seed: int | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    @property
    def count(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def copy(self) -> "Params":
        return Params({k: v.copy() for k, v in self.arrays.items()}, self.seed)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays.values()])


@dataclass
class Tape:
    """Intermediates recorded by a forward pass."""

    x: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    entries: dict = field(default_factory=dict)


def _glorot_bound(name: str, shape: tuple[int, ...], spec: NetworkSpec) -> float:
    if name == "conv.W":
        n_f, k = shape
        fan_in, fan_out = k, k * n_f
    else:
        fan_in, fan_out = shape
    return math.sqrt(6.0 / (fan_in + fan_out))


def glorot_bounds(spec: NetworkSpec) -> dict[str, float]:
    return {name: _glorot_bound(name, shape, spec)
            for name, shape in spec.param_shapes().items() if not name.endswith(".b")}


def init_network(spec: NetworkSpec, seed: int) -> Params:
    """Glorot-uniform weights, zero biases, LSTM forget-gate biases at 1."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".b"):
            arr = np.zeros(shape)
            if name.startswith("lstm"):
                units = shape[0] // 4
                arr[units:2 * units] = 1.0
        else:
            bound = _glorot_bound(name, shape, spec)
            arr = rng.uniform(-bound, bound, size=shape)
        arrays[name] = arr
    return Params(arrays, seed)


def bce_loss(probs, labels) -> float:
    """Mean binary cross-entropy with probabilities clipped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"{p.shape} probabilities vs {y.shape} labels")
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _check_input(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3 and x.shape[2] == 1:
        x = x[:, :, 0]
    if x.ndim != 2 or x.shape[1] != spec.input_window:
        raise ValueError(f"expected input (batch, {spec.input_window}), got {x.shape}")
    return x


def forward(spec: NetworkSpec, params: Params, x, train: bool = False,
            rng: np.random.Generator | None = None) -> Tape:
    """Run the network, recording what :func:`backward_from_tape` needs.

    Dropout is active only when ``train`` is true; its masks are drawn from
    ``rng`` in a fixed order, so a given rng state reproduces the pass.
    """
    x = _check_input(spec, x)
    P = params.arrays
    rate = spec.dropout if train else 0.0
    e: dict = {}
    if spec.kind == "mlp":
        z1 = dense_forward(x, P["dense1.W"], P["dense1.b"])
        a1 = relu(z1)
        z2 = dense_forward(a1, P["dense2.W"], P["dense2.b"])
        a2 = relu(z2)
        e.update(z1=z1, a1=a1, z2=z2, a2=a2)
        last = a2
    elif spec.kind == "cnn":
        zc = conv1d_forward(x, P["conv.W"], P["conv.b"])
        ac = relu(zc)
        dc, mask_c = dropout(ac, rate, train, rng)
        flat = dc.reshape(len(x), -1)
        zd = dense_forward(flat, P["dense.W"], P["dense.b"])
        ad = relu(zd)
        dd, mask_d = dropout(ad, rate, train, rng)
        e.update(zc=zc, mask_c=mask_c, flat=flat, zd=zd, mask_d=mask_d)
        last = dd
    else:
        xs = np.ascontiguousarray(x.T)[:, :, None]  # (T, B, 1)
        h1, cache1 = lstm_forward_tm(xs, P["lstm1.W"], P["lstm1.U"], P["lstm1.b"])
        d1, mask1 = dropout(h1, rate, train, rng)
        h2, cache2 = lstm_forward_tm(d1, P["lstm2.W"], P["lstm2.U"], P["lstm2.b"])
        d2, mask2 = dropout(h2[-1], rate, train, rng)
        e.update(cache1=cache1, mask1=mask1, cache2=cache2, mask2=mask2)
        last = d2
    logits = dense_forward(last, P["out.W"], P["out.b"])[:, 0]
    e["last"] = last
    return Tape(x=x, logits=logits, probs=sigmoid(logits), entries=e)


def backward_from_tape(spec: NetworkSpec, params: Params, tape: Tape, labels) -> dict[str, np.ndarray]:
    """Exact gradient of :func:`bce_loss` (mean over the batch) for every parameter."""
    P = params.arrays
    e = tape.entries
    y = np.asarray(labels, dtype=np.float64).ravel()
    p = tape.probs
    if y.shape != p.shape:
        raise ValueError(f"{p.shape} predictions vs {y.shape} labels")
    # d(bce)/d(logit) is (p - y)/B; zero where the clip is active
    inside = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    dlogit = ((p - y) / len(y) * inside)[:, None]
    grads: dict[str, np.ndarray] = {}
    dlast, grads["out.W"], grads["out.b"] = dense_backward(dlogit, e["last"], P["out.W"])

    if spec.kind == "mlp":
        dz2 = relu_backward(dlast, e["z2"])
        da1, grads["dense2.W"], grads["dense2.b"] = dense_backward(dz2, e["a1"], P["dense2.W"])
        dz1 = relu_backward(da1, e["z1"])
        _, grads["dense1.W"], grads["dense1.b"] = dense_backward(dz1, tape.x, P["dense1.W"], need_dx=False)
    elif spec.kind == "cnn":
        dad = dlast if e["mask_d"] is None else dlast * e["mask_d"]
        dzd = relu_backward(dad, e["zd"])
        dflat, grads["dense.W"], grads["dense.b"] = dense_backward(dzd, e["flat"], P["dense.W"])
        ddc = dflat.reshape(e["zc"].shape)
        dac = ddc if e["mask_c"] is None else ddc * e["mask_c"]
        dzc = relu_backward(dac, e["zc"])
        _, grads["conv.W"], grads["conv.b"] = conv1d_backward(dzc, tape.x, P["conv.W"])
    else:
        dh2_last = dlast if e["mask2"] is None else dlast * e["mask2"]
        cache2 = e["cache2"]
        T, B = cache2[0].shape[:2]
        dh2 = np.zeros((T, B, dh2_last.shape[1]))
        dh2[-1] = dh2_last
        dd1, grads["lstm2.W"], grads["lstm2.U"], grads["lstm2.b"] = lstm_backward_tm(dh2, cache2)
        dh1 = dd1 if e["mask1"] is None else dd1 * e["mask1"]
        _, grads["lstm1.W"], grads["lstm1.U"], grads["lstm1.b"] = lstm_backward_tm(
            dh1, e["cache1"], need_dx=False)

    ordered = {}
    for name in P:
        g = grads[name].reshape(P[name].shape)
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient for {name}")
        ordered[name] = g
    return ordered


def loss_and_grads(spec: NetworkSpec, params: Params, x, labels,
                   rng: np.random.Generator | None = None, train: bool = True):
    tape = forward(spec, params, x, train=train and spec.uses_dropout, rng=rng)
    loss = bce_loss(tape.probs, labels)
    if not math.isfinite(loss):
        raise GradientError(f"non-finite loss {loss}")
    return loss, backward_from_tape(spec, params, tape, labels)


def backward(spec: NetworkSpec, params: Params, batch, labels,
             rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
    """Gradients of the batch loss; dropout masks come from ``rng`` (train mode)."""
    return loss_and_grads(spec, params, batch, labels, rng=rng)[1]


def batch_loss(spec: NetworkSpec, params: Params, x, labels,
               rng: np.random.Generator | None = None, train: bool = True) -> float:
    tape = forward(spec, params, x, train=train and spec.uses_dropout, rng=rng)
    return bce_loss(tape.probs, labels)


def predict_proba(spec: NetworkSpec, params: Params, features, chunk_size: int = 4096) -> np.ndarray:
    """Inference-mode sigmoid scores, one per row of ``features``."""
    x = _check_input(spec, features)
    out = np.empty(len(x))
    for start in range(0, len(x), chunk_size):
        out[start:start + chunk_size] = forward(spec, params, x[start:start + chunk_size]).probs
    return out

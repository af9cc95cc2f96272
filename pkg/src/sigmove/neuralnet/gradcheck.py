"""Central finite-difference gradients for verifying backpropagation.

The loss here is recomputed by an independent forward pass that evaluates
many perturbed copies of one parameter array at once: arrays carry a leading
"copy" axis (length 1 when unperturbed, broadcast everywhere). Dropout masks
are taken from a recorded training pass so both sides see the same network.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .network import PROB_EPS, NetworkSpec, Params, backward_from_tape, forward


def _stacked_bce(logits, y):
    p = np.clip(expit(logits), PROB_EPS, 1.0 - PROB_EPS)
    return -np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p), axis=-1)


def _lstm_stacked(x_seq, W, U, b):
    # x_seq (K|1, T, B, D); W (K|1, D, 4H); U (K|1, H, 4H); b (K|1, 4H)
    H = U.shape[1]
    K = max(x_seq.shape[0], W.shape[0], U.shape[0], b.shape[0])
    T, B = x_seq.shape[1], x_seq.shape[2]
    h = np.zeros((K, B, H))
    c = np.zeros((K, B, H))
    out = np.empty((K, T, B, H))
    for t in range(T):
        z = x_seq[:, t] @ W + h @ U + b[:, None, :]
        i = expit(z[..., :H])
        f = expit(z[..., H:2 * H])
        o = expit(z[..., 2 * H:3 * H])
        g = np.tanh(z[..., 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[:, t] = h
    return out


def stacked_loss(spec: NetworkSpec, P: dict[str, np.ndarray], x, y, masks: dict) -> np.ndarray:
    """Batch-mean BCE for every copy; ``P`` maps names to ``(K|1, *shape)`` arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if spec.kind == "mlp":
        a1 = np.maximum(x[None] @ P["dense1.W"] + P["dense1.b"][:, None, :], 0.0)
        last = np.maximum(a1 @ P["dense2.W"] + P["dense2.b"][:, None, :], 0.0)
    elif spec.kind == "cnn":
        k = spec.kernel_size
        win = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)  # (B, L', k)
        zc = np.einsum("btj,kfj->kbtf", win, P["conv.W"]) + P["conv.b"][:, None, None, :]
        ac = np.maximum(zc, 0.0)
        if masks.get("mask_c") is not None:
            ac = ac * masks["mask_c"]
        flat = ac.reshape(ac.shape[0], len(x), -1)
        ad = np.maximum(flat @ P["dense.W"] + P["dense.b"][:, None, :], 0.0)
        last = ad * masks["mask_d"] if masks.get("mask_d") is not None else ad
    else:
        seq = x.T[None, :, :, None]  # (1, T, B, 1)
        h1 = _lstm_stacked(seq, P["lstm1.W"], P["lstm1.U"], P["lstm1.b"])
        if masks.get("mask1") is not None:
            h1 = h1 * masks["mask1"]
        h2 = _lstm_stacked(h1, P["lstm2.W"], P["lstm2.U"], P["lstm2.b"])[:, -1]
        last = h2 * masks["mask2"] if masks.get("mask2") is not None else h2
    logits = (last @ P["out.W"])[..., 0] + P["out.b"]
    return _stacked_bce(logits, y)


def recorded_masks(spec: NetworkSpec, params: Params, x, seed: int | None) -> dict:
    """Dropout masks of one training pass (empty for the mlp or when no seed)."""
    if seed is None or not spec.uses_dropout:
        return {}
    tape = forward(spec, params, x, train=True, rng=np.random.default_rng(seed))
    return {k: v for k, v in tape.entries.items() if k.startswith("mask")}


def finite_difference_grads(spec: NetworkSpec, params: Params, x, y, dropout_seed: int | None = None,
                            step: float = 1e-5, chunk: int = 128) -> dict[str, np.ndarray]:
    """Central differences ``(L(w + h) - L(w - h)) / 2h`` for every parameter."""
    masks = recorded_masks(spec, params, x, dropout_seed)
    base = {k: v[None] for k, v in params.arrays.items()}
    grads = {}
    for name, arr in params.arrays.items():
        flat_grad = np.empty(arr.size)
        for start in range(0, arr.size, chunk):
            idx = np.arange(start, min(start + chunk, arr.size))
            n = len(idx)
            stack = np.repeat(arr.reshape(1, -1), 2 * n, axis=0)
            stack[np.arange(n), idx] += step
            stack[n + np.arange(n), idx] -= step
            P = dict(base)
            P[name] = stack.reshape((2 * n,) + arr.shape)
            losses = stacked_loss(spec, P, x, y, masks)
            flat_grad[idx] = (losses[:n] - losses[n:]) / (2 * step)
        grads[name] = flat_grad.reshape(arr.shape)
    return grads


def analytic_grads(spec: NetworkSpec, params: Params, x, y, dropout_seed: int | None = None):
    rng = np.random.default_rng(dropout_seed) if dropout_seed is not None else None
    tape = forward(spec, params, x, train=spec.uses_dropout and rng is not None, rng=rng)
    return backward_from_tape(spec, params, tape, y)


def relative_errors(analytic: dict, numeric: dict, floor: float = 1e-6) -> dict[str, np.ndarray]:
    """``|a - n| / max(|a|, |n|, floor)`` elementwise.

    The floor stops gradients far below the difference quotient's own
    rounding noise (about ``eps * loss / step``) from dominating.
    """
    out = {}
    for name, a in analytic.items():
        n = numeric[name]
        out[name] = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return out

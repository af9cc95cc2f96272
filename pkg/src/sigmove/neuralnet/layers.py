"""Layer primitives: forward passes that return a cache, and their backward passes.

All arrays are float64. Recurrent tensors are kept time-major, ``(T, B, F)``,
inside this module so per-step slices are contiguous.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.special import expit

# -- dense --------------------------------------------------------------------


def dense_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map ``x @ W + b`` on a ``(batch, d_in)`` input (pre-activation)."""
    if x.ndim != 2 or x.shape[1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ValueError(f"dense shape mismatch: x{x.shape} W{W.shape} b{b.shape}")
    return x @ W + b


def dense_backward(dout, x, W, need_dx=True):
    dW = x.T @ dout
    db = dout.sum(axis=0)
    dx = dout @ W.T if need_dx else None
    return dx, dW, db


# -- activations --------------------------------------------------------------


def relu(z):
    return np.maximum(z, 0.0)


def relu_backward(dout, z):
    return dout * (z > 0.0)


def sigmoid(z):
    return expit(z)


# -- 1-D convolution ----------------------------------------------------------


def conv1d_forward(x: np.ndarray, filters: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid, stride-1 convolution of a single-channel sequence.

    ``x`` is ``(batch, L)`` or ``(batch, L, 1)``; ``filters`` is
    ``(n_filters, k)``. Returns ``(batch, L - k + 1, n_filters)`` with
    ``out[b, t, f] = sum_j x[b, t + j] * filters[f, j] + bias[f]``.
    """
    if x.ndim == 3:
        if x.shape[2] != 1:
            raise ValueError(f"conv1d expects one input channel, got {x.shape[2]}")
        x = x[:, :, 0]
    k = filters.shape[1]
    if x.shape[1] < k:
        raise ValueError(f"window {x.shape[1]} shorter than kernel {k}")
    if bias.shape != (filters.shape[0],):
        raise ValueError(f"conv1d bias shape {bias.shape} != ({filters.shape[0]},)")
    windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)
    return windows @ filters.T + bias


def conv1d_backward(dout, x, filters, need_dx=False):
    if x.ndim == 3:
        x = x[:, :, 0]
    n_f, k = filters.shape
    windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)
    flat_out = dout.reshape(-1, n_f)
    dW = flat_out.T @ windows.reshape(-1, k)
    db = flat_out.sum(axis=0)
    dx = None
    if need_dx:
        dwin = dout @ filters  # (B, L', k)
        dx = np.zeros_like(x)
        steps = dwin.shape[1]
        for j in range(k):
            dx[:, j:j + steps] += dwin[:, :, j]
    return dx, dW, db


# -- dropout ------------------------------------------------------------------


def dropout(x: np.ndarray, rate: float, train: bool, rng: np.random.Generator | None = None):
    """Inverted dropout. Returns ``(output, mask)``; the mask already carries
    the ``1 / (1 - rate)`` survivor scale and is ``None`` for identity passes."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


# -- LSTM ---------------------------------------------------------------------
# Gate layout along the 4H axis: input, forget, output (sigmoid), candidate (tanh).
# sigmoid(z) = (1 + tanh(z / 2)) / 2, so one tanh call per step covers all four
# gates once the sigmoid columns of the pre-activation are halved. Transcendentals
# stay in numpy; the per-step arithmetic around them runs in small jitted kernels.


def _gate_scale(H: int) -> np.ndarray:
    return np.r_[np.full(3 * H, 0.5), np.ones(H)]


@njit(cache=True)
def _add_scalar_input(z, x_t, w, b):
    B, G = z.shape
    for r in range(B):
        xv = x_t[r, 0]
        for j in range(G):
            z[r, j] += xv * w[j] + b[j]


@njit(cache=True)
def _cell_update(a, c_prev, c_out):
    B, G = a.shape
    H = G // 4
    for r in range(B):
        for j in range(3 * H):
            a[r, j] = 0.5 * a[r, j] + 0.5
        for j in range(H):
            c_out[r, j] = a[r, H + j] * c_prev[r, j] + a[r, j] * a[r, 3 * H + j]


@njit(cache=True)
def _bptt_step(dh_in, dh_next, dc, a, a_next, has_next, c_prev, tc, dz):
    B, G = a.shape
    H = G // 4
    for r in range(B):
        for j in range(H):
            f_next = a_next[r, H + j] if has_next else 0.0
            dh = dh_in[r, j] + dh_next[r, j]
            i = a[r, j]
            f = a[r, H + j]
            o = a[r, 2 * H + j]
            g = a[r, 3 * H + j]
            t = tc[r, j]
            d = dc[r, j] * f_next + dh * o * (1.0 - t * t)
            dc[r, j] = d
            dz[r, j] = d * g * i * (1.0 - i)
            dz[r, H + j] = d * c_prev[r, j] * f * (1.0 - f)
            dz[r, 2 * H + j] = dh * t * o * (1.0 - o)
            dz[r, 3 * H + j] = d * i * (1.0 - g * g)


def lstm_forward_tm(x, W, U, b):
    """Time-major LSTM over ``x`` of shape ``(T, B, D)`` from zero state.

    Returns ``(h_all, cache)`` with ``h_all`` of shape ``(T, B, H)``.
    """
    T, B, D = x.shape
    H = U.shape[0]
    if W.shape != (D, 4 * H) or U.shape != (H, 4 * H) or b.shape != (4 * H,):
        raise ValueError(f"lstm shape mismatch: x{x.shape} W{W.shape} U{U.shape} b{b.shape}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    scale = _gate_scale(H)
    Ws, bs, Us = W * scale, b * scale, U * scale
    xw = None
    if D > 1:
        xw = (x.reshape(T * B, D) @ Ws + bs).reshape(T, B, 4 * H)
    acts = np.empty((T, B, 4 * H))
    cs = np.empty((T, B, H))
    tcs = np.empty((T, B, H))
    hs = np.empty((T, B, H))
    z = np.empty((B, 4 * H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        np.matmul(h, Us, out=z)
        if xw is None:
            _add_scalar_input(z, x[t], Ws[0], bs)
        else:
            z += xw[t]
        a = acts[t]
        np.tanh(z, out=a)
        _cell_update(a, c, cs[t])
        np.tanh(cs[t], out=tcs[t])
        np.multiply(a[:, 2 * H:3 * H], tcs[t], out=hs[t])
        h, c = hs[t], cs[t]
    return hs, (x, W, U, acts, cs, tcs, hs)


def lstm_backward_tm(dh_all, cache, need_dx=True):
    """Backpropagation through time. ``dh_all`` is ``(T, B, H)`` upstream
    gradient w.r.t. every hidden state (zeros where a state is unused)."""
    x, W, U, acts, cs, tcs, hs = cache
    T, B, D = x.shape
    H = U.shape[0]
    dh_all = np.ascontiguousarray(dh_all, dtype=np.float64)
    dZ = np.empty((T, B, 4 * H))
    dh_next = np.zeros((B, H))
    dc = np.zeros((B, H))
    zeros = np.zeros((B, H))
    UT = np.ascontiguousarray(U.T)
    for t in range(T - 1, -1, -1):
        has_next = t + 1 < T
        c_prev = cs[t - 1] if t > 0 else zeros
        _bptt_step(dh_all[t], dh_next, dc, acts[t], acts[t + 1] if has_next else acts[t],
                   has_next, c_prev, tcs[t], dZ[t])
        np.matmul(dZ[t], UT, out=dh_next)
    flat = dZ.reshape(T * B, 4 * H)
    h_prev = np.empty((T, B, H))
    h_prev[0] = 0.0
    h_prev[1:] = hs[:-1]
    dU = h_prev.reshape(T * B, H).T @ flat
    db = flat.sum(axis=0)
    dW = x.reshape(T * B, D).T @ flat
    dx = (dZ @ W.T) if need_dx else None
    return dx, dW, dU, db


def lstm_forward(x: np.ndarray, W, U, b, return_sequence: bool = False) -> np.ndarray:
    """Batch-major LSTM: ``x`` is ``(batch, p, D)``; zero initial state.

    Returns every hidden state ``(batch, p, H)`` when ``return_sequence``,
    otherwise the final one ``(batch, H)``.
    """
    if x.ndim != 3:
        raise ValueError(f"lstm expects (batch, steps, features), got {x.shape}")
    hs, _ = lstm_forward_tm(np.ascontiguousarray(x.transpose(1, 0, 2)), W, U, b)
    if return_sequence:
        return hs.transpose(1, 0, 2)
    return hs[-1]

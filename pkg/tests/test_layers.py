import math

import numpy as np
import pytest

from sigmove.neuralnet.layers import (
    conv1d_backward,
    conv1d_forward,
    dense_forward,
    dropout,
    lstm_forward,
)


def sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def test_dense_identity_and_constant():
    x = np.random.default_rng(0).normal(size=(5, 4))
    np.testing.assert_array_equal(dense_forward(x, np.eye(4), np.zeros(4)), x)
    out = dense_forward(x, np.zeros((4, 3)), np.full(3, 2.5))
    assert (out == 2.5).all()


def test_dense_against_triple_loop():
    rng = np.random.default_rng(1)
    x, W, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=5)
    expected = np.zeros((3, 5))
    for i in range(3):
        for j in range(5):
            acc = b[j]
            for k in range(4):
                acc += x[i, k] * W[k, j]
            expected[i, j] = acc
    np.testing.assert_allclose(dense_forward(x, W, b), expected, rtol=0, atol=1e-12)


def test_dense_shape_mismatch():
    with pytest.raises(ValueError):
        dense_forward(np.zeros((2, 3)), np.zeros((4, 5)), np.zeros(5))


def test_conv_output_length_and_identity_kernel():
    x = np.random.default_rng(2).normal(size=(3, 12, 1))
    filters = np.zeros((64, 7))
    filters[:, 0] = 1.0
    out = conv1d_forward(x, filters, np.zeros(64))
    assert out.shape == (3, 6, 64)
    for f in (0, 17, 63):
        np.testing.assert_array_equal(out[:, :, f], x[:, :6, 0])
    assert conv1d_forward(x[:, :7], filters, np.zeros(64)).shape == (3, 1, 64)


def test_conv_against_nested_loops():
    rng = np.random.default_rng(3)
    x, filt, bias = rng.normal(size=(2, 10, 1)), rng.normal(size=(4, 7)), rng.normal(size=4)
    out = conv1d_forward(x, filt, bias)
    for b in range(2):
        for t in range(4):
            for f in range(4):
                acc = bias[f]
                for j in range(7):
                    acc += x[b, t + j, 0] * filt[f, j]
                assert abs(out[b, t, f] - acc) <= 1e-12


def test_conv_too_short():
    with pytest.raises(ValueError, match="shorter than kernel"):
        conv1d_forward(np.zeros((1, 6)), np.zeros((64, 7)), np.zeros(64))


def test_conv_input_gradient_matches_adjoint():
    rng = np.random.default_rng(4)
    x, filt = rng.normal(size=(2, 9)), rng.normal(size=(3, 4))
    dout = rng.normal(size=(2, 6, 3))
    dx, _, _ = conv1d_backward(dout, x, filt, need_dx=True)
    # <conv(x), dout> is linear in x, so its gradient is dx
    eps = 1e-6
    for b, i in [(0, 0), (1, 4), (0, 8)]:
        xp = x.copy()
        xp[b, i] += eps
        num = (np.sum(conv1d_forward(xp, filt, np.zeros(3)) * dout)
               - np.sum(conv1d_forward(x, filt, np.zeros(3)) * dout)) / eps
        assert dx[b, i] == pytest.approx(num, rel=1e-6)


def test_lstm_zero_params_give_zero_states():
    x = np.random.default_rng(5).normal(size=(4, 9, 1))
    h = lstm_forward(x, np.zeros((1, 32)), np.zeros((8, 32)), np.zeros(32), return_sequence=True)
    assert h.shape == (4, 9, 8)
    assert (h == 0).all()


def test_lstm_table_shapes():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(3, 60, 1))
    h1 = lstm_forward(x, rng.normal(size=(1, 256)) * 0.1, rng.normal(size=(64, 256)) * 0.1, np.zeros(256), True)
    assert h1.shape == (3, 60, 64)
    h2 = lstm_forward(h1, rng.normal(size=(64, 128)) * 0.1, rng.normal(size=(32, 128)) * 0.1, np.zeros(128))
    assert h2.shape == (3, 32)


def test_lstm_single_step_scalar_oracle():
    # one unit, one input: gates i, f, o, g with hand-picked weights
    w = np.array([[0.3, -0.2, 0.5, 0.9]])
    u = np.array([[0.7, 0.1, -0.4, 0.2]])
    b = np.array([0.05, 1.0, -0.1, 0.2])
    xs = [0.8, -0.5]
    h = c = 0.0
    for xv in xs:
        zi, zf, zo, zg = (w[0] * xv + u[0] * h + b).tolist()
        i, f, o, g = sig(zi), sig(zf), sig(zo), math.tanh(zg)
        c = f * c + i * g
        h = o * math.tanh(c)
        first = (h, c) if xv == xs[0] else first
    out = lstm_forward(np.array(xs).reshape(1, 2, 1), w, u, b, return_sequence=True)
    assert abs(out[0, 0, 0] - first[0]) <= 1e-12
    assert abs(out[0, 1, 0] - h) <= 1e-12


def manual_lstm(seq, W, U, b):
    """Unrolled reference: ``seq`` is a list over time of lists over features."""
    H = U.shape[0]
    h, c = [0.0] * H, [0.0] * H
    states = []
    for x in seq:
        z = [b[j] + sum(x[d] * W[d, j] for d in range(len(x))) + sum(h[k] * U[k, j] for k in range(H))
             for j in range(4 * H)]
        new_h, new_c = [], []
        for u in range(H):
            i, f, o = sig(z[u]), sig(z[H + u]), sig(z[2 * H + u])
            g = math.tanh(z[3 * H + u])
            cu = f * c[u] + i * g
            new_c.append(cu)
            new_h.append(o * math.tanh(cu))
        h, c = new_h, new_c
        states.append(h)
    return states


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_two_layer_lstm_matches_manual_unrolling(p):
    rng = np.random.default_rng(10 + p)
    B, H1, H2 = 2, 3, 2
    W1, U1, b1 = rng.normal(size=(1, 4 * H1)), rng.normal(size=(H1, 4 * H1)), rng.normal(size=4 * H1)
    W2, U2, b2 = rng.normal(size=(H1, 4 * H2)), rng.normal(size=(H2, 4 * H2)), rng.normal(size=4 * H2)
    x = rng.normal(size=(B, p, 1))
    seq = lstm_forward(x, W1, U1, b1, return_sequence=True)
    final = lstm_forward(seq, W2, U2, b2)
    for r in range(B):
        s1 = manual_lstm([[v] for v in x[r, :, 0]], W1, U1, b1)
        s2 = manual_lstm(s1, W2, U2, b2)
        np.testing.assert_allclose(seq[r], s1, rtol=0, atol=1e-12)
        np.testing.assert_allclose(final[r], s2[-1], rtol=0, atol=1e-12)


def test_lstm_shape_errors():
    with pytest.raises(ValueError):
        lstm_forward(np.zeros((2, 5)), np.zeros((1, 8)), np.zeros((2, 8)), np.zeros(8))
    with pytest.raises(ValueError):
        lstm_forward(np.zeros((2, 5, 1)), np.zeros((1, 8)), np.zeros((3, 8)), np.zeros(8))


def test_dropout_modes():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(10, 10))
    out, mask = dropout(x, 0.2, train=False, rng=rng)
    assert out is x and mask is None
    out, mask = dropout(x, 0.0, train=True, rng=rng)
    assert out is x and mask is None
    with pytest.raises(ValueError):
        dropout(x, 1.0, train=True, rng=rng)
    with pytest.raises(ValueError):
        dropout(x, 0.2, train=True, rng=None)


def test_dropout_train_mode_statistics():
    rng = np.random.default_rng(1)
    x = np.ones((500, 400))
    out, mask = dropout(x, 0.2, train=True, rng=rng)
    assert set(np.unique(mask)) == {0.0, 1.25}
    assert abs((mask == 0).mean() - 0.2) < 0.005
    assert abs(out.mean() - 1.0) < 0.02

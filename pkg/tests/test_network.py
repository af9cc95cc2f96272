import math

import numpy as np
import pytest

from sigmove.neuralnet import (
    GradientError,
    NetworkSpec,
    Params,
    backward,
    bce_loss,
    forward,
    glorot_bounds,
    init_network,
    load_network,
    loss_and_grads,
    predict_proba,
    save_network,
)
from sigmove.neuralnet.gradcheck import analytic_grads, finite_difference_grads, relative_errors

KIND_WINDOWS = [(k, p) for k in ("mlp", "cnn", "lstm") for p in (7, 14, 30, 60)]


def closed_form_count(kind, p, u1=64, u2=32, k=7):
    if kind == "mlp":
        return p * u1 + u1 + u1 * u2 + u2 + u2 + 1
    if kind == "cnn":
        return u1 * k + u1 + (p - k + 1) * u1 * u2 + u2 + u2 + 1
    return (1 * 4 * u1 + u1 * 4 * u1 + 4 * u1) + (u1 * 4 * u2 + u2 * 4 * u2 + 4 * u2) + u2 + 1


def test_mlp_p7_count():
    # 7*64+64 + 64*32+32 + 32*1+1
    assert init_network(NetworkSpec("mlp", 7), 0).count == 2625


@pytest.mark.parametrize("kind, p", KIND_WINDOWS)
def test_param_count_formula(kind, p):
    spec = NetworkSpec(kind, p)
    params = init_network(spec, 1)
    assert params.count == spec.param_count() == closed_form_count(kind, p)
    assert {k: v.shape for k, v in params.arrays.items()} == spec.param_shapes()


def test_cnn_requires_kernel_sized_window():
    with pytest.raises(ValueError):
        NetworkSpec("cnn", 6)
    with pytest.raises(ValueError):
        NetworkSpec("gru", 7)


@pytest.mark.parametrize("kind", ["mlp", "cnn", "lstm"])
def test_init_deterministic_and_within_glorot(kind):
    spec = NetworkSpec(kind, 14)
    a, b = init_network(spec, 42), init_network(spec, 42)
    for name in a.arrays:
        np.testing.assert_array_equal(a[name], b[name])
    assert not np.array_equal(init_network(spec, 43).flat(), a.flat())
    for name, bound in glorot_bounds(spec).items():
        assert np.abs(a[name]).max() <= bound
        assert np.abs(a[name]).max() > 0.5 * bound
    for name in a.arrays:
        if name.endswith(".b"):
            arr = a[name]
            if name.startswith("lstm"):
                u = arr.size // 4
                assert (arr[u:2 * u] == 1).all() and (np.delete(arr, np.s_[u:2 * u]) == 0).all()
            else:
                assert (arr == 0).all()


def test_glorot_bound_values():
    b = glorot_bounds(NetworkSpec("mlp", 7))
    assert b["dense1.W"] == math.sqrt(6 / (7 + 64))
    assert b["out.W"] == math.sqrt(6 / 33)


def test_bce_examples():
    assert 0 < bce_loss([1.0], [1]) < 2e-7
    assert bce_loss([0.5, 0.5], [1, 0]) == pytest.approx(0.6931471805599453, rel=1e-15)
    rng = np.random.default_rng(0)
    p, y = rng.random(20), rng.integers(0, 2, 20)
    assert bce_loss(p, y) == pytest.approx(bce_loss(1 - p, 1 - y), rel=1e-12)
    assert math.isfinite(bce_loss([0.0, 1.0], [1, 0]))


def small(kind, p=8):
    return NetworkSpec(kind, p, units=(5, 4), kernel_size=3)


@pytest.mark.parametrize("kind", ["mlp", "cnn", "lstm"])
def test_small_gradient_check_with_dropout(kind):
    spec = small(kind)
    rng = np.random.default_rng(3)
    params = init_network(spec, 7)
    params = Params({k: v + 0.1 * rng.standard_normal(v.shape) for k, v in params.arrays.items()})
    x = rng.normal(0, 1.0, (5, spec.input_window))
    y = np.array([1, 0, 0, 1, 0])
    seed = 11 if spec.uses_dropout else None
    rel = relative_errors(analytic_grads(spec, params, x, y, seed),
                          finite_difference_grads(spec, params, x, y, seed))
    assert max(float(r.max()) for r in rel.values()) < 1e-6


def test_stationary_point_all_zero_mlp():
    spec = NetworkSpec("mlp", 7)
    zero = Params({k: np.zeros(v.shape) for k, v in init_network(spec, 0).arrays.items()})
    x = np.random.default_rng(1).normal(size=(8, 7))
    y = np.array([1, 0] * 4)
    g = backward(spec, zero, x, y)
    assert all(np.abs(v).max() == 0 for v in g.values())
    num = finite_difference_grads(spec, zero, x, y)
    assert all(np.abs(v).max() < 1e-10 for v in num.values())


@pytest.mark.parametrize("kind", ["cnn", "lstm"])
def test_gradients_deterministic_given_dropout_seed(kind):
    spec = small(kind)
    params = init_network(spec, 2)
    x = np.random.default_rng(4).normal(size=(6, spec.input_window))
    y = np.array([0, 1, 0, 1, 1, 0])
    g1 = backward(spec, params, x, y, rng=np.random.default_rng(9))
    g2 = backward(spec, params, x, y, rng=np.random.default_rng(9))
    g3 = backward(spec, params, x, y, rng=np.random.default_rng(10))
    assert all(np.array_equal(g1[k], g2[k]) for k in g1)
    assert any(not np.array_equal(g1[k], g3[k]) for k in g1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_gradient_is_hard_failure():
    spec = NetworkSpec("mlp", 7)
    params = init_network(spec, 0)
    x = np.full((2, 7), np.nan)
    with pytest.raises(GradientError):
        loss_and_grads(spec, params, x, np.array([0, 1]))


def test_zero_mlp_predicts_half():
    spec = NetworkSpec("mlp", 7)
    zero = Params({k: np.zeros(v.shape) for k, v in init_network(spec, 0).arrays.items()})
    assert (predict_proba(spec, zero, np.random.default_rng(0).normal(size=(9, 7))) == 0.5).all()


@pytest.mark.parametrize("kind", ["mlp", "cnn", "lstm"])
def test_predict_is_pure_and_chunk_invariant(kind):
    spec = NetworkSpec(kind, 14)
    params = init_network(spec, 5)
    before = params.copy()
    x = np.random.default_rng(6).normal(0, 0.02, (50, 14))
    full = predict_proba(spec, params, x)
    np.testing.assert_array_equal(full, predict_proba(spec, params, x, chunk_size=7))
    np.testing.assert_array_equal(full, predict_proba(spec, params, x))
    assert ((full > 0) & (full < 1)).all()
    assert all(np.array_equal(before[k], params[k]) for k in params.arrays)


def test_train_mode_dropout_changes_cnn_output_but_inference_does_not():
    spec = NetworkSpec("cnn", 14)
    params = init_network(spec, 1)
    x = np.random.default_rng(2).normal(size=(4, 14))
    infer = forward(spec, params, x).probs
    train = forward(spec, params, x, train=True, rng=np.random.default_rng(0)).probs
    assert not np.array_equal(infer, train)
    np.testing.assert_array_equal(infer, forward(spec, params, x).probs)


def test_input_shape_checked():
    spec = NetworkSpec("mlp", 7)
    with pytest.raises(ValueError):
        predict_proba(spec, init_network(spec, 0), np.zeros((3, 8)))


@pytest.mark.parametrize("kind", ["mlp", "cnn", "lstm"])
def test_save_load_bit_exact(tmp_path, kind):
    spec = NetworkSpec(kind, 30)
    params = init_network(spec, 123)
    params = Params({k: v * np.pi for k, v in params.arrays.items()}, params.seed)
    path = tmp_path / f"{kind}.nn"
    save_network(spec, params, path)
    spec2, params2 = load_network(path)
    assert spec2 == spec and params2.seed == 123
    assert list(params2.arrays) == list(params.arrays)
    for k in params.arrays:
        assert params2[k].tobytes() == params[k].tobytes()


def test_load_rejects_damaged_files(tmp_path):
    spec = NetworkSpec("mlp", 7)
    path = tmp_path / "m.nn"
    save_network(spec, init_network(spec, 0), path)
    raw = path.read_bytes()
    (tmp_path / "short.nn").write_bytes(raw[:-8])
    (tmp_path / "long.nn").write_bytes(raw + b"\0" * 8)
    (tmp_path / "other.nn").write_bytes(b"hello")
    for name in ("short.nn", "long.nn", "other.nn"):
        with pytest.raises(ValueError):
            load_network(tmp_path / name)

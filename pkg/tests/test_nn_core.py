"""Numerical core: layers, exact gradients, Adam, parameter containers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedpose.errors import DimensionError, NumericalHealthError
from fedpose.nn import layers
from fedpose.nn.gradcheck import FD_STEP, gradient_check, relative_error
from fedpose.nn.optim import DEFAULT_LR, AdamState, adam_step
from fedpose.nn.params import (
    ParameterSet,
    dump_params,
    from_portable,
    load_params,
    to_portable,
)

finite_floats = st.floats(min_value=-50, max_value=50, allow_nan=False)


class TestParameterSet:
    def test_insertion_order_preserved(self):
        p = ParameterSet()
        p["b"] = np.zeros(2)
        p["a"] = np.ones(3)
        assert list(p) == ["b", "a"]

    def test_shape_change_rejected(self):
        p = ParameterSet()
        p["w"] = np.zeros((2, 3))
        with pytest.raises(DimensionError):
            p["w"] = np.zeros((3, 2))

    def test_copy_is_deep(self):
        p = ParameterSet()
        p["w"] = np.ones(4)
        q = p.copy()
        q["w"][0] = 99.0
        assert p["w"][0] == 1.0

    def test_num_scalars(self):
        p = ParameterSet()
        p["a"] = np.zeros((3, 4))
        p["b"] = np.zeros(5)
        assert p.num_scalars() == 17

    def test_assert_finite_catches_nan(self):
        p = ParameterSet()
        p["w"] = np.array([1.0, np.nan])
        with pytest.raises(NumericalHealthError):
            p.assert_finite("test")

    def test_portable_roundtrip_value_exact(self):
        rng = np.random.default_rng(0)
        p = ParameterSet()
        p["w"] = rng.normal(size=(4, 5))
        p["b"] = np.array([1 / 3, np.pi, 1e-300, -0.0])
        q = from_portable(to_portable(p))
        for name in p:
            np.testing.assert_array_equal(p[name], q[name])

    def test_file_roundtrip(self, tmp_path):
        p = ParameterSet()
        p["w"] = np.linspace(-1, 1, 7)
        path = tmp_path / "p.json"
        dump_params(p, path)
        q = load_params(path)
        np.testing.assert_array_equal(p["w"], q["w"])


class TestDense:
    def test_known_product(self):
        x = np.array([[1.0, 2.0]])
        W = np.array([[1.0, 0.0], [0.0, 1.0]])
        b = np.array([10.0, 20.0])
        y, _ = layers.dense(x, W, b)
        np.testing.assert_allclose(y, [[11.0, 22.0]])

    def test_gradcheck(self, rng):
        x = rng.normal(size=(4, 6))
        y = rng.integers(0, 3, size=4)
        params = ParameterSet()
        params["W"] = rng.normal(size=(6, 3)) * 0.3
        params["b"] = rng.normal(size=3) * 0.1

        def loss_fn(p):
            logits, cache = layers.dense(x, p["W"], p["b"])
            losses, probs = layers.softmax_cross_entropy(logits, y)
            dlogits = layers.softmax_cross_entropy_backward(probs, y)
            _, dW, db = layers.dense_backward(dlogits, cache)
            grads = ParameterSet()
            grads["W"] = dW
            grads["b"] = db
            return float(losses.mean()), grads

        report = gradient_check(loss_fn, params, tolerance=1e-6)
        assert report["max_error"] < 1e-6


class TestLstmCell:
    def test_forget_gate_keeps_state(self):
        # saturate the forget gate, zero input gate: c passes through
        h = 3
        x = np.zeros((1, 2))
        h_prev = np.zeros((1, h))
        c_prev = np.ones((1, h)) * 0.7
        Wx = np.zeros((2, 4 * h))
        Wh = np.zeros((h, 4 * h))
        b = np.zeros(4 * h)
        b[0:h] = -50.0     # input gate ~ 0
        b[h:2 * h] = 50.0  # forget gate ~ 1
        h_t, c_t, _ = layers.lstm_cell(x, h_prev, c_prev, Wx, Wh, b)
        np.testing.assert_allclose(c_t, c_prev, atol=1e-10)

    def test_gradcheck_single_step(self, rng):
        d, h, B = 5, 4, 3
        x = rng.normal(size=(B, d))
        target = rng.normal(size=(B, h))
        params = ParameterSet()
        params["Wx"] = rng.normal(size=(d, 4 * h)) * 0.4
        params["Wh"] = rng.normal(size=(h, 4 * h)) * 0.4
        params["b"] = rng.normal(size=4 * h) * 0.2
        h0 = rng.normal(size=(B, h)) * 0.3
        c0 = rng.normal(size=(B, h)) * 0.3

        def loss_fn(p):
            h1, c1, cache = layers.lstm_cell(x, h0, c0, p["Wx"], p["Wh"], p["b"])
            diff = h1 - target
            loss = float(0.5 * np.sum(diff * diff))
            dh = diff
            dc = np.zeros_like(c1)
            _, _, _, dWx, dWh, db = layers.lstm_cell_backward(dh, dc, cache)
            grads = ParameterSet()
            grads["Wx"] = dWx
            grads["Wh"] = dWh
            grads["b"] = db
            return loss, grads

        report = gradient_check(loss_fn, params, tolerance=1e-5)
        assert report["max_error"] < 1e-5


class TestAttention:
    def test_single_token_attends_to_itself(self, rng):
        # T=1: softmax over one score is exactly 1, so y = (x Wv + bv) Wo + bo
        d, heads = 8, 2
        x = rng.normal(size=(2, 1, d))
        Wq, Wk, Wv, Wo = (rng.normal(size=(d, d)) * 0.3 for _ in range(4))
        bq, bv, bo = (rng.normal(size=d) * 0.1 for _ in range(3))
        y, _ = layers.multi_head_attention(x, Wq, bq, Wk, Wv, bv, Wo, bo, heads)
        expected = (x @ Wv + bv) @ Wo + bo
        np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_rows_sum_to_one(self, rng):
        x = rng.normal(size=(1, 6, 8))
        scores = rng.normal(size=(1, 2, 6, 6))
        attn = layers._softmax_last(scores)
        np.testing.assert_allclose(attn.sum(axis=-1), 1.0, atol=1e-12)


class TestLayerNorm:
    def test_output_statistics(self, rng):
        x = rng.normal(3.0, 2.0, size=(5, 7, 16))
        y, _ = layers.layer_norm(x, np.ones(16), np.zeros(16))
        np.testing.assert_allclose(y.mean(axis=-1), 0.0, atol=1e-10)
        np.testing.assert_allclose(y.var(axis=-1), 1.0, atol=1e-10)

    def test_gamma_beta_scale_shift(self, rng):
        x = rng.normal(size=(3, 8))
        gamma = np.full(8, 2.0)
        beta = np.full(8, -1.0)
        y, _ = layers.layer_norm(x, gamma, beta)
        base, _ = layers.layer_norm(x, np.ones(8), np.zeros(8))
        np.testing.assert_allclose(y, base * 2.0 - 1.0, atol=1e-12)

    @given(st.lists(finite_floats, min_size=8, max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_normalization_property(self, vals):
        x = np.array([vals])
        if np.var(x) < 1e-6:
            return  # degenerate rows are dominated by eps
        y, _ = layers.layer_norm(x, np.ones(8), np.zeros(8))
        assert abs(y.mean()) < 1e-10
        assert abs(y.var() - 1.0) < 1e-10


class TestPositionalEncoding:
    def test_known_corner_values(self):
        pe = layers.positional_encoding(4, 6)
        assert pe[0, 0] == 0.0
        assert pe[0, 1] == 1.0
        assert pe[1, 0] == pytest.approx(np.sin(1.0))

    def test_columns_alternate_sin_cos(self):
        pe = layers.positional_encoding(10, 8)
        # column pairs share a frequency: sin^2 + cos^2 = 1
        for j in range(0, 8, 2):
            np.testing.assert_allclose(
                pe[:, j] ** 2 + pe[:, j + 1] ** 2, 1.0, atol=1e-12
            )

    def test_values_bounded(self):
        pe = layers.positional_encoding(50, 16)
        assert np.abs(pe).max() <= 1.0 + 1e-12


class TestSoftmaxCrossEntropy:
    def test_uniform_logits_give_ln8(self):
        logits = np.zeros((2, 8))
        losses, probs = layers.softmax_cross_entropy(logits, np.array([0, 5]))
        np.testing.assert_allclose(losses, np.log(8.0), atol=1e-12)
        np.testing.assert_allclose(probs, 1.0 / 8.0, atol=1e-12)

    def test_shift_invariance(self, rng):
        logits = rng.normal(size=(4, 8)) * 3
        y = rng.integers(0, 8, size=4)
        a, pa = layers.softmax_cross_entropy(logits, y)
        b, pb = layers.softmax_cross_entropy(logits + 1234.5, y)
        np.testing.assert_allclose(a, b, atol=1e-10)
        np.testing.assert_allclose(pa, pb, atol=1e-12)

    def test_extreme_logits_stay_finite(self):
        logits = np.array([[1e4, -1e4, 0.0, 0, 0, 0, 0, 0]])
        losses, probs = layers.softmax_cross_entropy(logits, np.array([1]))
        assert np.isfinite(losses).all() and np.isfinite(probs).all()

    @given(
        st.lists(st.lists(finite_floats, min_size=8, max_size=8), min_size=1, max_size=5),
        st.randoms(use_true_random=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_probability_simplex_property(self, rows, rnd):
        logits = np.array(rows)
        y = np.array([rnd.randrange(8) for _ in rows])
        losses, probs = layers.softmax_cross_entropy(logits, y)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert (losses >= -1e-12).all()
        assert (probs >= 0).all()

    def test_backward_mean_scaling(self, rng):
        logits = rng.normal(size=(6, 8))
        y = rng.integers(0, 8, size=6)
        _, probs = layers.softmax_cross_entropy(logits, y)
        d = layers.softmax_cross_entropy_backward(probs, y)
        # rows sum to zero and scale is 1/B
        np.testing.assert_allclose(d.sum(axis=1), 0.0, atol=1e-12)
        expected = probs.copy()
        expected[np.arange(6), y] -= 1.0
        np.testing.assert_allclose(d, expected / 6.0, atol=1e-15)


class TestAdam:
    def test_first_step_closed_form(self):
        p = ParameterSet()
        p["w"] = np.zeros(1)
        g = ParameterSet()
        g["w"] = np.ones(1)
        state = AdamState.for_params(p, lr=DEFAULT_LR)
        adam_step(p, g, state)
        # bias correction makes the first step exactly -lr * g/(|g|+eps)
        expected = -DEFAULT_LR * 1.0 / (1.0 + 1e-8)
        np.testing.assert_allclose(p["w"], expected, rtol=1e-12)

    def test_t_increments_and_moments_update(self, rng):
        p = ParameterSet()
        p["w"] = rng.normal(size=5)
        state = AdamState.for_params(p)
        for step in range(1, 4):
            g = ParameterSet()
            g["w"] = rng.normal(size=5)
            adam_step(p, g, state)
            assert state.t == step

    def test_reference_implementation_oracle(self, rng):
        # independently coded Kingma-Ba update, 20 steps
        p0 = rng.normal(size=7)
        grads = [rng.normal(size=7) for _ in range(20)]
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8

        p_ref, m, v = p0.copy(), np.zeros(7), np.zeros(7)
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mhat = m / (1 - b1**t)
            vhat = v / (1 - b2**t)
            p_ref -= lr * mhat / (np.sqrt(vhat) + eps)

        p = ParameterSet()
        p["w"] = p0.copy()
        state = AdamState.for_params(p, lr=lr, beta1=b1, beta2=b2, eps=eps)
        for g in grads:
            gs = ParameterSet()
            gs["w"] = g.copy()
            adam_step(p, gs, state)
        np.testing.assert_allclose(p["w"], p_ref, rtol=1e-12, atol=1e-15)

    def test_zero_gradient_is_a_fixed_point(self):
        p = ParameterSet()
        p["w"] = np.full(3, 0.5)
        state = AdamState.for_params(p)
        g = ParameterSet()
        g["w"] = np.zeros(3)
        adam_step(p, g, state)
        np.testing.assert_array_equal(p["w"], np.full(3, 0.5))


class TestGradientCheck:
    def test_relative_error_formula(self):
        assert relative_error(1.0, 1.0) == 0.0
        assert relative_error(0.0, 1e-9) == pytest.approx(1e-9 / 1e-8)
        assert relative_error(2.0, 1.0) == pytest.approx(0.5)

    def test_fd_step_documented(self):
        assert FD_STEP == 1e-5

    def test_detects_wrong_gradient(self, rng):
        x = rng.normal(size=(3, 4))
        params = ParameterSet()
        params["W"] = rng.normal(size=(4, 2))

        def bad_loss(p):
            loss = float(np.sum((x @ p["W"]) ** 2))
            grads = ParameterSet()
            grads["W"] = 1.7 * (2 * x.T @ (x @ p["W"]))  # deliberately scaled
            return loss, grads

        report = gradient_check(bad_loss, params, tolerance=1e-6)
        assert report["failures"]
        assert report["max_error"] > 0.1

"""Model assembly: parameter inventory, forward closed forms, gradients."""

import numpy as np
import pytest

from fedpose.errors import ConfigError, NumericalHealthError
from fedpose.models import (
    LstmConfig,
    TransformerConfig,
    build_model,
    config_from_dict,
    config_to_dict,
    default_config,
    forward_logits,
    load_checkpoint,
    loss_and_gradients,
    predict,
    predict_batch,
    save_checkpoint,
)
from fedpose.nn.gradcheck import gradient_check
from fedpose.nn.optim import AdamState, adam_step
from fedpose.pose.types import GESTURE_NAMES, GestureLabel


class TestParameterInventory:
    def test_lstm_exact_count(self):
        # 4*128*(26+128+1) + 4*128*(128+128+1) + (128*8+8)
        params = build_model("lstm", default_config("lstm"), seed=0)
        assert params.num_scalars() == 79360 + 131584 + 1032 == 211976

    def test_lstm_count_formula_small(self):
        cfg = LstmConfig(hidden=16, layers=2)
        params = build_model("lstm", cfg, seed=0)
        expected = 4 * 16 * (26 + 16 + 1) + 4 * 16 * (16 + 16 + 1) + (16 * 8 + 8)
        assert params.num_scalars() == expected

    def test_transformer_count_formula(self):
        d, ff, L = 16, 32, 2
        cfg = TransformerConfig(d_model=d, heads=2, encoder_layers=L, feedforward_dim=ff)
        params = build_model("transformer", cfg, seed=0)
        per_layer = (
            4 * d * d + 3 * d        # attention: Wq,Wk,Wv,Wo + bq,bv,bo (no key bias)
            + 2 * 2 * d              # two layer norms
            + d * ff + ff + ff * d + d
        )
        expected = (26 * d + d) + L * per_layer + (d * 8 + 8)
        assert params.num_scalars() == expected

    def test_forget_gate_bias_initialized_to_one(self):
        cfg = LstmConfig(hidden=8, layers=2)
        params = build_model("lstm", cfg, seed=0)
        for i in range(2):
            b = params[f"lstm{i}.b"]
            np.testing.assert_array_equal(b[8:16], 1.0)
            np.testing.assert_array_equal(b[:8], 0.0)
            np.testing.assert_array_equal(b[16:], 0.0)

    def test_init_deterministic_per_seed(self):
        a = build_model("lstm", LstmConfig(hidden=8), seed=5)
        b = build_model("lstm", LstmConfig(hidden=8), seed=5)
        c = build_model("lstm", LstmConfig(hidden=8), seed=6)
        assert all(np.array_equal(a[n], b[n]) for n in a)
        assert any(not np.array_equal(a[n], c[n]) for n in a)

    def test_heads_must_divide_d_model(self):
        with pytest.raises(ConfigError):
            TransformerConfig(d_model=10, heads=4)

    def test_config_dict_roundtrip(self):
        for kind in ("lstm", "transformer"):
            cfg = default_config(kind)
            assert config_from_dict(kind, config_to_dict(cfg)) == cfg


class TestForward:
    def test_logit_shape(self, rng):
        x = rng.uniform(0, 1, (3, 20, 26))
        for kind, cfg in (
            ("lstm", LstmConfig(hidden=8)),
            ("transformer", TransformerConfig(d_model=8, heads=2, encoder_layers=1, feedforward_dim=16)),
        ):
            params = build_model(kind, cfg, seed=0)
            logits = forward_logits(params, kind, cfg, x)
            assert logits.shape == (3, 8)
            assert np.isfinite(logits).all()

    def test_batch_invariance(self, rng):
        # row i of a batched forward equals forwarding row i alone
        x = rng.uniform(0, 1, (4, 20, 26))
        cfg = LstmConfig(hidden=8)
        params = build_model("lstm", cfg, seed=1)
        batched = forward_logits(params, "lstm", cfg, x)
        for i in range(4):
            single = forward_logits(params, "lstm", cfg, x[i : i + 1])
            np.testing.assert_allclose(batched[i], single[0], atol=1e-12)

    def test_uniform_logits_predict_lowest_index(self):
        # head weights zero at init would tie all classes; force that and
        # check the tie-break goes to class 0 ("down") with confidence 1/8
        cfg = LstmConfig(hidden=8)
        params = build_model("lstm", cfg, seed=0)
        params["head.W"][:] = 0.0
        params["head.b"][:] = 0.0
        label, conf = predict(params, "lstm", cfg, np.full((20, 26), 0.5))
        assert label == GestureLabel.down
        assert conf == pytest.approx(1.0 / 8.0)
        assert GESTURE_NAMES[int(label)] == "down"

    def test_predict_batch_matches_predict(self, rng):
        cfg = LstmConfig(hidden=8)
        params = build_model("lstm", cfg, seed=2)
        x = rng.uniform(0, 1, (5, 20, 26))
        labels, confs = predict_batch(params, "lstm", cfg, x)
        for i in range(5):
            lab, conf = predict(params, "lstm", cfg, x[i])
            assert int(labels[i]) == int(lab)
            assert confs[i] == pytest.approx(conf)


class TestGradients:
    def test_lstm_full_model_gradcheck(self, rng):
        cfg = LstmConfig(hidden=5, layers=2)
        params = build_model("lstm", cfg, seed=3)
        x = rng.normal(0.5, 0.2, (3, 20, 26))
        y = np.array([1, 4, 7])
        report = gradient_check(
            lambda p: loss_and_gradients(p, "lstm", cfg, x, y), params, tolerance=1e-5
        )
        assert report["max_error"] < 1e-5, report["per_param"]

    def test_transformer_full_model_gradcheck(self, rng):
        cfg = TransformerConfig(d_model=8, heads=2, encoder_layers=1, feedforward_dim=12)
        params = build_model("transformer", cfg, seed=3)
        x = rng.normal(0.5, 0.2, (3, 20, 26))
        y = np.array([1, 4, 7])
        report = gradient_check(
            lambda p: loss_and_gradients(p, "transformer", cfg, x, y),
            params, tolerance=1e-4,
        )
        assert report["max_error"] < 1e-4, report["per_param"]

    def test_nonfinite_input_raises(self):
        cfg = LstmConfig(hidden=8)
        params = build_model("lstm", cfg, seed=0)
        x = np.full((2, 20, 26), np.nan)
        with pytest.raises(NumericalHealthError):
            loss_and_gradients(params, "lstm", cfg, x, np.array([0, 1]))

    @pytest.mark.parametrize("kind,cfg", [
        ("lstm", LstmConfig(hidden=8)),
        ("transformer", TransformerConfig(d_model=8, heads=2, encoder_layers=1, feedforward_dim=16)),
    ])
    def test_ten_adam_steps_reduce_loss(self, kind, cfg, rng):
        params = build_model(kind, cfg, seed=0)
        x = rng.uniform(0, 1, (16, 20, 26))
        y = rng.integers(0, 8, 16)
        state = AdamState.for_params(params, lr=1e-2)
        first, _ = loss_and_gradients(params, kind, cfg, x, y)
        for _ in range(10):
            _, grads = loss_and_gradients(params, kind, cfg, x, y)
            adam_step(params, grads, state)
        last, _ = loss_and_gradients(params, kind, cfg, x, y)
        assert last < first


class TestCheckpoints:
    def test_roundtrip_value_exact(self, tmp_path):
        cfg = LstmConfig(hidden=8)
        params = build_model("lstm", cfg, seed=9)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, params, "lstm", cfg, 9, {"paradigm": "centralized"})
        loaded = load_checkpoint(path)
        assert loaded["kind"] == "lstm"
        assert loaded["config"] == cfg
        assert loaded["seed"] == 9
        assert loaded["provenance"] == {"paradigm": "centralized"}
        for name in params:
            np.testing.assert_array_equal(params[name], loaded["params"][name])

    def test_bad_schema_rejected(self, tmp_path):
        path = tmp_path / "ckpt.json"
        path.write_text('{"schema": "other/9"}', encoding="utf-8")
        with pytest.raises(ConfigError):
            load_checkpoint(path)

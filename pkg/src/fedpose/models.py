"""The two window classifiers, assembled from the nn primitives.

Both expose the same surface: build -> forward_logits -> loss/grads ->
predict, over (B, 20, 26) pose windows.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from fedpose.errors import ConfigError, NumericalHealthError
from fedpose.nn import layers
from fedpose.nn.params import GradientSet, ParameterSet, from_portable, to_portable
from fedpose.pose.types import FRAME_DIM, NUM_CLASSES, WINDOW_LEN, GestureLabel

MODEL_KINDS = ("lstm", "transformer")


@dataclass(frozen=True)
class LstmConfig:
    input_dim: int = FRAME_DIM
    hidden: int = 128
    layers: int = 2
    classes: int = NUM_CLASSES


@dataclass(frozen=True)
class TransformerConfig:
    input_dim: int = FRAME_DIM
    d_model: int = 128
    heads: int = 4
    encoder_layers: int = 4
    feedforward_dim: int = 256
    classes: int = NUM_CLASSES

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ConfigError(
                f"heads ({self.heads}) must divide d_model ({self.d_model})"
            )


def default_config(kind: str):
    if kind == "lstm":
        return LstmConfig()
    if kind == "transformer":
        return TransformerConfig()
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def config_to_dict(config) -> dict:
    return asdict(config)


def config_from_dict(kind: str, d: dict):
    if kind == "lstm":
        return LstmConfig(**d)
    if kind == "transformer":
        return TransformerConfig(**d)
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# ---------------------------------------------------------------------------
# initialization


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _recurrent_uniform(rng, rows, hidden):
    limit = 1.0 / np.sqrt(hidden)
    return rng.uniform(-limit, limit, size=(rows, 4 * hidden))


def build_model(kind: str, config=None, seed: int = 0) -> ParameterSet:
    """Deterministic init; parameter names encode layer and role."""
    from fedpose.seeding import derive_rng

    if config is None:
        config = default_config(kind)
    rng = derive_rng(seed, "init", kind)
    params = ParameterSet()

    if kind == "lstm":
        in_dim = config.input_dim
        for layer in range(config.layers):
            h = config.hidden
            params[f"lstm{layer}.Wx"] = _recurrent_uniform(rng, in_dim, h)
            params[f"lstm{layer}.Wh"] = _recurrent_uniform(rng, h, h)
            b = np.zeros(4 * h)
            b[h : 2 * h] = 1.0  # forget-gate bias opens the memory path early
            params[f"lstm{layer}.b"] = b
            in_dim = h
        params["head.W"] = _glorot(rng, config.hidden, config.classes)
        params["head.b"] = np.zeros(config.classes)
        return params

    if kind == "transformer":
        d, ff = config.d_model, config.feedforward_dim
        params["input.W"] = _glorot(rng, config.input_dim, d)
        params["input.b"] = np.zeros(d)
        for i in range(config.encoder_layers):
            for role in ("Wq", "Wk", "Wv", "Wo"):
                params[f"enc{i}.attn.{role}"] = _glorot(rng, d, d)
            for role in ("bq", "bv", "bo"):
                params[f"enc{i}.attn.{role}"] = np.zeros(d)
            params[f"enc{i}.ln1.gamma"] = np.ones(d)
            params[f"enc{i}.ln1.beta"] = np.zeros(d)
            params[f"enc{i}.ffn.W1"] = _glorot(rng, d, ff)
            params[f"enc{i}.ffn.b1"] = np.zeros(ff)
            params[f"enc{i}.ffn.W2"] = _glorot(rng, ff, d)
            params[f"enc{i}.ffn.b2"] = np.zeros(d)
            params[f"enc{i}.ln2.gamma"] = np.ones(d)
            params[f"enc{i}.ln2.beta"] = np.zeros(d)
        params["head.W"] = _glorot(rng, d, config.classes)
        params["head.b"] = np.zeros(config.classes)
        return params

    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# ---------------------------------------------------------------------------
# forward / backward


def _as_batch(batch) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        x = batch
    else:
        from fedpose.pose.types import stack_windows

        x, _ = stack_windows(batch)
    if x.ndim == 2:
        x = x[None, :, :]
    return np.ascontiguousarray(x, dtype=np.float64)


def _lstm_forward(params, config, x):
    caches = []
    inp = x
    for layer in range(config.layers):
        h_seq, layer_cache = layers.lstm_layer(
            inp, params[f"lstm{layer}.Wx"], params[f"lstm{layer}.Wh"],
            params[f"lstm{layer}.b"],
        )
        caches.append(layer_cache)
        inp = h_seq
    final_h = np.ascontiguousarray(inp[:, -1, :])
    logits, head_cache = layers.dense(final_h, params["head.W"], params["head.b"])
    return logits, (caches, head_cache, inp.shape)


def _lstm_backward(params, config, dlogits, cache):
    caches, head_cache, top_shape = cache
    grads = GradientSet()
    dfinal_h, dW, db = layers.dense_backward(dlogits, head_cache)
    grads["head.W"] = dW
    grads["head.b"] = db
    # classifier reads only the last timestep of the top layer
    dh_seq = np.zeros(top_shape)
    dh_seq[:, -1, :] = dfinal_h
    layer_grads = {}
    for layer in range(config.layers - 1, -1, -1):
        dx, dWx, dWh, dbl = layers.lstm_layer_backward(dh_seq, caches[layer])
        layer_grads[layer] = (dWx, dWh, dbl)
        dh_seq = dx
    out = GradientSet()
    for layer in range(config.layers):
        dWx, dWh, dbl = layer_grads[layer]
        out[f"lstm{layer}.Wx"] = dWx
        out[f"lstm{layer}.Wh"] = dWh
        out[f"lstm{layer}.b"] = dbl
    out["head.W"] = grads["head.W"]
    out["head.b"] = grads["head.b"]
    return out


def _transformer_forward(params, config, x):
    B, T, _ = x.shape
    proj, input_cache = layers.dense(x, params["input.W"], params["input.b"])
    h = proj + layers.positional_encoding(T, config.d_model)[None, :, :]
    enc_caches = []
    for i in range(config.encoder_layers):
        p = f"enc{i}"
        attn_out, attn_cache = layers.multi_head_attention(
            h,
            params[f"{p}.attn.Wq"], params[f"{p}.attn.bq"],
            params[f"{p}.attn.Wk"],
            params[f"{p}.attn.Wv"], params[f"{p}.attn.bv"],
            params[f"{p}.attn.Wo"], params[f"{p}.attn.bo"],
            config.heads,
        )
        ln1_out, ln1_cache = layers.layer_norm(
            h + attn_out, params[f"{p}.ln1.gamma"], params[f"{p}.ln1.beta"]
        )
        ff1, ff1_cache = layers.dense(ln1_out, params[f"{p}.ffn.W1"], params[f"{p}.ffn.b1"])
        act, relu_cache = layers.relu(ff1)
        ff2, ff2_cache = layers.dense(act, params[f"{p}.ffn.W2"], params[f"{p}.ffn.b2"])
        h, ln2_cache = layers.layer_norm(
            ln1_out + ff2, params[f"{p}.ln2.gamma"], params[f"{p}.ln2.beta"]
        )
        enc_caches.append((attn_cache, ln1_cache, ff1_cache, relu_cache, ff2_cache, ln2_cache))
    pooled = h.mean(axis=1)
    logits, head_cache = layers.dense(pooled, params["head.W"], params["head.b"])
    return logits, (input_cache, enc_caches, head_cache, T)


def _transformer_backward(params, config, dlogits, cache):
    input_cache, enc_caches, head_cache, T = cache
    grads = GradientSet()
    dpooled, dW, db = layers.dense_backward(dlogits, head_cache)
    dh = np.repeat(dpooled[:, None, :] / T, T, axis=1)
    for i in range(config.encoder_layers - 1, -1, -1):
        p = f"enc{i}"
        attn_cache, ln1_cache, ff1_cache, relu_cache, ff2_cache, ln2_cache = enc_caches[i]
        dres2, dg2, db2 = layers.layer_norm_backward(dh, ln2_cache)
        grads[f"{p}.ln2.gamma"] = dg2
        grads[f"{p}.ln2.beta"] = db2
        dff2 = dres2
        dact, dW2, db_w2 = layers.dense_backward(dff2, ff2_cache)
        grads[f"{p}.ffn.W2"] = dW2
        grads[f"{p}.ffn.b2"] = db_w2
        dff1 = layers.relu_backward(dact, relu_cache)
        dln1_ffn, dW1, db_w1 = layers.dense_backward(dff1, ff1_cache)
        grads[f"{p}.ffn.W1"] = dW1
        grads[f"{p}.ffn.b1"] = db_w1
        dln1 = dres2 + dln1_ffn
        dres1, dg1, db_g1 = layers.layer_norm_backward(dln1, ln1_cache)
        grads[f"{p}.ln1.gamma"] = dg1
        grads[f"{p}.ln1.beta"] = db_g1
        dattn = dres1
        dx_attn, dWq, dbq, dWk, dWv, dbv, dWo, dbo = (
            layers.multi_head_attention_backward(dattn, attn_cache)
        )
        grads[f"{p}.attn.Wq"] = dWq
        grads[f"{p}.attn.bq"] = dbq
        grads[f"{p}.attn.Wk"] = dWk
        grads[f"{p}.attn.Wv"] = dWv
        grads[f"{p}.attn.bv"] = dbv
        grads[f"{p}.attn.Wo"] = dWo
        grads[f"{p}.attn.bo"] = dbo
        dh = dres1 + dx_attn
    dproj = dh  # positional encoding is parameter-free
    _, dWin, dbin = layers.dense_backward(dproj, input_cache)
    out = GradientSet()
    out["input.W"] = dWin
    out["input.b"] = dbin
    for i in range(config.encoder_layers):
        p = f"enc{i}"
        # same insertion order as build_model: weights first, then biases
        for role in ("Wq", "Wk", "Wv", "Wo", "bq", "bv", "bo"):
            out[f"{p}.attn.{role}"] = grads[f"{p}.attn.{role}"]
        out[f"{p}.ln1.gamma"] = grads[f"{p}.ln1.gamma"]
        out[f"{p}.ln1.beta"] = grads[f"{p}.ln1.beta"]
        out[f"{p}.ffn.W1"] = grads[f"{p}.ffn.W1"]
        out[f"{p}.ffn.b1"] = grads[f"{p}.ffn.b1"]
        out[f"{p}.ffn.W2"] = grads[f"{p}.ffn.W2"]
        out[f"{p}.ffn.b2"] = grads[f"{p}.ffn.b2"]
        out[f"{p}.ln2.gamma"] = grads[f"{p}.ln2.gamma"]
        out[f"{p}.ln2.beta"] = grads[f"{p}.ln2.beta"]
    out["head.W"] = dW
    out["head.b"] = db
    return out


def forward_logits(params: ParameterSet, kind: str, config, batch) -> np.ndarray:
    """Logits (B, classes) for a batch of windows or a (B, 20, 26) array."""
    x = _as_batch(batch)
    if kind == "lstm":
        return _lstm_forward(params, config, x)[0]
    if kind == "transformer":
        return _transformer_forward(params, config, x)[0]
    raise ConfigError(f"unknown model kind {kind!r}")


def loss_and_gradients(params, kind, config, batch, labels=None):
    """Mean cross-entropy over the batch plus gradients for every parameter."""
    if labels is None:
        from fedpose.pose.types import stack_windows

        x, y = stack_windows(batch)
    else:
        x, y = _as_batch(batch), np.asarray(labels, dtype=np.int64)
    if kind == "lstm":
        logits, cache = _lstm_forward(params, config, x)
    elif kind == "transformer":
        logits, cache = _transformer_forward(params, config, x)
    else:
        raise ConfigError(f"unknown model kind {kind!r}")

    losses, probs = layers.softmax_cross_entropy(logits, y)
    loss = float(losses.mean())
    if not np.isfinite(loss):
        raise NumericalHealthError("non-finite training loss")
    dlogits = layers.softmax_cross_entropy_backward(probs, y)
    if kind == "lstm":
        grads = _lstm_backward(params, config, dlogits, cache)
    else:
        grads = _transformer_backward(params, config, dlogits, cache)
    return loss, grads


def predict(params, kind, config, window):
    """(label, confidence) for one window; argmax ties go to the lowest index."""
    x = _as_batch(window)
    logits = forward_logits(params, kind, config, x)
    _, probs = layers.softmax_cross_entropy(logits, np.zeros(len(x), dtype=np.int64))
    idx = int(np.argmax(probs[0]))
    return GestureLabel(idx), float(probs[0, idx])


def predict_batch(params, kind, config, x: np.ndarray):
    """(labels (B,), confidences (B,)) for a stacked batch."""
    logits = forward_logits(params, kind, config, x)
    _, probs = layers.softmax_cross_entropy(logits, np.zeros(len(x), dtype=np.int64))
    labels = probs.argmax(axis=1)
    return labels, probs[np.arange(len(x)), labels]


def window_shape_ok(x: np.ndarray) -> bool:
    return x.ndim == 3 and x.shape[1] == WINDOW_LEN and x.shape[2] == FRAME_DIM


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_SCHEMA = "fedpose-checkpoint/1"


def save_checkpoint(path, params: ParameterSet, kind: str, config, seed: int, provenance: dict) -> None:
    """Weights plus the header needed to rebuild and audit the model."""
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "kind": kind,
        "config": config_to_dict(config),
        "seed": seed,
        "provenance": provenance,
        "params": to_portable(params),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> dict:
    """Inverse of save_checkpoint; 'config' comes back as the dataclass."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema") != CHECKPOINT_SCHEMA:
        raise ConfigError(
            f"unsupported checkpoint schema {payload.get('schema')!r} in {path}"
        )
    kind = payload["kind"]
    return {
        "kind": kind,
        "config": config_from_dict(kind, payload["config"]),
        "seed": payload["seed"],
        "provenance": payload.get("provenance", {}),
        "params": from_portable(payload["params"]),
    }

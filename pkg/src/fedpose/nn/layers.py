"""Layer primitives with paired exact analytic backward passes.

Everything is float64. Matrix products go through numpy/BLAS; the
elementwise-bound chains (LSTM gates, softmax cross-entropy) go through
the selected kernel backend.
"""

from __future__ import annotations

import numpy as np

from fedpose.errors import DimensionError
from fedpose.nn import kernels

LAYER_NORM_EPS = 1e-12  # float64 headroom; keeps pre-scale variance at 1


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DimensionError(msg)


# ---------------------------------------------------------------------------
# dense


def dense(x, W, b):
    """y = x @ W + b over the last axis; returns (y, cache)."""
    _require(x.shape[-1] == W.shape[0], f"dense: input {x.shape} vs W {W.shape}")
    _require(W.shape[1] == b.shape[0], f"dense: W {W.shape} vs b {b.shape}")
    return x @ W + b, (x, W)


def dense_backward(dy, cache):
    """Returns (dx, dW, db)."""
    x, W = cache
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dW = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = dy @ W.T
    return dx, dW, db


def relu(x):
    return np.maximum(x, 0.0), (x > 0.0)


def relu_backward(dy, mask):
    return dy * mask


# ---------------------------------------------------------------------------
# LSTM

# Gate block layout within the 4H axis: [input | forget | cell | output].


def lstm_cell(x_t, h_prev, c_prev, Wx, Wh, b):
    """One LSTM step; returns (h_t, c_t, cache)."""
    H = h_prev.shape[-1]
    _require(Wx.shape == (x_t.shape[-1], 4 * H), f"lstm: Wx {Wx.shape} for H={H}")
    _require(Wh.shape == (H, 4 * H), f"lstm: Wh {Wh.shape} for H={H}")
    gates = x_t @ Wx + h_prev @ Wh + b
    gates = np.ascontiguousarray(gates)
    c_t = np.empty_like(c_prev)
    h_t = np.empty_like(h_prev)
    tanh_c = np.empty_like(c_prev)
    kernels.lstm_pointwise_forward(gates, c_prev, c_t, h_t, tanh_c)
    cache = (x_t, h_prev, c_prev, gates, tanh_c, Wx, Wh)
    return h_t, c_t, cache


def lstm_cell_backward(dh, dc, cache):
    """Backward of one step; returns (dx, dh_prev, dc_prev, dWx, dWh, db)."""
    x_t, h_prev, c_prev, act_gates, tanh_c, Wx, Wh = cache
    dgates = np.empty_like(act_gates)
    dc_prev = np.empty_like(c_prev)
    kernels.lstm_pointwise_backward(
        act_gates, c_prev, tanh_c, np.ascontiguousarray(dh),
        np.ascontiguousarray(dc), dgates, dc_prev,
    )
    dx = dgates @ Wx.T
    dh_prev = dgates @ Wh.T
    dWx = x_t.T @ dgates
    dWh = h_prev.T @ dgates
    db = dgates.sum(axis=0)
    return dx, dh_prev, dc_prev, dWx, dWh, db


def lstm_layer(x, Wx, Wh, b):
    """Unroll over time: x (B, T, in) -> h_seq (B, T, H); zero initial state."""
    B, T, _ = x.shape
    H = Wh.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    h_seq = np.empty((B, T, H))
    caches = []
    for t in range(T):
        h, c, cache = lstm_cell(np.ascontiguousarray(x[:, t, :]), h, c, Wx, Wh, b)
        h_seq[:, t, :] = h
        caches.append(cache)
    return h_seq, caches


def lstm_layer_backward(dh_seq, caches):
    """BPTT over the unrolled layer.

    dh_seq carries the gradient w.r.t. every timestep's hidden output
    (zeros where unused). Returns (dx (B,T,in), dWx, dWh, db).
    """
    T = len(caches)
    x0, h0, c0, _, _, Wx, Wh = caches[0]
    B, H = h0.shape
    dx = np.empty((B, T, x0.shape[-1]))
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh_next + dh_seq[:, t, :]
        dxt, dh_next, dc_next, dWx_t, dWh_t, db_t = lstm_cell_backward(
            dh, dc_next, caches[t]
        )
        dx[:, t, :] = dxt
        dWx += dWx_t
        dWh += dWh_t
        db += db_t
    return dx, dWx, dWh, db


# ---------------------------------------------------------------------------
# attention / transformer pieces


def _softmax_last(x):
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def multi_head_attention(x, Wq, bq, Wk, Wv, bv, Wo, bo, heads):
    """Full self-attention over x (B, T, d); returns (y, cache).

    The key projection has no bias: a shared key offset adds the same
    constant to every score in a query row, softmax cancels it, and its
    gradient is identically zero, so the parameter could never train.
    """
    B, T, d = x.shape
    _require(d % heads == 0, f"attention: heads={heads} must divide d={d}")
    dh = d // heads

    q, _ = dense(x, Wq, bq)
    k = x @ Wk
    v, _ = dense(x, Wv, bv)

    def split(z):  # (B, T, d) -> (B, heads, T, dh)
        return z.reshape(B, T, heads, dh).transpose(0, 2, 1, 3)

    qh, kh, vh = split(q), split(k), split(v)
    scale = 1.0 / np.sqrt(dh)
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    attn = _softmax_last(scores)
    ctx = attn @ vh  # (B, heads, T, dh)
    merged = ctx.transpose(0, 2, 1, 3).reshape(B, T, d)
    y, _ = dense(merged, Wo, bo)
    cache = (x, qh, kh, vh, attn, merged, Wq, Wk, Wv, Wo, scale, heads)
    return y, cache


def multi_head_attention_backward(dy, cache):
    """Returns (dx, dWq, dbq, dWk, dWv, dbv, dWo, dbo)."""
    x, qh, kh, vh, attn, merged, Wq, Wk, Wv, Wo, scale, heads = cache
    B, T, d = x.shape
    dh = d // heads

    dmerged, dWo, dbo = dense_backward(dy, (merged, Wo))
    dctx = dmerged.reshape(B, T, heads, dh).transpose(0, 2, 1, 3)

    dattn = dctx @ vh.transpose(0, 1, 3, 2)
    dvh = attn.transpose(0, 1, 3, 2) @ dctx
    # softmax backward along the key axis
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dscores *= scale
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 1, 3, 2) @ qh

    def merge(zh):  # (B, heads, T, dh) -> (B, T, d)
        return zh.transpose(0, 2, 1, 3).reshape(B, T, d)

    dq, dk, dv = merge(dqh), merge(dkh), merge(dvh)
    dx_q, dWq, dbq = dense_backward(dq, (x, Wq))
    dx_k, dWk, _ = dense_backward(dk, (x, Wk))
    dx_v, dWv, dbv = dense_backward(dv, (x, Wv))
    dx = dx_q + dx_k + dx_v
    return dx, dWq, dbq, dWk, dWv, dbv, dWo, dbo


def layer_norm(x, gamma, beta, eps=LAYER_NORM_EPS):
    """Normalize the last axis to zero mean / unit variance, then scale-shift."""
    _require(x.shape[-1] == gamma.shape[0] == beta.shape[0],
             f"layer_norm: x {x.shape} vs gamma {gamma.shape}")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gamma + beta
    return y, (xhat, inv, gamma)


def layer_norm_backward(dy, cache):
    """Returns (dx, dgamma, dbeta)."""
    xhat, inv, gamma = cache
    d = xhat.shape[-1]
    dgamma = (dy * xhat).reshape(-1, d).sum(axis=0)
    dbeta = dy.reshape(-1, d).sum(axis=0)
    dxhat = dy * gamma
    dx = (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    ) * inv
    return dx, dgamma, dbeta


def positional_encoding(T, d):
    """Fixed sinusoidal table (T, d): sin on even, cos on odd columns."""
    pos = np.arange(T, dtype=np.float64)[:, None]
    i = np.arange(0, d, 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, i / d)
    pe = np.zeros((T, d))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : pe[:, 1::2].shape[1]])
    return pe


# ---------------------------------------------------------------------------
# loss


def softmax_cross_entropy(logits, labels):
    """Per-sample cross-entropy with max-subtracted softmax.

    Returns (losses (B,), probs (B, C)); backward closes over probs.
    """
    _require(logits.ndim == 2, f"softmax: expected 2-D logits, got {logits.shape}")
    _require(labels.shape[0] == logits.shape[0],
             f"softmax: {labels.shape[0]} labels for {logits.shape[0]} rows")
    logits = np.ascontiguousarray(logits)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    probs = np.empty_like(logits)
    losses = np.empty(logits.shape[0])
    kernels.softmax_xent_forward(logits, labels, probs, losses)
    return losses, probs


def softmax_cross_entropy_backward(probs, labels, scale=None):
    """d(loss)/d(logits); `scale` defaults to 1/B for a mean-loss objective."""
    B = probs.shape[0]
    if scale is None:
        scale = 1.0 / B
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits *= scale
    return dlogits

"""Pure-numpy reference implementation of the hot kernels.

Semantically identical to the native extension; used as the fallback
backend and as the ground truth in backend-parity tests. All functions
write into caller-provided output arrays.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _sigmoid(x):
    # exp of the negated magnitude only: stable for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_pointwise_forward(gates, c_prev, c_new, h_new, tanh_c):
    """Gate nonlinearities + cell update for one timestep.

    `gates` holds the four pre-activation blocks [i | f | g | o] of shape
    (B, 4H) and is overwritten with the activated gates (kept for the
    backward pass).
    """
    H = c_prev.shape[1]
    i = _sigmoid(gates[:, 0:H])
    f = _sigmoid(gates[:, H : 2 * H])
    g = np.tanh(gates[:, 2 * H : 3 * H])
    o = _sigmoid(gates[:, 3 * H : 4 * H])
    gates[:, 0:H] = i
    gates[:, H : 2 * H] = f
    gates[:, 2 * H : 3 * H] = g
    gates[:, 3 * H : 4 * H] = o
    np.multiply(f, c_prev, out=c_new)
    c_new += i * g
    np.tanh(c_new, out=tanh_c)
    np.multiply(o, tanh_c, out=h_new)


def lstm_pointwise_backward(act_gates, c_prev, tanh_c, dh, dc, dgates, dc_prev):
    """Backward of lstm_pointwise_forward.

    `dc` carries the incoming cell-state gradient (from the next
    timestep); `dgates` receives pre-activation gate gradients and
    `dc_prev` the gradient w.r.t. the previous cell state.
    """
    H = c_prev.shape[1]
    i = act_gates[:, 0:H]
    f = act_gates[:, H : 2 * H]
    g = act_gates[:, 2 * H : 3 * H]
    o = act_gates[:, 3 * H : 4 * H]

    dc_total = dc + dh * o * (1.0 - tanh_c * tanh_c)
    dgates[:, 0:H] = dc_total * g * i * (1.0 - i)
    dgates[:, H : 2 * H] = dc_total * c_prev * f * (1.0 - f)
    dgates[:, 2 * H : 3 * H] = dc_total * i * (1.0 - g * g)
    dgates[:, 3 * H : 4 * H] = dh * tanh_c * o * (1.0 - o)
    np.multiply(dc_total, f, out=dc_prev)


def adam_update(p, g, m, v, lr, beta1, beta2, eps, t):
    """Bias-corrected Adam step, in place on flat float64 views."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def softmax_xent_forward(logits, labels, probs, losses):
    """Row-wise stable softmax plus per-sample cross-entropy."""
    m = logits.max(axis=1, keepdims=True)
    np.exp(logits - m, out=probs)
    s = probs.sum(axis=1, keepdims=True)
    probs /= s
    rows = np.arange(logits.shape[0])
    losses[:] = np.log(s[:, 0]) - (logits[rows, labels] - m[:, 0])

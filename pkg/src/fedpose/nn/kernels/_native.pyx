# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Fused C kernels for the elementwise-bound inner loops.

Matmuls stay in BLAS via numpy; these kernels fuse the nonlinearity /
state-update chains that would otherwise allocate a pile of numpy
temporaries per timestep and per optimizer step.
"""

from libc.math cimport exp, log, sqrt, tanh

BACKEND_NAME = "native"


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def lstm_pointwise_forward(double[:, ::1] gates, double[:, ::1] c_prev,
                           double[:, ::1] c_new, double[:, ::1] h_new,
                           double[:, ::1] tanh_c):
    """Gate nonlinearities + cell update; activates `gates` in place."""
    cdef Py_ssize_t B = c_prev.shape[0]
    cdef Py_ssize_t H = c_prev.shape[1]
    cdef Py_ssize_t b, j
    cdef double i, f, g, o, c
    with nogil:
        for b in range(B):
            for j in range(H):
                i = _sigmoid(gates[b, j])
                f = _sigmoid(gates[b, H + j])
                g = tanh(gates[b, 2 * H + j])
                o = _sigmoid(gates[b, 3 * H + j])
                gates[b, j] = i
                gates[b, H + j] = f
                gates[b, 2 * H + j] = g
                gates[b, 3 * H + j] = o
                c = f * c_prev[b, j] + i * g
                c_new[b, j] = c
                tanh_c[b, j] = tanh(c)
                h_new[b, j] = o * tanh_c[b, j]


def lstm_pointwise_backward(double[:, ::1] act_gates, double[:, ::1] c_prev,
                            double[:, ::1] tanh_c, double[:, ::1] dh,
                            double[:, ::1] dc, double[:, ::1] dgates,
                            double[:, ::1] dc_prev):
    """Backward of the fused cell update; emits pre-activation gate grads."""
    cdef Py_ssize_t B = c_prev.shape[0]
    cdef Py_ssize_t H = c_prev.shape[1]
    cdef Py_ssize_t b, j
    cdef double i, f, g, o, tc, dct
    with nogil:
        for b in range(B):
            for j in range(H):
                i = act_gates[b, j]
                f = act_gates[b, H + j]
                g = act_gates[b, 2 * H + j]
                o = act_gates[b, 3 * H + j]
                tc = tanh_c[b, j]
                dct = dc[b, j] + dh[b, j] * o * (1.0 - tc * tc)
                dgates[b, j] = dct * g * i * (1.0 - i)
                dgates[b, H + j] = dct * c_prev[b, j] * f * (1.0 - f)
                dgates[b, 2 * H + j] = dct * i * (1.0 - g * g)
                dgates[b, 3 * H + j] = dh[b, j] * tc * o * (1.0 - o)
                dc_prev[b, j] = dct * f


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps, long t):
    """Bias-corrected Adam step fused into one pass, in place."""
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t k
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef double gk
    with nogil:
        for k in range(n):
            gk = g[k]
            m[k] = beta1 * m[k] + (1.0 - beta1) * gk
            v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk
            p[k] -= lr * (m[k] / c1) / (sqrt(v[k] / c2) + eps)


def softmax_xent_forward(double[:, ::1] logits, long[::1] labels,
                         double[:, ::1] probs, double[::1] losses):
    """Row-wise stable softmax plus per-sample cross-entropy."""
    cdef Py_ssize_t B = logits.shape[0]
    cdef Py_ssize_t C = logits.shape[1]
    cdef Py_ssize_t b, j
    cdef double mx, s
    with nogil:
        for b in range(B):
            mx = logits[b, 0]
            for j in range(1, C):
                if logits[b, j] > mx:
                    mx = logits[b, j]
            s = 0.0
            for j in range(C):
                probs[b, j] = exp(logits[b, j] - mx)
                s += probs[b, j]
            for j in range(C):
                probs[b, j] /= s
            losses[b] = log(s) - (logits[b, labels[b]] - mx)

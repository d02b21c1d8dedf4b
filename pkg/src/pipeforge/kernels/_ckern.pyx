# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Signatures and arithmetic mirror kernels._pure; the test suite pins the two
backends together (exact for puct_argmax, 1e-10 for the forward pass, 1e-6
for fitted SGD weights).  The splitmix64 shuffle must stay bit-identical to
pipeforge.rng.
"""

from libc.math cimport exp, sqrt, tanh

import numpy as np


cdef inline double _sig(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline unsigned long long _sm64_next(unsigned long long* state) noexcept nogil:
    state[0] = state[0] + 0x9E3779B97F4A7C15ULL
    cdef unsigned long long z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def forward_single(
    long long[::1] slots,
    double[::1] ctx,
    unsigned char[::1] legal,
    double[:, ::1] embed,
    double[:, ::1] w_ctx,
    double[::1] b_ctx,
    double[:, ::1] w_z,
    double[:, ::1] u_z,
    double[::1] b_z,
    double[:, ::1] w_r,
    double[:, ::1] u_r,
    double[::1] b_r,
    double[:, ::1] w_h,
    double[:, ::1] u_h,
    double[::1] b_h,
    double[:, ::1] w_pol,
    double[::1] b_pol,
    double[::1] w_val,
    object b_val,
):
    """Single-state GRU forward + masked softmax + sigmoid value."""
    cdef Py_ssize_t L = slots.shape[0]
    cdef Py_ssize_t hdim = b_ctx.shape[0]
    cdef Py_ssize_t d = embed.shape[1]
    cdef Py_ssize_t a_dim = b_pol.shape[0]
    cdef Py_ssize_t cdim = ctx.shape[0]
    cdef double bv = float(np.asarray(b_val).reshape(-1)[0])

    h_np = np.empty(hdim, dtype=np.float64)
    hn_np = np.empty(hdim, dtype=np.float64)
    z_np = np.empty(hdim, dtype=np.float64)
    r_np = np.empty(hdim, dtype=np.float64)
    probs_np = np.zeros(a_dim, dtype=np.float64)
    cdef double[::1] h = h_np
    cdef double[::1] h_new = hn_np
    cdef double[::1] zg = z_np
    cdef double[::1] rg = r_np
    cdef double[::1] probs = probs_np

    cdef Py_ssize_t i, j, t, slot
    cdef double acc, az, ar, ah, hb, m, total, v_raw, value

    with nogil:
        for i in range(hdim):
            acc = b_ctx[i]
            for j in range(cdim):
                acc += w_ctx[i, j] * ctx[j]
            h[i] = tanh(acc)

        for t in range(L):
            slot = slots[t]
            for i in range(hdim):
                az = b_z[i]
                ar = b_r[i]
                for j in range(d):
                    az += w_z[i, j] * embed[slot, j]
                    ar += w_r[i, j] * embed[slot, j]
                for j in range(hdim):
                    az += u_z[i, j] * h[j]
                    ar += u_r[i, j] * h[j]
                zg[i] = _sig(az)
                rg[i] = _sig(ar)
            for i in range(hdim):
                ah = b_h[i]
                for j in range(d):
                    ah += w_h[i, j] * embed[slot, j]
                for j in range(hdim):
                    ah += u_h[i, j] * (rg[j] * h[j])
                hb = tanh(ah)
                h_new[i] = (1.0 - zg[i]) * h[i] + zg[i] * hb
            for i in range(hdim):
                h[i] = h_new[i]

        m = -1e308
        for i in range(a_dim):
            acc = b_pol[i]
            for j in range(hdim):
                acc += w_pol[i, j] * h[j]
            probs[i] = acc
            if legal[i] and acc > m:
                m = acc
        total = 0.0
        for i in range(a_dim):
            if legal[i]:
                probs[i] = exp(probs[i] - m)
                total += probs[i]
            else:
                probs[i] = 0.0
        for i in range(a_dim):
            probs[i] /= total

        v_raw = bv
        for j in range(hdim):
            v_raw += w_val[j] * h[j]
        value = _sig(v_raw)

    return probs_np, float(value)


def puct_argmax(double[::1] q, double[::1] p, double[::1] n_sa, double n_s, double c):
    """Index maximizing Q + c*P*sqrt(N(s))/(1+N(s,a)); first maximum wins."""
    cdef Py_ssize_t k = q.shape[0]
    cdef double sqrt_ns = sqrt(n_s)
    cdef double best = -1e308
    cdef double score
    cdef Py_ssize_t i, best_i = 0
    for i in range(k):
        score = q[i] + (c * p[i]) * (sqrt_ns / (1.0 + n_sa[i]))
        if score > best:
            best = score
            best_i = i
    return best_i


def sgd_fit_logistic(
    double[:, ::1] x,
    double[::1] y,
    int epochs,
    double lr0,
    double decay,
    double l2,
    object seed,
):
    """Per-sample SGD on log loss; splitmix64-shuffled epochs, decaying eta."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t k = x.shape[1]
    w_np = np.zeros(k, dtype=np.float64)
    order_np = np.arange(m, dtype=np.int64)
    cdef double[::1] w = w_np
    cdef long long[::1] order = order_np
    cdef double b = 0.0
    cdef unsigned long long state = <unsigned long long>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned long long zr
    cdef Py_ssize_t ep, ii, i, j, jj
    cdef long long tmp
    cdef double lr, zv, pred, g
    cdef long t = 0

    with nogil:
        for ep in range(epochs):
            for ii in range(m - 1, 0, -1):
                zr = _sm64_next(&state)
                jj = <Py_ssize_t>(zr % <unsigned long long>(ii + 1))
                tmp = order[ii]
                order[ii] = order[jj]
                order[jj] = tmp
            for ii in range(m):
                i = <Py_ssize_t>order[ii]
                lr = lr0 / (1.0 + decay * t)
                t += 1
                zv = b
                for j in range(k):
                    zv += w[j] * x[i, j]
                if zv > 500.0:
                    zv = 500.0
                elif zv < -500.0:
                    zv = -500.0
                pred = 1.0 / (1.0 + exp(-zv))
                g = pred - y[i]
                for j in range(k):
                    w[j] -= lr * (g * x[i, j] + l2 * w[j])
                b -= lr * g
    return w_np, float(b)


def sgd_fit_squared(
    double[:, ::1] x,
    double[::1] y,
    int epochs,
    double lr0,
    double decay,
    double l2,
    object seed,
):
    """Per-sample SGD on squared loss; identical shuffling/decay scheme."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t k = x.shape[1]
    w_np = np.zeros(k, dtype=np.float64)
    order_np = np.arange(m, dtype=np.int64)
    cdef double[::1] w = w_np
    cdef long long[::1] order = order_np
    cdef double b = 0.0
    cdef unsigned long long state = <unsigned long long>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned long long zr
    cdef Py_ssize_t ep, ii, i, j, jj
    cdef long long tmp
    cdef double lr, g
    cdef long t = 0

    with nogil:
        for ep in range(epochs):
            for ii in range(m - 1, 0, -1):
                zr = _sm64_next(&state)
                jj = <Py_ssize_t>(zr % <unsigned long long>(ii + 1))
                tmp = order[ii]
                order[ii] = order[jj]
                order[jj] = tmp
            for ii in range(m):
                i = <Py_ssize_t>order[ii]
                lr = lr0 / (1.0 + decay * t)
                t += 1
                g = b - y[i]
                for j in range(k):
                    g += w[j] * x[i, j]
                for j in range(k):
                    w[j] -= lr * (g * x[i, j] + l2 * w[j])
                b -= lr * g
    return w_np, float(b)

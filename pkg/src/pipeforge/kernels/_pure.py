"""numpy fallback implementations of the hot kernels.

Signatures mirror the compiled extension exactly; the test suite pins both
backends together numerically.
"""

from __future__ import annotations

import numpy as np

from ..rng import shuffle_in_place


def forward_single(
    slots, ctx, legal_u8,
    embed, w_ctx, b_ctx,
    w_z, u_z, b_z,
    w_r, u_r, b_r,
    w_h, u_h, b_h,
    w_pol, b_pol, w_val, b_val,
):
    """Single-state GRU forward + masked softmax + sigmoid value."""
    h = np.tanh(w_ctx @ ctx + b_ctx)
    for t in range(slots.shape[0]):
        x = embed[slots[t]]
        z = _sigmoid_vec(w_z @ x + u_z @ h + b_z)
        r = _sigmoid_vec(w_r @ x + u_r @ h + b_r)
        hb = np.tanh(w_h @ x + u_h @ (r * h) + b_h)
        h = (1.0 - z) * h + z * hb

    logits = w_pol @ h + b_pol
    legal = legal_u8.astype(bool)
    probs = np.zeros_like(logits)
    m = np.max(logits, where=legal, initial=-np.inf)
    np.exp(logits - m, out=probs, where=legal)
    probs /= probs.sum()
    v_raw = float(w_val @ h) + float(np.asarray(b_val).reshape(-1)[0])
    value = 1.0 / (1.0 + np.exp(-v_raw)) if v_raw >= 0 else np.exp(v_raw) / (1.0 + np.exp(v_raw))
    return probs, float(value)


def _sigmoid_vec(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def puct_argmax(q, p, n_sa, n_s, c):
    """Index of the action maximizing Q + c*P*sqrt(N(s))/(1+N(s,a)); first max wins."""
    scores = q + c * p * (np.sqrt(n_s) / (1.0 + n_sa))
    return int(np.argmax(scores))


def sgd_fit_logistic(x, y, epochs, lr0, decay, l2, seed):
    """Per-sample SGD on log loss; splitmix64-shuffled epochs, decaying eta."""
    m, k = x.shape
    w = np.zeros(k, dtype=np.float64)
    b = 0.0
    order = list(range(m))
    state = int(seed)
    t = 0
    for _ in range(epochs):
        state = shuffle_in_place(order, state)
        for i in order:
            lr = lr0 / (1.0 + decay * t)
            t += 1
            row = x[i]
            zv = float(w @ row) + b
            if zv > 500.0:
                zv = 500.0
            elif zv < -500.0:
                zv = -500.0
            pred = 1.0 / (1.0 + np.exp(-zv))
            g = pred - y[i]
            w -= lr * (g * row + l2 * w)
            b -= lr * g
    return w, b


def sgd_fit_squared(x, y, epochs, lr0, decay, l2, seed):
    """Per-sample SGD on squared loss; identical shuffling/decay scheme."""
    m, k = x.shape
    w = np.zeros(k, dtype=np.float64)
    b = 0.0
    order = list(range(m))
    state = int(seed)
    t = 0
    for _ in range(epochs):
        state = shuffle_in_place(order, state)
        for i in order:
            lr = lr0 / (1.0 + decay * t)
            t += 1
            row = x[i]
            g = (float(w @ row) + b) - y[i]
            w -= lr * (g * row + l2 * w)
            b -= lr * g
    return w, b

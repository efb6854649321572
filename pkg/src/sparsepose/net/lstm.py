"""LSTM scan kernels and their backward passes.

Gate order is (input, forget, cell, output) with dual bias vectors
(b_ih + b_hh). Scans run in the dtype of the weights: float64 for training
and gradient checks, float32 for weights loaded from file.

The input projection is hoisted out of the recurrence as one GEMM and its
buffer is reused as activation storage, so the per-step loop allocates almost
nothing; weight gradients are likewise accumulated with single GEMMs over the
whole window.
"""

import numpy as np


def _sigmoid_(a: np.ndarray) -> np.ndarray:
    """In-place numerically-safe logistic."""
    np.clip(a, -500.0, 500.0, out=a)
    np.negative(a, out=a)
    np.exp(a, out=a)
    a += 1.0
    np.reciprocal(a, out=a)
    return a


def scan_forward(x: np.ndarray, W_ih: np.ndarray, W_hh: np.ndarray,
                 b_ih: np.ndarray, b_hh: np.ndarray, reverse: bool = False,
                 want_cache: bool = False):
    """Run one LSTM direction over x (B, T, in) -> hidden states (B, T, h).

    `reverse` processes time back-to-front (states are returned in input
    order).
    """
    B, T, _ = x.shape
    h = W_hh.shape[1]
    dtype = W_ih.dtype
    act = x @ W_ih.T + (b_ih + b_hh)              # (B, T, 4h), becomes activations
    hs = np.zeros((B, T, h), dtype=dtype)
    cs = np.empty((B, T, h), dtype=dtype) if want_cache else None
    tcs = np.empty((B, T, h), dtype=dtype) if want_cache else None
    ht = np.zeros((B, h), dtype=dtype)
    ct = np.zeros((B, h), dtype=dtype)
    tmp = np.empty((B, 4 * h), dtype=dtype)
    W_hh_T = np.ascontiguousarray(W_hh.T)
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        gates = act[:, t]
        np.matmul(ht, W_hh_T, out=tmp)
        gates += tmp
        gv = gates.reshape(B, 4, h)
        _sigmoid_(gv[:, 0:2])                     # input, forget
        np.tanh(gv[:, 2], out=gv[:, 2])           # cell
        _sigmoid_(gv[:, 3])                       # output
        c_prev = ct
        ct = gv[:, 1] * c_prev
        ct += gv[:, 0] * gv[:, 2]
        tc = np.tanh(ct)
        np.multiply(gv[:, 3], tc, out=hs[:, t])
        ht = hs[:, t]
        if want_cache:
            cs[:, t] = ct
            tcs[:, t] = tc
    if want_cache:
        return hs, (x, act, hs, cs, tcs, W_ih, W_hh, reverse)
    return hs


def scan_backward(cache, d_hs: np.ndarray):
    """BPTT for one direction. d_hs (B, T, h) -> (dx, dW_ih, dW_hh, db_ih, db_hh)."""
    x, act, hs, cs, tcs, W_ih, W_hh, reverse = cache
    B, T, _ = x.shape
    h = W_hh.shape[1]
    dtype = W_ih.dtype
    av = act.reshape(B, T, 4, h)
    da_all = np.empty((B, T, 4 * h), dtype=dtype)
    dh_rec = np.zeros((B, h), dtype=dtype)
    dc_rec = np.zeros((B, h), dtype=dtype)
    order = range(T - 1, -1, -1) if reverse else range(T)
    steps = list(order)
    for k in range(T - 1, -1, -1):
        t = steps[k]
        i, f, g, o = av[:, t, 0], av[:, t, 1], av[:, t, 2], av[:, t, 3]
        tc = tcs[:, t]
        c_prev = cs[:, steps[k - 1]] if k > 0 else np.zeros((B, h), dtype=dtype)
        dh = d_hs[:, t] + dh_rec
        dc = dh * o * (1.0 - tc * tc) + dc_rec
        dav = da_all[:, t].reshape(B, 4, h)
        np.multiply(dc * g, i * (1.0 - i), out=dav[:, 0])
        np.multiply(dc * c_prev, f * (1.0 - f), out=dav[:, 1])
        np.multiply(dc * i, 1.0 - g * g, out=dav[:, 2])
        np.multiply(dh * tc, o * (1.0 - o), out=dav[:, 3])
        dh_rec = da_all[:, t] @ W_hh
        dc_rec = dc * f
    flat_da = da_all.reshape(B * T, 4 * h)
    dW_ih = flat_da.T @ x.reshape(B * T, -1)
    db = flat_da.sum(axis=0)
    # hidden state feeding step t is the state produced at the previous step
    # of the scan order; zero at the scan start
    h_prev = np.zeros_like(hs)
    if reverse:
        h_prev[:, :-1] = hs[:, 1:]
    else:
        h_prev[:, 1:] = hs[:, :-1]
    dW_hh = flat_da.T @ h_prev.reshape(B * T, h)
    dx = (flat_da @ W_ih).reshape(x.shape)
    return dx, dW_ih, dW_hh, db.copy(), db


def scan_last_step(x_last: np.ndarray, W_ih: np.ndarray, b_ih: np.ndarray,
                   b_hh: np.ndarray):
    """First step of a reversed scan from zero state: needs no recurrence term."""
    h = len(b_ih) // 4
    gates = W_ih @ x_last + b_ih + b_hh
    gv = gates.reshape(4, h)
    _sigmoid_(gv[0:2])
    np.tanh(gv[2], out=gv[2])
    _sigmoid_(gv[3])
    ct = gv[0] * gv[2]
    return gv[3] * np.tanh(ct)


def scan_forward_single(x_proj: np.ndarray, W_hh: np.ndarray) -> np.ndarray:
    """Unbatched scan over precomputed projections x_proj (T, 4h) -> (T, h).

    Hot path for online inference; identical math to scan_forward with B=1.
    The x_proj buffer is consumed (overwritten with activations).
    """
    T, fourh = x_proj.shape
    h = fourh // 4
    dtype = W_hh.dtype
    hs = np.empty((T, h), dtype=dtype)
    ht = np.zeros(h, dtype=dtype)
    ct = np.zeros(h, dtype=dtype)
    tmp = np.empty(fourh, dtype=dtype)
    for t in range(T):
        gates = x_proj[t]
        np.matmul(W_hh, ht, out=tmp)
        gates += tmp
        gv = gates.reshape(4, h)
        _sigmoid_(gv[0:2])
        np.tanh(gv[2], out=gv[2])
        _sigmoid_(gv[3])
        ct = gv[1] * ct
        ct += gv[0] * gv[2]
        np.multiply(gv[3], np.tanh(ct), out=hs[t])
        ht = hs[t]
    return hs

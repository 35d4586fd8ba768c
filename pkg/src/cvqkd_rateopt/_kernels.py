"""Numba kernels for encoding and sum-product decoding on CSR graphs.

Graphs are passed as plain arrays:

* ``chk_ptr``/``chk_var``: edges grouped by check, ``chk_var[e]`` is the
  variable of edge ``e``;
* ``var_ptr``/``var_edge``: the same edges grouped by variable.
"""

import math

import numba
import numpy as np
from numba import njit, prange

# the TBB shipped with some systems is too old for numba; skip it quietly
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

# |tanh(L/2)| is kept below this, i.e. check messages are bounded by ~28.4
TANH_MAX = 1.0 - 1e-12


@njit(cache=True)
def encode_rows(chk_ptr, chk_var, row_order, pivots, c):
    """Fill ``c[pivots[i]]`` with the XOR of the other bits of row ``row_order[i]``."""
    for i in range(row_order.shape[0]):
        r = row_order[i]
        p = pivots[i]
        acc = 0
        for e in range(chk_ptr[r], chk_ptr[r + 1]):
            v = chk_var[e]
            if v != p:
                acc ^= c[v]
        c[p] = acc


@njit(cache=True)
def syndrome_weight(chk_ptr, chk_var, bits):
    w = 0
    for r in range(chk_ptr.shape[0] - 1):
        acc = 0
        for e in range(chk_ptr[r], chk_ptr[r + 1]):
            acc ^= bits[chk_var[e]]
        w += acc
    return w


@njit(cache=True)
def _zero_syndrome(chk_ptr, chk_var, hard):
    for r in range(chk_ptr.shape[0] - 1):
        acc = 0
        for e in range(chk_ptr[r], chk_ptr[r + 1]):
            acc ^= hard[chk_var[e]]
        if acc:
            return False
    return True


@njit(cache=True)
def spa_decode(chk_ptr, chk_var, var_ptr, var_edge, llr, max_iter, hard, post, early_exit=True):
    """Flooding sum-product decoding.

    Writes hard decisions into ``hard`` and posterior LLRs into ``post``.
    Returns ``(converged, iterations)``. A variable whose posterior is exactly
    zero counts as undecided, so an all-zero input never converges. With
    ``early_exit`` off, decoding continues past the first valid codeword
    until the messages reach a fixed point or ``max_iter``.
    """
    m = chk_ptr.shape[0] - 1
    nv = var_ptr.shape[0] - 1
    n_edges = chk_var.shape[0]
    v2c = np.empty(n_edges)
    c2v = np.zeros(n_edges)
    tt = np.empty(n_edges)
    for e in range(n_edges):
        v2c[e] = llr[chk_var[e]]

    for it in range(1, max_iter + 1):
        changed = False
        for r in range(m):
            s = chk_ptr[r]
            f = chk_ptr[r + 1]
            prod = 1.0
            nzero = 0
            zpos = -1
            for e in range(s, f):
                # tanh(L/2) = (1 - exp(-|L|)) / (1 + exp(-|L|)) with the sign of L
                x = math.exp(-abs(v2c[e]))
                t = (1.0 - x) / (1.0 + x)
                if t > TANH_MAX:
                    t = TANH_MAX
                if v2c[e] < 0.0:
                    t = -t
                tt[e] = t
                if t == 0.0:
                    nzero += 1
                    zpos = e
                else:
                    prod *= t
            for e in range(s, f):
                if nzero == 0:
                    o = prod / tt[e]
                elif nzero == 1 and e == zpos:
                    o = prod
                else:
                    o = 0.0
                if o > TANH_MAX:
                    o = TANH_MAX
                elif o < -TANH_MAX:
                    o = -TANH_MAX
                # 2 atanh(o) = log((1 + o) / (1 - o))
                msg = math.log((1.0 + o) / (1.0 - o))
                if msg != c2v[e]:
                    changed = True
                c2v[e] = msg

        undecided = False
        for v in range(nv):
            total = llr[v]
            for j in range(var_ptr[v], var_ptr[v + 1]):
                total += c2v[var_edge[j]]
            post[v] = total
            if total == 0.0:
                undecided = True
            hard[v] = 1 if total < 0.0 else 0
            for j in range(var_ptr[v], var_ptr[v + 1]):
                e = var_edge[j]
                v2c[e] = total - c2v[e]

        if not undecided and (early_exit or it == max_iter):
            if _zero_syndrome(chk_ptr, chk_var, hard):
                return True, it
        if not changed and it > 1:
            # fixed point: further iterations cannot change anything
            if early_exit or undecided:
                return False, it
            return _zero_syndrome(chk_ptr, chk_var, hard), it
    return False, max_iter


@njit(parallel=True, cache=True)
def decode_batch(chk_ptr, chk_var, var_ptr, var_edge, llrs, codewords, max_iter, frame_error, converged, iters):
    nb = llrs.shape[0]
    nv = llrs.shape[1]
    for b in prange(nb):
        hard = np.empty(nv, dtype=np.uint8)
        post = np.empty(nv)
        ok, it = spa_decode(chk_ptr, chk_var, var_ptr, var_edge, llrs[b], max_iter, hard, post)
        converged[b] = ok
        iters[b] = it
        err = not ok
        if ok:
            for v in range(nv):
                if hard[v] != codewords[b, v]:
                    err = True
                    break
        frame_error[b] = err

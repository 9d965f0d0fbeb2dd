"""Compiled inner loops. Pure-Python counterparts live in cascade/mitigation.

Uniforms are produced on demand with Philox4x64-10, word-for-word identical
to ``numpy.random.Philox`` with the same key, so each kernel reads exactly
the numbers ``rng.uniforms`` would return for the touched nodes.
"""

import math

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_FOUR = np.uint64(4)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_TO_DOUBLE = 1.0 / 9007199254740992.0


@njit(inline="always")
def _mulhilo(a, b):
    alo = a & _LO
    ahi = a >> _S32
    blo = b & _LO
    bhi = b >> _S32
    p0 = alo * blo
    p1 = alo * bhi
    p2 = ahi * blo
    p3 = ahi * bhi
    cy = ((p0 >> _S32) + (p1 & _LO) + (p2 & _LO)) >> _S32
    return p3 + (p1 >> _S32) + (p2 >> _S32) + cy, a * b


@njit(nogil=True, cache=True)
def philox_word(k0, k1, word):
    """64-bit output number ``word`` of a fresh Philox stream keyed (k0, k1)."""
    # numpy bumps the counter before generating, so block b uses counter b + 1
    c0 = word // _FOUR + _ONE
    c1 = _ZERO
    c2 = _ZERO
    c3 = _ZERO
    for r in range(10):
        if r > 0:
            k0 += _W0
            k1 += _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    pos = word % _FOUR
    if pos == 0:
        return c0
    if pos == 1:
        return c1
    if pos == 2:
        return c2
    return c3


@njit(nogil=True, cache=True)
def uniform_at(key, word):
    return float(philox_word(key[0], key[1], np.uint64(word)) >> _S11) * _TO_DOUBLE


@njit(nogil=True, cache=True)
def cascade_once(seed, comp, pred_ptr, pred_edge, src, starts, ends, q0, tau_tilde,
                 key, base, state):
    """One marking pass over ``comp`` (out-component in topological order).

    Node ``j`` compares uniform word ``base + j`` against its failure
    probability. ``state`` is a zeroed scratch array, left zeroed on return.
    """
    state[seed] = 1
    size = 1
    for j in comp:
        keep = 1.0
        for t in range(pred_ptr[j], pred_ptr[j + 1]):
            e = pred_edge[t]
            i = src[e]
            if state[i]:
                keep *= 1.0 - q0 * math.exp(-(starts[j] - ends[i]) / tau_tilde)
        if keep < 1.0 and uniform_at(key, base + j) < 1.0 - keep:
            state[j] = 1
            size += 1
    state[seed] = 0
    for j in comp:
        state[j] = 0
    return size


@njit(nogil=True, cache=True)
def cascade_sizes(seed, comp, pred_ptr, pred_edge, src, starts, ends, q0, tau_tilde,
                  key, width, run0, n_runs):
    state = np.zeros(starts.shape[0], dtype=np.uint8)
    out = np.empty(n_runs, dtype=np.int64)
    for k in range(n_runs):
        out[k] = cascade_once(seed, comp, pred_ptr, pred_edge, src, starts, ends,
                              q0, tau_tilde, key, (run0 + k) * width, state)
    return out


@njit(nogil=True, cache=True)
def rank_nodes(nodes, key, tie):
    """Sort ``nodes`` (ascending index) by ``key``, then ``tie``, then index."""
    t = np.empty(nodes.shape[0])
    for a in range(nodes.shape[0]):
        t[a] = tie[nodes[a]]
    by_tie = np.argsort(t, kind="mergesort")
    k = np.empty(nodes.shape[0])
    for a in range(nodes.shape[0]):
        k[a] = key[nodes[by_tie[a]]]
    by_key = np.argsort(k, kind="mergesort")
    return nodes[by_tie[by_key]]


@njit(nogil=True, cache=True)
def postpone(order, succ_ptr, dst, starts, ends, project_end):
    """Shift each task in ``order`` as late as possible, in place."""
    for t in order:
        delta = project_end - ends[t]
        for a in range(succ_ptr[t], succ_ptr[t + 1]):
            slack = starts[dst[a]] - ends[t]
            if slack < delta:
                delta = slack
        starts[t] += delta
        ends[t] += delta


@njit(nogil=True, cache=True)
def mitigated_sizes(seed, comp, comp_by_index, n_mitigate, key, random_scores,
                    succ_ptr, dst, pred_ptr, pred_edge, src, starts, ends, project_end,
                    q0, tau_tilde, cascade_key, ranking_key, width, run0, n_runs):
    state = np.zeros(starts.shape[0], dtype=np.uint8)
    out = np.empty(n_runs, dtype=np.int64)
    st = starts.copy()
    en = ends.copy()
    tie = np.zeros(starts.shape[0])
    score = key.copy()
    for k in range(n_runs):
        base = (run0 + k) * width
        for j in comp_by_index:
            tie[j] = uniform_at(ranking_key, base + j)
            if random_scores:
                score[j] = -tie[j]
        order = rank_nodes(comp_by_index, score, tie)
        postpone(order[:n_mitigate], succ_ptr, dst, st, en, project_end)
        out[k] = cascade_once(seed, comp, pred_ptr, pred_edge, src, st, en,
                              q0, tau_tilde, cascade_key, base, state)
        for j in comp:
            st[j] = starts[j]
            en[j] = ends[j]
    return out

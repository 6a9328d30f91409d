"""Numba kernels for the random forest: tree growing and prediction.

Trees are stored as flat arrays (feature, threshold, left, right, value)
indexed by node id; leaves carry feature = -1 and the positive fraction
of their training rows. Randomness comes from an xorshift64* stream per
tree so results are identical across runs and platforms.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MULT = np.uint64(0x2545F4914F6CDD1D)


@njit(cache=True)
def _splitmix64(x):
    z = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _next_u64(state):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * _MULT


@njit(cache=True)
def _rand_below(state, n):
    return np.int64(_next_u64(state) % np.uint64(n))


@njit(cache=True)
def grow_tree(X, y, seed, max_features, min_leaf):
    """Grow one CART tree on a bootstrap sample drawn from the seed."""
    n, d = X.shape
    state = np.empty(1, dtype=np.uint64)
    state[0] = _splitmix64(np.uint64(seed))
    if state[0] == np.uint64(0):
        state[0] = np.uint64(1)

    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        idx[i] = _rand_below(state, n)

    cap = 2 * n + 1
    feat = np.full(cap, -1, dtype=np.int64)
    thresh = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)
    n_nodes = 1

    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1

    perm = np.empty(d, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo
        pos = 0
        for i in range(lo, hi):
            if y[idx[i]] != 0:
                pos += 1
        value[node] = pos / m
        if pos == 0 or pos == m or m < 2 * min_leaf:
            continue

        for fidx in range(d):
            perm[fidx] = fidx
        best_score = np.inf
        best_feat = -1
        best_thresh = 0.0
        for f_i in range(max_features):
            swap = f_i + _rand_below(state, d - f_i)
            tmp = perm[f_i]
            perm[f_i] = perm[swap]
            perm[swap] = tmp
            f = perm[f_i]

            vals = np.empty(m, dtype=np.float64)
            for i in range(m):
                vals[i] = X[idx[lo + i], f]
            order = np.argsort(vals)
            left_pos = 0
            for i in range(m - 1):
                if y[idx[lo + order[i]]] != 0:
                    left_pos += 1
                if vals[order[i + 1]] == vals[order[i]]:
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                right_pos = pos - left_pos
                pl = left_pos / nl
                pr = right_pos / nr
                gini_l = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
                gini_r = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
                score = nl * gini_l + nr * gini_r
                if score < best_score - 1e-12:
                    best_score = score
                    best_feat = f
                    best_thresh = 0.5 * (vals[order[i]] + vals[order[i + 1]])
        if best_feat < 0:
            # No usable split among the sampled features: mixed leaf.
            continue

        # Stable two-pointer partition of idx[lo:hi] around the threshold.
        n_left = 0
        for i in range(lo, hi):
            if X[idx[i], best_feat] <= best_thresh:
                n_left += 1
        a = 0
        b = n_left
        for i in range(lo, hi):
            if X[idx[i], best_feat] <= best_thresh:
                scratch[a] = idx[i]
                a += 1
            else:
                scratch[b] = idx[i]
                b += 1
        for i in range(m):
            idx[lo + i] = scratch[i]

        feat[node] = best_feat
        thresh[node] = best_thresh
        left_child = n_nodes
        right_child = n_nodes + 1
        n_nodes += 2
        left[node] = left_child
        right[node] = right_child
        stack_node[top] = left_child
        stack_lo[top] = lo
        stack_hi[top] = lo + n_left
        top += 1
        stack_node[top] = right_child
        stack_lo[top] = lo + n_left
        stack_hi[top] = hi
        top += 1

    return feat[:n_nodes], thresh[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def tree_leaf_values(feat, thresh, left, right, value, X, out):
    for r in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            if X[r, feat[node]] <= thresh[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]

"""Compiled inner loops for tree growing and tree traversal."""

import numpy as np
from numba import njit

GINI, SQUARED, NEWTON = 0, 1, 2


@njit(cache=True, nogil=True)
def _score(kind, a, b, c, l2):
    # a, b, c are the first three stat rows of one node
    if kind == GINI:
        if a > 0.0:
            return (b * b + (a - b) * (a - b)) / a
        return 0.0
    if kind == SQUARED:
        if a > 0.0:
            return b * b / a
        return 0.0
    return b * b / (c + l2)


@njit(cache=True, nogil=True)
def best_splits(rows, row_local, codes, stats, cand, splittable, parent, n_bins, min_leaf, kind, l2):
    """Best (feature, bin, gain) per frontier node.

    One pass over the rows fills a histogram for every (node, candidate
    feature) pair. Features are then scanned in index order and bins in
    ascending order; a candidate replaces the incumbent only on a strictly
    larger gain, so ties go to the lowest feature and then the lowest bin.
    """
    m = stats.shape[0]
    L = parent.shape[1]
    d = codes.shape[1]
    best_gain = np.zeros(L)
    best_feat = np.full(L, -1, dtype=np.int64)
    best_bin = np.zeros(L, dtype=np.int64)

    # histogram layout: hist[offset[l, f] + code * m + s]
    offset = np.full((L, d), -1, dtype=np.int64)
    size = 0
    for l in range(L):
        if not splittable[l]:
            continue
        for f in range(d):
            if cand[l, f] and n_bins[f] >= 2:
                offset[l, f] = size
                size += n_bins[f] * m
    hist = np.zeros(size)
    feats = np.empty(d, dtype=np.int64)
    for i in range(rows.size):
        l = row_local[i]
        if l < 0 or not splittable[l]:
            continue
        r = rows[i]
        for f in range(d):
            o = offset[l, f]
            if o < 0:
                continue
            base = o + codes[r, f] * m
            for s in range(m):
                hist[base + s] += stats[s, r]

    cum = np.empty(m)
    for l in range(L):
        if not splittable[l]:
            continue
        ps = _score(kind, parent[0, l], parent[1, l], parent[2, l] if m > 2 else 0.0, l2)
        tol = 1e-12 * max(1.0, abs(ps))
        n_f = 0
        for f in range(d):
            if offset[l, f] >= 0:
                feats[n_f] = f
                n_f += 1
        for j in range(n_f):
            f = feats[j]
            o = offset[l, f]
            for s in range(m):
                cum[s] = 0.0
            g_best = -np.inf
            b_best = 0
            for b in range(n_bins[f] - 1):
                for s in range(m):
                    cum[s] += hist[o + b * m + s]
                rest0 = parent[0, l] - cum[0]
                if cum[0] < min_leaf or rest0 < min_leaf:
                    continue
                c_left = cum[2] if m > 2 else 0.0
                c_right = parent[2, l] - cum[2] if m > 2 else 0.0
                g = (_score(kind, cum[0], cum[1], c_left, l2)
                     + _score(kind, rest0, parent[1, l] - cum[1], c_right, l2)) - ps
                if g > g_best:
                    g_best = g
                    b_best = b
            if g_best > best_gain[l] and g_best > tol:
                best_gain[l] = g_best
                best_feat[l] = f
                best_bin[l] = b_best
    return best_feat, best_bin, best_gain


@njit(cache=True, nogil=True)
def tree_predict(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out

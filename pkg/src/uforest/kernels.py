"""Hot numeric kernels with two interchangeable backends.

Each kernel exists twice: a loop implementation compiled with numba's
``@njit`` and a vectorized pure-numpy fallback. The public names
(``grow_tree``, ``apply_tree``, ``kth_neighbor_linf``,
``count_within_linf``) are bound to the numba build when it is available
and to the numpy build when it is not or when the environment variable
``UFOREST_NO_NUMBA`` is set to 1/true/yes/on.

The two builds are bit-identical, not merely close: impurity scores are
assembled from exact int64 sums (gini) or from a shared x*log(x) lookup
table (entropy) so that both backends perform the same float64
operations in the same order. Tests and the benchmark in
``benchmarks/bench_kernels.py`` rely on both builds being importable
whatever the environment flag says, so the ``*_numpy`` names and the
``NUMBA_BUILDS`` dict are always present.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "HAVE_NUMBA",
    "grow_tree",
    "apply_tree",
    "kth_neighbor_linf",
    "count_within_linf",
    "xlogx_table",
    "NO_MAX_DEPTH",
    "GINI",
    "ENTROPY",
]

GINI = 0
ENTROPY = 1

# large sentinel instead of an optional: kernels take plain int64
NO_MAX_DEPTH = np.int64(2**62)

_ENV_FLAG = "UFOREST_NO_NUMBA"


def xlogx_table(m: int) -> np.ndarray:
    """Table t[i] = i*log(i) (t[0] = 0) shared by both grow_tree builds."""
    t = np.zeros(m + 1, dtype=np.float64)
    if m >= 1:
        i = np.arange(1, m + 1, dtype=np.float64)
        t[1:] = i * np.log(i)
    return t


# ---------------------------------------------------------------------------
# loop implementations (compiled with numba when available)
# ---------------------------------------------------------------------------


def _grow_tree_loops(X, y, n_classes, min_leaf, max_depth, impurity_code, candidates, xlogx):
    m, _ = X.shape
    max_nodes = candidates.shape[0]
    mtry = candidates.shape[1]

    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    node_count = np.zeros(max_nodes, np.int64)
    node_impurity = np.zeros(max_nodes, np.float64)
    leaf_index = np.full(max_nodes, -1, np.int64)

    idx = np.arange(m)
    stack = np.zeros((2 * m + 4, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = m
    sp = 1
    node_counter = 1
    leaf_counter = 0

    counts = np.zeros(n_classes, np.int64)
    counts_l = np.zeros(n_classes, np.int64)

    while sp > 0:
        sp -= 1
        s = stack[sp, 0]
        e = stack[sp, 1]
        node = stack[sp, 2]
        depth = stack[sp, 3]
        mn = e - s

        for k in range(n_classes):
            counts[k] = 0
        for i in range(s, e):
            counts[y[idx[i]]] += 1

        if impurity_code == GINI:
            s2 = np.int64(0)
            for k in range(n_classes):
                s2 += counts[k] * counts[k]
            parent = np.float64(mn) - np.float64(s2) / np.float64(mn)
        else:
            acc = 0.0
            for k in range(n_classes):
                acc += xlogx[counts[k]]
            parent = xlogx[mn] - acc
        node_count[node] = mn
        node_impurity[node] = parent / np.float64(mn)

        best_f = np.int64(-1)
        best_thr = 0.0
        best_score = np.inf
        if parent > 0.0 and mn >= 2 * min_leaf and depth < max_depth:
            vals = np.empty(mn, np.float64)
            labs = np.empty(mn, np.int64)
            for ci in range(mtry):
                f = candidates[node, ci]
                for i in range(mn):
                    vals[i] = X[idx[s + i], f]
                order = np.argsort(vals)
                for k in range(n_classes):
                    counts_l[k] = 0
                for i in range(1, mn):
                    p = order[i - 1]
                    counts_l[y[idx[s + p]]] += 1
                    a = vals[p]
                    b = vals[order[i]]
                    if a == b:
                        continue
                    if i < min_leaf or mn - i < min_leaf:
                        continue
                    if impurity_code == GINI:
                        s2l = np.int64(0)
                        s2r = np.int64(0)
                        for k in range(n_classes):
                            cl = counts_l[k]
                            cr = counts[k] - cl
                            s2l += cl * cl
                            s2r += cr * cr
                        sl = np.float64(i) - np.float64(s2l) / np.float64(i)
                        sr = np.float64(mn - i) - np.float64(s2r) / np.float64(mn - i)
                    else:
                        accl = 0.0
                        accr = 0.0
                        for k in range(n_classes):
                            accl += xlogx[counts_l[k]]
                            accr += xlogx[counts[k] - counts_l[k]]
                        sl = xlogx[i] - accl
                        sr = xlogx[mn - i] - accr
                    tot = sl + sr
                    if tot < best_score:
                        thr = 0.5 * (a + b)
                        if not (a <= thr < b):
                            thr = a
                        best_score = tot
                        best_f = f
                        best_thr = thr

        if best_f >= 0 and best_score < parent:
            feature[node] = best_f
            threshold[node] = best_thr
            nl = 0
            for i in range(s, e):
                if X[idx[i], best_f] <= best_thr:
                    nl += 1
            tmp = np.empty(mn, np.int64)
            ptr_l = 0
            ptr_r = nl
            for i in range(s, e):
                r = idx[i]
                if X[r, best_f] <= best_thr:
                    tmp[ptr_l] = r
                    ptr_l += 1
                else:
                    tmp[ptr_r] = r
                    ptr_r += 1
            idx[s:e] = tmp
            lid = node_counter
            rid = node_counter + 1
            node_counter += 2
            left[node] = lid
            right[node] = rid
            stack[sp, 0] = s + nl
            stack[sp, 1] = e
            stack[sp, 2] = rid
            stack[sp, 3] = depth + 1
            sp += 1
            stack[sp, 0] = s
            stack[sp, 1] = s + nl
            stack[sp, 2] = lid
            stack[sp, 3] = depth + 1
            sp += 1
        else:
            feature[node] = -1
            leaf_index[node] = leaf_counter
            leaf_counter += 1

    return (feature, threshold, left, right, node_count, node_impurity,
            leaf_index, node_counter, leaf_counter)


def _apply_tree_loops(feature, threshold, left, right, X):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _kth_neighbor_linf_loops(points, k):
    n, d = points.shape
    out = np.empty(n, np.float64)
    buf = np.empty(k, np.float64)
    for i in range(n):
        filled = 0
        for j in range(n):
            if j == i:
                continue
            # prune: once the partial max exceeds the current k-th
            # distance the point cannot enter the buffer
            cap = buf[k - 1] if filled == k else np.inf
            dist = 0.0
            skip = False
            for c in range(d):
                t = abs(points[i, c] - points[j, c])
                if t > dist:
                    dist = t
                    if dist >= cap:
                        skip = True
                        break
            if skip:
                continue
            if filled < k:
                p = filled
                while p > 0 and buf[p - 1] > dist:
                    buf[p] = buf[p - 1]
                    p -= 1
                buf[p] = dist
                filled += 1
            elif dist < buf[k - 1]:
                p = k - 1
                while p > 0 and buf[p - 1] > dist:
                    buf[p] = buf[p - 1]
                    p -= 1
                buf[p] = dist
        out[i] = buf[k - 1]
    return out


def _count_within_linf_loops(points, radii):
    n, d = points.shape
    out = np.zeros(n, np.int64)
    for i in range(n):
        r = radii[i]
        cnt = 0
        for j in range(n):
            dist = 0.0
            inside = True
            for c in range(d):
                t = abs(points[i, c] - points[j, c])
                if t > dist:
                    dist = t
                    if dist > r:
                        inside = False
                        break
            if inside:
                cnt += 1
        out[i] = cnt
    return out


# ---------------------------------------------------------------------------
# vectorized numpy implementations
# ---------------------------------------------------------------------------


def grow_tree_numpy(X, y, n_classes, min_leaf, max_depth, impurity_code, candidates, xlogx):
    """Fit one axis-aligned tree; see ``tree.fit_tree`` for the contract.

    Control flow mirrors the loop build exactly: preorder DFS, children
    numbered at split time, leaves numbered in visit order, candidate
    features taken from ``candidates[node]`` in ascending order, strict
    score improvement so ties resolve to the lowest feature index and
    then the smallest threshold.
    """
    m, _ = X.shape
    max_nodes = candidates.shape[0]
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    node_count = np.zeros(max_nodes, np.int64)
    node_impurity = np.zeros(max_nodes, np.float64)
    leaf_index = np.full(max_nodes, -1, np.int64)

    idx = np.arange(m)
    stack = [(0, m, 0, 0)]
    node_counter = 1
    leaf_counter = 0

    while stack:
        s, e, node, depth = stack.pop()
        mn = e - s
        rows = idx[s:e]
        yl = y[rows]
        counts = np.bincount(yl, minlength=n_classes).astype(np.int64)
        if impurity_code == GINI:
            s2 = np.int64((counts * counts).sum())
            parent = np.float64(mn) - np.float64(s2) / np.float64(mn)
        else:
            parent = xlogx[mn] - xlogx[counts].sum()
        node_count[node] = mn
        node_impurity[node] = parent / np.float64(mn)

        best_f = -1
        best_thr = 0.0
        best_score = np.inf
        if parent > 0.0 and mn >= 2 * min_leaf and depth < max_depth:
            for f in candidates[node]:
                vals = X[rows, f]
                order = np.argsort(vals)
                vs = vals[order]
                ys = yl[order]
                pos = np.nonzero(vs[1:] != vs[:-1])[0] + 1
                pos = pos[(pos >= min_leaf) & (pos <= mn - min_leaf)]
                if pos.size == 0:
                    continue
                if impurity_code == GINI:
                    s2l = np.zeros(pos.size, np.int64)
                    s2r = np.zeros(pos.size, np.int64)
                    for k in range(n_classes):
                        cl = np.cumsum(ys == k)[pos - 1]
                        cr = counts[k] - cl
                        s2l += cl * cl
                        s2r += cr * cr
                    pl = pos.astype(np.float64)
                    pr = (mn - pos).astype(np.float64)
                    tot = (pl - s2l.astype(np.float64) / pl) + (pr - s2r.astype(np.float64) / pr)
                else:
                    accl = np.zeros(pos.size, np.float64)
                    accr = np.zeros(pos.size, np.float64)
                    for k in range(n_classes):
                        cl = np.cumsum(ys == k)[pos - 1]
                        accl += xlogx[cl]
                        accr += xlogx[counts[k] - cl]
                    tot = (xlogx[pos] - accl) + (xlogx[mn - pos] - accr)
                j = int(np.argmin(tot))
                if tot[j] < best_score:
                    i = pos[j]
                    a = vs[i - 1]
                    b = vs[i]
                    thr = 0.5 * (a + b)
                    if not (a <= thr < b):
                        thr = a
                    best_score = tot[j]
                    best_f = int(f)
                    best_thr = thr

        if best_f >= 0 and best_score < parent:
            feature[node] = best_f
            threshold[node] = best_thr
            go = X[rows, best_f] <= best_thr
            nl = int(go.sum())
            idx[s:e] = np.concatenate([rows[go], rows[~go]])
            lid = node_counter
            rid = node_counter + 1
            node_counter += 2
            left[node] = lid
            right[node] = rid
            stack.append((s + nl, e, rid, depth + 1))
            stack.append((s, s + nl, lid, depth + 1))
        else:
            feature[node] = -1
            leaf_index[node] = leaf_counter
            leaf_counter += 1

    return (feature, threshold, left, right, node_count, node_impurity,
            leaf_index, node_counter, leaf_counter)


def apply_tree_numpy(feature, threshold, left, right, X):
    """Leaf node id for every row of X, by vectorized level descent."""
    node = np.zeros(X.shape[0], np.int64)
    while True:
        f = feature[node]
        active = np.nonzero(f >= 0)[0]
        if active.size == 0:
            return node
        cur = node[active]
        go = X[active, f[active]] <= threshold[cur]
        node[active] = np.where(go, left[cur], right[cur])


def kth_neighbor_linf_numpy(points, k):
    """Distance to the k-th nearest other point, chebyshev metric."""
    n, _ = points.shape
    out = np.empty(n, np.float64)
    chunk = max(1, int(2_000_000 // max(n, 1)))
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        dmat = np.abs(points[s:e, None, :] - points[None, :, :]).max(axis=2)
        dmat[np.arange(e - s), np.arange(s, e)] = np.inf
        out[s:e] = np.partition(dmat, k - 1, axis=1)[:, k - 1]
    return out


def count_within_linf_numpy(points, radii):
    """Self-inclusive count of points within closed chebyshev balls."""
    n, _ = points.shape
    out = np.empty(n, np.int64)
    chunk = max(1, int(2_000_000 // max(n, 1)))
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        dmat = np.abs(points[s:e, None, :] - points[None, :, :]).max(axis=2)
        out[s:e] = (dmat <= radii[s:e, None]).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------


def _numba_available() -> bool:
    if os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


HAVE_NUMBA = _numba_available()

NUMBA_BUILDS: dict = {}
if HAVE_NUMBA:
    from numba import njit

    _jit = njit(cache=True, nogil=True)
    NUMBA_BUILDS = {
        "grow_tree": _jit(_grow_tree_loops),
        "apply_tree": _jit(_apply_tree_loops),
        "kth_neighbor_linf": _jit(_kth_neighbor_linf_loops),
        "count_within_linf": _jit(_count_within_linf_loops),
    }
    grow_tree = NUMBA_BUILDS["grow_tree"]
    apply_tree = NUMBA_BUILDS["apply_tree"]
    kth_neighbor_linf = NUMBA_BUILDS["kth_neighbor_linf"]
    count_within_linf = NUMBA_BUILDS["count_within_linf"]
else:
    grow_tree = grow_tree_numpy
    apply_tree = apply_tree_numpy
    kth_neighbor_linf = kth_neighbor_linf_numpy
    count_within_linf = count_within_linf_numpy

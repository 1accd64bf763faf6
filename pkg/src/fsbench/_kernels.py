"""Compiled numeric kernels: CART forest, k-means, lasso coordinate descent.

Everything here is deterministic given its seed: random numbers come from
an inline splitmix64 stream, no ``fastmath`` is enabled, and loops have a
fixed iteration order, so repeated runs produce bit-identical results on
any machine.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U64 = np.uint64
_GAMMA = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_MASK64 = _U64(0xFFFFFFFFFFFFFFFF)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _splitmix64(state):
    """Advance a splitmix64 stream; returns (new_state, output)."""
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> _U64(30))) * _MIX1) & _MASK64
    z = ((z ^ (z >> _U64(27))) * _MIX2) & _MASK64
    return state, z ^ (z >> _U64(31))


@njit(cache=True)
def _uniform(state):
    """Draw a float64 in [0, 1) from a splitmix64 stream."""
    state, z = _splitmix64(state)
    return state, (z >> _U64(11)) * _INV_2_53


@njit(cache=True)
def grow_tree(X, y, idx, n_classes, max_features, seed):
    """Grow one CART classification tree on ``X[idx]``.

    Gini impurity, midpoint thresholds, growth until leaves are pure or
    hold a single sample.  At each node a random feature order is drawn
    and the first ``max_features`` entries are scanned; scanning continues
    past that count only while no valid split has been found.  Majority
    leaf labels break ties toward the lowest class index.

    Returns parallel node arrays ``(feature, threshold, left, right,
    leaf_class)``; internal nodes have ``leaf_class == -1``.
    """
    n = idx.shape[0]
    d = X.shape[1]
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    leaf_class = np.full(max_nodes, -1, dtype=np.int64)

    work = idx.copy()
    stack = np.zeros((max_nodes, 3), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    sp = 1
    n_nodes = 1
    state = _U64(seed)

    counts = np.zeros(n_classes, dtype=np.int64)
    left_counts = np.zeros(n_classes, dtype=np.int64)
    perm = np.arange(d)

    while sp > 0:
        sp -= 1
        node = stack[sp, 0]
        start = stack[sp, 1]
        end = stack[sp, 2]
        m = end - start
        counts[:] = 0
        for i in range(start, end):
            counts[y[work[i]]] += 1
        best_c = 0
        for c in range(1, n_classes):
            if counts[c] > counts[best_c]:
                best_c = c
        if counts[best_c] == m or m < 2:
            leaf_class[node] = best_c
            continue

        parent_ss = 0.0
        for c in range(n_classes):
            parent_ss += counts[c] * counts[c]
        parent_score = parent_ss / m

        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        n_seen = 0
        for fpos in range(d):
            state, r = _splitmix64(state)
            j = fpos + np.int64(r % _U64(d - fpos))
            tmp = perm[fpos]
            perm[fpos] = perm[j]
            perm[j] = tmp
            f = perm[fpos]
            n_seen += 1
            vals = np.empty(m, dtype=np.float64)
            for i in range(m):
                vals[i] = X[work[start + i], f]
            order = np.argsort(vals, kind="mergesort")
            if vals[order[0]] != vals[order[m - 1]]:
                left_counts[:] = 0
                ss_l = 0.0
                ss_r = parent_ss
                m_l = 0
                for i in range(m - 1):
                    ci = y[work[start + order[i]]]
                    ss_l += 2.0 * left_counts[ci] + 1.0
                    ss_r -= 2.0 * counts[ci] - 1.0
                    left_counts[ci] += 1
                    counts[ci] -= 1
                    m_l += 1
                    v0 = vals[order[i]]
                    v1 = vals[order[i + 1]]
                    if v1 > v0:
                        score = ss_l / m_l + ss_r / (m - m_l)
                        gain = score - parent_score
                        if gain > best_gain + 1e-12 or (best_f == -1 and gain > 0):
                            best_gain = gain
                            best_f = f
                            thr = 0.5 * (v0 + v1)
                            if thr >= v1:  # midpoint rounded up to v1
                                thr = v0
                            best_thr = thr
                for c in range(n_classes):
                    counts[c] += left_counts[c]
            if n_seen >= max_features and best_f != -1:
                break
        if best_f == -1:
            leaf_class[node] = best_c
            continue

        tmp_buf = np.empty(m, dtype=np.int64)
        nl = 0
        nr = 0
        for i in range(start, end):
            if X[work[i], best_f] <= best_thr:
                tmp_buf[nl] = work[i]
                nl += 1
        for i in range(start, end):
            if X[work[i], best_f] > best_thr:
                tmp_buf[nl + nr] = work[i]
                nr += 1
        for i in range(m):
            work[start + i] = tmp_buf[i]
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack[sp, 0] = lid
        stack[sp, 1] = start
        stack[sp, 2] = start + nl
        sp += 1
        stack[sp, 0] = rid
        stack[sp, 1] = start + nl
        stack[sp, 2] = end
        sp += 1

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        leaf_class[:n_nodes],
    )


@njit(cache=True)
def predict_tree(feature, threshold, left, right, leaf_class, X):
    """Route each row of ``X`` to a leaf and return the leaf classes."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while leaf_class[node] == -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf_class[node]
    return out


@njit(cache=True)
def grow_forest(X, y, n_classes, n_trees, max_features, seed, bootstrap):
    """Grow ``n_trees`` CART trees, each on its own n-of-n bootstrap.

    Per-tree bootstrap indices and tree seeds are drawn from a single
    splitmix64 stream keyed by ``seed``.  ``bootstrap=0`` trains every
    tree on the full sample instead (test hook).  Trees are returned
    padded into ``(n_trees, 2n+1)`` node arrays plus a per-tree node
    count.
    """
    n = X.shape[0]
    max_nodes = 2 * n + 1
    features = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    thresholds = np.zeros((n_trees, max_nodes), dtype=np.float64)
    lefts = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    rights = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    leaf_classes = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    n_nodes = np.zeros(n_trees, dtype=np.int64)

    state = _U64(seed)
    boot = np.empty(n, dtype=np.int64)
    for t in range(n_trees):
        state, r = _splitmix64(state)
        tree_seed = r
        if bootstrap != 0:
            for i in range(n):
                state, r = _splitmix64(state)
                boot[i] = np.int64(r % _U64(n))
        else:
            for i in range(n):
                boot[i] = i
        f, thr, le, ri, lc = grow_tree(X, y, boot, n_classes, max_features, tree_seed)
        nn = f.shape[0]
        n_nodes[t] = nn
        features[t, :nn] = f
        thresholds[t, :nn] = thr
        lefts[t, :nn] = le
        rights[t, :nn] = ri
        leaf_classes[t, :nn] = lc
    return features, thresholds, lefts, rights, leaf_classes, n_nodes


@njit(cache=True)
def forest_votes(features, thresholds, lefts, rights, leaf_classes, X, n_classes):
    """Count per-class tree votes for each row of ``X``."""
    n_trees = features.shape[0]
    n = X.shape[0]
    votes = np.zeros((n, n_classes), dtype=np.int64)
    for t in range(n_trees):
        for i in range(n):
            node = 0
            while leaf_classes[t, node] == -1:
                if X[i, features[t, node]] <= thresholds[t, node]:
                    node = lefts[t, node]
                else:
                    node = rights[t, node]
            votes[i, leaf_classes[t, node]] += 1
    return votes


@njit(cache=True)
def kmeans_fit(X, k, seed, max_iter):
    """One k-means run: k-means++ seeding then Lloyd iterations.

    Assignment ties go to the lowest center index.  A cluster left empty
    after assignment steals the point farthest from its current center
    (never emptying a singleton cluster).  Iteration stops at the first
    pass that changes no assignment, or after ``max_iter`` passes.

    Returns ``(labels, centers, inertia, n_iter, trace)`` where
    ``trace[t]`` is the total squared distance to the nearest center
    right after iteration ``t``'s assignment step.
    """
    n, d = X.shape
    state = _U64(seed)
    centers = np.empty((k, d), dtype=np.float64)

    state, r = _splitmix64(state)
    first = np.int64(r % _U64(n))
    for j in range(d):
        centers[0, j] = X[first, j]
    d2 = np.empty(n, dtype=np.float64)
    for i in range(n):
        s = 0.0
        for j in range(d):
            diff = X[i, j] - centers[0, j]
            s += diff * diff
        d2[i] = s
    for c in range(1, k):
        total = 0.0
        for i in range(n):
            total += d2[i]
        if total <= 0.0:
            state, r = _splitmix64(state)
            pick = np.int64(r % _U64(n))
        else:
            state, u = _uniform(state)
            u *= total
            acc = 0.0
            pick = n - 1
            for i in range(n):
                acc += d2[i]
                if u < acc:
                    pick = i
                    break
        for j in range(d):
            centers[c, j] = X[pick, j]
        for i in range(n):
            s = 0.0
            for j in range(d):
                diff = X[i, j] - centers[c, j]
                s += diff * diff
            if s < d2[i]:
                d2[i] = s

    labels = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(k, dtype=np.int64)
    dist_assigned = np.empty(n, dtype=np.float64)
    trace = np.zeros(max_iter, dtype=np.float64)
    n_iter = 0
    for _ in range(max_iter):
        n_iter += 1
        changed = False
        counts[:] = 0
        for i in range(n):
            best = 0
            bestd = np.inf
            for c in range(k):
                s = 0.0
                for j in range(d):
                    diff = X[i, j] - centers[c, j]
                    s += diff * diff
                if s < bestd:
                    bestd = s
                    best = c
            dist_assigned[i] = bestd
            if labels[i] != best:
                labels[i] = best
                changed = True
            counts[best] += 1
        for i in range(n):
            trace[n_iter - 1] += dist_assigned[i]
        for c in range(k):
            if counts[c] == 0:
                far = 0
                fard = -1.0
                for i in range(n):
                    if counts[labels[i]] > 1 and dist_assigned[i] > fard:
                        fard = dist_assigned[i]
                        far = i
                counts[labels[far]] -= 1
                labels[far] = c
                counts[c] = 1
                dist_assigned[far] = 0.0
                changed = True
        centers[:] = 0.0
        for i in range(n):
            for j in range(d):
                centers[labels[i], j] += X[i, j]
        for c in range(k):
            for j in range(d):
                centers[c, j] /= counts[c]
        if not changed:
            break

    inertia = 0.0
    for i in range(n):
        s = 0.0
        for j in range(d):
            diff = X[i, j] - centers[labels[i], j]
            s += diff * diff
        inertia += s
    return labels, centers, inertia, n_iter, trace[:n_iter]


@njit(cache=True)
def lasso_cd(X, y, beta, max_iter, tol):
    """Cyclic coordinate descent for ``||y - X a||^2 + beta * ||a||_1``.

    No intercept.  Each coordinate is soft-thresholded at ``beta / 2``
    against the residual; sweeps stop once the largest coefficient update
    falls to ``tol`` or below.  Zero-norm columns keep coefficient 0.
    """
    n, d = X.shape
    a = np.zeros(d, dtype=np.float64)
    resid = y.copy()
    col_ss = np.empty(d, dtype=np.float64)
    for j in range(d):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        col_ss[j] = s
    thr = 0.5 * beta
    for _ in range(max_iter):
        max_delta = 0.0
        for j in range(d):
            if col_ss[j] <= 0.0:
                continue
            aj = a[j]
            rho = col_ss[j] * aj
            for i in range(n):
                rho += X[i, j] * resid[i]
            if rho > thr:
                new = (rho - thr) / col_ss[j]
            elif rho < -thr:
                new = (rho + thr) / col_ss[j]
            else:
                new = 0.0
            delta = new - aj
            if delta != 0.0:
                for i in range(n):
                    resid[i] -= delta * X[i, j]
                a[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta <= tol:
            break
    return a

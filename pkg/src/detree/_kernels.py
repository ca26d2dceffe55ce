"""Compiled inner loops for training and querying trees.

Trees are stored as flat preorder arrays: ``feature[i] >= 0`` marks an
internal node splitting on that dimension at ``threshold[i]``, ``feature[i]
== -1`` a leaf holding ``value[i]``. Children are addressed by ``left`` and
``right``. During distributed growth ``feature == -2`` marks a placeholder
whose subtree is grown elsewhere; ``value`` then holds the placeholder index.
"""

import numpy as np
from numba import njit

LEAF = -1
PENDING = -2

# Absolute floor on the Gini gain required to accept a split.
GAIN_TOL = 1e-12
# Relative window within which two split scores count as tied.
TIE_RTOL = 1e-12


@njit(cache=True, nogil=True)
def box_volume(lo, hi):
    v = 1.0
    for d in range(lo.shape[0]):
        v *= hi[d] - lo[d]
    return v


@njit(cache=True, nogil=True)
def range_weight(w, idx, start, end):
    s = 0.0
    for i in range(start, end):
        s += w[idx[i]]
    return s


@njit(cache=True, nogil=True)
def _scan(X, w, order, start, end, lo, hi, node_w, w2, min_width, min_weight,
          cutoff, first_only):
    """Walk every midpoint candidate in (dim, threshold) order.

    With ``first_only`` false, returns the minimal score. With ``first_only``
    true, returns the first candidate whose score is ``<= cutoff``.
    """
    D = X.shape[1]
    best = np.inf
    best_dim = -1
    best_thr = 0.0
    best_wl = 0.0
    for d in range(D):
        other = 1.0
        for e in range(D):
            if e != d:
                other *= hi[e] - lo[e]
        row = order[d]
        mw = min_width[d]
        acc = 0.0
        for i in range(start, end - 1):
            acc += w[row[i]]
            a = X[row[i], d]
            b = X[row[i + 1], d]
            if not b > a:
                continue
            t = 0.5 * (a + b)
            if not t > a:
                continue
            wl_ = t - lo[d]
            wr_ = hi[d] - t
            if wl_ < mw or wr_ < mw:
                continue
            wr = node_w - acc
            if acc < min_weight or wr < min_weight:
                continue
            s = -(acc * acc) / (w2 * (other * wl_)) - (wr * wr) / (w2 * (other * wr_))
            if first_only:
                if s <= cutoff:
                    return s, d, t, acc
            elif s < best:
                best = s
                best_dim = d
                best_thr = t
                best_wl = acc
    return best, best_dim, best_thr, best_wl


@njit(cache=True, nogil=True)
def find_split(X, w, order, start, end, lo, hi, node_w, total_w, min_width,
               min_weight):
    """Best admissible split of a node, ties broken towards smallest (dim, thr).

    Returns ``(dim, threshold, score, left_weight)``; ``dim == -1`` when no
    admissible candidate exists.
    """
    w2 = total_w * total_w
    best, d, t, wl = _scan(X, w, order, start, end, lo, hi, node_w, w2,
                           min_width, min_weight, np.inf, False)
    if d < 0:
        return -1, 0.0, 0.0, 0.0
    cutoff = best + TIE_RTOL * abs(best)
    s, d, t, wl = _scan(X, w, order, start, end, lo, hi, node_w, w2,
                        min_width, min_weight, cutoff, True)
    return d, t, s, wl


@njit(cache=True, nogil=True)
def partition(X, order, tmp, start, end, dim, thr):
    """Stable in-place partition of every per-dimension order by ``x[dim] < thr``."""
    mid = start
    for d in range(order.shape[0]):
        row = order[d]
        k = start
        r = start
        for i in range(start, end):
            j = row[i]
            if X[j, dim] < thr:
                row[k] = j
                k += 1
            else:
                tmp[r] = j
                r += 1
        for i in range(start, r):
            row[k + i - start] = tmp[i]
        mid = k
    return mid


@njit(cache=True, nogil=True)
def grow(X, w, order, tmp, start, end, root_lo, root_hi, depth0, total_w,
         min_width, min_weight, max_depth, stop_depth):
    """Grow the subtree holding ``order[:, start:end]`` depth-first.

    Nodes reaching ``stop_depth`` (when below ``max_depth``) are emitted as
    placeholders and their point ranges and boxes are returned for later
    growth.
    """
    D = X.shape[1]
    n_pts = end - start
    cap = 2 * n_pts - 1 if n_pts > 0 else 1
    feature = np.full(cap, LEAF, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    weight = np.zeros(cap)

    p_cap = 1
    if stop_depth <= max_depth:
        p_cap = min(cap, 1 << min(stop_depth - depth0 + 1, 30))
    p_start = np.empty(p_cap, np.int64)
    p_end = np.empty(p_cap, np.int64)
    p_depth = np.empty(p_cap, np.int64)
    p_lo = np.empty((p_cap, D))
    p_hi = np.empty((p_cap, D))
    n_pend = 0

    S = max_depth - depth0 + 2
    s_start = np.empty(S, np.int64)
    s_end = np.empty(S, np.int64)
    s_depth = np.empty(S, np.int64)
    s_parent = np.empty(S, np.int64)
    s_side = np.empty(S, np.int64)
    s_lo = np.empty((S, D))
    s_hi = np.empty((S, D))

    s_start[0] = start
    s_end[0] = end
    s_depth[0] = depth0
    s_parent[0] = -1
    s_side[0] = 0
    s_lo[0] = root_lo
    s_hi[0] = root_hi
    sp = 1
    n = 0
    w2 = total_w * total_w
    while sp > 0:
        sp -= 1
        a = s_start[sp]
        b = s_end[sp]
        depth = s_depth[sp]
        parent = s_parent[sp]
        lo = s_lo[sp].copy()
        hi = s_hi[sp].copy()
        i = n
        n += 1
        if parent >= 0:
            if s_side[sp] == 0:
                left[parent] = i
            else:
                right[parent] = i

        if depth == stop_depth and depth < max_depth:
            feature[i] = PENDING
            value[i] = n_pend
            p_start[n_pend] = a
            p_end[n_pend] = b
            p_depth[n_pend] = depth
            p_lo[n_pend] = lo
            p_hi[n_pend] = hi
            n_pend += 1
            continue

        node_w = range_weight(w, order[0], a, b)
        vol = box_volume(lo, hi)
        if depth < max_depth:
            d, t, score, wl = find_split(X, w, order, a, b, lo, hi, node_w,
                                         total_w, min_width, min_weight)
            if d >= 0:
                node_r = -(node_w * node_w) / (w2 * vol)
                if node_r - score > GAIN_TOL:
                    feature[i] = d
                    threshold[i] = t
                    mid = partition(X, order, tmp, a, b, d, t)
                    # right first so the left child is popped next (preorder)
                    s_start[sp] = mid
                    s_end[sp] = b
                    s_depth[sp] = depth + 1
                    s_parent[sp] = i
                    s_side[sp] = 1
                    s_lo[sp] = lo
                    s_hi[sp] = hi
                    s_lo[sp, d] = t
                    sp += 1
                    s_start[sp] = a
                    s_end[sp] = mid
                    s_depth[sp] = depth + 1
                    s_parent[sp] = i
                    s_side[sp] = 0
                    s_lo[sp] = lo
                    s_hi[sp] = hi
                    s_hi[sp, d] = t
                    sp += 1
                    continue
        value[i] = node_w / (total_w * vol)
        weight[i] = node_w

    return (feature[:n], threshold[:n], left[:n], right[:n], value[:n], weight[:n],
            p_start[:n_pend], p_end[:n_pend], p_depth[:n_pend],
            p_lo[:n_pend], p_hi[:n_pend])


@njit(cache=True, nogil=True)
def locate(feature, threshold, left, right, root_lo, root_hi, P):
    """Leaf index holding each row of ``P``; -1 outside the (closed) root box."""
    m, D = P.shape
    out = np.empty(m, np.int64)
    for k in range(m):
        inside = True
        for d in range(D):
            x = P[k, d]
            if not (x >= root_lo[d] and x <= root_hi[d]):
                inside = False
                break
        if not inside:
            out[k] = -1
            continue
        i = 0
        while feature[i] >= 0:
            if P[k, feature[i]] < threshold[i]:
                i = left[i]
            else:
                i = right[i]
        out[k] = i
    return out


@njit(cache=True, nogil=True)
def node_boxes(feature, threshold, left, right, root_lo, root_hi):
    n = feature.shape[0]
    D = root_lo.shape[0]
    lo = np.empty((n, D))
    hi = np.empty((n, D))
    lo[0] = root_lo
    hi[0] = root_hi
    for i in range(n):
        f = feature[i]
        if f < 0:
            continue
        l = left[i]
        r = right[i]
        lo[l] = lo[i]
        hi[l] = hi[i]
        hi[l, f] = threshold[i]
        lo[r] = lo[i]
        hi[r] = hi[i]
        lo[r, f] = threshold[i]
    return lo, hi


@njit(cache=True, nogil=True)
def node_depths(feature, left, right):
    n = feature.shape[0]
    depth = np.zeros(n, np.int64)
    for i in range(n):
        if feature[i] >= 0:
            depth[left[i]] = depth[i] + 1
            depth[right[i]] = depth[i] + 1
    return depth


@njit(cache=True, nogil=True)
def slice_walk(feature, threshold, left, right, value, lo, hi, fixed_mask,
               fixed_val, q_lo, q_hi, max_depth, use_density):
    """Pruned descent over the leaves meeting a slice.

    Fixed dimensions route to a single child; free dimensions visit only
    children whose extent overlaps ``[q_lo, q_hi]`` with positive length.
    Returns the running total, the intersecting leaf ids with their
    contributions (in preorder), and the number of visited nodes.
    """
    D = lo.shape[1]
    stack = np.empty(2 * max_depth + 4, np.int64)
    leaves = np.empty(16, np.int64)
    contrib = np.empty(16)
    n_hit = 0
    stack[0] = 0
    sp = 1
    visited = 0
    total = 0.0
    while sp > 0:
        sp -= 1
        i = stack[sp]
        visited += 1
        f = feature[i]
        if f < 0:
            c = value[i] if use_density else 1.0
            for d in range(D):
                if fixed_mask[d]:
                    continue
                ext = min(hi[i, d], q_hi[d]) - max(lo[i, d], q_lo[d])
                c *= max(ext, 0.0)
            if c > 0.0:
                if n_hit == leaves.shape[0]:
                    leaves = np.concatenate((leaves, np.empty(n_hit, np.int64)))
                    contrib = np.concatenate((contrib, np.empty(n_hit)))
                leaves[n_hit] = i
                contrib[n_hit] = c
                n_hit += 1
            total += c
            continue
        t = threshold[i]
        if fixed_mask[f]:
            if fixed_val[f] < t:
                stack[sp] = left[i]
            else:
                stack[sp] = right[i]
            sp += 1
            continue
        if min(hi[i, f], q_hi[f]) - max(t, q_lo[f]) > 0.0:
            stack[sp] = right[i]
            sp += 1
        if min(t, q_hi[f]) - max(lo[i, f], q_lo[f]) > 0.0:
            stack[sp] = left[i]
            sp += 1
    return total, leaves[:n_hit], contrib[:n_hit], visited

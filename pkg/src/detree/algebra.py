"""Leafwise algebra on trees sharing a root box.

Binary operations first refine the partition of the left operand along the
leaf boundaries of the right one, so that every refined leaf sits inside
exactly one leaf of each operand, then act cell by cell.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DensityTree
from .errors import InconsistentRatio, InvalidWeight, NegativeDensity, NegativeScale

__all__ = [
    "CompactionPolicy",
    "scalar_map",
    "align",
    "combine",
    "compact",
    "efficiency_tree",
    "OPS",
]


@dataclass(frozen=True)
class CompactionPolicy:
    tolerance: float = 1e-6
    mode: str = "relative"

    def __post_init__(self):
        if not (self.tolerance >= 0 and math.isfinite(self.tolerance)):
            raise ValueError("tolerance must be a non-negative finite number")
        if self.mode not in ("absolute", "relative"):
            raise ValueError(f"mode must be 'absolute' or 'relative', got {self.mode!r}")

    def close(self, a: float, b: float) -> bool:
        diff = abs(a - b)
        if self.mode == "absolute":
            return diff <= self.tolerance
        return diff <= self.tolerance * max(abs(a), abs(b))


EXACT = CompactionPolicy(0.0, "absolute")


def scalar_map(tree: DensityTree, op: str, k: float) -> DensityTree:
    """Apply ``scale``, ``shift`` or ``clamp_min`` by ``k`` to every leaf."""
    k = float(k)
    v = tree.value
    leaf = tree.feature < 0
    if op == "scale":
        if k < 0:
            raise NegativeScale(f"scale factor must be non-negative, got {k}")
        new = v * k
    elif op == "shift":
        new = v + k
        if np.any(new[leaf] < 0):
            raise NegativeDensity(f"shift by {k} makes some leaf negative")
    elif op == "clamp_min":
        new = np.maximum(v, k)
    else:
        raise ValueError(f"unknown scalar op {op!r}")
    new = np.where(leaf, new, 0.0)
    return tree.replace_values(new)


class _Builder:
    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.flags = []

    def split(self, dim, thr):
        i = len(self.feature)
        self.feature.append(dim)
        self.threshold.append(thr)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.flags.append(False)
        return i

    def leaf(self, value, flag=False):
        i = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.flags.append(flag)
        return i

    def build(self, like: DensityTree, total_weight=None, metadata=None) -> DensityTree:
        return DensityTree(like.dims, like.root_box, self.feature, self.threshold,
                           self.left, self.right, self.value, self.flags,
                           like.total_weight if total_weight is None else total_weight,
                           metadata)


def _overlay(a: DensityTree, b: DensityTree, cell: Callable) -> _Builder:
    """Refine ``a`` along ``b`` and fill each refined leaf with ``cell(ia, ib)``."""
    a.check_compatible(b)
    out = _Builder()
    fa, ta, la, ra = a.feature, a.threshold, a.left, a.right
    fb, tb, lb, rb = b.feature, b.threshold, b.left, b.right

    def refine(ia, ib, lo, hi):
        f = fb[ib]
        while f >= 0:
            t = tb[ib]
            if lo[f] < t < hi[f]:
                break
            ib = lb[ib] if t >= hi[f] else rb[ib]
            f = fb[ib]
        if f < 0:
            return out.leaf(*cell(ia, ib))
        t = float(tb[ib])
        i = out.split(int(f), t)
        h = list(hi)
        h[f] = t
        out.left[i] = refine(ia, lb[ib], lo, h)
        l = list(lo)
        l[f] = t
        out.right[i] = refine(ia, rb[ib], l, hi)
        return i

    def walk(ia, ib, lo, hi):
        # ib tracks the deepest b node whose box still contains a's node box
        f = fa[ia]
        if f < 0:
            return refine(ia, ib, lo, hi)
        t = float(ta[ia])
        i = out.split(int(f), t)
        h = list(hi)
        h[f] = t
        out.left[i] = walk(la[ia], _narrow(ib, lo, h), lo, h)
        l = list(lo)
        l[f] = t
        out.right[i] = walk(ra[ia], _narrow(ib, l, hi), l, hi)
        return i

    def _narrow(ib, lo, hi):
        while fb[ib] >= 0:
            f = fb[ib]
            t = tb[ib]
            if t >= hi[f]:
                ib = lb[ib]
            elif t <= lo[f]:
                ib = rb[ib]
            else:
                break
        return ib

    limit = sys.getrecursionlimit()
    need = 4 * (a.depth + b.depth) + 100
    if need > limit:
        sys.setrecursionlimit(need)
    walk(0, 0, list(a.root_box.lo), list(a.root_box.hi))
    return out


def align(a: DensityTree, b: DensityTree) -> DensityTree:
    """Copy of ``a`` whose partition also follows every leaf boundary of ``b``."""
    va, fa = a.value, a.no_support
    out = _overlay(a, b, lambda ia, ib: (float(va[ia]), bool(fa[ia])))
    return out.build(a, metadata=a.metadata)


def _add(x, y):
    return x + y, False


def _sub(x, y):
    return max(x - y, 0.0), False


def _mul(x, y):
    return x * y, False


def _div(x, y):
    if y == 0.0:
        if x == 0.0:
            return 0.0, True
        raise InconsistentRatio(f"cannot divide density {x!r} by an empty leaf")
    return x / y, False


OPS = {
    "add": _add,
    "subtract_clamped": _sub,
    "sub": _sub,
    "multiply": _mul,
    "mul": _mul,
    "divide": _div,
    "div": _div,
}


def combine(a: DensityTree, b: DensityTree, op: str,
            policy: CompactionPolicy = CompactionPolicy()) -> DensityTree:
    """Leafwise ``op(a, b)`` on the common refinement, then :func:`compact`.

    ``op`` is one of ``add``, ``subtract_clamped``, ``multiply``, ``divide``.
    Division of zero by zero yields a zero leaf flagged as no-support.
    """
    try:
        fn = OPS[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}; expected one of {sorted(OPS)}") from None
    va, vb = a.value, b.value
    out = _overlay(a, b, lambda ia, ib: fn(float(va[ia]), float(vb[ib])))
    return compact(out.build(a), policy)


def compact(tree: DensityTree, policy: CompactionPolicy = EXACT) -> DensityTree:
    """Merge sibling leaves whose values are within ``policy``, bottom-up.

    Merged leaves take the volume-weighted mean; exactly equal siblings keep
    their common value unchanged.
    """
    f, t, l, r = tree.feature, tree.threshold, tree.left, tree.right
    v, flags = tree.value, tree.no_support
    lo, hi = tree.node_lo, tree.node_hi
    out = _Builder()

    def volume(i):
        return float(np.prod(hi[i] - lo[i]))

    # returns (node index in out, (value, flag, volume) if the result is a leaf)
    def visit(i):
        if f[i] < 0:
            val = float(v[i])
            return out.leaf(val, bool(flags[i])), (val, bool(flags[i]), volume(i))
        j = out.split(int(f[i]), float(t[i]))
        li, lleaf = visit(l[i])
        ri, rleaf = visit(r[i])
        out.left[j] = li
        out.right[j] = ri
        if lleaf is not None and rleaf is not None and policy.close(lleaf[0], rleaf[0]):
            if lleaf[0] == rleaf[0]:
                val = lleaf[0]
            else:
                val = (lleaf[0] * lleaf[2] + rleaf[0] * rleaf[2]) / (lleaf[2] + rleaf[2])
            flag = lleaf[1] and rleaf[1]
            # children were appended last; drop them and turn j into a leaf
            del out.feature[j + 1:], out.threshold[j + 1:], out.left[j + 1:]
            del out.right[j + 1:], out.value[j + 1:], out.flags[j + 1:]
            out.feature[j] = -1
            out.threshold[j] = 0.0
            out.left[j] = -1
            out.right[j] = -1
            out.value[j] = val
            out.flags[j] = flag
            return j, (val, flag, lleaf[2] + rleaf[2])
        return j, None

    limit = sys.getrecursionlimit()
    if 4 * tree.depth + 100 > limit:
        sys.setrecursionlimit(4 * tree.depth + 100)
    visit(0)
    return out.build(tree, metadata=tree.metadata)


def _same_box(a, i, b, j):
    return (np.array_equal(a.node_lo[i], b.node_lo[j])
            and np.array_equal(a.node_hi[i], b.node_hi[j]))


def efficiency_tree(t_pass: DensityTree, t_all: DensityTree, pass_weight: float,
                    all_weight: float,
                    policy: CompactionPolicy = CompactionPolicy()) -> DensityTree:
    """Per-cell pass probability ``(W_pass/W_all) * t_pass / t_all``.

    Values are clamped to ``[0, 1]``; cells where ``t_all`` vanishes hold 0
    and carry the no-support flag. When both trees still carry their
    training leaf weights and a pass leaf coincides with an all leaf, the
    value is computed directly as the weight ratio of the two leaves.
    """
    if not (0 < pass_weight <= all_weight) and not (pass_weight == 0 and all_weight > 0):
        raise InvalidWeight(
            f"need 0 <= pass_weight <= all_weight with all_weight > 0, got {pass_weight}, {all_weight}")
    frac = pass_weight / all_weight
    vp, va = t_pass.value, t_all.value
    wp, wa = t_pass.leaf_weight, t_all.leaf_weight
    counts = wp is not None and wa is not None

    def cell(ip, ia):
        a = float(va[ia])
        if a == 0.0:
            return 0.0, True
        if counts and _same_box(t_pass, ip, t_all, ia):
            # identical cells: the ratio reduces to W_pass / W_all
            r = float(wp[ip]) / float(wa[ia])
        else:
            r = frac * (float(vp[ip]) / a)
        return min(max(r, 0.0), 1.0), False

    out = _overlay(t_pass, t_all, cell)
    return compact(out.build(t_pass, total_weight=pass_weight,
                             metadata={"kind": "efficiency"}), policy)

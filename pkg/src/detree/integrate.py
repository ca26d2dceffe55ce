"""Exact integrals of a piecewise-constant tree.

Box and slice integrals share one pruned descent: fixed dimensions route a
query down a single branch, free dimensions only enter children whose extent
overlaps the requested range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels
from .core import DensityTree, HyperRect, SliceSpec
from .errors import DimensionMismatch, NoSupport

__all__ = [
    "SliceIntegralQuery",
    "SliceResult",
    "integrate_box",
    "integrate_slice",
    "slice_leaves",
    "conditional_ratio",
    "project",
]


@dataclass(frozen=True)
class SliceIntegralQuery:
    """A slice plus an optional restriction of the free dimensions.

    ``free_box`` has one interval per free dimension, in increasing
    dimension order.
    """

    slice: SliceSpec
    free_box: Optional[HyperRect] = None


class SliceResult(NamedTuple):
    total: float
    leaves: np.ndarray
    contributions: np.ndarray
    visited: int


def _walk(tree: DensityTree, fixed: dict, q_lo, q_hi, use_density=True) -> SliceResult:
    D = len(tree.dims)
    mask = np.zeros(D, dtype=np.bool_)
    vals = np.zeros(D)
    for d, v in fixed.items():
        mask[d] = True
        vals[d] = v
    total, leaves, contrib, visited = _kernels.slice_walk(
        tree.feature, tree.threshold, tree.left, tree.right, tree.value,
        tree.node_lo, tree.node_hi, mask, vals,
        np.asarray(q_lo, dtype=np.float64), np.asarray(q_hi, dtype=np.float64),
        tree.depth, use_density)
    return SliceResult(float(total), leaves, contrib, int(visited))


def integrate_box(tree: DensityTree, region: HyperRect, stats: bool = False):
    """Integral of the tree over ``region``.

    Subtrees not meeting the region are skipped. With ``stats`` the full
    :class:`SliceResult` (including the visited-node count) is returned.
    """
    if region.dim != len(tree.dims):
        raise DimensionMismatch(f"region has {region.dim} dims, tree has {len(tree.dims)}")
    res = _walk(tree, {}, region.lo, region.hi)
    return res if stats else res.total


def _query_bounds(tree: DensityTree, query: SliceIntegralQuery):
    s = query.slice
    s.check(tree)
    D = len(tree.dims)
    q_lo = np.array(tree.root_box.lo)
    q_hi = np.array(tree.root_box.hi)
    if query.free_box is not None:
        free = s.free_dims(D)
        if query.free_box.dim != len(free):
            raise DimensionMismatch(
                f"free_box has {query.free_box.dim} dims, the slice leaves {len(free)} free")
        q_lo[free] = query.free_box.lo
        q_hi[free] = query.free_box.hi
    return q_lo, q_hi


def slice_leaves(tree: DensityTree, query: SliceIntegralQuery,
                 use_density: bool = True) -> SliceResult:
    """Leaves meeting the slice with their contribution to the slice integral.

    With ``use_density=False`` the contribution is the bare free-dimension
    volume of the intersection.
    """
    q_lo, q_hi = _query_bounds(tree, query)
    if not query.slice.in_support(tree):
        return SliceResult(0.0, np.empty(0, np.int64), np.empty(0), 0)
    return _walk(tree, query.slice.fixed, q_lo, q_hi, use_density)


def integrate_slice(tree: DensityTree, query, stats: bool = False):
    """Integral over the free dimensions with the fixed ones held at their values.

    ``query`` is a :class:`SliceIntegralQuery` or a bare :class:`SliceSpec`.
    """
    if isinstance(query, SliceSpec):
        query = SliceIntegralQuery(query)
    res = slice_leaves(tree, query)
    return res if stats else res.total


def conditional_ratio(tree: DensityTree, slice: SliceSpec, dim, threshold: float,
                      above: bool = True, free_box: Optional[HyperRect] = None) -> float:
    """Fraction of the slice integral on one side of ``threshold`` in ``dim``.

    ``above=True`` gives the weight of ``x[dim] > threshold`` relative to the
    whole free range, i.e. the selection efficiency at the fixed point.
    """
    d = tree.dim_index(dim)
    if d in slice.fixed:
        raise ValueError(f"dimension {tree.dims[d]!r} is fixed in the slice")
    base = SliceIntegralQuery(slice, free_box)
    q_lo, q_hi = _query_bounds(tree, base)
    if not slice.in_support(tree):
        raise NoSupport("the fixed point lies outside the root box")
    den = _walk(tree, slice.fixed, q_lo, q_hi).total
    if not den > 0:
        raise NoSupport("the slice meets no populated leaf")
    if above:
        q_lo[d] = max(q_lo[d], threshold)
    else:
        q_hi[d] = min(q_hi[d], threshold)
    if not q_hi[d] > q_lo[d]:
        return 0.0
    num = _walk(tree, slice.fixed, q_lo, q_hi).total
    return min(max(num / den, 0.0), 1.0)


def project(tree: DensityTree, dim, bins: int) -> np.ndarray:
    """Marginal density of one dimension on ``bins`` equal bins of the root box.

    Returns rows ``(bin_lo, bin_hi, density)``.
    """
    d = tree.dim_index(dim)
    if int(bins) != bins or bins < 1:
        raise ValueError("bins must be a positive integer")
    lo = np.array(tree.root_box.lo)
    hi = np.array(tree.root_box.hi)
    edges = np.linspace(lo[d], hi[d], int(bins) + 1)
    edges[-1] = hi[d]
    rows = np.empty((int(bins), 3))
    for k in range(int(bins)):
        q_lo = lo.copy()
        q_hi = hi.copy()
        q_lo[d] = edges[k]
        q_hi[d] = edges[k + 1]
        mass = _walk(tree, {}, q_lo, q_hi).total
        rows[k] = edges[k], edges[k + 1], mass / (edges[k + 1] - edges[k])
    return rows

"""Greedy growth of density estimation trees.

Each node is split at the midpoint candidate that minimises the summed
replacement error of its two children, ``-W_L²/(W²V_L) - W_R²/(W²V_R)``.
Growth stops when no candidate respects the per-dimension minimal leaf width
(and optional minimal leaf weight) or when the best gain is not positive.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .core import Dataset, DensityTree, HyperRect
from .errors import (
    DimensionMismatch,
    InvalidVolume,
    InvalidWeight,
    PointOutsideBox,
)

__all__ = [
    "TrainConfig",
    "SplitCandidate",
    "replacement_error",
    "gini_gain",
    "best_split",
    "auto_min_width",
    "data_box",
    "train",
    "refit",
]

# Scott's normal-reference constant for histogram bin widths.
SCOTT_FACTOR = 3.49
# Auto widths are never narrower than extent / 2**20.
AUTO_WIDTH_FLOOR = 2.0 ** -20


@dataclass(frozen=True)
class TrainConfig:
    """Stopping policy for :func:`train`.

    ``min_leaf_width`` is either ``"auto"``, a single positive width applied
    to every dimension, or one width per dimension. ``root_box`` fixes the
    support explicitly; otherwise the data extent padded by ``pad`` (relative)
    is used.
    """

    min_leaf_width: Union[str, float, Sequence[float]] = "auto"
    min_leaf_weight: float = 0.0
    max_depth: int = 64
    root_box: Optional[HyperRect] = None
    pad: float = 1e-9

    def __post_init__(self):
        mw = self.min_leaf_width
        if isinstance(mw, str):
            if mw != "auto":
                raise ValueError(f"min_leaf_width must be 'auto' or positive numbers, got {mw!r}")
        else:
            widths = tuple(float(v) for v in np.ravel(mw))
            if not widths or not all(v > 0 and math.isfinite(v) for v in widths):
                raise ValueError("min_leaf_width entries must be positive and finite")
            object.__setattr__(self, "min_leaf_width", widths)
        if not (self.min_leaf_weight >= 0 and math.isfinite(self.min_leaf_weight)):
            raise ValueError("min_leaf_weight must be non-negative")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise ValueError("max_depth must be a positive integer")
        if not self.pad >= 0:
            raise ValueError("pad must be non-negative")

    def echo(self) -> dict:
        """Plain-data view used as tree metadata."""
        out = asdict(self)
        if self.root_box is not None:
            out["root_box"] = [list(self.root_box.lo), list(self.root_box.hi)]
        if not isinstance(self.min_leaf_width, str):
            out["min_leaf_width"] = list(self.min_leaf_width)
        return out


@dataclass(frozen=True)
class SplitCandidate:
    dim: int
    threshold: float
    score: float
    left_weight: float
    right_weight: float


def replacement_error(weight: float, total_weight: float, volume: float) -> float:
    """Node contribution ``-W²/(W_tot² V)`` to the training loss."""
    if not volume > 0:
        raise InvalidVolume(f"volume must be positive, got {volume}")
    if not total_weight > 0 or not weight >= 0:
        raise InvalidWeight(f"need total_weight > 0 and weight >= 0, got {total_weight}, {weight}")
    return -(weight * weight) / (total_weight * total_weight * volume)


def gini_gain(node_r: float, left_r: float, right_r: float) -> float:
    """Loss reduction ``R(node) - R(left) - R(right)`` of a split."""
    return node_r - left_r - right_r


def data_box(points: np.ndarray, pad: float = 1e-9) -> HyperRect:
    """Data extent padded by ``pad`` times the extent on both sides.

    A dimension with zero extent is padded by ``max(|value|, 1) * pad``.
    """
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    ext = hi - lo
    margin = np.where(ext > 0, ext * pad, np.maximum(np.abs(lo), 1.0) * pad)
    # pad=0 on a degenerate dimension still needs a positive extent
    margin = np.where(margin > 0, margin, np.maximum(np.abs(lo), 1.0) * 1e-9)
    return HyperRect(lo - margin, hi + margin)


def auto_min_width(data: Dataset, box: HyperRect) -> np.ndarray:
    """Scott-rule resolution ``3.49 σ n^(-1/3)`` per dimension.

    σ is the weighted standard deviation and n the effective sample size
    ``(Σw)² / Σw²``. Widths are floored at ``extent / 2**20``.
    """
    w = data.weights
    W = w.sum()
    n_eff = W * W / np.sum(w * w)
    mean = w @ data.points / W
    var = w @ (data.points - mean) ** 2 / W
    width = SCOTT_FACTOR * np.sqrt(var) * n_eff ** (-1.0 / 3.0)
    return np.maximum(width, box.widths * AUTO_WIDTH_FLOOR)


def _resolve(data: Dataset, config: TrainConfig):
    data.require_nonempty()
    D = data.dim
    if config.root_box is not None:
        box = config.root_box
        if box.dim != D:
            raise DimensionMismatch(f"root_box has {box.dim} dims, data has {D}")
        P = data.points
        outside = np.any((P < np.array(box.lo)) | (P > np.array(box.hi)), axis=1)
        if outside.any():
            k = int(np.flatnonzero(outside)[0])
            raise PointOutsideBox(f"point {k} {P[k].tolist()} lies outside the explicit root box")
    else:
        box = data_box(data.points, config.pad)
    if isinstance(config.min_leaf_width, str):
        min_width = auto_min_width(data, box)
    else:
        min_width = np.array(config.min_leaf_width, dtype=np.float64)
        if min_width.shape[0] == 1:
            min_width = np.repeat(min_width, D)
        if min_width.shape[0] != D:
            raise DimensionMismatch(f"min_leaf_width has {min_width.shape[0]} entries, data has {D} dims")
    return box, min_width


def _sorted_orders(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def best_split(points, weights, box: HyperRect, total_weight: float,
               config: TrainConfig) -> Optional[SplitCandidate]:
    """Best admissible split of a single node, or ``None`` when it should be a leaf.

    Candidates are midpoints between consecutive distinct coordinates in each
    dimension. Ties within a relative 1e-12 resolve to the smallest
    ``(dim, threshold)``.
    """
    X = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(len(weights), -1))
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if X.shape[1] != box.dim:
        raise DimensionMismatch("points and box disagree on dimensionality")
    if isinstance(config.min_leaf_width, str):
        raise ValueError("best_split needs explicit widths; 'auto' is resolved by train()")
    min_width = np.broadcast_to(np.array(config.min_leaf_width), (box.dim,)).copy()
    lo = np.array(box.lo)
    hi = np.array(box.hi)
    order = _sorted_orders(X)
    if X.shape[0] < 2:
        return None
    node_w = _kernels.range_weight(w, order[0], 0, X.shape[0])
    d, t, score, wl = _kernels.find_split(X, w, order, 0, X.shape[0], lo, hi, node_w,
                                          float(total_weight), min_width,
                                          float(config.min_leaf_weight))
    if d < 0:
        return None
    vol = _kernels.box_volume(lo, hi)
    node_r = -(node_w * node_w) / (total_weight * total_weight * vol)
    if not node_r - score > _kernels.GAIN_TOL:
        return None
    return SplitCandidate(int(d), float(t), float(score), float(wl), float(node_w - wl))


def _splice(top, subtrees):
    """Replace placeholder nodes of ``top`` by their grown subtrees."""
    feature, threshold, left, right, value, weight = top[:6]
    keys = ("feature", "threshold", "left", "right", "value", "weight")
    parts = {k: [] for k in keys}
    new_pos = np.empty(feature.shape[0], np.int64)
    size = 0
    for i in range(feature.shape[0]):
        new_pos[i] = size
        if feature[i] == _kernels.PENDING:
            sf, st, sl, sr, sv, sw = subtrees[int(value[i])][:6]
            parts["feature"].append(sf)
            parts["threshold"].append(st)
            parts["left"].append(np.where(sl >= 0, sl + size, -1))
            parts["right"].append(np.where(sr >= 0, sr + size, -1))
            parts["value"].append(sv)
            parts["weight"].append(sw)
            size += sf.shape[0]
        else:
            for k, a in zip(keys, (feature, threshold, left, right, value, weight)):
                parts[k].append(a[i:i + 1])
            size += 1
    out = {k: np.concatenate(v) for k, v in parts.items()}
    # remap child pointers of the top-level internal nodes
    for i in range(feature.shape[0]):
        if feature[i] >= 0:
            j = new_pos[i]
            out["left"][j] = new_pos[left[i]]
            out["right"][j] = new_pos[right[i]]
    return tuple(out[k] for k in keys)


def train(data: Dataset, config: TrainConfig = TrainConfig(), jobs: int = 1) -> DensityTree:
    """Grow a density estimation tree on ``data``.

    Subtrees below the first few levels are grown on ``jobs`` threads; the
    result is identical for every value of ``jobs``.
    """
    box, min_width = _resolve(data, config)
    X = np.ascontiguousarray(data.points)
    w = np.ascontiguousarray(data.weights)
    W = float(data.total_weight)
    N = X.shape[0]
    order = _sorted_orders(X)
    tmp = np.empty(N, np.int64)
    lo = np.array(box.lo)
    hi = np.array(box.hi)
    max_depth = int(config.max_depth)
    min_weight = float(config.min_leaf_weight)

    if jobs <= 1:
        arrays = _kernels.grow(X, w, order, tmp, 0, N, lo, hi, 0, W, min_width,
                               min_weight, max_depth, max_depth + 1)[:6]
    else:
        stop = int(math.ceil(math.log2(jobs))) + 2
        top = _kernels.grow(X, w, order, tmp, 0, N, lo, hi, 0, W, min_width,
                            min_weight, max_depth, stop)
        p_start, p_end, p_depth, p_lo, p_hi = top[6:]

        def work(k):
            return _kernels.grow(X, w, order, tmp, int(p_start[k]), int(p_end[k]),
                                 p_lo[k].copy(), p_hi[k].copy(), int(p_depth[k]), W,
                                 min_width, min_weight, max_depth, max_depth + 1)

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            subtrees = list(pool.map(work, range(p_start.shape[0])))
        arrays = _splice(top, subtrees) if subtrees else top[:6]

    feature, threshold, left, right, value, weight = arrays
    meta = {"config": config.echo(), "n_points": N,
            "min_leaf_width_resolved": [float(v) for v in min_width]}
    return DensityTree(data.columns, box, feature, threshold, left, right, value,
                       total_weight=W, metadata=meta, leaf_weight=weight)


def refit(tree: DensityTree, data: Dataset) -> DensityTree:
    """Leaf densities of ``tree``'s partition re-estimated on ``data``.

    Useful to bin two samples identically, e.g. the passing and the full
    sample of an efficiency table.
    """
    from .core import locate

    data.require_nonempty()
    if data.dim != len(tree.dims):
        raise DimensionMismatch(f"data has {data.dim} dims, tree has {len(tree.dims)}")
    ids = locate(tree, data.points)
    if np.any(ids < 0):
        k = int(np.flatnonzero(ids < 0)[0])
        raise PointOutsideBox(f"point {k} lies outside the tree's root box")
    W = data.total_weight
    mass = np.bincount(ids, weights=data.weights, minlength=tree.n_nodes)
    vol = np.ones(tree.n_nodes)
    vol[tree.leaf_ids] = tree.leaf_volumes
    value = np.where(tree.feature < 0, mass / (W * vol), 0.0)
    return DensityTree(tree.dims, tree.root_box, tree.feature, tree.threshold, tree.left,
                       tree.right, value, None, W, {"refit_of": tree.metadata.get("config")},
                       leaf_weight=np.where(tree.feature < 0, mass, 0.0))

"""Domain types, point evaluation and structural validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence, Union

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    IncompatibleSupport,
    InvalidVolume,
    InvalidWeight,
    NegativeWeight,
    NoFreeDimensions,
    UnknownDimension,
)

__all__ = [
    "Dataset",
    "HyperRect",
    "Leaf",
    "Split",
    "DensityTree",
    "SliceSpec",
    "Violation",
    "leaf_density",
    "evaluate",
    "evaluate_many",
    "validate",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Weighted points in D dimensions.

    Parameters
    ----------
    columns
        Unique, non-empty dimension names.
    points
        Array of shape ``(N, D)`` with finite coordinates.
    weights
        Non-negative finite weights of shape ``(N,)``; unit weights when
        omitted.
    """

    columns: tuple
    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        columns = tuple(str(c) for c in self.columns)
        points = np.array(self.points, dtype=np.float64, copy=True)
        if points.ndim == 1:
            points = points.reshape(-1, 1) if len(columns) == 1 else points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] != len(columns):
            raise DimensionMismatch(
                f"points have shape {points.shape}, expected (N, {len(columns)})")
        if len(set(columns)) != len(columns) or any(not c for c in columns):
            raise ValueError("column names must be unique and non-empty")
        if not np.all(np.isfinite(points)):
            raise ValueError("all coordinates must be finite")
        if self.weights is None:
            weights = np.ones(points.shape[0])
        else:
            weights = np.array(self.weights, dtype=np.float64, copy=True).reshape(-1)
            if weights.shape[0] != points.shape[0]:
                raise DimensionMismatch("one weight per point is required")
            if not np.all(np.isfinite(weights)):
                raise InvalidWeight("weights must be finite")
            if np.any(weights < 0):
                raise NegativeWeight("weights must be non-negative")
        points.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_array(cls, points, columns=None, weights=None) -> "Dataset":
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if columns is None:
            columns = [f"x{d}" for d in range(points.shape[1])]
        return cls(tuple(columns), points, weights)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return len(self.columns)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def require_nonempty(self):
        if self.n == 0 or not self.total_weight > 0:
            raise EmptyDataset("dataset is empty or has zero total weight")


@dataclass(frozen=True)
class HyperRect:
    """Axis-aligned box ``[lo, hi)`` per dimension."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.ravel(self.lo))
        hi = tuple(float(v) for v in np.ravel(self.hi))
        if len(lo) != len(hi):
            raise DimensionMismatch("lo and hi must have the same length")
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise InvalidVolume("box bounds must be finite")
            if not a < b:
                raise InvalidVolume(f"empty extent [{a}, {b}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_bounds(cls, bounds: Sequence[tuple]) -> "HyperRect":
        return cls(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    @property
    def volume(self) -> float:
        return float(_kernels.box_volume(np.array(self.lo), np.array(self.hi)))

    def contains(self, point, closed_upper=None) -> bool:
        """Membership with right-open intervals.

        ``closed_upper`` lists, per dimension, whether ``hi`` itself belongs
        to the box (true for the upper face of a tree's root box).
        """
        point = np.ravel(point)
        if point.shape[0] != self.dim:
            raise DimensionMismatch(f"point has {point.shape[0]} coordinates, expected {self.dim}")
        for d, x in enumerate(point):
            if x < self.lo[d]:
                return False
            if x > self.hi[d]:
                return False
            if x == self.hi[d] and not (closed_upper is not None and closed_upper[d]):
                return False
        return True

    def intersection_volume(self, other: "HyperRect") -> float:
        v = 1.0
        for a0, b0, a1, b1 in zip(self.lo, self.hi, other.lo, other.hi):
            v *= max(0.0, min(b0, b1) - max(a0, a1))
        return v


@dataclass(frozen=True)
class Leaf:
    density: float
    no_support: bool = False


@dataclass(frozen=True)
class Split:
    dim: int
    threshold: float
    left: Union["Split", Leaf]
    right: Union["Split", Leaf]


TreeNode = Union[Split, Leaf]


def _readonly(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    if a.flags.writeable:
        a = a.copy()
        a.flags.writeable = False
    return a


class DensityTree:
    """Piecewise-constant density on a partition of ``root_box``.

    The tree is stored as flat preorder arrays (see :mod:`detree._kernels`)
    and is immutable once built. Use :meth:`from_nodes` to build one by hand
    and :meth:`to_nodes` to get the nested view back.
    """

    def __init__(self, dims, root_box: HyperRect, feature, threshold, left, right,
                 value, no_support=None, total_weight: float = 1.0,
                 metadata: Mapping | None = None, leaf_weight=None):
        self.dims = tuple(dims)
        self.root_box = root_box
        self.feature = _readonly(feature, np.int64)
        self.threshold = _readonly(threshold, np.float64)
        self.left = _readonly(left, np.int64)
        self.right = _readonly(right, np.int64)
        self.value = _readonly(value, np.float64)
        if no_support is None:
            no_support = np.zeros(self.feature.shape[0], dtype=bool)
        self.no_support = _readonly(no_support, np.bool_)
        self.total_weight = float(total_weight)
        self.metadata = dict(metadata or {})
        # training weight per leaf; kept in memory only, not serialized
        self.leaf_weight = None if leaf_weight is None else _readonly(leaf_weight, np.float64)
        if len(self.dims) != root_box.dim:
            raise DimensionMismatch("dims and root_box disagree on dimensionality")
        n = self.feature.shape[0]
        if n == 0 or any(a.shape[0] != n for a in (
                self.threshold, self.left, self.right, self.value, self.no_support)):
            raise ValueError("node arrays must be non-empty and of equal length")

    # -- construction ---------------------------------------------------

    @classmethod
    def from_nodes(cls, dims, root_box: HyperRect, root: TreeNode,
                   total_weight: float = 1.0, metadata=None) -> "DensityTree":
        feature, threshold, left, right, value, flags = [], [], [], [], [], []

        def emit(node):
            i = len(feature)
            if isinstance(node, Leaf):
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(float(node.density))
                flags.append(bool(node.no_support))
                return i
            feature.append(int(node.dim))
            threshold.append(float(node.threshold))
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            flags.append(False)
            left[i] = emit(node.left)
            right[i] = emit(node.right)
            return i

        emit(root)
        return cls(dims, root_box, feature, threshold, left, right, value, flags,
                   total_weight, metadata)

    def to_nodes(self, i: int = 0) -> TreeNode:
        if self.feature[i] < 0:
            return Leaf(float(self.value[i]), bool(self.no_support[i]))
        return Split(int(self.feature[i]), float(self.threshold[i]),
                     self.to_nodes(int(self.left[i])), self.to_nodes(int(self.right[i])))

    def replace_values(self, value, no_support=None, metadata=None) -> "DensityTree":
        """Same partition, new leaf values."""
        return DensityTree(self.dims, self.root_box, self.feature, self.threshold,
                           self.left, self.right, value,
                           self.no_support if no_support is None else no_support,
                           self.total_weight,
                           self.metadata if metadata is None else metadata)

    # -- derived structure ------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @cached_property
    def leaf_ids(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    @property
    def n_leaves(self) -> int:
        return self.leaf_ids.shape[0]

    @cached_property
    def _boxes(self):
        lo, hi = _kernels.node_boxes(self.feature, self.threshold, self.left, self.right,
                                     np.array(self.root_box.lo), np.array(self.root_box.hi))
        lo.flags.writeable = False
        hi.flags.writeable = False
        return lo, hi

    @property
    def node_lo(self) -> np.ndarray:
        return self._boxes[0]

    @property
    def node_hi(self) -> np.ndarray:
        return self._boxes[1]

    @cached_property
    def node_depth(self) -> np.ndarray:
        return _kernels.node_depths(self.feature, self.left, self.right)

    @property
    def depth(self) -> int:
        return int(self.node_depth.max())

    @cached_property
    def leaf_volumes(self) -> np.ndarray:
        ids = self.leaf_ids
        return np.prod(self.node_hi[ids] - self.node_lo[ids], axis=1)

    def leaf_box(self, i: int) -> HyperRect:
        return HyperRect(self.node_lo[i], self.node_hi[i])

    def dim_index(self, name) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < len(self.dims):
                raise UnknownDimension(f"dimension index {name} out of range")
            return int(name)
        try:
            return self.dims.index(name)
        except ValueError:
            raise UnknownDimension(f"unknown dimension {name!r}; known: {', '.join(self.dims)}") from None

    def same_support(self, other: "DensityTree") -> bool:
        return self.dims == other.dims and self.root_box == other.root_box

    def check_compatible(self, other: "DensityTree"):
        if not self.same_support(other):
            raise IncompatibleSupport("trees must share dimensions and root box exactly")

    def __repr__(self):
        return (f"DensityTree(dims={self.dims}, leaves={self.n_leaves}, "
                f"depth={self.depth}, total_weight={self.total_weight!r})")


@dataclass(frozen=True)
class SliceSpec:
    """Fixed values for a subset of dimensions, keyed by dimension index."""

    fixed: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "fixed",
                           {int(k): float(v) for k, v in dict(self.fixed).items()})

    @classmethod
    def from_names(cls, tree: DensityTree, values: Mapping) -> "SliceSpec":
        return cls({tree.dim_index(k): v for k, v in values.items()})

    def check(self, tree: DensityTree, need_free: bool = True):
        D = len(tree.dims)
        for d, v in self.fixed.items():
            if not 0 <= d < D:
                raise DimensionMismatch(f"fixed dimension {d} out of range for D={D}")
            if not math.isfinite(v):
                raise ValueError("fixed values must be finite")
        if need_free and len(self.fixed) >= D:
            raise NoFreeDimensions("the slice fixes every dimension; use evaluate instead")

    def free_dims(self, D: int) -> list:
        return [d for d in range(D) if d not in self.fixed]

    def in_support(self, tree: DensityTree) -> bool:
        box = tree.root_box
        return all(box.lo[d] <= v <= box.hi[d] for d, v in self.fixed.items())


@dataclass(frozen=True)
class Violation:
    path: str
    kind: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.kind}: {self.message}"


def leaf_density(weight_in_leaf: float, total_weight: float, leaf_volume: float) -> float:
    """Plug-in density ``W_leaf / (W_tot * V_leaf)`` of a leaf."""
    if not leaf_volume > 0:
        raise InvalidVolume(f"leaf volume must be positive, got {leaf_volume}")
    if not total_weight > 0 or not weight_in_leaf >= 0:
        raise InvalidWeight(
            f"need total_weight > 0 and weight_in_leaf >= 0, got {total_weight}, {weight_in_leaf}")
    return weight_in_leaf / (total_weight * leaf_volume)


def _as_points(tree: DensityTree, points) -> np.ndarray:
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(1, -1) if len(tree.dims) > 1 or P.shape[0] == 1 else P.reshape(-1, 1)
    if P.ndim != 2 or P.shape[1] != len(tree.dims):
        raise DimensionMismatch(f"points must have {len(tree.dims)} coordinates")
    return np.ascontiguousarray(P)


def locate(tree: DensityTree, points) -> np.ndarray:
    """Node index of the leaf holding each point, -1 outside the root box."""
    P = _as_points(tree, points)
    return _kernels.locate(tree.feature, tree.threshold, tree.left, tree.right,
                           np.array(tree.root_box.lo), np.array(tree.root_box.hi), P)


def evaluate_many(tree: DensityTree, points) -> np.ndarray:
    """Density at each row of ``points`` (shape ``(m, D)``)."""
    ids = locate(tree, points)
    out = np.zeros(ids.shape[0])
    inside = ids >= 0
    out[inside] = tree.value[ids[inside]]
    return out


def evaluate(tree: DensityTree, point) -> float:
    """Density at a single point; 0 outside the root box."""
    p = np.asarray(point, dtype=np.float64).reshape(-1)
    if p.shape[0] != len(tree.dims):
        raise DimensionMismatch(f"point has {p.shape[0]} coordinates, expected {len(tree.dims)}")
    return float(evaluate_many(tree, p.reshape(1, -1))[0])


def validate(tree: DensityTree) -> list:
    """List every broken invariant; an empty list means the tree is sound."""
    out = []
    n = tree.n_nodes
    D = len(tree.dims)
    lo0, hi0 = tree.root_box.lo, tree.root_box.hi
    seen = np.zeros(n, dtype=bool)
    # (node, path, lo, hi)
    stack = [(0, "root", list(lo0), list(hi0))]
    while stack:
        i, path, lo, hi = stack.pop()
        if not 0 <= i < n:
            out.append(Violation(path, "DanglingChild", f"node index {i} out of range"))
            continue
        if seen[i]:
            out.append(Violation(path, "SharedNode", f"node {i} reached twice"))
            continue
        seen[i] = True
        f = int(tree.feature[i])
        if f < 0:
            v = float(tree.value[i])
            if not math.isfinite(v):
                out.append(Violation(path, "NonFiniteDensity", f"density {v}"))
            elif v < 0:
                out.append(Violation(path, "NegativeDensity", f"density {v} < 0"))
            continue
        if f >= D:
            out.append(Violation(path, "BadSplitDimension", f"split dim {f} >= D={D}"))
            continue
        t = float(tree.threshold[i])
        if not (lo[f] < t < hi[f]):
            out.append(Violation(
                path, "ThresholdNotInterior",
                f"threshold {t!r} not strictly inside [{lo[f]!r}, {hi[f]!r}) on dim {f}"))
        lhi = list(hi)
        lhi[f] = min(t, hi[f])
        rlo = list(lo)
        rlo[f] = max(t, lo[f])
        stack.append((int(tree.right[i]), path + ".R", rlo, list(hi)))
        stack.append((int(tree.left[i]), path + ".L", list(lo), lhi))
    if not seen.all():
        out.append(Violation("root", "UnreachableNodes",
                             f"{int((~seen).sum())} nodes are not reachable from the root"))
    return out

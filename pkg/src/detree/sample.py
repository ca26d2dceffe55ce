"""Conditional sampling of the free dimensions given fixed ones.

A leaf meeting the slice is drawn from a cumulative table by inverse-CDF
lookup, then every free coordinate is drawn flat inside that leaf.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import DensityTree, HyperRect, SliceSpec
from .errors import NoSupport
from .integrate import SliceIntegralQuery, slice_leaves

__all__ = ["ConditionalSampler", "build_sampler", "sample"]


class ConditionalSampler:
    """Cumulative leaf table for one slice, plus its random stream.

    Attributes
    ----------
    leaves
        Node ids of the selectable leaves, in tree preorder.
    weights
        Selection weight of each leaf (density times free volume of the
        intersection, or the bare volume in ``volume_only`` mode).
    cumulative
        Running sum of ``weights``; strictly increasing.
    """

    def __init__(self, tree: DensityTree, slice: SliceSpec, leaves, weights,
                 q_lo, q_hi, seed, volume_only=False):
        self.tree = tree
        self.slice = slice
        self.leaves = leaves
        self.weights = weights
        self.cumulative = np.cumsum(weights)
        self.volume_only = volume_only
        self.free = np.array(slice.free_dims(len(tree.dims)), dtype=np.int64)
        self._q = (q_lo, q_hi)
        ids = leaves
        self._lo = np.maximum(tree.node_lo[ids][:, self.free], q_lo[self.free])
        self._hi = np.minimum(tree.node_hi[ids][:, self.free], q_hi[self.free])
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(seed)
        self.rng = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def total_weight(self) -> float:
        return float(self.cumulative[-1])

    @property
    def free_dims(self) -> tuple:
        return tuple(self.tree.dims[d] for d in self.free)

    def probabilities(self) -> np.ndarray:
        return self.weights / self.total_weight

    def spawn(self, n: int) -> list:
        """Independent samplers on child streams, for parallel draws."""
        return [ConditionalSampler(self.tree, self.slice, self.leaves, self.weights,
                                   *self._q, seed=s, volume_only=self.volume_only)
                for s in self._seq.spawn(n)]

    def draw_leaves(self, count: int) -> np.ndarray:
        """Positions (into :attr:`leaves`) of ``count`` randomly chosen leaves."""
        u = self.rng.random(count) * self.total_weight
        pos = np.searchsorted(self.cumulative, u, side="right")
        return np.minimum(pos, self.leaves.shape[0] - 1)

    def sample(self, count: int) -> np.ndarray:
        if int(count) != count or count < 1:
            raise ValueError("count must be a positive integer")
        pos = self.draw_leaves(int(count))
        lo = self._lo[pos]
        hi = self._hi[pos]
        x = lo + (hi - lo) * self.rng.random(lo.shape)
        # lo + (hi - lo) * u can round up to hi; leaves are right-open
        return np.minimum(x, np.nextafter(hi, lo))


def build_sampler(tree: DensityTree, slice: SliceSpec, seed: int = 0,
                  free_box: Optional[HyperRect] = None,
                  volume_only: bool = False) -> ConditionalSampler:
    """Prepare conditional draws of the free dimensions at the fixed values.

    Leaves are weighted by density times the free volume of their
    intersection with the slice. ``volume_only=True`` drops the density
    factor and weights every intersecting leaf, empty or not, by volume
    alone.
    """
    query = SliceIntegralQuery(slice, free_box)
    if not slice.in_support(tree):
        slice.check(tree)
        raise NoSupport("the fixed values lie outside the root box")
    res = slice_leaves(tree, query, use_density=not volume_only)
    leaves, weights = res.leaves, res.contributions
    if not np.any(tree.value[leaves] > 0):
        raise NoSupport("every leaf meeting the slice has zero density")
    D = len(tree.dims)
    q_lo = np.array(tree.root_box.lo)
    q_hi = np.array(tree.root_box.hi)
    if free_box is not None:
        free = slice.free_dims(D)
        q_lo[free] = free_box.lo
        q_hi[free] = free_box.hi
    return ConditionalSampler(tree, slice, leaves, weights, q_lo, q_hi, seed, volume_only)


def sample(sampler: ConditionalSampler, count: int) -> np.ndarray:
    """``count`` rows of free-dimension values drawn from ``sampler``."""
    return sampler.sample(count)

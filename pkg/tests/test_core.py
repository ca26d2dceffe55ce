import numpy as np
import pytest

from detree import (
    Dataset,
    DensityTree,
    HyperRect,
    Leaf,
    SliceSpec,
    Split,
    evaluate,
    evaluate_many,
    leaf_density,
    locate,
    validate,
)
from detree.errors import (
    DimensionMismatch,
    EmptyDataset,
    InvalidVolume,
    InvalidWeight,
    NegativeWeight,
    NoFreeDimensions,
    UnknownDimension,
)

import oracles

UNIT2 = HyperRect([0.0, 0.0], [1.0, 1.0])
UNIT1 = HyperRect([0.0], [1.0])


def two_leaf():
    return DensityTree.from_nodes(["x"], UNIT1, Split(0, 0.5, Leaf(1.5), Leaf(0.5)), 4.0)


class TestHyperRect:
    def test_volume_and_widths(self):
        r = HyperRect([0.0, 1.0], [2.0, 1.5])
        assert r.volume == 1.0
        assert r.widths.tolist() == [2.0, 0.5]

    @pytest.mark.parametrize("lo,hi", [([0.0], [0.0]), ([1.0], [0.0]), ([0.0], [np.inf])])
    def test_rejects_degenerate(self, lo, hi):
        with pytest.raises(InvalidVolume):
            HyperRect(lo, hi)

    def test_contains_is_half_open(self):
        assert UNIT1.contains([0.0])
        assert not UNIT1.contains([1.0])
        assert UNIT1.contains([1.0], closed_upper=[True])

    def test_intersection_volume(self):
        other = HyperRect([0.5, -1.0], [3.0, 0.25])
        assert UNIT2.intersection_volume(other) == 0.5 * 0.25
        assert UNIT2.intersection_volume(HyperRect([2.0, 2.0], [3.0, 3.0])) == 0.0


class TestDataset:
    def test_from_array_defaults(self):
        d = Dataset.from_array(np.zeros((3, 2)))
        assert d.columns == ("x0", "x1")
        assert d.total_weight == 3.0

    def test_arrays_are_readonly(self):
        d = Dataset.from_array(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            d.points[0, 0] = 1.0

    def test_rejects_negative_weight(self):
        with pytest.raises(NegativeWeight):
            Dataset.from_array(np.zeros((2, 1)), weights=[1.0, -1.0])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Dataset.from_array([[np.nan]])

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            Dataset.from_array(np.zeros((0, 2))).require_nonempty()


class TestLeafDensity:
    @pytest.mark.parametrize("w,W,V,expected", [(4, 4, 1.0, 1.0), (0, 10, 0.25, 0.0),
                                                 (3, 4, 0.5, 1.5)])
    def test_examples(self, w, W, V, expected):
        assert leaf_density(w, W, V) == expected

    def test_bad_volume(self):
        with pytest.raises(InvalidVolume):
            leaf_density(1, 1, 0.0)


class TestEvaluate:
    def test_single_leaf(self):
        t = DensityTree.from_nodes(["x", "y"], UNIT2, Leaf(1.0))
        assert evaluate(t, [0.3, 0.7]) == 1.0
        assert evaluate(t, [1.5, 0.5]) == 0.0

    def test_two_leaf(self):
        t = two_leaf()
        assert evaluate(t, [0.2]) == 1.5
        assert evaluate(t, [0.9]) == 0.5

    def test_boundaries(self):
        t = two_leaf()
        assert evaluate(t, [0.5]) == 0.5   # thresholds go right
        assert evaluate(t, [1.0]) == 0.5   # root upper face is closed
        assert evaluate(t, [0.0]) == 1.5
        assert evaluate(t, [np.nextafter(1.0, 2.0)]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            evaluate(two_leaf(), [0.1, 0.2])

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            t = oracles.random_tree(rng, 3, int(rng.integers(1, 40)))
            P = oracles.uniform_probes(rng, t.root_box, 200)
            got = evaluate_many(t, P)
            want = [oracles.brute_evaluate(t, p) for p in P]
            assert got.tolist() == want

    def test_locate_outside(self):
        assert locate(two_leaf(), [[-0.1], [2.0]]).tolist() == [-1, -1]


class TestStructure:
    def test_nodes_roundtrip(self):
        t = two_leaf()
        assert DensityTree.from_nodes(t.dims, t.root_box, t.to_nodes()).to_nodes() == t.to_nodes()

    def test_node_boxes(self):
        t = two_leaf()
        assert t.leaf_volumes.tolist() == [0.5, 0.5]
        assert t.leaf_box(2) == HyperRect([0.5], [1.0])
        assert t.depth == 1

    def test_arrays_immutable(self):
        with pytest.raises(ValueError):
            two_leaf().value[1] = 3.0

    def test_dim_index(self):
        t = two_leaf()
        assert t.dim_index("x") == 0
        assert t.dim_index(0) == 0
        with pytest.raises(UnknownDimension):
            t.dim_index("z")


class TestValidate:
    def test_sound_tree(self):
        assert validate(two_leaf()) == []

    def test_threshold_on_boundary(self):
        t = DensityTree.from_nodes(["x"], UNIT1, Split(0, 0.0, Leaf(1.0), Leaf(1.0)))
        v = validate(t)
        assert [x.kind for x in v] == ["ThresholdNotInterior"]
        assert v[0].path == "root"

    def test_negative_density(self):
        t = DensityTree.from_nodes(["x"], UNIT1, Split(0, 0.5, Leaf(-1.0), Leaf(1.0)))
        v = validate(t)
        assert [x.kind for x in v] == ["NegativeDensity"]
        assert v[0].path == "root.L"

    def test_dangling_and_unreachable(self):
        t = DensityTree(["x"], UNIT1, [0, -1, -1], [0.5, 0, 0], [1, -1, -1], [7, -1, -1],
                        [0, 1, 1])
        kinds = {x.kind for x in validate(t)}
        assert kinds == {"DanglingChild", "UnreachableNodes"}

    def test_shared_node(self):
        t = DensityTree(["x"], UNIT1, [0, -1], [0.5, 0], [1, -1], [1, -1], [0, 1])
        assert "SharedNode" in {x.kind for x in validate(t)}


class TestSliceSpec:
    def test_free_dims(self):
        assert SliceSpec({1: 0.3}).free_dims(3) == [0, 2]

    def test_no_free(self):
        t = DensityTree.from_nodes(["x"], UNIT1, Leaf(1.0))
        with pytest.raises(NoFreeDimensions):
            SliceSpec({0: 0.3}).check(t)

    def test_from_names(self):
        t = DensityTree.from_nodes(["x", "y"], UNIT2, Leaf(1.0))
        assert SliceSpec.from_names(t, {"y": 0.5}).fixed == {1: 0.5}

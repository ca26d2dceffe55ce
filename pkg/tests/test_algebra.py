import numpy as np
import pytest

from detree import (
    CompactionPolicy,
    Dataset,
    DensityTree,
    HyperRect,
    Leaf,
    Split,
    align,
    combine,
    compact,
    efficiency_tree,
    evaluate,
    evaluate_many,
    integrate_box,
    locate,
    refit,
    scalar_map,
    train,
)
from detree.algebra import EXACT
from detree.errors import (
    IncompatibleSupport,
    InconsistentRatio,
    InvalidWeight,
    NegativeDensity,
    NegativeScale,
)

import oracles

UNIT1 = HyperRect([0.0], [1.0])
UNIT2 = HyperRect([0.0, 0.0], [1.0, 1.0])


def two_leaf():
    return DensityTree.from_nodes(["x"], UNIT1, Split(0, 0.5, Leaf(1.5), Leaf(0.5)))


def x_split(l, r):
    return DensityTree.from_nodes(["x", "y"], UNIT2, Split(0, 0.5, Leaf(l), Leaf(r)))


def y_split(l, r):
    return DensityTree.from_nodes(["x", "y"], UNIT2, Split(1, 0.5, Leaf(l), Leaf(r)))


def single(v=1.0, dims=("x", "y")):
    return DensityTree.from_nodes(dims, UNIT2, Leaf(v))


class TestScalar:
    def test_scale(self, rng):
        t = oracles.random_tree(rng, 2, 20)
        assert np.array_equal(scalar_map(t, "scale", 1.0).value, t.value)
        norm = t.replace_values(t.value / integrate_box(t, t.root_box))
        assert integrate_box(scalar_map(norm, "scale", 0.5), t.root_box) == pytest.approx(0.5)

    def test_clamp(self):
        assert scalar_map(two_leaf(), "clamp_min", 0.2).value.tolist() == [0.0, 1.5, 0.5]
        assert scalar_map(two_leaf(), "clamp_min", 1.0).value.tolist() == [0.0, 1.5, 1.0]

    def test_errors(self):
        with pytest.raises(NegativeScale):
            scalar_map(two_leaf(), "scale", -1)
        with pytest.raises(NegativeDensity):
            scalar_map(two_leaf(), "shift", -1.0)
        with pytest.raises(ValueError):
            scalar_map(two_leaf(), "pow", 2)


class TestAlign:
    def test_self(self, rng):
        t = oracles.random_tree(rng, 2, 30)
        a = align(t, t)
        assert np.array_equal(a.feature, t.feature)
        assert np.array_equal(a.threshold, t.threshold)

    def test_quadrants(self):
        a = align(x_split(1.6, 0.4), y_split(1.0, 1.0))
        assert a.n_leaves == 4
        lo, hi = a.node_lo[a.leaf_ids], a.node_hi[a.leaf_ids]
        assert sorted(map(tuple, np.column_stack([lo, hi]).tolist())) == [
            (0.0, 0.0, 0.5, 0.5), (0.0, 0.5, 0.5, 1.0), (0.5, 0.0, 1.0, 0.5), (0.5, 0.5, 1.0, 1.0)]
        assert sorted(a.value[a.leaf_ids].tolist()) == [0.4, 0.4, 1.6, 1.6]

    def test_single_leaf_b(self, rng):
        t = oracles.random_tree(rng, 2, 15)
        assert align(t, single(dims=t.dims)).to_nodes() == t.to_nodes()

    def test_refinement_and_function(self, rng):
        a = oracles.random_tree(rng, 3, 40)
        b = oracles.random_tree(rng, 3, 40)
        r = align(a, b)
        P = oracles.uniform_probes(rng, a.root_box, 10_000)
        assert np.array_equal(evaluate_many(r, P), evaluate_many(a, P))
        # every refined leaf fits inside one leaf of b
        centers = (r.node_lo[r.leaf_ids] + r.node_hi[r.leaf_ids]) / 2
        ib = locate(b, centers)
        assert np.all(r.node_lo[r.leaf_ids] >= b.node_lo[ib])
        assert np.all(r.node_hi[r.leaf_ids] <= b.node_hi[ib])

    def test_incompatible(self):
        other = DensityTree.from_nodes(["x", "y"], HyperRect([0, 0], [2, 1]), Leaf(0.5))
        with pytest.raises(IncompatibleSupport):
            align(single(), other)


class TestCombine:
    @pytest.mark.parametrize("op", ["add", "subtract_clamped", "multiply", "divide"])
    def test_pointwise(self, rng, op):
        a = oracles.random_tree(rng, 2, 50)
        b = oracles.random_tree(rng, 2, 50)
        c = combine(a, b, op, EXACT)
        P = oracles.uniform_probes(rng, a.root_box, 10_000)
        x, y, got = evaluate_many(a, P), evaluate_many(b, P), evaluate_many(c, P)
        want = {"add": x + y, "subtract_clamped": np.maximum(x - y, 0),
                "multiply": x * y, "divide": x / y}[op]
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=0)

    def test_add_scaled_zero(self, rng):
        t = oracles.random_tree(rng, 2, 20)
        c = combine(t, scalar_map(t, "scale", 0.0), "add", EXACT)
        P = oracles.uniform_probes(rng, t.root_box, 1000)
        assert np.array_equal(evaluate_many(c, P), evaluate_many(t, P))

    def test_multiply_identity(self, rng):
        t = oracles.random_tree(rng, 2, 20)
        c = combine(t, single(1.0, t.dims), "multiply")
        P = oracles.uniform_probes(rng, t.root_box, 1000)
        assert np.array_equal(evaluate_many(c, P), evaluate_many(t, P))

    def test_mixture_normalized(self, rng):
        a = train(Dataset.from_array(rng.random((2000, 2))))
        b = _embed(train(Dataset.from_array(rng.random((500, 2)) * 0.5 + 0.25)), a.root_box)
        lam = 0.3
        m = combine(scalar_map(a, "scale", lam), scalar_map(b, "scale", 1 - lam), "add")
        assert integrate_box(m, m.root_box) == pytest.approx(1.0, rel=1e-9)

    def test_divide_conventions(self):
        z = combine(x_split(0.0, 1.0), x_split(0.0, 2.0), "divide", EXACT)
        assert evaluate(z, [0.2, 0.2]) == 0.0
        assert z.no_support[z.leaf_ids].tolist() == [True, False]
        with pytest.raises(InconsistentRatio):
            combine(x_split(1.0, 1.0), x_split(0.0, 2.0), "divide")

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            combine(single(), single(), "pow")


class TestCompact:
    def test_distinct_values_unchanged(self):
        t = x_split(1.6, 0.4)
        assert compact(t, EXACT).to_nodes() == t.to_nodes()

    def test_collapse_aligned(self):
        a = align(x_split(1.6, 0.4), y_split(1.0, 1.0))
        c = compact(a, EXACT)
        assert c.n_leaves == 2
        assert c.to_nodes() == x_split(1.6, 0.4).to_nodes()

    def test_single_leaf(self):
        assert compact(single(), EXACT).to_nodes() == single().to_nodes()

    def test_exact_preserves_function(self, rng):
        for _ in range(10):
            vals = rng.integers(0, 3, 64).astype(float)   # many equal siblings
            t = oracles.random_tree(rng, 2, 64)
            t = t.replace_values(np.where(t.feature < 0, np.resize(vals, t.n_nodes), 0.0))
            c = compact(t, EXACT)
            assert c.n_leaves <= t.n_leaves
            P = oracles.uniform_probes(rng, t.root_box, 2000)
            assert np.array_equal(evaluate_many(c, P), evaluate_many(t, P))

    def test_tolerance_merges_and_keeps_mass(self):
        t = x_split(1.0, 1.0 + 1e-9)
        c = compact(t, CompactionPolicy(1e-6))
        assert c.n_leaves == 1
        assert integrate_box(c, UNIT2) == pytest.approx(integrate_box(t, UNIT2), rel=1e-15)

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            CompactionPolicy(-1.0)
        with pytest.raises(ValueError):
            CompactionPolicy(0.1, "percent")


class TestEfficiency:
    def test_hand_example(self):
        # 10 points, 8 left of x=0.5 and all of them pass
        t_all = x_split(8 / (10 * 0.5), 2 / (10 * 0.5))
        t_pass = x_split(8 / (8 * 0.5), 0.0)
        e = efficiency_tree(t_pass, t_all, 8, 10)
        assert evaluate(e, [0.2, 0.5]) == 1.0
        assert evaluate(e, [0.7, 0.5]) == 0.0

    def test_all_pass(self, rng):
        t = train(Dataset.from_array(rng.random((500, 2))))
        e = efficiency_tree(t, t, 500, 500)
        assert e.n_leaves == 1 and e.value[0] == 1.0

    def test_half_pass_single_leaf(self):
        e = efficiency_tree(single(1.0), single(1.0), 50, 100)
        assert e.value.tolist() == [0.5]

    def test_empty_all_cell_flagged(self):
        e = efficiency_tree(x_split(0.0, 2.0), x_split(0.0, 2.0), 5, 10)
        assert e.no_support[e.leaf_ids].tolist() == [True, False]

    def test_per_cell_counts(self, rng):
        X = rng.normal(size=(4000, 2))
        t_all = train(Dataset.from_array(X))
        ids = locate(t_all, X)
        passed = rng.random(len(X)) < 0.4
        t_pass = refit(t_all, Dataset.from_array(X[passed]))
        e = efficiency_tree(t_pass, t_all, passed.sum(), len(X), EXACT)
        for leaf in t_all.leaf_ids:
            inside = ids == leaf
            c = (t_all.node_lo[leaf] + t_all.node_hi[leaf]) / 2
            assert evaluate(e, c) == passed[inside].sum() / inside.sum()

    def test_bad_weights(self):
        with pytest.raises(InvalidWeight):
            efficiency_tree(single(), single(), 11, 10)


def _embed(b, box):
    """``b`` extended by zero to the larger root ``box``."""
    lo, hi = np.array(b.root_box.lo), np.array(b.root_box.hi)
    root = b.to_nodes()
    for d in range(len(lo)):
        if lo[d] > box.lo[d]:
            root = Split(d, float(lo[d]), Leaf(0.0), root)
        if hi[d] < box.hi[d]:
            root = Split(d, float(hi[d]), root, Leaf(0.0))
    return DensityTree.from_nodes(b.dims, box, root)

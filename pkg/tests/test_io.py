import numpy as np
import pytest

from detree import (
    Dataset,
    DensityTree,
    HyperRect,
    Leaf,
    Split,
    TrainConfig,
    evaluate_many,
    load_dataset,
    load_tree,
    save_tree,
    train,
    validate,
)
from detree.errors import (
    CorruptFile,
    IoFailure,
    MissingColumn,
    NegativeWeight,
    ParseError,
    UnsupportedVersion,
)
from detree.io import dumps_tree, loads_tree

import oracles


class TestDataset:
    def test_basic(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n0.1,0.2\n0.3,0.4\n")
        d = load_dataset(p)
        assert (d.n, d.dim) == (2, 2)
        assert d.weights.tolist() == [1.0, 1.0]

    def test_nan_names_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n0.1,0.2\nnan,0.4\n")
        with pytest.raises(ParseError) as exc:
            load_dataset(p)
        assert exc.value.row == 3
        assert exc.value.column == "x"

    def test_garbage(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x\n0.1\nabc\n")
        with pytest.raises(ParseError, match="abc"):
            load_dataset(p)

    def test_negative_weight(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,w\n0.1,1\n0.2,-1\n")
        with pytest.raises(NegativeWeight):
            load_dataset(p, weight_column="w")

    def test_columns_and_weights(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,b,w,c\n1,2,0.5,3\n4,5,1.5,6\n")
        d = load_dataset(p, columns=["c", "a"], weight_column="w")
        assert d.columns == ("c", "a")
        assert d.points.tolist() == [[3.0, 1.0], [6.0, 4.0]]
        assert d.weights.tolist() == [0.5, 1.5]

    def test_missing_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x\n1\n")
        with pytest.raises(MissingColumn):
            load_dataset(p, columns=["y"])

    def test_no_header_and_delimiter(self, tmp_path):
        p = tmp_path / "d.tsv"
        p.write_text("1\t2\n3\t4\n")
        d = load_dataset(p, delimiter="\t", has_header=False)
        assert d.columns == ("c0", "c1")
        assert d.n == 2

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n1,2\n3\n")
        with pytest.raises(ParseError):
            load_dataset(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            load_dataset(tmp_path / "nope.csv")


class TestTreeFile:
    def test_four_point_roundtrip(self, tmp_path, rng):
        t = train(Dataset.from_array([[0.1], [0.2], [0.8], [0.9]]),
                  TrainConfig(min_leaf_width=1e-6))
        p = tmp_path / "m.det"
        save_tree(t, p)
        u = load_tree(p)
        assert validate(u) == []
        P = oracles.uniform_probes(rng, t.root_box, 1000)
        assert np.array_equal(evaluate_many(u, P), evaluate_many(t, P))

    def test_bitwise_fields(self, rng):
        t = oracles.random_tree(rng, 3, 50, zero_frac=0.2)
        t = t.replace_values(t.value, no_support=(t.value == 0) & (t.feature < 0))
        u = loads_tree(dumps_tree(t))
        for name in ("feature", "threshold", "left", "right", "value", "no_support"):
            assert np.array_equal(getattr(u, name), getattr(t, name)), name
        assert u.root_box == t.root_box
        assert dumps_tree(u) == dumps_tree(t)

    def test_odd_dim_names_and_metadata(self):
        t = DensityTree.from_nodes(["p t", "η,%"], HyperRect([0, 0], [1, 1]), Leaf(1.0),
                                   metadata={"note": "a b", "n": 3})
        u = loads_tree(dumps_tree(t, {"extra": [1, 2]}))
        assert u.dims == ("p t", "η,%")
        assert u.metadata == {"note": "a b", "n": 3, "extra": [1, 2]}

    def test_truncated(self, rng):
        text = dumps_tree(oracles.random_tree(rng, 2, 5))
        with pytest.raises(CorruptFile):
            loads_tree("\n".join(text.splitlines()[:-1]) + "\n")

    def test_leaf_count_mismatch(self, rng):
        text = dumps_tree(oracles.random_tree(rng, 2, 4))
        text = text.replace("leaves=4", "leaves=5", 1)
        with pytest.raises(CorruptFile, match="node-count mismatch"):
            loads_tree(text)

    def test_version(self):
        text = dumps_tree(DensityTree.from_nodes(["x"], HyperRect([0], [1]), Leaf(1.0)))
        with pytest.raises(UnsupportedVersion):
            loads_tree(text.replace("DETv1", "DETv2", 1))

    @pytest.mark.parametrize("bad", ["", "hello\n", "DETv1 dims=x\n"])
    def test_garbage(self, bad):
        with pytest.raises(CorruptFile):
            loads_tree(bad)

    def test_invalid_tree_rejected(self):
        t = DensityTree.from_nodes(["x"], HyperRect([0], [1]), Split(0, 0.5, Leaf(1), Leaf(1)))
        text = dumps_tree(t).replace("I 0 0.5", "I 0 1.5")
        with pytest.raises(CorruptFile, match="ThresholdNotInterior"):
            loads_tree(text)

    def test_negative_density_rejected(self):
        t = DensityTree.from_nodes(["x"], HyperRect([0], [1]), Leaf(1.0))
        with pytest.raises(CorruptFile):
            loads_tree(dumps_tree(t).replace("L 1.0", "L -1.0"))

    def test_write_failure(self, tmp_path):
        t = DensityTree.from_nodes(["x"], HyperRect([0], [1]), Leaf(1.0))
        with pytest.raises(IoFailure):
            save_tree(t, tmp_path / "missing" / "m.det")

    def test_deterministic_bytes(self, rng):
        data = Dataset.from_array(rng.random((500, 2)))
        assert dumps_tree(train(data)) == dumps_tree(train(data))

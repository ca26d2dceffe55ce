"""Selection efficiency as a ratio of two trees.

Events are drawn from a 2D normal; an event passes with probability
sigmoid(2x). One tree is trained on everything, the passing events are
refitted onto the same partition, and the ratio tree gives the per-cell
pass fraction. Cells are printed next to the true curve along x.
"""
import numpy as np

from detree import (Dataset, SliceSpec, TrainConfig, conditional_ratio, efficiency_tree,
                    evaluate, refit, train)

rng = np.random.default_rng(7)
X = rng.normal(size=(50_000, 2))
passed = rng.random(len(X)) < 1 / (1 + np.exp(-2 * X[:, 0]))

t_all = train(Dataset.from_array(X, columns=["x", "y"]), TrainConfig(min_leaf_width=[0.4, 4.0]))
t_pass = refit(t_all, Dataset.from_array(X[passed], columns=["x", "y"]))
eff = efficiency_tree(t_pass, t_all, passed.sum(), len(X))
print(f"all: {t_all.n_leaves} leaves, efficiency tree: {eff.n_leaves} leaves")

print("    x   tree   truth")
for x in np.linspace(-1.5, 1.5, 7):
    print(f"{x:5.2f}  {evaluate(eff, [x, 0.0]):.3f}  {1 / (1 + np.exp(-2 * x)):.3f}")

# a cut on y computed on the slice x=0.3 of the all-events density
r = conditional_ratio(t_all, SliceSpec({0: 0.3}), "y", 0.0)
print(f"P(y > 0 | x = 0.3) from the tree: {r:.3f}")

"""Conditional generation from a trained tree.

A correlated 3D sample stands in for an expensive simulation. After
training, new (y, z) values are drawn at a fixed x without touching the
original sample again, and their moments are compared with the exact
conditional of the generating normal.
"""
import time

import numpy as np

from detree import Dataset, SliceSpec, build_sampler, train

rng = np.random.default_rng(3)
cov = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.2], [0.3, 0.2, 1.0]])
X = rng.multivariate_normal(np.zeros(3), cov, size=100_000)

t0 = time.perf_counter()
tree = train(Dataset.from_array(X, columns=["x", "y", "z"]))
print(f"trained {tree.n_leaves} leaves in {time.perf_counter() - t0:.2f} s")

x0 = 0.8
sampler = build_sampler(tree, SliceSpec({0: x0}), seed=11)
t0 = time.perf_counter()
draws = sampler.sample(200_000)
print(f"200000 conditional draws in {time.perf_counter() - t0:.3f} s "
      f"from {len(sampler.probabilities())} slice leaves")

mean = cov[1:, 0] * x0
var = np.diag(cov[1:, 1:] - np.outer(cov[1:, 0], cov[0, 1:]))
for k, name in enumerate("yz"):
    print(f"{name}: mean {draws[:, k].mean():+.3f} (exact {mean[k]:+.3f}), "
          f"sd {draws[:, k].std():.3f} (exact {np.sqrt(var[k]):.3f})")

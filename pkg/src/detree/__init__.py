"""Density estimation trees: training, exact integration, algebra and sampling."""

from .core import (
    Dataset,
    DensityTree,
    HyperRect,
    Leaf,
    SliceSpec,
    Split,
    Violation,
    evaluate,
    evaluate_many,
    leaf_density,
    locate,
    validate,
)
from .train import (
    SplitCandidate,
    TrainConfig,
    auto_min_width,
    best_split,
    gini_gain,
    replacement_error,
    refit,
    train,
)

from .integrate import (
    SliceIntegralQuery,
    conditional_ratio,
    integrate_box,
    integrate_slice,
    project,
)
from .algebra import CompactionPolicy, align, combine, compact, efficiency_tree, scalar_map
from .sample import ConditionalSampler, build_sampler, sample
from .io import load_dataset, load_tree, save_tree

__version__ = "0.1.0"

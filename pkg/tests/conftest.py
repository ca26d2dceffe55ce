import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def four_points(tmp_path):
    path = tmp_path / "pts.csv"
    path.write_text("x,y\n0.1,0.1\n0.2,0.15\n0.8,0.9\n0.85,0.95\n")
    return path

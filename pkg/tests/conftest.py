import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geoblock.attention import AttentionTensor, FusedMap, WindowSpec


def random_tensor(layers, heads, queries, keys, seed, sparsity=0.0) -> AttentionTensor:
    """Row-stochastic random attention tensor."""
    rng = np.random.default_rng(seed)
    w = rng.random((layers, heads, queries, keys))
    if sparsity:
        w *= rng.random(w.shape) > sparsity
        w += 1e-9  # keep rows normalizable
    w /= w.sum(axis=3, keepdims=True)
    return AttentionTensor(w)


def random_map(rows, history, seed, scale=1.0) -> FusedMap:
    """Random nonnegative fused map with `history` leading key columns."""
    rng = np.random.default_rng(seed)
    w = scale * rng.random((rows, history + rows))
    origin = WindowSpec(start=history, end=history + rows, history_extent=history)
    return FusedMap(w, origin)


@pytest.fixture
def rng():
    return np.random.default_rng(0)

import numpy as np
import pytest

from ncdd.core import Topology, make_rng


def central_diff(f, x, rel_step=1e-5):
    """Central finite differences with a step relative to each coordinate."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for j in range(x.size):
        h = rel_step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (f(xp) - f(xm)) / (2 * h)
    return g


def random_topology(n, rng, p=0.5):
    a = np.triu(rng.random((n, n)) < p, k=1)
    return Topology((a | a.T).astype(np.int8))


@pytest.fixture
def rng():
    return make_rng(12345)

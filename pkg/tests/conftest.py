import numpy as np
import pytest

from hidnet.graph import build_graph


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return build_graph(np.stack([iu[keep], ju[keep]], axis=1), n)


def cycle(n):
    return build_graph([(i, (i + 1) % n) for i in range(n)], n)


def chain(n=3):
    return build_graph([(i, i + 1) for i in range(n - 1)], n)


def dense_a_hat(g):
    a = np.zeros((g.n, g.n))
    for u, v in g.edges:
        a[u, v] = a[v, u] = 1.0
    a += np.eye(g.n)
    d = a.sum(axis=1)
    return a / np.sqrt(np.outer(d, d))


@pytest.fixture
def chain3():
    return chain(3)

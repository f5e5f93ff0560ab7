import numpy as np
import pytest

from nhprompt.graph import Graph


def make_graph(n, edges, labels=None, d=2, seed=0, num_classes=None):
    feats = np.random.default_rng(seed).normal(size=(n, d))
    return Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2), feats,
                            None if labels is None else np.asarray(labels), num_classes)


def random_edges(rng, n, p):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return np.stack([iu[keep], ju[keep]], axis=1)


@pytest.fixture
def path3():
    return make_graph(3, [(0, 1), (1, 2)], labels=[0, 1, 0])

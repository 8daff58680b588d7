"""k-hop label agreement scores.

For each node the most frequent label among its neighbors at exactly ``k``
hops is compared with the node's own label.  The score is the fraction of
nodes (with a nonempty neighbor set) that agree.  If several labels tie for
the highest count the node counts as agreeing when its own label is among
them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph, hop_matrices


class SimilarityError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityReport:
    h1: float
    h2: float
    h12: float
    counted: tuple[int, int, int]


def _check_labels(g: Graph, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64).ravel()
    if g.n == 0:
        raise SimilarityError("empty graph")
    if y.shape[0] != g.n:
        raise SimilarityError(f"{y.shape[0]} labels for {g.n} nodes")
    if y.min() < 0:
        raise SimilarityError("labels must be non-negative")
    return y


def _mode_agreement(hops: sp.csr_matrix, y: np.ndarray) -> tuple[int, int]:
    num_classes = int(y.max()) + 1
    onehot = sp.csr_matrix((np.ones(y.shape[0]), (np.arange(y.shape[0]), y)),
                           shape=(y.shape[0], num_classes))
    counts = (hops @ onehot).toarray()
    size = counts.sum(axis=1)
    has = size > 0
    best = counts.max(axis=1)
    own = counts[np.arange(y.shape[0]), y]
    agree = has & (own == best)
    return int(agree.sum()), int(has.sum())


def _score(agree: int, counted: int) -> float:
    return agree / counted if counted else float("nan")


def khop_similarity(g: Graph, y, k: int) -> float:
    if k not in (1, 2):
        raise SimilarityError(f"k must be 1 or 2, got {k}")
    y = _check_labels(g, y)
    one, two = hop_matrices(g)
    return _score(*_mode_agreement(one if k == 1 else two, y))


def combined_similarity(g: Graph, y) -> float:
    """Mode taken over the union of the 1-hop and 2-hop neighbors."""
    y = _check_labels(g, y)
    one, two = hop_matrices(g)
    return _score(*_mode_agreement((one + two).tocsr(), y))


def similarity_report(g: Graph, y) -> SimilarityReport:
    y = _check_labels(g, y)
    one, two = hop_matrices(g)
    a1, c1 = _mode_agreement(one, y)
    a2, c2 = _mode_agreement(two, y)
    a12, c12 = _mode_agreement((one + two).tocsr(), y)
    return SimilarityReport(_score(a1, c1), _score(a2, c2), _score(a12, c12), (c1, c2, c12))

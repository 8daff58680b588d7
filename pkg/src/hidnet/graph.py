"""Undirected graphs, the symmetric normalized operator and k-hop queries.

A :class:`Graph` stores the self-loop augmented adjacency ``A + I`` in CSR
form together with the augmented degrees.  :func:`normalize` turns it into
the operator ``D^-1/2 (A + I) D^-1/2`` and its square, which every
propagation routine in the package consumes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised for malformed graph input."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: np.ndarray  # (m, 2) int64, i < j, sorted, no self-loops
    csr: sp.csr_matrix  # A + I
    degrees: np.ndarray  # row sums of A + I

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def adjacency(self) -> sp.csr_matrix:
        """Adjacency without self-loops."""
        a = self.csr - sp.identity(self.n, format="csr", dtype=self.csr.dtype)
        a.eliminate_zeros()
        return a.tocsr()

    def neighbors(self, i: int) -> np.ndarray:
        row = self.csr.indices[self.csr.indptr[i]:self.csr.indptr[i + 1]]
        return row[row != i]

    def is_regular(self) -> bool:
        return bool(self.n == 0 or np.all(self.degrees == self.degrees[0]))


@dataclass(frozen=True)
class NormalizedOperator:
    a_hat: sp.csr_matrix
    a_hat_sq: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.a_hat.shape[0]


@dataclass(frozen=True)
class NeighborSet:
    node: int
    hop: int
    members: frozenset[int]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def build_graph(edge_list, n: int) -> Graph:
    """Build an undirected graph on ``n`` nodes from an edge list.

    Duplicates, both orientations and self-loops in the input are accepted;
    the stored edge set is deduplicated and the self-loop of ``A + I`` is
    added exactly once per node.
    """
    if n <= 0:
        raise GraphError(f"node count must be positive, got {n}")
    e = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise GraphError(f"edge ({bad[0]}, {bad[1]}) has an index outside [0, {n})")
    e = e[e[:, 0] != e[:, 1]]
    e = np.sort(e, axis=1)
    e = np.unique(e, axis=0) if e.size else np.empty((0, 2), dtype=np.int64)

    rows = np.concatenate([e[:, 0], e[:, 1], np.arange(n)])
    cols = np.concatenate([e[:, 1], e[:, 0], np.arange(n)])
    data = np.ones(rows.shape[0], dtype=np.float64)
    csr = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    csr.sort_indices()
    degrees = np.asarray(csr.sum(axis=1)).ravel()
    return Graph(n=n, edges=_freeze(e), csr=csr, degrees=_freeze(degrees))


def normalize(g: Graph) -> NormalizedOperator:
    """Symmetric normalization of ``A + I`` and its precomputed square."""
    inv_sqrt = 1.0 / np.sqrt(g.degrees)
    d = sp.diags(inv_sqrt)
    a_hat = (d @ g.csr @ d).tocsr()
    a_hat.sort_indices()
    a_hat_sq = (a_hat @ a_hat).tocsr()
    a_hat_sq.sort_indices()
    return NormalizedOperator(a_hat=a_hat, a_hat_sq=a_hat_sq)


def bfs_distances(g: Graph, source: int, max_depth: int | None = None) -> dict[int, int]:
    """Unweighted shortest-path distances from ``source`` (optionally depth-limited)."""
    if not 0 <= source < g.n:
        raise GraphError(f"node {source} outside [0, {g.n})")
    dist = {source: 0}
    queue = deque([source])
    indptr, indices = g.csr.indptr, g.csr.indices
    while queue:
        u = queue.popleft()
        du = dist[u]
        if max_depth is not None and du >= max_depth:
            continue
        for v in indices[indptr[u]:indptr[u + 1]]:
            v = int(v)
            if v not in dist:
                dist[v] = du + 1
                queue.append(v)
    return dist


def khop_neighbors(g: Graph, i: int, k: int) -> NeighborSet:
    """Nodes at shortest-path distance exactly ``k`` from ``i``."""
    if k < 1:
        raise GraphError(f"hop must be >= 1, got {k}")
    dist = bfs_distances(g, i, max_depth=k)
    members = frozenset(v for v, d in dist.items() if d == k)
    return NeighborSet(node=i, hop=k, members=members)


def hop_matrices(g: Graph) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Boolean indicator matrices of exact 1-hop and exact 2-hop neighbors."""
    a = g.adjacency()
    a.data[:] = 1.0
    reach2 = (a @ a).tocsr()
    reach2.data[:] = 1.0
    # drop the diagonal and anything already at distance 1
    two = reach2 - reach2.multiply(a) - sp.diags(reach2.diagonal())
    two.eliminate_zeros()
    two = (two > 0).astype(np.float64).tocsr()
    return a.tocsr(), two


def count_components(g: Graph) -> int:
    from scipy.sparse.csgraph import connected_components

    ncomp, _ = connected_components(g.csr, directed=False)
    return int(ncomp)


def read_edge_list(path: str | Path) -> np.ndarray:
    """Read ``u<TAB>v`` lines; ``#`` starts a comment."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected two node indices, got {line!r}")
            pairs.append((int(parts[0]), int(parts[1])))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def write_edge_list(path: str | Path, g: Graph, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for u, v in g.edges:
            fh.write(f"{u}\t{v}\n")

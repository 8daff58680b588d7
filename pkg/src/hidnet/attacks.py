"""Random structure and feature perturbations.

Edge attacks return a new :class:`Graph`; the input is never mutated.
Deletion keeps the number of connected components fixed by skipping any
candidate edge that is currently a bridge.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import Graph, build_graph

KINDS = ("edge_add", "edge_delete", "feature_noise")


class InfeasibleAttack(RuntimeError):
    """Deletion budget could not be met without disconnecting the graph."""

    def __init__(self, requested: int, achieved: int, graph: Graph):
        super().__init__(f"only {achieved} of {requested} edges removable without "
                         f"increasing the component count")
        self.requested = requested
        self.achieved = achieved
        self.graph = graph


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind == "feature_noise":
            if self.rate < 0:
                raise ValueError("noise ratio must be non-negative")
        elif not 0.0 <= self.rate < 1.0:
            raise ValueError(f"edge attack rate must lie in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class AttackReport:
    kind: str
    rate: float
    seed: int
    requested: int
    achieved: int


def edge_budget(g: Graph, rate: float) -> int:
    # tolerate float noise such as 0.2 * 45 = 9.000000000000002
    return int(math.ceil(rate * g.num_edges - 1e-9))


def _add_edges(g: Graph, count: int, rng) -> tuple[Graph, int]:
    possible = g.n * (g.n - 1) // 2 - g.num_edges
    if count > possible:
        raise ValueError(f"cannot add {count} edges, only {possible} non-edges exist")
    existing = set(map(tuple, g.edges.tolist()))
    added: list[tuple[int, int]] = []
    if count > possible // 2:
        # dense regime: enumerate complement and sample without replacement
        cand = [(i, j) for i in range(g.n) for j in range(i + 1, g.n) if (i, j) not in existing]
        pick = rng.choice(len(cand), size=count, replace=False)
        added = [cand[k] for k in sorted(pick)]
    else:
        chosen: set[tuple[int, int]] = set()
        while len(chosen) < count:
            need = count - len(chosen)
            u = rng.integers(0, g.n, size=2 * need + 8)
            v = rng.integers(0, g.n, size=2 * need + 8)
            for a, b in zip(u.tolist(), v.tolist()):
                if a == b:
                    continue
                e = (a, b) if a < b else (b, a)
                if e in existing or e in chosen:
                    continue
                chosen.add(e)
                added.append(e)
                if len(chosen) == count:
                    break
    edges = np.vstack([g.edges, np.asarray(added, dtype=np.int64).reshape(-1, 2)])
    return build_graph(edges, g.n), len(added)


def _connected_without(adj: list[set[int]], u: int, v: int) -> bool:
    """Is ``v`` reachable from ``u`` once edge ``(u, v)`` is ignored?"""
    seen = {u}
    queue = deque([u])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if a == u and b == v:
                continue
            if b == v:
                return True
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return False


def _delete_edges(g: Graph, count: int, rng) -> tuple[Graph, int]:
    adj: list[set[int]] = [set() for _ in range(g.n)]
    for a, b in g.edges.tolist():
        adj[a].add(b)
        adj[b].add(a)
    order = rng.permutation(g.num_edges)
    removed = np.zeros(g.num_edges, dtype=bool)
    achieved = 0
    for k in order:
        if achieved == count:
            break
        u, v = (int(t) for t in g.edges[k])
        if _connected_without(adj, u, v):
            adj[u].discard(v)
            adj[v].discard(u)
            removed[k] = True
            achieved += 1
    return build_graph(g.edges[~removed], g.n), achieved


def attack_edges(g: Graph, spec: AttackSpec, strict: bool = True) -> tuple[Graph, AttackReport]:
    """Add or delete ``ceil(rate * |E|)`` edges uniformly at random.

    With ``strict`` an :class:`InfeasibleAttack` is raised when deletion
    falls short of the budget; otherwise the shortfall is only reported.
    """
    if spec.kind not in ("edge_add", "edge_delete"):
        raise ValueError(f"{spec.kind!r} is not an edge attack")
    count = edge_budget(g, spec.rate)
    rng = np.random.default_rng(spec.seed)
    if count == 0:
        return g, AttackReport(spec.kind, spec.rate, spec.seed, 0, 0)
    if spec.kind == "edge_add":
        out, achieved = _add_edges(g, count, rng)
    else:
        out, achieved = _delete_edges(g, count, rng)
        if achieved < count and strict:
            raise InfeasibleAttack(count, achieved, out)
    return out, AttackReport(spec.kind, spec.rate, spec.seed, count, achieved)


def attack_features(x, mu: float, seed: int = 0) -> np.ndarray:
    """Add ``mu * r * M`` with ``M ~ N(0, 1)`` and ``r`` the mean row maximum."""
    if mu < 0:
        raise ValueError("noise ratio must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    if mu == 0:
        return x.copy()
    r = float(np.mean(np.max(x, axis=1)))
    noise = np.random.default_rng(seed).standard_normal(x.shape)
    return x + mu * r * noise

"""Second-order random walk with restart.

From its current node a walker stays put, makes a first-order move
(distributed by a column of ``A``), makes a second-order move (a column of
``A^2``) or teleports back to the root.  The probabilities are
``1-(a+b)dt``, ``b(1-g)dt``, ``b*g*dt`` and ``a*dt``.  The move distributions
are genuine probabilities only when the columns of ``A`` sum to one, which
for the symmetric normalization means a regular graph; simulation is refused
elsewhere and only the expectation kernel is checked.

Sampling uses numpy's PCG64 generator; each trial chunk draws from a stream
seeded by ``(seed, chunk)``, so results do not depend on chunking order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionConfig, build_kernel, propagate
from .graph import Graph, NormalizedOperator, normalize

STAY, FIRST, SECOND, RESTART = 0, 1, 2, 3


class WalkError(ValueError):
    pass


@dataclass(frozen=True)
class WalkKernel:
    self_prob: float
    first_order: float
    second_order: float
    restart_prob: float

    @classmethod
    def from_config(cls, cfg: DiffusionConfig) -> "WalkKernel":
        a, b, g, dt = cfg.alpha, cfg.beta, cfg.gamma, cfg.dt
        k = cls(1.0 - (a + b) * dt, (b - b * g) * dt, b * g * dt, a * dt)
        if min(k.self_prob, k.first_order, k.second_order, k.restart_prob) < -1e-15:
            raise WalkError(f"negative move probability in {k}")
        return k

    def column_mass(self, op: NormalizedOperator) -> np.ndarray:
        """Total outgoing mass per node: must be 1 for a proper walk."""
        c1 = np.asarray(op.a_hat.sum(axis=0)).ravel()
        c2 = np.asarray(op.a_hat_sq.sum(axis=0)).ravel()
        return self.self_prob + self.restart_prob + self.first_order * c1 + self.second_order * c2


@dataclass(frozen=True)
class WalkTrace:
    root: int
    positions: tuple[int, ...]
    moves: tuple[int, ...]  # STAY / FIRST / SECOND / RESTART per transition
    restarts: tuple[int, ...]
    rng_seed: int


def expectation_equivalence(op: NormalizedOperator, cfg: DiffusionConfig, x_0, steps: int) -> float:
    """``max |propagate(x0) - H x0|`` with ``H`` built by the kernel recursion."""
    cfg = cfg.with_(steps=steps)
    kernel = build_kernel(op, cfg)
    x_0 = np.asarray(x_0, dtype=np.float64)
    x_0 = x_0[:, None] if x_0.ndim == 1 else x_0
    dev = propagate(x_0, op, cfg) - kernel.h @ x_0
    return float(np.max(np.abs(dev))) if dev.size else 0.0


class _Sampler:
    """Draw a successor from a row of a sparse non-negative matrix."""

    def __init__(self, m):
        m = m.tocsr()
        m.sort_indices()
        self.indptr = m.indptr
        self.indices = m.indices
        self.cum = np.cumsum(m.data)
        start = np.concatenate([[0.0], self.cum])
        self.base = start[m.indptr[:-1]]
        self.mass = start[m.indptr[1:]] - self.base

    def __call__(self, nodes: np.ndarray, u: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.cum, self.base[nodes] + u * self.mass[nodes], side="right")
        pos = np.clip(pos, self.indptr[nodes], self.indptr[nodes + 1] - 1)
        return self.indices[pos]


def _require_proper(g: Graph, op: NormalizedOperator, kernel: WalkKernel) -> None:
    mass = kernel.column_mass(op)
    worst = float(np.max(np.abs(mass - 1.0)))
    if worst > 1e-9:
        raise WalkError(f"move weights are not a probability distribution on this graph "
                        f"(column mass off by {worst:.3e}); simulation needs a regular graph")


def _advance(pos, root, kernel, first, second, rng):
    u = rng.random(pos.shape[0])
    r = rng.random(pos.shape[0])
    move = np.full(pos.shape[0], STAY, dtype=np.int8)
    t1 = kernel.self_prob
    t2 = t1 + kernel.first_order
    t3 = t2 + kernel.second_order
    move[u >= t1] = FIRST
    move[u >= t2] = SECOND
    move[u >= t3] = RESTART
    nxt = pos.copy()
    sel = move == FIRST
    if sel.any():
        nxt[sel] = first(pos[sel], r[sel])
    sel = move == SECOND
    if sel.any():
        nxt[sel] = second(pos[sel], r[sel])
    nxt[move == RESTART] = root
    return nxt, move


def simulate_walk(g: Graph, cfg: DiffusionConfig, root: int, steps: int, seed: int,
                  op: NormalizedOperator | None = None) -> WalkTrace:
    """A single seeded trace; identical seeds give identical traces."""
    op = op or normalize(g)
    kernel = WalkKernel.from_config(cfg)
    _require_proper(g, op, kernel)
    rng = np.random.default_rng(seed)
    first, second = _Sampler(op.a_hat.T), _Sampler(op.a_hat_sq.T)
    pos = np.array([root])
    positions, moves, restarts = [root], [], []
    for t in range(steps):
        pos, move = _advance(pos, root, kernel, first, second, rng)
        positions.append(int(pos[0]))
        moves.append(int(move[0]))
        if move[0] == RESTART:
            restarts.append(t + 1)
    return WalkTrace(root, tuple(positions), tuple(moves), tuple(restarts), seed)


def monte_carlo_estimate(g: Graph, cfg: DiffusionConfig, root: int, steps: int, trials: int,
                         seed: int, chunk: int = 250_000) -> np.ndarray:
    """Empirical distribution of the walker's position after ``steps`` moves."""
    if trials < 1:
        raise WalkError("need at least one trial")
    if not 0 <= root < g.n:
        raise WalkError(f"root {root} outside [0, {g.n})")
    op = normalize(g)
    kernel = WalkKernel.from_config(cfg)
    _require_proper(g, op, kernel)
    first, second = _Sampler(op.a_hat.T), _Sampler(op.a_hat_sq.T)
    counts = np.zeros(g.n, dtype=np.int64)
    for c, lo in enumerate(range(0, trials, chunk)):
        size = min(chunk, trials - lo)
        rng = np.random.default_rng([seed, c])
        pos = np.full(size, root, dtype=np.int64)
        for _ in range(steps):
            pos, _ = _advance(pos, root, kernel, first, second, rng)
        counts += np.bincount(pos, minlength=g.n)
    return counts / trials


def kernel_column(g: Graph, cfg: DiffusionConfig, root: int, steps: int) -> np.ndarray:
    """Column ``root`` of ``H^(steps)``: the exact visit distribution."""
    h = build_kernel(normalize(g), cfg.with_(steps=steps)).h
    return h[:, root]

"""Diffusion with a fidelity term and the second-order DMP iteration.

One explicit step of the high-order diffusion equation is

    X <- a*dt*X0 + [(1 - (a+b)dt) I + b(1-g)dt A + b*g*dt A^2] X

with ``A`` the symmetric normalized operator.  Everything here is written in
that coefficient form; the divergence helpers expose the per-node neighbor
differences for the energy and residual checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import NormalizedOperator
from .linalg import DENSE_LIMIT, solve_spd

MODES = ("hid", "sgc", "appnp", "gat", "amp", "dagnn")


class DiffusionError(ValueError):
    pass


@dataclass(frozen=True)
class DiffusionConfig:
    """Coefficients of the propagation and the mode that consumes them.

    ``eta`` is used by ``appnp``, ``attention`` by ``gat``, ``eps``/``lam`` by
    ``amp`` and ``s`` (retainment weights) by ``dagnn``.
    """

    alpha: float = 0.1
    beta: float = 0.9
    gamma: float = 0.3
    dt: float = 0.8
    steps: int = 10
    mode: str = "hid"
    eta: float | None = None
    attention: np.ndarray | None = field(default=None, compare=False, repr=False)
    eps: float | None = None
    lam: float | None = None
    s: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DiffusionError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.steps < 0:
            raise DiffusionError(f"steps must be >= 0, got {self.steps}")
        if not 0.0 < self.dt <= 1.0:
            raise DiffusionError(f"dt must lie in (0, 1], got {self.dt}")
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DiffusionError(f"{name} must lie in [0, 1], got {v}")
        needs = {"appnp": ("eta",), "gat": ("attention",), "amp": ("eps", "lam"), "dagnn": ("s",)}
        for mode, names in needs.items():
            for name in names:
                present = getattr(self, name) is not None
                if present != (self.mode == mode):
                    state = "requires" if self.mode == mode else "does not take"
                    raise DiffusionError(f"mode {self.mode!r} {state} parameter {name!r}")

    def with_(self, **changes) -> "DiffusionConfig":
        return replace(self, **changes)

    def check_convergent(self) -> None:
        """Reject coefficients for which the explicit iteration may not contract.

        Strictly positive coefficients are not enough on their own: the
        smallest eigenvalue of the step matrix is ``1 - a*dt - 2b(1-g)dt`` on a
        bipartite graph, which leaves ``(-1, 1)`` once ``(a + b) dt > 1``.
        """
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) <= 0.0:
                raise DiffusionError(f"{name} must be strictly positive for convergence")
        if (self.alpha + self.beta) * self.dt > 1.0 + 1e-12:
            raise DiffusionError(
                f"(alpha + beta) * dt = {(self.alpha + self.beta) * self.dt:.4g} exceeds 1")


# -- feature matrices ------------------------------------------------------

def as_features(x, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DiffusionError(f"feature matrix must be 2-D, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DiffusionError(f"feature matrix has {x.shape[0]} rows, operator has {n} nodes")
    if not np.all(np.isfinite(x)):
        raise DiffusionError("feature matrix contains non-finite entries")
    return x


def read_features(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DiffusionError(f"{path}: first line must be 'n q'")
        n, q = int(header[0]), int(header[1])
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if n == 0:
        return np.zeros((0, q))
    if q == 0:
        data = np.zeros((n, 0))
    if data.shape != (n, q):
        raise DiffusionError(f"{path}: header says {n}x{q}, body is {data.shape[0]}x{data.shape[1]}")
    return data


def write_features(path: str | Path, x: np.ndarray) -> None:
    x = as_features(x)
    with open(path, "w") as fh:
        fh.write(f"{x.shape[0]} {x.shape[1]}\n")
        np.savetxt(fh, x, fmt="%.17g")


# -- divergence ------------------------------------------------------------

def divergence_first(op: NormalizedOperator, x) -> np.ndarray:
    """``sum_j A_ij (x_j - x_i)`` over the closed neighborhood of every node."""
    x = as_features(x, op.n)
    rowsum = np.asarray(op.a_hat.sum(axis=1)).ravel()
    return op.a_hat @ x - rowsum[:, None] * x


def divergence_second(op: NormalizedOperator, x) -> np.ndarray:
    """Two-hop analogue: ``sum_j sum_k A_ij A_jk (x_k - x_i)``."""
    x = as_features(x, op.n)
    rowsum = np.asarray(op.a_hat_sq.sum(axis=1)).ravel()
    return op.a_hat_sq @ x - rowsum[:, None] * x


# -- stepping --------------------------------------------------------------

def _per_node(v):
    v = np.asarray(v, dtype=np.float64)
    return v[:, None] if v.ndim == 1 else v


def framework_step(x_t, x_0, operator, alpha, beta, dt: float = 1.0, gamma: float = 0.0,
                   operator_sq=None) -> np.ndarray:
    """One explicit step of the general framework in coefficient form.

    ``operator`` plays the role of the diffusivity-weighted first-order
    operator (the normalized adjacency, or an attention matrix).  ``alpha``
    and ``beta`` may be scalars or per-node vectors.
    """
    a = _per_node(alpha)
    b = _per_node(beta)
    out = (1.0 - (a + b) * dt) * x_t
    out = out + (a * dt) * x_0
    out = out + ((b - b * gamma) * dt) * (operator @ x_t)
    if gamma:
        if operator_sq is None:
            operator_sq = operator @ operator
        out = out + ((b * gamma) * dt) * (operator_sq @ x_t)
    return out


def dmp_step(x_t, x_0, op: NormalizedOperator, cfg: DiffusionConfig) -> np.ndarray:
    x_t = as_features(x_t, op.n)
    x_0 = as_features(x_0, op.n)
    if x_t.shape != x_0.shape:
        raise DiffusionError(f"state {x_t.shape} and anchor {x_0.shape} differ in shape")
    a, b, g, dt = cfg.alpha, cfg.beta, cfg.gamma, cfg.dt
    out = (1.0 - (a + b) * dt) * x_t
    out += (a * dt) * x_0
    out += ((b - b * g) * dt) * (op.a_hat @ x_t)
    out += (b * g * dt) * (op.a_hat_sq @ x_t)
    return out


def step_matrix(op: NormalizedOperator, cfg: DiffusionConfig) -> sp.csr_matrix:
    """The sparse matrix ``C`` with ``X(t+dt) = a*dt*X0 + C X(t)``."""
    a, b, g, dt = cfg.alpha, cfg.beta, cfg.gamma, cfg.dt
    eye = sp.identity(op.n, format="csr")
    c = (1.0 - (a + b) * dt) * eye + ((b - b * g) * dt) * op.a_hat + (b * g * dt) * op.a_hat_sq
    return c.tocsr()


def propagate(x_0, op: NormalizedOperator, cfg: DiffusionConfig) -> np.ndarray:
    """Run ``cfg.steps`` steps of the configured propagation from ``x_0``."""
    from . import reductions as red

    x_0 = as_features(x_0, op.n)
    x = x_0.copy()
    if cfg.mode == "hid":
        for _ in range(cfg.steps):
            x = dmp_step(x, x_0, op, cfg)
    elif cfg.mode == "sgc":
        x = red.reduce_sgc(x_0, op, cfg.steps)
    elif cfg.mode == "appnp":
        for _ in range(cfg.steps):
            x = (1.0 - cfg.eta) * (op.a_hat @ x) + cfg.eta * x_0
    elif cfg.mode == "gat":
        for _ in range(cfg.steps):
            x = red.reduce_gat_step(x, cfg.attention)
    elif cfg.mode == "amp":
        for _ in range(cfg.steps):
            x = red.reduce_amp_step(x, x_0, op, cfg.eps, cfg.lam)
    elif cfg.mode == "dagnn":
        x = red.reduce_dagnn_combine(x_0, op, cfg.s)
    return x


def propagate_adjoint(grad_out, op: NormalizedOperator, cfg: DiffusionConfig) -> np.ndarray:
    """Transpose of the (linear) propagation map applied to ``grad_out``.

    Runs the recursion backwards; the kernel is never materialized.
    """
    g = as_features(grad_out, op.n)
    if cfg.mode == "hid":
        c = step_matrix(op, cfg).T.tocsr()
        anchor = cfg.alpha * cfg.dt
    elif cfg.mode == "sgc":
        c = op.a_hat.T.tocsr()
        anchor = 0.0
    elif cfg.mode == "appnp":
        c = ((1.0 - cfg.eta) * op.a_hat).T.tocsr()
        anchor = cfg.eta
    elif cfg.mode == "dagnn":
        # sum_k s_k (A^T)^k g
        at = op.a_hat.T.tocsr()
        acc = np.zeros_like(g)
        for s_k in reversed(cfg.s):
            acc = at @ acc + s_k * g
        return acc
    else:
        raise DiffusionError(f"mode {cfg.mode!r} is not linear in its input")
    lam = g.copy()
    grad = np.zeros_like(g)
    for _ in range(cfg.steps):
        if anchor:
            grad += anchor * lam
        lam = c @ lam
    return grad + lam


def steady_state_matrix(op: NormalizedOperator, cfg: DiffusionConfig) -> sp.csr_matrix:
    a, b, g = cfg.alpha, cfg.beta, cfg.gamma
    eye = sp.identity(op.n, format="csr")
    return ((a + b) * eye - (b * (1.0 - g)) * op.a_hat - (b * g) * op.a_hat_sq).tocsr()


def steady_state(x_0, op: NormalizedOperator, cfg: DiffusionConfig, tol: float = 1e-10) -> np.ndarray:
    """Limit of the DMP iteration, from ``((a+b)I - b(1-g)A - b*g*A^2) Y = a X0``."""
    if cfg.alpha <= 0.0:
        raise DiffusionError("steady state needs alpha > 0")
    x_0 = as_features(x_0, op.n)
    m = steady_state_matrix(op, cfg)
    return solve_spd(m, cfg.alpha * x_0, tol=tol)


def euler_lagrange_residual(x, x_0, op: NormalizedOperator, cfg: DiffusionConfig) -> float:
    """Max-abs residual of ``a(x - x0) - b * div(x)`` at a candidate fixed point.

    The divergence here is the one the DMP iteration actually applies:
    ``(1-g)(A - I) x + g(A^2 - I) x``.
    """
    x = as_features(x, op.n)
    x_0 = as_features(x_0, op.n)
    g = cfg.gamma
    div = (1.0 - g) * (op.a_hat @ x - x) + g * (op.a_hat_sq @ x - x)
    r = cfg.alpha * (x - x_0) - cfg.beta * div
    return float(np.max(np.abs(r))) if r.size else 0.0


def euler_lagrange_fixed_point(x_0, op: NormalizedOperator, alpha: float, beta: float) -> np.ndarray:
    """Solve the stationarity condition ``0 = a(x - x0) + b (A - I) x``.

    Note the ``+b`` sign, opposite to the one the time-dependent equation
    implies; the APPNP correspondence holds against this form.
    """
    from scipy.sparse.linalg import spsolve

    x_0 = as_features(x_0, op.n)
    eye = sp.identity(op.n, format="csc")
    m = (alpha * eye + beta * (op.a_hat.tocsc() - eye)).tocsc()
    y = spsolve(m, alpha * x_0)
    return np.asarray(y).reshape(x_0.shape)


@dataclass(frozen=True)
class PropagationKernel:
    h: np.ndarray
    c: np.ndarray
    t: int


def build_kernel(op: NormalizedOperator, cfg: DiffusionConfig, limit: int = DENSE_LIMIT) -> PropagationKernel:
    """Dense ``H`` with ``propagate(X0) == H @ X0``; for verification only."""
    if op.n > limit:
        raise DiffusionError(f"dense kernel refused for n={op.n} > {limit}")
    c = step_matrix(op, cfg).toarray()
    h = np.eye(op.n)
    anchor = cfg.alpha * cfg.dt
    for _ in range(cfg.steps):
        h = c @ h
        h[np.diag_indices_from(h)] += anchor
    return PropagationKernel(h=h, c=c, t=cfg.steps)


def energy(x, x_0, op: NormalizedOperator, cfg: DiffusionConfig, f: float = 1.0) -> float:
    """Discrete energy of the first-order flow.

    ``a * sum_i |x_i - x0_i|^2 + b * f^2 * sum_{i<j} A_ij |x_j - x_i|^2``,
    each undirected edge counted once.  With these weights the gradient is
    ``2a(x - x0) - 2b f^2 div(x)`` with ``div`` from :func:`divergence_first`.
    """
    x = as_features(x, op.n)
    x_0 = as_features(x_0, op.n)
    if x.shape != x_0.shape:
        raise DiffusionError(f"state {x.shape} and anchor {x_0.shape} differ in shape")
    fid = float(np.sum((x - x_0) ** 2))
    upper = sp.triu(op.a_hat, k=1).tocoo()
    diff = x[upper.col] - x[upper.row]
    grad = float(np.sum(upper.data[:, None] * diff ** 2))
    return cfg.alpha * fid + cfg.beta * f * f * grad


def first_order_flow_step(x_t, x_0, op: NormalizedOperator, alpha: float, beta: float,
                          dt: float, f: float = 1.0) -> np.ndarray:
    """Explicit Euler step using the literal neighbor-difference divergence."""
    return x_t + dt * (alpha * (x_0 - x_t) + beta * f * divergence_first(op, x_t))


@dataclass(frozen=True)
class CoefficientRatios:
    """Coefficients of ``X``, ``A X`` and ``A^2 X`` after one HiD step and after two first-order steps."""

    hid: tuple[float, float, float]
    two_step_first_order: tuple[float, float, float]


def coefficient_ratios(cfg: DiffusionConfig) -> CoefficientRatios:
    a, b, g, dt = cfg.alpha, cfg.beta, cfg.gamma, cfg.dt
    hid = (1.0 - (a + b) * dt, (b - b * g) * dt, b * g * dt)
    keep = 1.0 - (a + b) * dt
    two = (keep * keep, 2.0 * b * dt * keep, (b * dt) ** 2)
    return CoefficientRatios(hid=hid, two_step_first_order=two)

"""Known GNN propagation rules written in their native form.

Each function here is the propagation rule as its original model defines it;
the ``framework_*`` helpers express the same rule as an instance of the
general diffusion step so the two can be compared.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .diffusion import DiffusionError, as_features, framework_step
from .graph import NormalizedOperator
from .linalg import solve_spd


def reduce_sgc(x_0, op: NormalizedOperator, steps: int) -> np.ndarray:
    """``A^steps X0``."""
    x = as_features(x_0, op.n)
    for _ in range(steps):
        x = op.a_hat @ x
    return x


def sgc_framework_step(x_t, op: NormalizedOperator) -> np.ndarray:
    return framework_step(x_t, np.zeros_like(x_t), op.a_hat, alpha=0.0, beta=1.0, dt=1.0)


def reduce_appnp_fixed_point(x_0, op: NormalizedOperator, eta: float, tol: float = 1e-12) -> np.ndarray:
    """Personalized-PageRank fixed point ``eta (I - (1-eta) A)^-1 X0``."""
    if not 0.0 < eta <= 1.0:
        raise DiffusionError(f"eta must lie in (0, 1], got {eta}")
    x_0 = as_features(x_0, op.n)
    m = (sp.identity(op.n, format="csr") - (1.0 - eta) * op.a_hat).tocsr()
    return solve_spd(m, eta * x_0, tol=tol)


def appnp_power_iteration(x_0, op: NormalizedOperator, eta: float, tol: float = 1e-10,
                          max_iter: int = 100_000) -> np.ndarray:
    """``X <- (1-eta) A X + eta X0`` until the update falls below ``tol``."""
    x_0 = as_features(x_0, op.n)
    x = x_0.copy()
    for _ in range(max_iter):
        nxt = (1.0 - eta) * (op.a_hat @ x) + eta * x_0
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    return x


def appnp_framework_coefficients(eta: float) -> tuple[float, float]:
    """``(alpha, beta) = (1, 1 - 1/eta)``."""
    return 1.0, 1.0 - 1.0 / eta


def check_attention(attention, n: int, tol: float = 1e-9) -> np.ndarray:
    f = attention.toarray() if sp.issparse(attention) else np.asarray(attention, dtype=np.float64)
    if f.shape != (n, n):
        raise DiffusionError(f"attention must be {n}x{n}, got {f.shape}")
    if np.any(f < -tol):
        raise DiffusionError("attention has negative entries")
    rows = f.sum(axis=1)
    worst = float(np.max(np.abs(rows - 1.0))) if n else 0.0
    if worst > tol:
        raise DiffusionError(f"attention rows must sum to 1 (worst deviation {worst:.3e})")
    return f


def reduce_gat_step(x_t, attention) -> np.ndarray:
    """``F X`` for a row-stochastic attention matrix ``F``."""
    x_t = as_features(x_t)
    f = check_attention(attention, x_t.shape[0])
    return f @ x_t


def gat_framework_step(x_t, attention) -> np.ndarray:
    x_t = as_features(x_t)
    return framework_step(x_t, np.zeros_like(x_t), np.asarray(attention), alpha=0.0, beta=1.0, dt=1.0)


def amp_node_weights(x_t, x_0, op: NormalizedOperator, eps: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed target ``Y`` and per-node mixing weights of one AMP step.

    A node whose smoothed row equals its initial row gets weight 0 (the clamp
    absorbs the zero denominator).
    """
    x_t = as_features(x_t, op.n)
    x_0 = as_features(x_0, op.n)
    c = 2.0 * eps * (1.0 - lam)
    y = (1.0 - c) * x_t + c * (op.a_hat @ x_t)
    dev = np.linalg.norm(y - x_0, axis=1)
    with np.errstate(divide="ignore"):
        w = np.where(dev > 0, 1.0 - eps * lam / np.where(dev > 0, dev, 1.0), 0.0)
    return y, np.maximum(w, 0.0)


def reduce_amp_step(x_t, x_0, op: NormalizedOperator, eps: float, lam: float) -> np.ndarray:
    if not (0.0 < eps < 1.0 and 0.0 < lam < 1.0):
        raise DiffusionError(f"eps and lambda must lie in (0, 1), got {eps}, {lam}")
    y, w = amp_node_weights(x_t, x_0, op, eps, lam)
    x_0 = as_features(x_0, op.n)
    return (1.0 - w)[:, None] * x_0 + w[:, None] * y


def amp_framework_step(x_t, x_0, op: NormalizedOperator, eps: float, lam: float) -> np.ndarray:
    """Same step through the framework with per-node ``alpha = 1 - w``, ``beta = 2 eps (1-lam) w``."""
    _, w = amp_node_weights(x_t, x_0, op, eps, lam)
    return framework_step(as_features(x_t), as_features(x_0), op.a_hat,
                          alpha=1.0 - w, beta=2.0 * eps * (1.0 - lam) * w, dt=1.0)


def reduce_dagnn_combine(x_0, op: NormalizedOperator, s) -> np.ndarray:
    """``sum_k s_k A^k X0`` accumulated Horner style."""
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.size == 0:
        raise DiffusionError("retainment weights are empty")
    if abs(s.sum() - 1.0) > 1e-9:
        raise DiffusionError(f"retainment weights must sum to 1, got {s.sum():.12g}")
    x_0 = as_features(x_0, op.n)
    acc = s[-1] * x_0
    for s_k in s[-2::-1]:
        acc = op.a_hat @ acc + s_k * x_0
    return acc


def dagnn_framework_coefficients(s) -> tuple[float, float, np.ndarray]:
    """``alpha``, ``beta`` and diffusivities ``f(t)`` that reproduce weights ``s``.

    With ``alpha + beta = 1`` the framework's series is
    ``alpha * sum_t (beta f(t))^t A^t X0``, so ``alpha = s_0`` and
    ``f(t) = (s_t / s_0)^(1/t) / beta``.  Requires ``s_0 > 0`` and ``s_t >= 0``.
    """
    s = np.asarray(s, dtype=np.float64).ravel()
    if s[0] <= 0.0 or np.any(s < 0.0):
        raise DiffusionError("need s_0 > 0 and non-negative weights")
    alpha = float(s[0])
    beta = 1.0 - alpha
    t = np.arange(1, s.size)
    f = np.ones(s.size)
    if beta > 0:
        f[1:] = (s[1:] / alpha) ** (1.0 / t) / beta
    elif np.any(s[1:] > 0):
        raise DiffusionError("s_0 = 1 leaves no weight for higher powers")
    return alpha, beta, f


def framework_dagnn_combine(x_0, op: NormalizedOperator, alpha: float, beta: float, f) -> np.ndarray:
    """``alpha * sum_t (beta f(t))^t A^t X0`` by explicit power accumulation."""
    x_0 = as_features(x_0, op.n)
    f = np.asarray(f, dtype=np.float64).ravel()
    power = x_0.copy()
    out = alpha * power
    for t in range(1, f.size):
        power = op.a_hat @ power
        out = out + alpha * (beta * f[t]) ** t * power
    return out

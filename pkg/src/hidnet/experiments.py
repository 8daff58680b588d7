"""Repeated training runs, robustness curves, depth sweeps and timing.

Every experiment repeats over ``repeats`` consecutive seeds; the seed drives both
the model initialisation/dropout and, for attacks, the perturbation.  Means
and standard deviations are population statistics (``ddof=0``) accumulated
with Welford's update over the results sorted ascending, so aggregation does
not depend on the order in which repeats finished.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .attacks import AttackSpec, attack_edges, attack_features
from .data import DatasetBundle
from .diffusion import DiffusionConfig, dmp_step
from .graph import build_graph, normalize
from .metrics import Metrics
from .model import TrainConfig, fit_evaluate


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    count: int


def welford(values) -> Summary:
    """One-pass mean and population standard deviation."""
    mean, m2, count = 0.0, 0.0, 0
    for v in sorted(float(v) for v in values):
        count += 1
        delta = v - mean
        mean += delta / count
        m2 += delta * (v - mean)
    if count == 0:
        return Summary(float("nan"), float("nan"), 0)
    return Summary(mean, math.sqrt(m2 / count), count)


def two_pass(values) -> Summary:
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        return Summary(float("nan"), float("nan"), 0)
    mean = float(v.sum() / v.size)
    return Summary(mean, float(np.sqrt(np.sum((v - mean) ** 2) / v.size)), int(v.size))


def run_classification(bundle: DatasetBundle, cfg: DiffusionConfig, train_cfg: TrainConfig,
                       repeats: int = 5, first_seed: int = 0) -> list[Metrics]:
    """Train and evaluate once per seed on the bundle's fixed split."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    op = normalize(bundle.graph)
    out = []
    for seed in range(first_seed, first_seed + repeats):
        metrics, _ = fit_evaluate(bundle.features, bundle.split, op, cfg, replace(train_cfg, seed=seed))
        out.append(metrics)
    return out


def run_oversmoothing_sweep(bundle: DatasetBundle, cfg: DiffusionConfig, k_list,
                            train_cfg: TrainConfig = TrainConfig(), repeats: int = 5,
                            first_seed: int = 0) -> list[tuple]:
    """Rows ``(k, mean accuracy, std)``; ``k = 0`` is the plain MLP."""
    k_list = list(k_list)
    if not k_list:
        raise ValueError("k_list must be nonempty")
    rows = []
    for k in k_list:
        runs = run_classification(bundle, cfg.with_(steps=int(k)), train_cfg, repeats, first_seed)
        s = welford([m.accuracy for m in runs])
        rows.append((int(k), s.mean, s.std))
    return rows


def _attacked(bundle: DatasetBundle, kind: str, rate: float, seed: int) -> DatasetBundle:
    if rate == 0:
        return bundle
    if kind == "feature_noise":
        return bundle.with_features(attack_features(bundle.features, rate, seed))
    g, _ = attack_edges(bundle.graph, AttackSpec(kind, rate, seed))
    return bundle.with_graph(g)


def run_robustness_curve(bundle: DatasetBundle, cfg: DiffusionConfig, kind: str, rates,
                         train_cfg: TrainConfig = TrainConfig(), repeats: int = 5,
                         first_seed: int = 0) -> list[tuple]:
    """Rows ``(rate, mean accuracy, std)``.

    Seed ``s`` both draws the perturbation and trains the model, so two
    propagation modes compared at the same rate see identical attacks.
    A rate of 0 is the clean baseline.
    """
    rates = [float(r) for r in rates]
    if not rates:
        raise ValueError("rates must be nonempty")
    AttackSpec(kind, max(rates))  # validates kind and range up front
    rows = []
    for rate in rates:
        accs = []
        for seed in range(first_seed, first_seed + repeats):
            b = _attacked(bundle, kind, rate, seed)
            metrics, _ = fit_evaluate(b.features, b.split, normalize(b.graph), cfg,
                                      replace(train_cfg, seed=seed))
            accs.append(metrics.accuracy)
        s = welford(accs)
        rows.append((rate, s.mean, s.std))
    return rows


def random_sparse_graph(n: int, avg_degree: float, seed: int = 0):
    """Erdos-Renyi-like graph with about ``n * avg_degree / 2`` edges, sampled as pairs."""
    rng = np.random.default_rng(seed)
    m = int(round(n * avg_degree / 2))
    pairs = rng.integers(0, n, size=(m, 2))
    return build_graph(pairs[pairs[:, 0] != pairs[:, 1]], n)


def time_steps(op, x: np.ndarray, cfg: DiffusionConfig, steps: int, repeats: int = 3) -> float:
    """Best-of-``repeats`` wall clock for ``steps`` DMP steps (operator already built)."""
    best = float("inf")
    for _ in range(repeats):
        y = x
        t0 = time.perf_counter()
        for _ in range(steps):
            y = dmp_step(y, x, op, cfg)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_propagation(n_list, avg_degree: float = 10.0, feature_dim: int = 64, steps: int = 10,
                      seed: int = 0, cfg: DiffusionConfig = DiffusionConfig()) -> tuple[list[tuple], float]:
    """Seconds per DMP step for each ``n`` and the fitted exponent of time vs ``n``.

    Graph construction and the normalized operators (including the squared
    one) are built before the clock starts.
    """
    rows = []
    for n in n_list:
        g = random_sparse_graph(int(n), avg_degree, seed)
        op = normalize(g)
        x = np.random.default_rng(seed).standard_normal((int(n), feature_dim))
        rows.append((int(n), time_steps(op, x, cfg, steps) / steps))
    exponent = fit_exponent([r[0] for r in rows], [r[1] for r in rows])
    return rows, exponent


def fit_exponent(sizes, seconds) -> float:
    if len(sizes) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(seconds, float)), 1)
    return float(slope)


def write_csv(path: str | Path, columns, rows, config: dict | None = None, command: str = "") -> Path:
    """Write rows under a ``# key = value`` header that doubles as a config file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        if config is not None:
            fh.write(f"# hidnet {command} config\n".replace("  ", " "))
            for key, value in config.items():
                fh.write(f"# {key} = {value}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)

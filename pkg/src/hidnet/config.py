"""Plain-text ``key = value`` run configuration for the command line.

Blank lines and ``#`` comments are ignored.  A CSV written by the CLI starts
with ``# hidnet <command> config`` followed by ``# key = value`` lines; such a
file is accepted as a config too, which is how a result is re-run.

Keys and defaults (see :class:`RunConfig`):

dataset          directory in the repo text format; empty means synthetic
n, classes, p_in, p_out, feature_dim, signal, data_seed
                 synthetic block-model fixture
normalize_features  row-normalize features before use (bool)
mode, alpha, beta, gamma, dt, steps, eta, eps, lam, s
                 propagation; ``s`` is a comma-separated weight list
learning_rate, weight_decay, epochs, patience, hidden, dropout
                 training
seed, repeats    first seed and number of repeats
output           output file (CSV) or directory (attack)
features         feature file for ``propagate`` (defaults to the dataset's)
k_list           comma-separated depths for ``oversmooth``
attack, rate, rates
                 attack kind, single rate for ``attack``, list for ``robustness``
n_list, avg_degree, bench_dim, bench_steps
                 ``bench`` sizes and workload
target, walk_n, walk_root, walk_steps, trials
                 ``verify``; the walk check runs on a cycle of ``walk_n`` nodes
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .data import SyntheticSpec
from .diffusion import DiffusionConfig
from .model import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset: str = ""
    n: int = 600
    classes: int = 3
    p_in: float = 0.05
    p_out: float = 0.01
    feature_dim: int = 16
    signal: float = 1.0
    data_seed: int = 0
    normalize_features: bool = False

    mode: str = "hid"
    alpha: float = 0.1
    beta: float = 0.9
    gamma: float = 0.3
    dt: float = 0.8
    steps: int = 10
    eta: float = 0.0
    eps: float = 0.0
    lam: float = 0.0
    s: str = ""

    learning_rate: float = 0.01
    weight_decay: float = 0.0
    epochs: int = 1000
    patience: int = 100
    hidden: int = 64
    dropout: float = 0.5

    seed: int = 0
    repeats: int = 5
    output: str = "out.csv"
    features: str = ""

    k_list: str = "2,4,8,10,16,20"
    attack: str = "edge_add"
    rate: float = 0.2
    rates: str = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4"

    n_list: str = "1000,2000,4000,8000"
    avg_degree: float = 10.0
    bench_dim: int = 64
    bench_steps: int = 10

    target: str = "all"
    walk_n: int = 12
    walk_root: int = 0
    walk_steps: int = 5
    trials: int = 100000

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(n=self.n, classes=self.classes, p_in=self.p_in, p_out=self.p_out,
                             feature_dim=self.feature_dim, signal=self.signal, seed=self.data_seed)

    def diffusion(self) -> DiffusionConfig:
        extra = {}
        if self.mode == "appnp":
            extra["eta"] = self.eta
        elif self.mode == "amp":
            extra.update(eps=self.eps, lam=self.lam)
        elif self.mode == "dagnn":
            extra["s"] = tuple(float_list(self.s))
        return DiffusionConfig(alpha=self.alpha, beta=self.beta, gamma=self.gamma, dt=self.dt,
                               steps=self.steps, mode=self.mode, **extra)

    def training(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, weight_decay=self.weight_decay,
                           epochs=self.epochs, patience=self.patience, hidden=self.hidden,
                           dropout=self.dropout, seed=self.seed)

    def items(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} is not {kind}") from None
    return raw


def parse_config(text: str, base: RunConfig = RunConfig()) -> RunConfig:
    lines = text.splitlines()
    from_csv = bool(lines) and lines[0].startswith("# hidnet ")
    values = {}
    for lineno, line in enumerate(lines[1:] if from_csv else lines, start=2 if from_csv else 1):
        line = line.strip()
        if from_csv:
            if not line.startswith("#"):
                break  # end of the header, CSV body follows
            line = line[1:].strip()
        elif not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return replace(base, **values)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)

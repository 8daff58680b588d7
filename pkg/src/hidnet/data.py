"""Dataset bundles on disk and synthetic stochastic-block-model fixtures.

A dataset directory holds four text files:

``edges.tsv``     one ``u<TAB>v`` pair per line, ``#`` comments allowed
``features.txt``  header ``n q`` followed by ``n`` rows of ``q`` numbers
``labels.txt``    one integer class per line
``split.txt``     one of ``train``, ``val``, ``test``, ``none`` per line
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diffusion import read_features, write_features
from .graph import Graph, build_graph, read_edge_list, write_edge_list
from .model import LabeledSplit

SPLIT_NAMES = ("train", "val", "test", "none")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetBundle:
    name: str
    graph: Graph
    features: np.ndarray
    split: LabeledSplit

    def __post_init__(self):
        n = self.graph.n
        if self.features.shape[0] != n:
            raise DatasetError(f"features have {self.features.shape[0]} rows but graph has {n} nodes")
        if self.split.labels.shape[0] != n:
            raise DatasetError(f"{self.split.labels.shape[0]} labels for {n} nodes")

    @property
    def num_classes(self) -> int:
        return self.split.num_classes

    def with_graph(self, g: Graph) -> "DatasetBundle":
        return DatasetBundle(self.name, g, self.features, self.split)

    def with_features(self, x: np.ndarray) -> "DatasetBundle":
        return DatasetBundle(self.name, self.graph, x, self.split)


def _read_lines(path: Path) -> list[str]:
    with open(path) as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


def load_dataset(directory: str | Path, num_classes: int | None = None) -> DatasetBundle:
    d = Path(directory)
    for fname in ("edges.tsv", "features.txt", "labels.txt", "split.txt"):
        if not (d / fname).is_file():
            raise DatasetError(f"missing file {d / fname}")
    x = read_features(d / "features.txt")
    n = x.shape[0]
    labels = np.asarray([int(v) for v in _read_lines(d / "labels.txt")], dtype=np.int64)
    if labels.shape[0] != n:
        raise DatasetError(f"shape mismatch: features.txt has {n} rows, labels.txt has {labels.shape[0]}")
    if labels.size and labels.min() < 0:
        raise DatasetError("label out of range: negative class")
    if num_classes is not None and labels.size and labels.max() >= num_classes:
        raise DatasetError(f"label out of range: {labels.max()} >= {num_classes}")
    tags = _read_lines(d / "split.txt")
    if len(tags) != n:
        raise DatasetError(f"shape mismatch: features.txt has {n} rows, split.txt has {len(tags)}")
    bad = sorted(set(tags) - set(SPLIT_NAMES))
    if bad:
        raise DatasetError(f"unknown split tag {bad[0]!r}")
    tags = np.asarray(tags)
    split = LabeledSplit(labels, tags == "train", tags == "val", tags == "test")
    edges = read_edge_list(d / "edges.tsv")
    g = build_graph(edges, n)
    return DatasetBundle(d.name, g, x, split)


def save_dataset(bundle: DatasetBundle, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_edge_list(d / "edges.tsv", bundle.graph)
    write_features(d / "features.txt", bundle.features)
    with open(d / "labels.txt", "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in bundle.split.labels)
    s = bundle.split
    tags = np.where(s.train, "train", np.where(s.val, "val", np.where(s.test, "test", "none")))
    with open(d / "split.txt", "w") as fh:
        fh.writelines(f"{t}\n" for t in tags)
    return d


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 600
    classes: int = 2
    p_in: float = 0.05
    p_out: float = 0.01
    feature_dim: int = 16
    signal: float = 1.0
    seed: int = 0
    train_per_class: int = 20
    val_fraction: float = 0.3

    def __post_init__(self):
        if not (0 <= self.p_in <= 1 and 0 <= self.p_out <= 1):
            raise DatasetError("p_in and p_out must lie in [0, 1]")
        if self.classes < 2 or self.n < self.classes:
            raise DatasetError(f"degenerate spec: n={self.n}, classes={self.classes}")


def sbm_edges(block: np.ndarray, p_in: float, p_out: float, rng) -> np.ndarray:
    """Sample every unordered pair independently; probability set by block membership."""
    n = block.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(block[iu] == block[ju], p_in, p_out)
    keep = rng.random(iu.shape[0]) < p
    return np.stack([iu[keep], ju[keep]], axis=1)


def generate_synthetic(spec: SyntheticSpec) -> DatasetBundle:
    """SBM graph with class-conditional Gaussian features.

    Class means are ``signal`` times orthonormal-ish random directions scaled
    so that distinct means sit ``signal`` apart; each feature gets unit noise.
    """
    rng = np.random.default_rng(spec.seed)
    labels = np.sort(np.arange(spec.n) % spec.classes)
    edges = sbm_edges(labels, spec.p_in, spec.p_out, rng)
    g = build_graph(edges, spec.n)

    dirs = rng.standard_normal((spec.classes, spec.feature_dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    means = dirs * (spec.signal / np.sqrt(2.0))
    x = means[labels] + rng.standard_normal((spec.n, spec.feature_dim))

    train = np.zeros(spec.n, dtype=bool)
    for c in range(spec.classes):
        members = np.flatnonzero(labels == c)
        k = min(spec.train_per_class, max(members.size - 2, 1))
        train[rng.choice(members, size=k, replace=False)] = True
    rest = rng.permutation(np.flatnonzero(~train))
    n_val = int(round(spec.val_fraction * rest.size))
    val = np.zeros(spec.n, dtype=bool)
    val[rest[:n_val]] = True
    test = ~(train | val)
    name = f"sbm-n{spec.n}-c{spec.classes}-pin{spec.p_in:g}-pout{spec.p_out:g}-s{spec.seed}"
    return DatasetBundle(name, g, x, LabeledSplit(labels, train, val, test))


def row_normalize(x: np.ndarray) -> np.ndarray:
    """Scale rows to unit L1 norm; all-zero rows stay zero."""
    s = np.abs(x).sum(axis=1, keepdims=True)
    s[s == 0] = 1.0
    return x / s

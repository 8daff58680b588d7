"""Convert a Planetoid dump (``ind.<name>.*`` pickles) to the repo's text format.

Usage::

    python3 scripts/convert_planetoid.py RAW_DIR NAME OUT_DIR

``RAW_DIR`` holds ``ind.NAME.{x,y,tx,ty,allx,ally,graph,test.index}`` as
distributed with the original GCN code.  The standard public split is
reproduced: the first ``len(y)`` nodes train, the next 500 validate and the
nodes in ``test.index`` test.  Features are written unnormalized.  The script
needs only numpy and scipy and does no downloading.
"""

import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hidnet.data import DatasetBundle, save_dataset  # noqa: E402
from hidnet.graph import build_graph  # noqa: E402
from hidnet.model import LabeledSplit  # noqa: E402


def _load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def convert(raw_dir, name: str, out_dir) -> DatasetBundle:
    raw = Path(raw_dir)
    x, y, tx, ty, allx, ally, graph = (_load(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_idx)

    if name == "citeseer":
        # some test nodes are isolated and missing from tx/ty; pad with zero rows
        full = np.arange(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((full.size, tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((full.size, ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        ty = ty_ext

    features = sp.vstack([allx, tx]).tolil()
    features[test_idx, :] = features[test_sorted, :]
    onehot = np.vstack([ally, ty])
    onehot[test_idx, :] = onehot[test_sorted, :]
    labels = onehot.argmax(axis=1)

    n = features.shape[0]
    edges = [(u, v) for u, nbrs in graph.items() for v in nbrs if u < n and v < n]
    g = build_graph(np.asarray(edges, dtype=np.int64).reshape(-1, 2), n)

    train = np.zeros(n, bool)
    train[: y.shape[0]] = True
    val = np.zeros(n, bool)
    val[y.shape[0]: y.shape[0] + 500] = True
    test = np.zeros(n, bool)
    test[test_sorted] = True
    val &= ~test  # only matters for tiny dumps; the public splits never overlap
    bundle = DatasetBundle(name, g, np.asarray(features.todense(), dtype=np.float64),
                           LabeledSplit(labels.astype(np.int64), train, val, test))
    save_dataset(bundle, out_dir)
    return bundle


def main(argv):
    if len(argv) != 3:
        print("usage: convert_planetoid.py RAW_DIR NAME OUT_DIR", file=sys.stderr)
        return 2
    b = convert(*argv)
    print(f"{b.name}: n={b.graph.n} edges={b.graph.num_edges} classes={b.num_classes} "
          f"train/val/test={b.split.train.sum()}/{b.split.val.sum()}/{b.split.test.sum()}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))

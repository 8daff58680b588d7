"""Command line entry point: ``hidnet <command> [target] --config FILE [--seed N]``.

Results go to CSV files whose header records the resolved configuration.
On failure a single line ``error: <Kind>: <message>`` is written to stderr
and the exit status is nonzero (2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .attacks import AttackSpec, attack_edges, attack_features
from .config import RunConfig, float_list, int_list, load_config
from .data import DatasetBundle, generate_synthetic, load_dataset, row_normalize, save_dataset
from .diffusion import DiffusionConfig, propagate, read_features, steady_state
from .graph import build_graph, normalize
from .model import forward, train
from .metrics import evaluate
from .similarity import similarity_report
from .walk import expectation_equivalence, kernel_column, monte_carlo_estimate

COMMANDS = ("verify", "similarity", "propagate", "train", "attack", "oversmooth", "robustness", "bench")
VERIFY_TARGETS = ("all", "kernel", "convergence", "noncollapse", "walk")


class UsageError(Exception):
    pass


class VerificationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bundle(cfg: RunConfig) -> DatasetBundle:
    b = load_dataset(cfg.dataset) if cfg.dataset else generate_synthetic(cfg.synthetic_spec())
    if cfg.normalize_features:
        b = b.with_features(row_normalize(b.features))
    return b


def _random_fixture(rng, n_max=50):
    n = int(rng.integers(3, n_max + 1))
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < rng.uniform(0.05, 0.4)
    g = build_graph(np.stack([iu[keep], ju[keep]], axis=1), n)
    return g, rng.standard_normal((n, 3))


def _verify_kernel(cfg, rng):
    rows = []
    for i in range(20):
        g, x = _random_fixture(rng)
        c = DiffusionConfig(alpha=rng.uniform(0.01, 1), beta=rng.uniform(0.01, 1),
                            gamma=rng.uniform(0, 1), dt=rng.uniform(0.05, 1),
                            steps=int(rng.integers(0, 21)))
        dev = expectation_equivalence(normalize(g), c, x, c.steps)
        rows.append(("kernel", i, dev, 1e-10, dev < 1e-10))
    return rows


def _verify_convergence(cfg, rng):
    rows = []
    for i in range(10):
        g, x = _random_fixture(rng)
        beta = rng.uniform(0.05, 0.95)
        c = DiffusionConfig(alpha=rng.uniform(0.05, 1 - beta), beta=beta, gamma=rng.uniform(0.01, 1),
                            dt=rng.uniform(0.3, 1), steps=10_000)
        op = normalize(g)
        dev = float(np.max(np.abs(propagate(x, op, c) - steady_state(x, op, c))))
        rows.append(("convergence", i, dev, 1e-8, dev < 1e-8))
    return rows


def _min_row_distance(x):
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    return float(d[np.triu_indices(x.shape[0], k=1)].min())


def _verify_noncollapse(cfg, rng):
    rows = []
    for i in range(5):
        g, x = _random_fixture(rng, 30)
        c = DiffusionConfig(alpha=0.1, beta=0.9, gamma=0.3, dt=0.8, steps=1000)
        d = _min_row_distance(propagate(x, normalize(g), c))
        rows.append(("noncollapse", i, d, 1e-6, d > 1e-6))
    return rows


def _verify(cfg: RunConfig, target: str) -> int:
    rng = np.random.default_rng(cfg.seed)
    if target == "walk":
        n = cfg.walk_n
        g = build_graph([(i, (i + 1) % n) for i in range(n)], n)
        dcfg = cfg.diffusion()
        emp = monte_carlo_estimate(g, dcfg, cfg.walk_root, cfg.walk_steps, cfg.trials, cfg.seed)
        exact = kernel_column(g, dcfg, cfg.walk_root, cfg.walk_steps)
        rows = [(i, float(emp[i]), float(exact[i]), float(abs(emp[i] - exact[i]))) for i in range(n)]
        ex.write_csv(cfg.output, ("node", "empirical_freq", "kernel_prob", "abs_err"), rows,
                     cfg.items(), "verify")
        return 0
    checks = {"kernel": _verify_kernel, "convergence": _verify_convergence,
              "noncollapse": _verify_noncollapse}
    rows = []
    for name in (checks if target == "all" else [target]):
        rows += checks[name](cfg, rng)
    ex.write_csv(cfg.output, ("check", "fixture", "value", "tolerance", "pass"), rows,
                 cfg.items(), "verify")
    failed = [r for r in rows if not r[-1]]
    if failed:
        raise VerificationFailed(f"{len(failed)} of {len(rows)} checks failed, first: "
                                 f"{failed[0][0]} fixture {failed[0][1]} value {failed[0][2]:.3g}")
    return 0


def _train(cfg: RunConfig) -> int:
    b = _bundle(cfg)
    op = normalize(b.graph)
    dcfg, tcfg = cfg.diffusion(), cfg.training()
    rows = []
    out = Path(cfg.output)
    for k in range(cfg.repeats):
        seed = cfg.seed + k
        tc = replace(tcfg, seed=seed)
        result = train(b.features, b.split, op, dcfg, tc)
        m = evaluate(forward(b.features, result.params, op, dcfg), b.split.labels, b.split.test)
        rows.append((seed, m.accuracy, m.f1_macro, m.f1_micro, m.auc, result.best_epoch))
        if k == 0:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.with_suffix(".history.csv").write_text(result.history_csv())
            result.params.save(out.with_suffix(".npz"), dcfg, tc)
    ex.write_csv(out, ("seed", "accuracy", "f1_macro", "f1_micro", "auc", "best_epoch"), rows,
                 cfg.items(), "train")
    acc = ex.welford([r[1] for r in rows])
    print(f"accuracy {acc.mean:.4f} +- {acc.std:.4f} over {acc.count} seeds")
    return 0


def _propagate(cfg: RunConfig) -> int:
    if cfg.features:
        x = read_features(cfg.features)
        g = load_dataset(cfg.dataset).graph if cfg.dataset else generate_synthetic(cfg.synthetic_spec()).graph
    else:
        b = _bundle(cfg)
        x, g = b.features, b.graph
    y = propagate(x, normalize(g), cfg.diffusion())
    rows = [(i, *map(float, row)) for i, row in enumerate(y)]
    ex.write_csv(cfg.output, ("node", *[f"f{j}" for j in range(y.shape[1])]), rows, cfg.items(), "propagate")
    return 0


def _similarity(cfg: RunConfig) -> int:
    b = _bundle(cfg)
    r = similarity_report(b.graph, b.split.labels)
    ex.write_csv(cfg.output, ("h1", "h2", "h12", "counted"), [(r.h1, r.h2, r.h12, r.counted)],
                 cfg.items(), "similarity")
    return 0


def _attack(cfg: RunConfig) -> int:
    b = _bundle(cfg)
    out = Path(cfg.output)
    if cfg.attack == "feature_noise":
        attacked = b.with_features(attack_features(b.features, cfg.rate, cfg.seed))
        record = {"kind": cfg.attack, "rate": cfg.rate, "seed": cfg.seed}
    else:
        g, rep = attack_edges(b.graph, AttackSpec(cfg.attack, cfg.rate, cfg.seed))
        attacked = b.with_graph(g)
        record = {"kind": rep.kind, "rate": rep.rate, "seed": rep.seed,
                  "requested": rep.requested, "achieved": rep.achieved}
    save_dataset(attacked, out)
    record["source"] = cfg.dataset or b.name
    with open(out / "manifest.jsonl", "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    return 0


def _oversmooth(cfg: RunConfig) -> int:
    rows = ex.run_oversmoothing_sweep(_bundle(cfg), cfg.diffusion(), int_list(cfg.k_list),
                                      cfg.training(), cfg.repeats, cfg.seed)
    ex.write_csv(cfg.output, ("k", "mean_acc", "std"), rows, cfg.items(), "oversmooth")
    return 0


def _robustness(cfg: RunConfig) -> int:
    rows = ex.run_robustness_curve(_bundle(cfg), cfg.diffusion(), cfg.attack, float_list(cfg.rates),
                                   cfg.training(), cfg.repeats, cfg.seed)
    ex.write_csv(cfg.output, ("rate", "mean_acc", "std"), rows, cfg.items(), "robustness")
    return 0


def _bench(cfg: RunConfig) -> int:
    rows, exponent = ex.bench_propagation(int_list(cfg.n_list), cfg.avg_degree, cfg.bench_dim,
                                          cfg.bench_steps, cfg.seed, cfg.diffusion())
    ex.write_csv(cfg.output, ("n", "seconds_per_step"), rows, cfg.items(), "bench")
    print(f"fitted exponent {exponent:.3f}")
    return 0


def run(argv) -> int:
    p = _Parser(prog="hidnet", add_help=True)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("target", nargs="?", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", "-o", default=None)
    args = p.parse_args(argv)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.output is not None:
        cfg = replace(cfg, output=args.output)
    if args.command == "verify":
        target = args.target or cfg.target
        if target not in VERIFY_TARGETS:
            raise UsageError(f"unknown verify target {target!r}; expected one of {VERIFY_TARGETS}")
        return _verify(replace(cfg, target=target), target)
    if args.target is not None:
        raise UsageError(f"command {args.command!r} takes no positional target")
    handler = {"similarity": _similarity, "propagate": _propagate, "train": _train,
               "attack": _attack, "oversmooth": _oversmooth, "robustness": _robustness,
               "bench": _bench}[args.command]
    return handler(cfg)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - every failure becomes one parseable line
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

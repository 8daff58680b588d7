"""Decoupled classifier: a two-layer perceptron followed by parameter-free propagation.

Logits are ``propagate(mlp(X))``.  Because the propagation is linear in the
MLP output, the loss gradient with respect to that output is the adjoint
propagation of the softmax residual, computed by running the recursion
backwards.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .diffusion import DiffusionConfig, propagate, propagate_adjoint
from .graph import NormalizedOperator
from .metrics import Metrics, evaluate, predict, softmax

log = logging.getLogger(__name__)

PARAM_NAMES = ("w1", "b1", "w2", "b2")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    dropout_rate: float = 0.0

    @classmethod
    def init(cls, in_dim: int, hidden: int, out_dim: int, seed: int = 0,
             dropout_rate: float = 0.0) -> "MlpParams":
        if hidden <= 0:
            raise ValueError("hidden size must be positive")
        rng = np.random.default_rng(seed)
        r1 = np.sqrt(6.0 / (in_dim + hidden))
        r2 = np.sqrt(6.0 / (hidden + out_dim))
        return cls(
            w1=rng.uniform(-r1, r1, size=(in_dim, hidden)),
            b1=np.zeros(hidden),
            w2=rng.uniform(-r2, r2, size=(hidden, out_dim)),
            b2=np.zeros(out_dim),
            dropout_rate=dropout_rate,
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def copy(self) -> "MlpParams":
        return MlpParams(**{k: v.copy() for k, v in self.arrays().items()},
                         dropout_rate=self.dropout_rate)

    def save(self, path: str | Path, diffusion: DiffusionConfig | None = None,
             train_cfg: "TrainConfig | None" = None) -> None:
        """Write all tensors plus the producing configuration to an ``.npz`` file."""
        meta = {"dropout_rate": self.dropout_rate}
        if diffusion is not None:
            meta["diffusion"] = {f.name: getattr(diffusion, f.name) for f in fields(diffusion)
                                 if f.name != "attention"}
        if train_cfg is not None:
            meta["train"] = {f.name: getattr(train_cfg, f.name) for f in fields(train_cfg)}
        np.savez(path, **self.arrays(), meta=np.array(json.dumps(meta, default=list)))

    @classmethod
    def load(cls, path: str | Path) -> tuple["MlpParams", dict]:
        with np.load(path) as z:
            meta = json.loads(str(z["meta"]))
            params = cls(**{k: z[k] for k in PARAM_NAMES}, dropout_rate=meta["dropout_rate"])
        return params, meta


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    epochs: int = 1000
    patience: int = 100
    hidden: int = 64
    dropout: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class LabeledSplit:
    labels: np.ndarray
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        n = self.labels.shape[0]
        for name in ("train", "val", "test"):
            m = getattr(self, name)
            if m.shape != (n,) or m.dtype != bool:
                raise ValueError(f"{name} mask must be a boolean vector of length {n}")
        if (self.train & self.val).any() or (self.train & self.test).any() or (self.val & self.test).any():
            raise ValueError("train/val/test masks overlap")
        if not self.train.any():
            raise ValueError("train mask is empty")

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass
class _Cache:
    x_drop: np.ndarray
    z1: np.ndarray
    mask1: np.ndarray | None
    hidden: np.ndarray


def _dropout_mask(rng, shape, rate):
    if rate <= 0.0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _mlp(x, params: MlpParams, training: bool, seed: int | None):
    rate = params.dropout_rate if training else 0.0
    rng = np.random.default_rng(seed) if rate > 0.0 else None
    m0 = _dropout_mask(rng, x.shape, rate)
    x_drop = x * m0 if m0 is not None else x
    z1 = x_drop @ params.w1 + params.b1
    h = np.maximum(z1, 0.0)
    m1 = _dropout_mask(rng, h.shape, rate)
    if m1 is not None:
        h = h * m1
    out = h @ params.w2 + params.b2
    return out, _Cache(x_drop, z1, m1, h)


def forward(x, params: MlpParams, op: NormalizedOperator, cfg: DiffusionConfig,
            training: bool = False, seed=0) -> np.ndarray:
    """Logits of every node; dropout only when ``training`` (seeded)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != params.w1.shape[0]:
        raise ValueError(f"features have {x.shape[1]} columns, weights expect {params.w1.shape[0]}")
    out, _ = _mlp(x, params, training, seed)
    return propagate(out, op, cfg)


def loss_and_grads(x, params: MlpParams, op: NormalizedOperator, cfg: DiffusionConfig,
                   split: LabeledSplit, training: bool = False, seed=0):
    """Mean softmax cross-entropy on the train mask and its exact parameter gradients."""
    x = np.asarray(x, dtype=np.float64)
    out, cache = _mlp(x, params, training, seed)
    logits = propagate(out, op, cfg)
    idx = np.flatnonzero(split.train)
    prob = softmax(logits[idx])
    y = split.labels[idx]
    loss = float(-np.mean(np.log(prob[np.arange(idx.size), y] + 1e-300)))
    resid = prob
    resid[np.arange(idx.size), y] -= 1.0
    g_logits = np.zeros_like(logits)
    g_logits[idx] = resid / idx.size
    g_out = propagate_adjoint(g_logits, op, cfg)
    grads = {
        "w2": cache.hidden.T @ g_out,
        "b2": g_out.sum(axis=0),
    }
    g_h = g_out @ params.w2.T
    if cache.mask1 is not None:
        g_h = g_h * cache.mask1
    g_z1 = g_h * (cache.z1 > 0)
    grads["w1"] = cache.x_drop.T @ g_z1
    grads["b1"] = g_z1.sum(axis=0)
    return loss, grads


def backward(x, params, op, cfg, split, training=False, seed=0) -> dict[str, np.ndarray]:
    return loss_and_grads(x, params, op, cfg, split, training, seed)[1]


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: MlpParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in PARAM_NAMES:
            p = getattr(params, name)
            g = grads[name]
            if self.weight_decay:
                g = g + self.weight_decay * p
            m = self.m.get(name, np.zeros_like(p))
            v = self.v.get(name, np.zeros_like(p))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    params: MlpParams
    history: list[tuple[int, float, float]]
    best_epoch: int
    best_val: float

    def history_csv(self) -> str:
        lines = ["epoch,train_loss,val_acc"]
        lines += [f"{e},{loss:.10g},{acc:.10g}" for e, loss, acc in self.history]
        return "\n".join(lines) + "\n"


def train(x, split: LabeledSplit, op: NormalizedOperator, cfg: DiffusionConfig,
          train_cfg: TrainConfig, params: MlpParams | None = None) -> TrainResult:
    """Adam with early stopping on validation accuracy.

    Returns the parameters from the epoch with the best validation accuracy
    (earliest on ties).  Without a validation mask the final epoch is kept.
    """
    x = np.asarray(x, dtype=np.float64)
    if params is None:
        params = MlpParams.init(x.shape[1], train_cfg.hidden, split.num_classes,
                                seed=train_cfg.seed, dropout_rate=train_cfg.dropout)
    opt = Adam(train_cfg.learning_rate, train_cfg.beta1, train_cfg.beta2,
               train_cfg.adam_eps, train_cfg.weight_decay)
    has_val = bool(split.val.any())
    best = params.copy()
    best_val, best_epoch, since = -1.0, 0, 0
    history = []
    for epoch in range(1, train_cfg.epochs + 1):
        loss, grads = loss_and_grads(x, params, op, cfg, split, training=True,
                                     seed=[train_cfg.seed, epoch])
        if not np.isfinite(loss):
            raise TrainingDiverged(epoch, loss)
        opt.step(params, grads)
        logits = forward(x, params, op, cfg)
        pred = predict(logits)
        val_acc = float(np.mean(pred[split.val] == split.labels[split.val])) if has_val else float("nan")
        history.append((epoch, loss, val_acc))
        if not has_val:
            best, best_epoch = params.copy(), epoch
            continue
        if val_acc > best_val:
            best, best_val, best_epoch, since = params.copy(), val_acc, epoch, 0
        else:
            since += 1
            if since >= train_cfg.patience:
                break
    log.debug("stopped after %d epochs, best epoch %d (val %.4f)", len(history), best_epoch, best_val)
    return TrainResult(best, history, best_epoch, best_val)


def fit_evaluate(x, split: LabeledSplit, op: NormalizedOperator, cfg: DiffusionConfig,
                 train_cfg: TrainConfig) -> tuple[Metrics, TrainResult]:
    result = train(x, split, op, cfg, train_cfg)
    logits = forward(x, result.params, op, cfg)
    return evaluate(logits, split.labels, split.test), result

"""Stratified 4-fold training of the polyp-type classifier."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..imageproc import ImageU8, ManifestEntry, load_image, resize_bilinear
from ..metrics import CLASS_NAMES
from .network import DilatedResNet, DilatedResNetConfig
from .optimizer import AdaBound

CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}


@dataclass(frozen=True)
class FoldSplit:
    folds: tuple  # k tuples of entry indices (training pool)
    eval_indices: tuple

    @property
    def pool(self) -> tuple:
        return tuple(i for fold in self.folds for i in fold)


def stratified_kfold(entries: list[ManifestEntry], k: int = 4, seed: int = 0,
                     eval_fraction: float = 0.25) -> FoldSplit:
    """Hold out a class-balanced eval set, then split the remaining pool into
    k stratified folds (per-class counts differing by at most one)."""
    labels = [CLASS_INDEX[e.paris_type] for e in entries]
    by_class: dict[int, list[int]] = {}
    for idx, lbl in enumerate(labels):
        by_class.setdefault(lbl, []).append(idx)
    for lbl, idxs in by_class.items():
        if len(idxs) < k:
            raise ValueError(f"class {CLASS_NAMES[lbl]} has {len(idxs)} samples, need >= {k}")
    rng = np.random.Generator(np.random.PCG64(seed))
    eval_per_class = int(round(len(entries) * eval_fraction / len(by_class)))
    eval_indices: list[int] = []
    folds: list[list[int]] = [[] for _ in range(k)]
    for lbl in sorted(by_class):
        idxs = list(by_class[lbl])
        rng.shuffle(idxs)
        eval_indices.extend(idxs[:eval_per_class])
        # rotate the round-robin start per class so leftover samples spread
        # evenly and fold sizes match across folds, not just within a class
        for j, idx in enumerate(idxs[eval_per_class:]):
            folds[(j + lbl) % k].append(idx)
    return FoldSplit(
        folds=tuple(tuple(sorted(f)) for f in folds),
        eval_indices=tuple(sorted(eval_indices)),
    )


def load_dataset(entries: list[ManifestEntry], root: Path, input_size: int,
                 sidecar: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Images as (N, 3, S, S) float64 in [0, 1] plus integer labels."""
    xs = np.empty((len(entries), 3, input_size, input_size))
    ys = np.empty(len(entries), dtype=int)
    for i, e in enumerate(entries):
        img = load_image(Path(root) / e.path, sidecar)
        img = resize_bilinear(img, input_size, input_size)
        arr = img.as_array()
        if arr.shape[2] == 1:
            arr = np.repeat(arr, 3, axis=2)
        xs[i] = arr.transpose(2, 0, 1) / 255.0
        ys[i] = CLASS_INDEX[e.paris_type]
    return xs, ys


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 8
    k: int = 4
    lr: float = 0.001
    final_lr: float = 0.01
    input_size: int = 64
    seed: int = 0


@dataclass
class FoldResult:
    best_epoch: int
    best_val_accuracy: float
    train_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    weights: dict = field(default_factory=dict)
    net: DilatedResNet | None = None


@dataclass
class TrainReport:
    folds: list

    def to_dict(self) -> dict:
        return {
            "folds": [
                {
                    "best_epoch": f.best_epoch,
                    "best_val_accuracy": f.best_val_accuracy,
                    "train_loss": f.train_loss,
                    "train_accuracy": f.train_accuracy,
                    "val_accuracy": f.val_accuracy,
                }
                for f in self.folds
            ]
        }

    def save(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _accuracy(net: DilatedResNet, x: np.ndarray, y: np.ndarray,
              batch: int = 32) -> float:
    hits = 0
    for s in range(0, len(x), batch):
        probs = net.forward(x[s : s + batch])
        hits += int((probs.argmax(axis=1) == y[s : s + batch]).sum())
    return hits / len(x)


def train_single(net: DilatedResNet, x_train, y_train, x_val, y_val,
                 cfg: TrainConfig, rng: np.random.Generator) -> FoldResult:
    opt = AdaBound(lr=cfg.lr, final_lr=cfg.final_lr)
    result = FoldResult(best_epoch=-1, best_val_accuracy=-1.0)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x_train))
        losses = []
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, _ = net.loss_and_grads(x_train[idx], y_train[idx])
            opt.step(net.param_dict(), net.grad_dict())
            losses.append(loss)
        result.train_loss.append(float(np.mean(losses)))
        result.train_accuracy.append(_accuracy(net, x_train, y_train))
        val_acc = _accuracy(net, x_val, y_val)
        result.val_accuracy.append(val_acc)
        if val_acc > result.best_val_accuracy:
            result.best_val_accuracy = val_acc
            result.best_epoch = epoch
            result.weights = net.snapshot()
    return result


def predict(net: DilatedResNet, x: np.ndarray, batch: int = 32) -> np.ndarray:
    preds = np.empty(len(x), dtype=int)
    for s in range(0, len(x), batch):
        preds[s : s + batch] = net.forward(x[s : s + batch]).argmax(axis=1)
    return preds


def evaluate_pooled(nets, x_eval: np.ndarray, y_eval: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pool every fold's predictions on the shared eval set into one pair of
    (predictions, labels) arrays for a single confusion matrix."""
    preds = np.concatenate([predict(net, x_eval) for net in nets])
    labels = np.tile(y_eval, len(nets))
    return preds, labels


def train(entries: list[ManifestEntry], root: Path, cfg: TrainConfig,
          split: FoldSplit | None = None,
          sidecar: dict | None = None) -> tuple[TrainReport, FoldSplit]:
    """Four-fold training: each fold trains on k-1 folds and keeps the
    weights of its best validation epoch."""
    split = split or stratified_kfold(entries, k=cfg.k, seed=cfg.seed)
    if any(len(f) == 0 for f in split.folds):
        raise ValueError("empty fold")
    xs, ys = load_dataset(entries, root, cfg.input_size, sidecar)
    results = []
    for fold_idx in range(cfg.k):
        val_idx = np.array(split.folds[fold_idx], dtype=int)
        train_idx = np.array(
            [i for j, fold in enumerate(split.folds) if j != fold_idx for i in fold],
            dtype=int,
        )
        net = DilatedResNet(DilatedResNetConfig(input_size=cfg.input_size,
                                                seed=cfg.seed + fold_idx))
        rng = np.random.Generator(np.random.PCG64(cfg.seed * 1000 + fold_idx))
        result = train_single(net, xs[train_idx], ys[train_idx],
                              xs[val_idx], ys[val_idx], cfg, rng)
        net.set_params(result.weights)
        result.net = net
        results.append(result)
    return TrainReport(folds=results), split

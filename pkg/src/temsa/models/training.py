"""Shared training loop (Adam, cross-entropy, batch shuffling), prediction,
and checkpoint persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import torch
from torch import nn

LR_BILSTM = 1e-2
LR_ENCODER = 6e-6
LR_IMAGE = 8e-4
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

CHECKPOINT_MANIFEST = "manifest.json"
CHECKPOINT_STATE = "state.pt"
CHECKPOINT_VOCAB = "vocab.json"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        # lr 0 is admitted on purpose: a zero-step run is the cheapest way to
        # demonstrate that the loop itself changes nothing.
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.optimizer != "adam":
            raise ValueError(f"only the adam optimizer is supported, "
                             f"got {self.optimizer!r}")

    def as_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "optimizer": self.optimizer,
        }


def one_hot(labels: Sequence[int], num_classes: int = 3) -> np.ndarray:
    idx = np.asarray(labels, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= num_classes):
        raise ValueError(f"label indices must lie in [0, {num_classes})")
    out = np.zeros((len(idx), num_classes), dtype=np.float64)
    out[np.arange(len(idx)), idx] = 1.0
    return out


def _as_label_indices(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim == 1:
        return arr.astype(np.int64)
    if arr.ndim == 2:
        if not np.isin(arr, (0, 1)).all() or not (arr.sum(axis=1) == 1).all():
            raise ValueError("2-d labels must be one-hot rows")
        return arr.argmax(axis=1).astype(np.int64)
    raise ValueError(f"labels must be indices or one-hot rows, "
                     f"got shape {arr.shape}")


def _prepare(model: nn.Module) -> Callable[[np.ndarray], torch.Tensor]:
    fn = getattr(model, "prepare_batch", None)
    if fn is not None:
        return fn
    return lambda batch: torch.from_numpy(np.asarray(batch))


def train(model: nn.Module, inputs: np.ndarray, labels, cfg: TrainConfig,
          augment_fn: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None,
          ) -> list[dict]:
    """Train in place; returns per-epoch history rows (loss, accuracy).

    `inputs` is an array of per-sample model inputs (token indices, stacked
    id/mask pairs, or raw images); `labels` is either class indices or one-hot
    rows.  Optimization touches only parameters with requires_grad set, so
    frozen backbones stay frozen.
    """
    inputs = np.asarray(inputs)
    n = len(inputs)
    if n == 0:
        raise ValueError("empty training set")
    y = _as_label_indices(labels)
    if len(y) != n:
        raise ValueError(f"inputs ({n}) and labels ({len(y)}) must align")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    params = [p for p in model.parameters() if p.requires_grad]
    if not params:
        raise ValueError("model has no trainable parameters")
    opt = torch.optim.Adam(params, lr=cfg.learning_rate, betas=ADAM_BETAS,
                           eps=ADAM_EPS)
    loss_fn = nn.CrossEntropyLoss()
    prepare = _prepare(model)

    history = []
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = rng.permutation(n)
        running_loss = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = inputs[idx]
            if augment_fn is not None:
                xb = np.stack([augment_fn(x, rng) for x in xb])
            tb = prepare(xb)
            yb = torch.from_numpy(y[idx]).long()
            logits = model.forward_logits(tb)
            loss = loss_fn(logits, yb)
            opt.zero_grad()
            loss.backward()
            opt.step()
            running_loss += float(loss.detach()) * len(idx)
            correct += int((logits.detach().argmax(dim=1) == yb).sum())
        history.append({
            "epoch": epoch,
            "loss": running_loss / n,
            "accuracy": correct / n,
        })
    return history


def predict_proba(model: nn.Module, inputs: np.ndarray,
                  batch_size: int = 32) -> np.ndarray:
    inputs = np.asarray(inputs)
    prepare = _prepare(model)
    model.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, len(inputs), batch_size):
            tb = prepare(inputs[start:start + batch_size])
            chunks.append(model(tb).detach().cpu().numpy())
    if not chunks:
        return np.zeros((0, 0))
    return np.concatenate(chunks, axis=0)


def predict(model: nn.Module, inputs: np.ndarray, batch_size: int = 32) -> np.ndarray:
    """Argmax class per sample; ties go to the lowest class index."""
    probs = predict_proba(model, inputs, batch_size=batch_size)
    if probs.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.argmax(probs, axis=1).astype(np.int64)


def save_checkpoint(out_dir: str | Path, model: nn.Module, kind: str,
                    config: Mapping, seed: int,
                    vocab_itos: Sequence[str] | None = None,
                    extra: Mapping | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": dict(config),
        "seed": int(seed),
    }
    if extra:
        manifest.update({str(k): v for k, v in extra.items()})
    (out_dir / CHECKPOINT_MANIFEST).write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    torch.save(model.state_dict(), out_dir / CHECKPOINT_STATE)
    if vocab_itos is not None:
        (out_dir / CHECKPOINT_VOCAB).write_text(
            json.dumps({"itos": list(vocab_itos)}) + "\n", encoding="utf-8")
    return out_dir


def load_checkpoint(ckpt_dir: str | Path) -> tuple[dict, dict, list[str] | None]:
    """(manifest, state_dict, vocab itos or None); the caller rebuilds the
    model from manifest['kind'] and manifest['config']."""
    ckpt_dir = Path(ckpt_dir)
    manifest_path = ckpt_dir / CHECKPOINT_MANIFEST
    if not manifest_path.exists():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    version = manifest.get("schema_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}; "
                         f"this build reads version {CHECKPOINT_VERSION}")
    state = torch.load(ckpt_dir / CHECKPOINT_STATE, map_location="cpu",
                       weights_only=True)
    vocab_path = ckpt_dir / CHECKPOINT_VOCAB
    itos = None
    if vocab_path.exists():
        itos = json.loads(vocab_path.read_text(encoding="utf-8"))["itos"]
    return manifest, state, itos

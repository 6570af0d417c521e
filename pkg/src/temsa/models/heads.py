"""The shared classification head: one dense layer of 1024 units, an
activation (relu, or gelu on the ViT path), dropout, and a softmax over the
three sentiment classes."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

ACTIVATIONS = ("relu", "gelu")


@dataclass(frozen=True)
class HeadConfig:
    in_dim: int
    dense_units: int = 1024
    activation: str = "relu"
    dropout: float = 0.1
    num_classes: int = 3

    def __post_init__(self):
        if self.dense_units <= 0:
            raise ValueError(f"dense_units must be positive, got {self.dense_units}")
        if self.in_dim <= 0:
            raise ValueError(f"in_dim must be positive, got {self.in_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, "
                             f"got {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    def as_dict(self) -> dict:
        return {
            "in_dim": self.in_dim,
            "dense_units": self.dense_units,
            "activation": self.activation,
            "dropout": self.dropout,
            "num_classes": self.num_classes,
        }


class ClassifyHead(nn.Module):

    def __init__(self, cfg: HeadConfig):
        super().__init__()
        self.cfg = cfg
        self.dense = nn.Linear(cfg.in_dim, cfg.dense_units)
        self.act = nn.ReLU() if cfg.activation == "relu" else nn.GELU()
        self.drop = nn.Dropout(cfg.dropout)
        self.out = nn.Linear(cfg.dense_units, cfg.num_classes)

    def forward_logits(self, pooled: torch.Tensor) -> torch.Tensor:
        if pooled.shape[-1] != self.cfg.in_dim:
            raise ValueError(f"expected pooled dim {self.cfg.in_dim}, "
                             f"got {pooled.shape[-1]}")
        return self.out(self.drop(self.act(self.dense(pooled))))

    def forward(self, pooled: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward_logits(pooled), dim=-1)

"""Bidirectional LSTM sentence classifier.

The padded sequence is run through the recurrence in full (padding embeds to
the zero vector via padding_idx but still passes through the gates); the
classifier consumes the concatenation of the final forward and final backward
hidden states, then dropout, then softmax over the three classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


@dataclass(frozen=True)
class BiLstmConfig:
    vocab_size: int
    hidden_units: int = 32
    embed_dim: int = 300
    num_classes: int = 3
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden_units <= 0:
            raise ValueError(f"hidden_units must be positive, got {self.hidden_units}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.vocab_size < 2:
            raise ValueError(f"vocab_size must cover pad and unk, got {self.vocab_size}")
        if self.embed_dim <= 0:
            raise ValueError(f"embed_dim must be positive, got {self.embed_dim}")
        if self.num_classes < 2:
            raise ValueError(f"need at least two classes, got {self.num_classes}")

    def as_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "hidden_units": self.hidden_units,
            "embed_dim": self.embed_dim,
            "num_classes": self.num_classes,
            "dropout": self.dropout,
        }


class BiLstmClassifier(nn.Module):

    def __init__(self, cfg: BiLstmConfig,
                 pretrained_embeddings: np.ndarray | None = None):
        super().__init__()
        self.cfg = cfg
        self.embedding = nn.Embedding(cfg.vocab_size, cfg.embed_dim, padding_idx=0)
        if pretrained_embeddings is not None:
            table = np.asarray(pretrained_embeddings)
            if table.shape != (cfg.vocab_size, cfg.embed_dim):
                raise ValueError(
                    f"embedding table shape {table.shape} does not match "
                    f"({cfg.vocab_size}, {cfg.embed_dim})")
            with torch.no_grad():
                self.embedding.weight.copy_(torch.from_numpy(table))
        self.lstm = nn.LSTM(cfg.embed_dim, cfg.hidden_units,
                            batch_first=True, bidirectional=True)
        self.drop = nn.Dropout(cfg.dropout)
        self.fc = nn.Linear(2 * cfg.hidden_units, cfg.num_classes)

    @staticmethod
    def prepare_batch(batch: np.ndarray) -> torch.Tensor:
        return torch.from_numpy(np.asarray(batch)).long()

    def _check_indices(self, indices: torch.Tensor) -> None:
        if indices.numel() and int(indices.max()) >= self.cfg.vocab_size:
            raise ValueError(
                f"token index {int(indices.max())} out of range for vocab of "
                f"size {self.cfg.vocab_size}")
        if indices.numel() and int(indices.min()) < 0:
            raise ValueError("token indices must be non-negative")

    def final_states(self, indices: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Final forward hidden state (last step) and final backward hidden
        state (first step), each (batch, hidden_units)."""
        self._check_indices(indices)
        emb = self.embedding(indices)
        _, (h_n, _) = self.lstm(emb)
        return h_n[-2], h_n[-1]

    def context(self, indices: torch.Tensor) -> torch.Tensor:
        h_fwd, h_bwd = self.final_states(indices)
        return torch.cat([h_fwd, h_bwd], dim=-1)

    def forward_logits(self, indices: torch.Tensor) -> torch.Tensor:
        return self.fc(self.drop(self.context(indices)))

    def forward(self, indices: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward_logits(indices), dim=-1)

"""Pretrained transformer text encoder behind an adapter, plus the wordpiece
tokenizer adapter and a weight extractor that maps one encoder layer onto the
numpy reference block."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .attention import EncoderBlockParams
from .heads import ClassifyHead, HeadConfig


def _cache_dir() -> str | None:
    return os.environ.get("TEMSA_CACHE_DIR")


class TextEncoderAdapter(nn.Module):
    """Thin wrapper over a BERT-style encoder exposing token states and a
    pooled vector.  `from_config` builds a randomly initialized encoder with
    no network access, which is what tests and desk runs use; `from_pretrained`
    loads published weights."""

    def __init__(self, bert: nn.Module):
        super().__init__()
        self.bert = bert

    @property
    def hidden_size(self) -> int:
        return int(self.bert.config.hidden_size)

    @classmethod
    def from_config(cls, vocab_size: int = 30522, hidden_size: int = 128,
                    num_layers: int = 2, num_heads: int = 2,
                    intermediate_size: int = 512, max_position: int = 512,
                    seed: int = 0) -> "TextEncoderAdapter":
        from transformers import BertConfig, BertModel
        torch.manual_seed(seed)
        cfg = BertConfig(
            vocab_size=vocab_size,
            hidden_size=hidden_size,
            num_hidden_layers=num_layers,
            num_attention_heads=num_heads,
            intermediate_size=intermediate_size,
            max_position_embeddings=max_position,
        )
        cfg._attn_implementation = "eager"
        return cls(BertModel(cfg))

    @classmethod
    def from_pretrained(cls, name: str = "bert-base-uncased") -> "TextEncoderAdapter":
        from transformers import BertModel
        model = BertModel.from_pretrained(name, cache_dir=_cache_dir(),
                                          attn_implementation="eager")
        return cls(model)

    def forward(self, input_ids: torch.Tensor,
                attention_mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        out = self.bert(input_ids=input_ids, attention_mask=attention_mask)
        pooled = getattr(out, "pooler_output", None)
        if pooled is None:
            pooled = out.last_hidden_state[:, 0]
        return out.last_hidden_state, pooled


class EncoderClassifier(nn.Module):
    """Encoder adapter plus the dense-1024 head.  The encoder stays trainable
    (fine-tuning at its small learning rate); batches carry ids and mask
    stacked on axis 1."""

    def __init__(self, adapter: TextEncoderAdapter, dropout: float = 0.1,
                 dense_units: int = 1024):
        super().__init__()
        self.adapter = adapter
        self.head = ClassifyHead(HeadConfig(in_dim=adapter.hidden_size,
                                            dense_units=dense_units,
                                            activation="relu", dropout=dropout))

    @staticmethod
    def prepare_batch(batch: np.ndarray) -> torch.Tensor:
        arr = np.asarray(batch)
        if arr.ndim != 3 or arr.shape[1] != 2:
            raise ValueError(f"expected (B, 2, L) id/mask batch, got {arr.shape}")
        return torch.from_numpy(arr).long()

    def forward_logits(self, x: torch.Tensor) -> torch.Tensor:
        _, pooled = self.adapter(x[:, 0], x[:, 1])
        return self.head.forward_logits(pooled)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward_logits(x), dim=-1)


class WordpieceTokenizerAdapter:
    """Wordpiece tokenizer interface used by the sequence builder and the
    encoder path; constructible offline from a plain vocab file."""

    def __init__(self, tokenizer):
        self._tok = tokenizer

    @classmethod
    def from_vocab_file(cls, path: str | Path) -> "WordpieceTokenizerAdapter":
        from transformers import BertTokenizer
        # One token per line; the explicit mapping keeps loading independent
        # of how the tokenizer backend treats file arguments.
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        mapping = {token: i for i, token in enumerate(lines) if token}
        return cls(BertTokenizer(vocab=mapping, do_lower_case=True))

    @classmethod
    def from_pretrained(cls, name: str = "bert-base-uncased") -> "WordpieceTokenizerAdapter":
        from transformers import BertTokenizer
        return cls(BertTokenizer.from_pretrained(name, cache_dir=_cache_dir()))

    @property
    def vocab_size(self) -> int:
        return int(self._tok.vocab_size)

    def tokenize(self, text: str) -> list[str]:
        return self._tok.tokenize(text)

    def encode(self, text: str, max_len: int) -> tuple[np.ndarray, np.ndarray]:
        """(ids, mask), both int64 of length max_len, with special tokens and
        padding applied by the underlying tokenizer."""
        enc = self._tok(text, padding="max_length", truncation=True,
                        max_length=max_len)
        ids = np.asarray(enc["input_ids"], dtype=np.int64)
        mask = np.asarray(enc["attention_mask"], dtype=np.int64)
        return ids, mask


def block_params_from_torch(layer: nn.Module, scaled: bool = True) -> EncoderBlockParams:
    """Extract one encoder layer's weights into the numpy reference layout
    (transposed so projections are x @ w + b)."""

    def w(linear: nn.Linear) -> np.ndarray:
        return linear.weight.detach().cpu().double().numpy().T

    def b(mod: nn.Module) -> np.ndarray:
        return mod.bias.detach().cpu().double().numpy()

    def g(ln: nn.LayerNorm) -> np.ndarray:
        return ln.weight.detach().cpu().double().numpy()

    attn = layer.attention
    return EncoderBlockParams(
        wq=w(attn.self.query), bq=b(attn.self.query),
        wk=w(attn.self.key), bk=b(attn.self.key),
        wv=w(attn.self.value), bv=b(attn.self.value),
        wo=w(attn.output.dense), bo=b(attn.output.dense),
        ln1_gamma=g(attn.output.LayerNorm), ln1_beta=b(attn.output.LayerNorm),
        w1=w(layer.intermediate.dense), b1=b(layer.intermediate.dense),
        w2=w(layer.output.dense), b2=b(layer.output.dense),
        ln2_gamma=g(layer.output.LayerNorm), ln2_beta=b(layer.output.LayerNorm),
        num_heads=int(attn.self.num_attention_heads),
        scaled=scaled,
        activation="gelu",
        eps=float(attn.output.LayerNorm.eps),
    )

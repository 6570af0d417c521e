"""Text cleaning, tokenization, TEMS construction, and fixed-length encoding.

A TEMS sequence is the caption/superimposed text of a sample followed by the
names of the objects detected in its image.  Length budgets are additive:
tems_max = text_max + max_objects, e.g. 55 + 20 = 75 for SIMPSoN and
21 + 20 = 41 for MVSA-Single.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

TokenSeq = list[str]

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

OOV_EMBED_BOUND = 0.05  # out-of-table rows drawn uniformly from [-0.05, 0.05]


class EmbeddingError(ValueError):
    """Raised for malformed pretrained-embedding files."""


@dataclass(frozen=True)
class LengthPolicy:
    """Length budget for one dataset: caption tokens, object names, and their sum."""

    text_max: int
    max_objects: int = 20
    tems_max: int | None = None

    def __post_init__(self):
        if self.text_max <= 0:
            raise ValueError(f"text_max must be positive, got {self.text_max}")
        if self.max_objects < 0:
            raise ValueError(f"max_objects must be >= 0, got {self.max_objects}")
        if self.tems_max is None:
            object.__setattr__(self, "tems_max", self.text_max + self.max_objects)
        elif self.tems_max < self.text_max:
            raise ValueError(
                f"tems_max ({self.tems_max}) must be >= text_max ({self.text_max})")


SIMPSON_POLICY = LengthPolicy(text_max=55, max_objects=20)  # tems_max 75
MVSA_POLICY = LengthPolicy(text_max=21, max_objects=20)     # tems_max 41
POLICIES = {"simpson": SIMPSON_POLICY, "mvsa": MVSA_POLICY}


@dataclass(frozen=True)
class TemsSequence:
    text_part: tuple[str, ...]
    object_part: tuple[str, ...]

    @property
    def combined(self) -> TokenSeq:
        return list(self.text_part) + list(self.object_part)


@dataclass(frozen=True)
class EncodedSeq:
    """Fixed-length index encoding: zero padding at the tail, mask 1 on real tokens."""

    indices: np.ndarray
    attention_mask: np.ndarray
    vocab_id: str

    def __post_init__(self):
        if self.indices.shape != self.attention_mask.shape:
            raise ValueError("indices and attention_mask must have the same shape")


def _is_email(token: str) -> bool:
    at = token.find("@")
    return at > 0 and "." in token[at:]


def _strip_token(token: str) -> str:
    # Keep alphanumerics plus apostrophes sitting between two alphanumerics.
    out = []
    for i, ch in enumerate(token):
        if ch.isalnum():
            out.append(ch)
        elif ch in ("'", "’") and 0 < i < len(token) - 1 \
                and token[i - 1].isalnum() and token[i + 1].isalnum():
            out.append("'")
    return "".join(out)


def clean_text(raw: str) -> str:
    """Lowercase and strip symbols, dropping email tokens and @/# tags.

    Idempotent: cleaning already-clean text is a no-op.
    """
    kept = []
    for token in raw.split():
        if token.startswith(("@", "#")) or _is_email(token):
            continue
        token = _strip_token(token.lower())
        if token:
            kept.append(token)
    return " ".join(kept)


class WordpieceAdapter(Protocol):
    def tokenize(self, text: str) -> list[str]: ...


def tokenize(cleaned: str, scheme: str = "whitespace",
             adapter: WordpieceAdapter | None = None) -> TokenSeq:
    """Split cleaned text into tokens.

    The whitespace scheme splits on runs of spaces; the wordpiece scheme
    returns the injected pretrained tokenizer's output verbatim.
    """
    if scheme == "whitespace":
        return cleaned.split()
    if scheme == "wordpiece":
        if adapter is None:
            raise ValueError("wordpiece tokenization requires a tokenizer adapter")
        return list(adapter.tokenize(cleaned))
    raise ValueError(f"unknown tokenization scheme {scheme!r}")


def build_tems(text_tokens: Sequence[str], names: Sequence[str],
               policy: LengthPolicy) -> TemsSequence:
    """Concatenate caption tokens (truncated to text_max) with the first
    max_objects object names, text first."""
    text_part = tuple(text_tokens[:policy.text_max])
    object_part = tuple(names[:policy.max_objects])
    return TemsSequence(text_part=text_part, object_part=object_part)


class Vocabulary:
    """Token-to-index table with index 0 reserved for padding and 1 for OOV."""

    def __init__(self, tokens: Iterable[str]):
        self._itos: list[str] = [PAD_TOKEN, UNK_TOKEN]
        seen = set(self._itos)
        for tok in tokens:
            if tok not in seen:
                seen.add(tok)
                self._itos.append(tok)
        self._stoi = {tok: i for i, tok in enumerate(self._itos)}

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[str]], min_count: int = 1) -> "Vocabulary":
        counts: dict[str, int] = {}
        order: list[str] = []
        for seq in sequences:
            for tok in seq:
                if tok not in counts:
                    order.append(tok)
                counts[tok] = counts.get(tok, 0) + 1
        return cls(tok for tok in order if counts[tok] >= min_count)

    def __len__(self) -> int:
        return len(self._itos)

    def __contains__(self, token: str) -> bool:
        return token in self._stoi

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self._itos)

    @property
    def vocab_id(self) -> str:
        digest = hashlib.sha256("\n".join(self._itos).encode("utf-8")).hexdigest()
        return digest[:12]

    def index(self, token: str) -> int:
        return self._stoi.get(token, UNK_INDEX)

    def token(self, index: int) -> str:
        return self._itos[index]


def encode_pad(tokens: Sequence[str], max_len: int, vocab: Vocabulary) -> EncodedSeq:
    """Map tokens to indices, truncating at max_len and zero-padding the tail."""
    if max_len <= 0:
        raise ValueError(f"max_len must be positive, got {max_len}")
    indices = np.zeros(max_len, dtype=np.int64)
    mask = np.zeros(max_len, dtype=np.int64)
    for i, tok in enumerate(tokens[:max_len]):
        indices[i] = vocab.index(tok)
        mask[i] = 1
    return EncodedSeq(indices=indices, attention_mask=mask, vocab_id=vocab.vocab_id)


def decode(encoded: EncodedSeq, vocab: Vocabulary) -> TokenSeq:
    """Inverse of encode_pad on the masked positions (OOV comes back as <unk>)."""
    return [vocab.token(int(i)) for i, m in zip(encoded.indices, encoded.attention_mask) if m]


def load_embeddings(vocab: Vocabulary, path: str | Path, seed: int = 0) -> np.ndarray:
    """Build a |vocab| x dim matrix from a GloVe-style text table.

    File format: one token per line, token then dim floats, space-separated.
    The padding row is all zeros; tokens missing from the table get a seeded
    uniform draw from [-0.05, 0.05].
    """
    path = Path(path)
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise EmbeddingError(f"malformed embedding line {line_no} in {path}")
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise EmbeddingError(
                    f"dimension mismatch at line {line_no} in {path}: "
                    f"expected {dim} floats, got {len(values)}")
            try:
                table[token] = np.asarray(values, dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingError(f"non-numeric value at line {line_no} in {path}") from exc
    if dim is None:
        raise EmbeddingError(f"empty embedding file: {path}")

    rng = np.random.default_rng(seed)
    matrix = np.zeros((len(vocab), dim), dtype=np.float64)
    for i, token in enumerate(vocab.tokens):
        if i == PAD_INDEX:
            continue
        vec = table.get(token)
        if vec is not None:
            matrix[i] = vec
        else:
            matrix[i] = rng.uniform(-OOV_EMBED_BOUND, OOV_EMBED_BOUND, size=dim)
    return matrix

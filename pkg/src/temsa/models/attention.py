"""Reference transformer pieces in plain numpy (float64).

This is the checkable description of what one encoder block computes:
self-attention (unscaled dot-product by default, the scaled variant behind a
flag), residual + layer norm, position-wise feed-forward, residual + layer
norm.  The trainable encoder lives elsewhere; this module exists so its
behaviour can be pinned against something small and auditable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

LAYER_NORM_EPS = 1e-12


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def gelu(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


_ACTIVATIONS = {"relu": relu, "gelu": gelu}


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
               eps: float = LAYER_NORM_EPS) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gamma + beta


@dataclass(frozen=True)
class AttentionTensors:
    """Everything one attention application produced, for inspection."""

    queries: np.ndarray
    keys: np.ndarray
    values: np.ndarray
    weights: np.ndarray  # (T_q, T_k); every row sums to 1
    output: np.ndarray


def self_attention_detail(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                          scaled: bool = False) -> AttentionTensors:
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ValueError("q, k, v must be 2-d (tokens x dim)")
    if q.shape[1] != k.shape[1]:
        raise ValueError(f"query dim {q.shape[1]} != key dim {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ValueError(f"key count {k.shape[0]} != value count {v.shape[0]}")
    logits = q @ k.T
    if scaled:
        logits = logits / math.sqrt(q.shape[1])
    weights = softmax(logits, axis=-1)
    return AttentionTensors(queries=q, keys=k, values=v, weights=weights,
                            output=weights @ v)


def self_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                   scaled: bool = False) -> np.ndarray:
    """output_i = sum_j softmax_j(q_i . k_j) v_j; unscaled by default, with
    the conventional 1/sqrt(d) variant behind `scaled`."""
    return self_attention_detail(q, k, v, scaled=scaled).output


@dataclass(frozen=True)
class EncoderBlockParams:
    """Weights for one encoder block, laid out for right-multiplication:
    every w has shape (in_dim, out_dim) so projections read x @ w + b."""

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln1_gamma: np.ndarray
    ln1_beta: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray
    num_heads: int = 1
    scaled: bool = False
    activation: str = "gelu"
    eps: float = LAYER_NORM_EPS

    def __post_init__(self):
        d = self.wq.shape[0]
        if self.wq.shape != (d, d) or self.wk.shape != (d, d) or \
                self.wv.shape != (d, d) or self.wo.shape != (d, d):
            raise ValueError("attention projections must all be square and "
                             "share the model dim")
        if d % self.num_heads != 0:
            raise ValueError(f"model dim {d} not divisible by "
                             f"{self.num_heads} heads")
        if self.w1.shape[0] != d or self.w2.shape[1] != d or \
                self.w1.shape[1] != self.w2.shape[0]:
            raise ValueError("feed-forward shapes must chain d -> ffn -> d")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of "
                             f"{tuple(_ACTIVATIONS)}, got {self.activation!r}")

    @property
    def model_dim(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def zeros(cls, model_dim: int, ffn_dim: int, num_heads: int = 1,
              scaled: bool = False, activation: str = "gelu") -> "EncoderBlockParams":
        d, f = model_dim, ffn_dim
        z = np.zeros
        return cls(
            wq=z((d, d)), bq=z(d), wk=z((d, d)), bk=z(d),
            wv=z((d, d)), bv=z(d), wo=z((d, d)), bo=z(d),
            ln1_gamma=np.ones(d), ln1_beta=z(d),
            w1=z((d, f)), b1=z(f), w2=z((f, d)), b2=z(d),
            ln2_gamma=np.ones(d), ln2_beta=z(d),
            num_heads=num_heads, scaled=scaled, activation=activation,
        )

    @classmethod
    def random(cls, model_dim: int, ffn_dim: int, num_heads: int = 1,
               seed: int = 0, scale: float = 0.1, scaled: bool = False,
               activation: str = "gelu") -> "EncoderBlockParams":
        rng = np.random.default_rng(seed)
        d, f = model_dim, ffn_dim
        def w(*shape):
            return rng.normal(0.0, scale, size=shape)
        return cls(
            wq=w(d, d), bq=w(d), wk=w(d, d), bk=w(d),
            wv=w(d, d), bv=w(d), wo=w(d, d), bo=w(d),
            ln1_gamma=np.ones(d) + w(d) * 0.1, ln1_beta=w(d),
            w1=w(d, f), b1=w(f), w2=w(f, d), b2=w(d),
            ln2_gamma=np.ones(d) + w(d) * 0.1, ln2_beta=w(d),
            num_heads=num_heads, scaled=scaled, activation=activation,
        )


def multi_head_attention(x: np.ndarray, params: EncoderBlockParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.model_dim:
        raise ValueError(f"expected input (tokens, {params.model_dim}), "
                         f"got shape {x.shape}")
    t, d = x.shape
    h = params.num_heads
    dh = d // h
    q = x @ params.wq + params.bq
    k = x @ params.wk + params.bk
    v = x @ params.wv + params.bv
    heads = []
    for i in range(h):
        sl = slice(i * dh, (i + 1) * dh)
        heads.append(self_attention(q[:, sl], k[:, sl], v[:, sl],
                                    scaled=params.scaled))
    return np.concatenate(heads, axis=1) @ params.wo + params.bo


def encoder_block(x: np.ndarray, params: EncoderBlockParams) -> np.ndarray:
    """LayerNorm(x + MultiHeadAttention(x)), then LayerNorm(y + FFN(y))."""
    x = np.asarray(x, dtype=np.float64)
    attn = multi_head_attention(x, params)
    y = layer_norm(x + attn, params.ln1_gamma, params.ln1_beta, eps=params.eps)
    act = _ACTIVATIONS[params.activation]
    ffn = act(y @ params.w1 + params.b1) @ params.w2 + params.b2
    return layer_norm(y + ffn, params.ln2_gamma, params.ln2_beta, eps=params.eps)

"""Temporal encoding: sinusoid position table plus self-attention blocks.

Attention runs per node over that node's time series; nodes never attend
to each other here (cross-node mixing is the graph encoder's job).  The
encoder blocks follow the pre-normalization recipe: attention and
position-wise feed-forward sublayers, each behind a residual connection,
with GELU in the feed-forward hidden layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .optim import ParamStore, Rng, xavier_init
from .tensor import (
    Tensor,
    add,
    concat_lastdim,
    gelu,
    layer_norm,
    matmul,
    mul,
    reshape,
    softmax_rows,
    swapaxes,
)


@dataclass
class TemporalConfig:
    """Channel width, head count, block depth, and feed-forward multiplier."""

    d_model: int = 32
    n_heads: int = 4
    n_blocks: int = 2
    ffn_mult: int = 4
    causal: bool = False

    def __post_init__(self):
        if self.d_model < 1 or self.n_heads < 1 or self.n_blocks < 1 or self.ffn_mult < 1:
            raise ContractError("temporal config fields must be positive")
        if self.d_model % self.n_heads != 0:
            raise ContractError(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}"
            )

    @property
    def d_k(self) -> int:
        return self.d_model // self.n_heads


@dataclass(frozen=True)
class PositionalTable:
    """Sinusoid table: entry (t, 2i) = sin(t / 10000^(2i/d)), (t, 2i+1) the cosine."""

    table: np.ndarray  # [t_max, d_model]

    @property
    def t_max(self) -> int:
        return self.table.shape[0]

    @property
    def d_model(self) -> int:
        return self.table.shape[1]


def positional_encoding(t_max: int, d_model: int) -> PositionalTable:
    """Build the sinusoid table for zero-indexed steps 0..t_max-1.

    An odd ``d_model`` is padded to even internally and the extra column
    dropped.
    """
    if t_max < 1 or d_model < 1:
        raise ContractError(f"t_max and d_model must be >= 1, got {t_max}, {d_model}")
    d_even = d_model + (d_model % 2)
    positions = np.arange(t_max, dtype=np.float64)[:, None]
    i2 = np.arange(0, d_even, 2, dtype=np.float64)
    rates = 1.0 / np.power(10000.0, i2 / d_even)
    table = np.zeros((t_max, d_even))
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates)
    return PositionalTable(table=table[:, :d_model])


def zero_positional_table(t_max: int, d_model: int) -> PositionalTable:
    """All-zero table; lets callers run the encoder with positions disabled."""
    return PositionalTable(table=np.zeros((t_max, d_model)))


def attention(q: Tensor, k: Tensor, v: Tensor, causal: bool = False,
              return_weights: bool = False):
    """Scaled dot-product attention ``softmax(Q K^T / sqrt(d_k)) V``.

    Operates on ``[..., T, d_k]``; the softmax runs over the key axis.
    With ``causal`` set, step t only attends to steps <= t.
    """
    if q.shape != k.shape or k.shape[:-1] != v.shape[:-1]:
        raise ShapeError(f"attention shapes differ: q={q.shape} k={k.shape} v={v.shape}")
    d_k = q.shape[-1]
    logits = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(d_k))
    if causal:
        t = q.shape[-2]
        mask = np.triu(np.full((t, t), -1e30, dtype=logits.dtype), k=1)
        logits = add(logits, Tensor(mask))
    weights = softmax_rows(logits)
    out = matmul(weights, v)
    if return_weights:
        return out, weights
    return out


def init_temporal_params(cfg: TemporalConfig, rng: Rng, params: ParamStore,
                         prefix: str = "tform") -> None:
    d = cfg.d_model
    hidden = cfg.ffn_mult * d
    for b in range(cfg.n_blocks):
        base = f"{prefix}.block{b}"
        for proj in ("q", "k", "v"):
            params.add(f"{base}.qkv.{proj}_weight", xavier_init(rng, (d, d)))
            if proj != "k":
                # a key bias shifts every logit row uniformly, which the
                # softmax cancels, so it could never receive a gradient
                params.add(f"{base}.qkv.{proj}_bias", Tensor(np.zeros(d)))
        params.add(f"{base}.out.weight", xavier_init(rng, (d, d)))
        params.add(f"{base}.out.bias", Tensor(np.zeros(d)))
        params.add(f"{base}.ffn1.weight", xavier_init(rng, (d, hidden)))
        params.add(f"{base}.ffn1.bias", Tensor(np.zeros(hidden)))
        params.add(f"{base}.ffn2.weight", xavier_init(rng, (hidden, d)))
        params.add(f"{base}.ffn2.bias", Tensor(np.zeros(d)))
        params.add(f"{base}.norm1.gain", Tensor(np.ones(d)))
        params.add(f"{base}.norm1.bias", Tensor(np.zeros(d)))
        params.add(f"{base}.norm2.gain", Tensor(np.ones(d)))
        params.add(f"{base}.norm2.bias", Tensor(np.zeros(d)))


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    """[..., T, d] -> [..., heads, T, d_k]"""
    *lead, t, d = x.shape
    x = reshape(x, (*lead, t, n_heads, d // n_heads))
    return swapaxes(x, -2, -3)


def _merge_heads(x: Tensor) -> Tensor:
    """[..., heads, T, d_k] -> [..., T, d]"""
    x = swapaxes(x, -2, -3)
    *lead, t, h, dk = x.shape
    return reshape(x, (*lead, t, h * dk))


def _encoder_block(x: Tensor, cfg: TemporalConfig, params: ParamStore, base: str) -> Tensor:
    normed = layer_norm(x, params[f"{base}.norm1.gain"], params[f"{base}.norm1.bias"])
    q = _split_heads(_linear(normed, params[f"{base}.qkv.q_weight"], params[f"{base}.qkv.q_bias"]), cfg.n_heads)
    k = _split_heads(matmul(normed, params[f"{base}.qkv.k_weight"]), cfg.n_heads)
    v = _split_heads(_linear(normed, params[f"{base}.qkv.v_weight"], params[f"{base}.qkv.v_bias"]), cfg.n_heads)
    attended = _merge_heads(attention(q, k, v, causal=cfg.causal))
    x = add(x, _linear(attended, params[f"{base}.out.weight"], params[f"{base}.out.bias"]))
    normed = layer_norm(x, params[f"{base}.norm2.gain"], params[f"{base}.norm2.bias"])
    hidden = gelu(_linear(normed, params[f"{base}.ffn1.weight"], params[f"{base}.ffn1.bias"]))
    return add(x, _linear(hidden, params[f"{base}.ffn2.weight"], params[f"{base}.ffn2.bias"]))


def encode_temporal(
    h_struct: Tensor,
    cfg: TemporalConfig,
    pe: PositionalTable,
    params: ParamStore,
    prefix: str = "tform",
) -> Tensor:
    """Encode every node's time series independently with shared weights.

    ``h_struct`` is ``[T, N, d_model]`` (extra leading batch axes allowed).
    Position rows are added to each node's sequence before the blocks run;
    the output keeps the input shape.
    """
    if h_struct.shape[-1] != cfg.d_model:
        raise ShapeError(
            f"channel width {h_struct.shape[-1]} != configured d_model {cfg.d_model}"
        )
    t_steps = h_struct.shape[-3]
    if t_steps > pe.t_max:
        raise ContractError(
            f"sequence length {t_steps} exceeds positional table t_max {pe.t_max}"
        )
    if pe.d_model != cfg.d_model:
        raise ShapeError(f"positional table width {pe.d_model} != d_model {cfg.d_model}")
    # [.., T, N, d] -> [.., N, T, d]: per-node sequences along the time axis
    x = swapaxes(h_struct, -2, -3)
    x = add(x, Tensor(pe.table[:t_steps].astype(x.dtype, copy=False)))
    for b in range(cfg.n_blocks):
        x = _encoder_block(x, cfg, params, f"{prefix}.block{b}")
    return swapaxes(x, -2, -3)

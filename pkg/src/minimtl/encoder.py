"""Miniature pre-norm transformer encoder towers.

A tower maps token ids to the first-token hidden state of each of its top
``tap_top_k`` layers; those per-layer summary vectors are the features the
sharing and pooling stages consume. One independent tower is built per task.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, VocabError
from .tensor import (
    Rng,
    Tensor,
    add,
    dropout,
    gather_rows,
    layer_norm,
    matmul,
    relu,
    reshape,
    scale,
    slice_axis,
    softmax_over_axis,
    swap_axes,
    transpose,
)

PAD_ID = 0
UNK_ID = 1
SEQ_START_ID = 2
NUM_RESERVED_IDS = 3


@dataclass
class EncoderConfig:
    vocab_size: int
    num_layers: int = 4
    hidden_dim: int = 32
    num_heads: int = 2
    ffn_dim: int = 64
    max_len: int = 48
    tap_top_k: int = 3

    def __post_init__(self):
        if self.vocab_size < NUM_RESERVED_IDS + 1:
            raise ConfigError(f"vocab_size must be >= 4 (3 reserved ids), got {self.vocab_size}")
        for name in ("num_layers", "hidden_dim", "num_heads", "ffn_dim", "max_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.hidden_dim % self.num_heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}")
        if not 1 <= self.tap_top_k <= self.num_layers:
            raise ConfigError(
                f"tap_top_k {self.tap_top_k} outside [1, {self.num_layers}]")


@dataclass
class LayerStates:
    """First-token states of the tapped layers, ordered bottom-to-top."""

    states: list[Tensor] = field(default_factory=list)

    def __len__(self):
        return len(self.states)


def glorot_uniform(rng: Rng, fan_in: int, fan_out: int, shape) -> Tensor:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)


def _zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def encoder_init(config: EncoderConfig, rng: Rng, prefix: str = "") -> dict[str, Tensor]:
    """Fresh tower parameters under `prefix`-qualified names."""
    d, f = config.hidden_dim, config.ffn_dim
    p: dict[str, Tensor] = {}
    p[prefix + "tok_embed"] = glorot_uniform(rng, config.vocab_size, d, (config.vocab_size, d))
    p[prefix + "pos_embed"] = glorot_uniform(rng, config.max_len, d, (config.max_len, d))
    for i in range(config.num_layers):
        lp = f"{prefix}layer{i}."
        p[lp + "ln1_gain"] = Tensor(np.ones(d), requires_grad=True)
        p[lp + "ln1_bias"] = _zeros(d)
        # query/key/value projections stored fused (d, 3d); each (d, d) slab
        # is drawn with its own fan pair so the init matches separate storage
        p[lp + "attn_qkv_w"] = Tensor(
            np.concatenate([glorot_uniform(rng, d, d, (d, d)).data for _ in range(3)],
                           axis=1), requires_grad=True)
        p[lp + "attn_qkv_b"] = _zeros(3 * d)
        p[lp + "attn_out_w"] = glorot_uniform(rng, d, d, (d, d))
        p[lp + "attn_out_b"] = _zeros(d)
        p[lp + "ln2_gain"] = Tensor(np.ones(d), requires_grad=True)
        p[lp + "ln2_bias"] = _zeros(d)
        p[lp + "ffn_in_w"] = glorot_uniform(rng, d, f, (d, f))
        p[lp + "ffn_in_b"] = _zeros(f)
        p[lp + "ffn_out_w"] = glorot_uniform(rng, f, d, (f, d))
        p[lp + "ffn_out_b"] = _zeros(d)
    return p


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def encoder_forward_batch(
    params: dict[str, Tensor],
    config: EncoderConfig,
    ids: np.ndarray,
    mask: np.ndarray,
    train: bool = False,
    dropout_p: float = 0.0,
    rng: Rng | None = None,
    prefix: str = "",
) -> list[Tensor]:
    """Run a batch through the tower; returns tapped first-token states (B, d).

    ids: int array (B, n); mask: (B, n) with 1 for real tokens, 0 for padding.
    Padded positions cannot influence any exported state: their attention
    weights are driven to exactly zero by a -inf pre-softmax bias.
    """
    ids = np.asarray(ids)
    mask = np.asarray(mask, dtype=np.float64)
    if ids.ndim != 2 or ids.shape != mask.shape:
        raise InputError(f"ids/mask must be matching 2-d arrays, got {ids.shape} / {mask.shape}")
    batch, n = ids.shape
    if n == 0 or not mask.any(axis=1).all():
        raise InputError("empty sequence in batch")
    if n > config.max_len:
        raise InputError(f"sequence length {n} exceeds max_len {config.max_len}")
    if ids.max() >= config.vocab_size or ids.min() < 0:
        raise VocabError(f"token id outside vocabulary of size {config.vocab_size}")

    d = config.hidden_dim
    heads = config.num_heads
    dh = d // heads
    inv_sqrt_dh = 1.0 / math.sqrt(dh)

    # keys at padded positions are unreachable for every query (any head)
    attn_bias = Tensor(np.where(mask > 0.0, 0.0, -np.inf)[:, None, None, :])

    def split_heads(t: Tensor) -> Tensor:
        return swap_axes(reshape(t, (batch, n, heads, dh)), 1, 2)

    x = add(gather_rows(params[prefix + "tok_embed"], ids),
            slice_axis(params[prefix + "pos_embed"], 0, 0, n))

    states: list[Tensor] = []
    for i in range(config.num_layers):
        lp = f"{prefix}layer{i}."
        pre = layer_norm(x, params[lp + "ln1_gain"], params[lp + "ln1_bias"])
        qkv = _linear(pre, params[lp + "attn_qkv_w"], params[lp + "attn_qkv_b"])
        q = split_heads(slice_axis(qkv, -1, 0, d))
        k = split_heads(slice_axis(qkv, -1, d, 2 * d))
        v = split_heads(slice_axis(qkv, -1, 2 * d, 3 * d))

        scores = add(scale(matmul(q, transpose(k)), inv_sqrt_dh), attn_bias)
        ctx = matmul(softmax_over_axis(scores, -1), v)          # (B, H, n, dh)
        ctx = reshape(swap_axes(ctx, 1, 2), (batch, n, d))
        attn_out = _linear(ctx, params[lp + "attn_out_w"], params[lp + "attn_out_b"])
        x = add(x, dropout(attn_out, dropout_p, rng, train))

        pre2 = layer_norm(x, params[lp + "ln2_gain"], params[lp + "ln2_bias"])
        hidden = relu(_linear(pre2, params[lp + "ffn_in_w"], params[lp + "ffn_in_b"]))
        ffn_out = _linear(hidden, params[lp + "ffn_out_w"], params[lp + "ffn_out_b"])
        x = add(x, dropout(ffn_out, dropout_p, rng, train))

        states.append(reshape(slice_axis(x, 1, 0, 1), (batch, d)))

    return states[config.num_layers - config.tap_top_k:]


def encoder_forward(
    params: dict[str, Tensor],
    config: EncoderConfig,
    token_ids,
    mask=None,
    train: bool = False,
    dropout_p: float = 0.0,
    rng: Rng | None = None,
    prefix: str = "",
) -> LayerStates:
    """Single-sequence surface over the batched forward pass."""
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.ndim != 1:
        raise InputError(f"token_ids must be 1-d, got shape {ids.shape}")
    if ids.size == 0:
        raise InputError("empty sequence")
    if mask is None:
        mask = (ids != PAD_ID).astype(np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    batch_states = encoder_forward_batch(
        params, config, ids[None, :], mask[None, :],
        train=train, dropout_p=dropout_p, rng=rng, prefix=prefix)
    return LayerStates(states=[reshape(s, (config.hidden_dim,)) for s in batch_states])

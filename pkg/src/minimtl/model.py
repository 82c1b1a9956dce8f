"""Model assembly: towers + sharing + heads under one of four strategies.

Strategies:
  single_task   two independent towers, one head each, no cross terms
  hard_shared   one tower, both heads read its pooled features
  cross_stitch  two towers, learnable task factors, layer factors pinned at 1
  co_task_aware two towers, learnable task factors and per-layer factors

All strategies draw tower/head weights from seed-keyed streams, so two models
built from the same seed share identical tower and head initializations
regardless of strategy. That makes strategy comparisons weight-matched and the
identity-sharing reduction exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderConfig, encoder_forward_batch, encoder_init
from .errors import ConfigError
from .sharing import (
    AUX,
    PRIMARY,
    SHARE_FORMS,
    TaskHead,
    classify,
    cotask_share,
    init_layer_factors,
    init_task_factors,
    init_task_head,
    pool_task_features,
)
from .tensor import Rng, Tensor

STRATEGIES = ("single_task", "hard_shared", "cross_stitch", "co_task_aware")


@dataclass
class ModelConfig:
    encoder: EncoderConfig
    class_counts: tuple[int, int] = (9, 3)
    proj_dim: int = 256
    threshold: float = 0.5
    share_form: str = "symmetric"
    encoder_dropout_p: float = 0.0  # backbone-internal dropout, separate knob

    def __post_init__(self):
        if len(self.class_counts) != 2 or any(c < 1 for c in self.class_counts):
            raise ConfigError(f"class_counts must be two positive ints, got {self.class_counts}")
        if self.proj_dim < 1:
            raise ConfigError(f"proj_dim must be positive, got {self.proj_dim}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.share_form not in SHARE_FORMS:
            raise ConfigError(f"share_form must be one of {SHARE_FORMS}, got {self.share_form}")
        if not 0.0 <= self.encoder_dropout_p < 1.0:
            raise ConfigError(
                f"encoder_dropout_p must be in [0, 1), got {self.encoder_dropout_p}")


NUM_TASKS = 2


class MultiTaskModel:
    """Two-task classifier with a pluggable sharing strategy."""

    def __init__(self, config: ModelConfig, strategy: str, rng: Rng):
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        self.config = config
        self.strategy = strategy
        self.params: dict[str, Tensor] = {}
        self.heads: list[TaskHead] = []

        enc = config.encoder
        if strategy == "hard_shared":
            self.tower_prefixes = ("shared.", "shared.")
            self.params.update(encoder_init(enc, rng.split("tower_shared"), prefix="shared."))
        else:
            self.tower_prefixes = ("primary.", "aux.")
            self.params.update(encoder_init(enc, rng.split("tower_primary"), prefix="primary."))
            self.params.update(encoder_init(enc, rng.split("tower_aux"), prefix="aux."))

        for task, count in enumerate(config.class_counts):
            head = init_task_head(rng.split(f"head_{task}"), enc.hidden_dim,
                                  config.proj_dim, count)
            name = "primary_head." if task == PRIMARY else "aux_head."
            self.params[name + "proj_weight"] = head.proj_weight
            self.params[name + "proj_bias"] = head.proj_bias
            self.params[name + "head_weight"] = head.head_weight
            self.params[name + "head_bias"] = head.head_bias
            self.heads.append(head)

        self.task_factors: Tensor | None = None
        self.layer_factors: Tensor | None = None
        if strategy in ("cross_stitch", "co_task_aware"):
            self.task_factors = init_task_factors(NUM_TASKS)
            self.params["task_factors"] = self.task_factors
            self.layer_factors = init_layer_factors(enc.tap_top_k, NUM_TASKS)
            if strategy == "co_task_aware":
                self.params["layer_factors"] = self.layer_factors
            else:
                # cross-stitch keeps the per-layer refinement pinned at 1
                self.layer_factors.requires_grad = False

    def forward(
        self,
        ids: np.ndarray,
        mask: np.ndarray,
        train: bool = False,
        dropout_p: float = 0.0,
        rng: Rng | None = None,
        encoder_dropout_p: float | None = None,
    ) -> tuple[Tensor, Tensor]:
        """Per-class probabilities for both tasks, shapes (B, C1) and (B, C2).

        dropout_p regularizes the hidden classifier layers (the projected
        per-layer features); encoder-internal dropout is separate and off by
        default, mirroring a backbone that manages its own regularization.
        """
        cfg = self.config
        enc_p = cfg.encoder_dropout_p if encoder_dropout_p is None else encoder_dropout_p
        if self.strategy == "hard_shared":
            states = encoder_forward_batch(
                self.params, cfg.encoder, ids, mask,
                train=train, dropout_p=enc_p, rng=rng, prefix="shared.")
            per_task_states = [states, states]
        else:
            per_task_states = [
                encoder_forward_batch(
                    self.params, cfg.encoder, ids, mask,
                    train=train, dropout_p=enc_p, rng=rng, prefix=prefix)
                for prefix in self.tower_prefixes
            ]

        if self.strategy in ("cross_stitch", "co_task_aware"):
            mixed: list[list[Tensor]] = [[], []]
            for l in range(cfg.encoder.tap_top_k):
                r_p, r_a = cotask_share(
                    per_task_states[PRIMARY][l], per_task_states[AUX][l],
                    self.task_factors, self.layer_factors, l, form=cfg.share_form)
                mixed[PRIMARY].append(r_p)
                mixed[AUX].append(r_a)
            per_task_states = mixed

        probs = []
        for task in (PRIMARY, AUX):
            z = pool_task_features(per_task_states[task], self.heads[task],
                                   train=train, dropout_p=dropout_p, rng=rng)
            probs.append(classify(z, self.heads[task]))
        return probs[0], probs[1]


def model_forward(
    model: MultiTaskModel,
    ids: np.ndarray,
    mask: np.ndarray,
    train: bool = False,
    dropout_p: float = 0.0,
    rng: Rng | None = None,
) -> tuple[Tensor, Tensor]:
    return model.forward(ids, mask, train=train, dropout_p=dropout_p, rng=rng)

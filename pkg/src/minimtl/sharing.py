"""Soft feature sharing between task towers, pooling, and sigmoid heads.

The sharing step mixes the per-layer summary vectors of the task towers with
two learnable factor collections: a task-by-task matrix (how much of task y's
features feed task x) and a per-tapped-layer refinement of the same flow.
With the task factors at identity and the layer factors at one, the mix is
an exact no-op and the model collapses to independent single-task towers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, ShapeError
from .tensor import (
    Rng,
    Tensor,
    add,
    dropout,
    matmul,
    mul,
    pick,
    reshape,
    scale,
    sigmoid,
    transpose,
)

PRIMARY, AUX = 0, 1

# how the second task's own-feature term is paired; "crossed" reproduces a
# published variant whose self term reads the other task's features
SHARE_FORMS = ("symmetric", "crossed")


def init_task_factors(num_tasks: int, diag: float = 0.9, off_diag: float = 0.1) -> Tensor:
    """T x T mixing factors, started near the identity (mostly-own features)."""
    a = np.full((num_tasks, num_tasks), off_diag)
    np.fill_diagonal(a, diag)
    return Tensor(a, requires_grad=True)


def init_layer_factors(num_layers: int, num_tasks: int) -> Tensor:
    """tapped-layers x T x T per-layer refinement, started at all ones."""
    return Tensor(np.ones((num_layers, num_tasks, num_tasks)), requires_grad=True)


def _entry2(m: Tensor, x: int, y: int) -> Tensor:
    """m[x, y] as a shape-(1,) tensor (broadcasts over feature axes)."""
    return pick(m, (x, y))


def _entry3(m: Tensor, l: int, x: int, y: int) -> Tensor:
    return pick(m, (l, x, y))


def share_features(
    hidden: list[Tensor],
    task_factors: Tensor,
    layer_factors: Tensor,
    layer_index: int,
) -> list[Tensor]:
    """Mix one layer's per-task hidden vectors into shared representations.

    r[x] = sum_y task_factors[x, y] * layer_factors[l, x, y] * hidden[y]
    """
    num_tasks = len(hidden)
    if task_factors.shape != (num_tasks, num_tasks):
        raise ShapeError(
            f"share: task factors {task_factors.shape} vs {num_tasks} tasks")
    if layer_index >= layer_factors.shape[0]:
        raise ShapeError(
            f"share: layer index {layer_index} outside {layer_factors.shape[0]} tapped layers")
    base = hidden[0].shape
    if any(h.shape != base for h in hidden):
        raise ShapeError(f"share: hidden shapes differ: {[h.shape for h in hidden]}")

    mixed = []
    for x in range(num_tasks):
        terms = []
        for y in range(num_tasks):
            coeff = mul(_entry2(task_factors, x, y), _entry3(layer_factors, layer_index, x, y))
            terms.append(mul(coeff, hidden[y]))
        acc = terms[0]
        for t in terms[1:]:
            acc = add(acc, t)
        mixed.append(acc)
    return mixed


def cotask_share(
    h_primary: Tensor,
    h_aux: Tensor,
    task_factors: Tensor,
    layer_factors: Tensor,
    layer_index: int,
    form: str = "symmetric",
) -> tuple[Tensor, Tensor]:
    """Two-task sharing for one tapped layer.

    The default symmetric form gives each task's own-feature term its own
    hidden state. form="crossed" keeps the coefficient pairing but feeds the
    second task's self term from the first task's features instead.
    """
    if h_primary.shape != h_aux.shape:
        raise ShapeError(f"cotask_share: {h_primary.shape} vs {h_aux.shape}")
    if form not in SHARE_FORMS:
        raise ConfigError(f"cotask_share: unknown form {form!r}")
    if form == "symmetric":
        r = share_features([h_primary, h_aux], task_factors, layer_factors, layer_index)
        return r[0], r[1]

    r_primary, _ = cotask_share(h_primary, h_aux, task_factors, layer_factors,
                                layer_index, form="symmetric")
    c_self = mul(_entry2(task_factors, AUX, AUX),
                 _entry3(layer_factors, layer_index, AUX, AUX))
    c_cross = mul(_entry2(task_factors, AUX, PRIMARY),
                  _entry3(layer_factors, layer_index, AUX, PRIMARY))
    r_aux = add(mul(c_self, h_primary), mul(c_cross, h_aux))
    return r_primary, r_aux


@dataclass
class TaskHead:
    """Per-task projection (shared across tapped layers) plus classifier."""

    proj_weight: Tensor  # (proj_dim, hidden_dim)
    proj_bias: Tensor    # (proj_dim,)
    head_weight: Tensor  # (num_classes, proj_dim)
    head_bias: Tensor    # (num_classes,)

    @property
    def num_classes(self) -> int:
        return self.head_weight.shape[0]


def init_task_head(rng: Rng, hidden_dim: int, proj_dim: int, num_classes: int) -> TaskHead:
    from .encoder import glorot_uniform

    return TaskHead(
        proj_weight=glorot_uniform(rng, hidden_dim, proj_dim, (proj_dim, hidden_dim)),
        proj_bias=Tensor(np.zeros(proj_dim), requires_grad=True),
        head_weight=glorot_uniform(rng, proj_dim, num_classes, (num_classes, proj_dim)),
        head_bias=Tensor(np.zeros(num_classes), requires_grad=True),
    )


def _affine(x: Tensor, w_t: Tensor, bias: Tensor) -> Tensor:
    """x @ w_t + bias for a single vector or a batch of row vectors."""
    if x.ndim == 1:
        out = add(matmul(reshape(x, (1, x.shape[0])), w_t), bias)
        return reshape(out, (out.shape[1],))
    return add(matmul(x, w_t), bias)


def pool_task_features(
    r_list: list[Tensor],
    head: TaskHead,
    train: bool = False,
    dropout_p: float = 0.0,
    rng: Rng | None = None,
) -> Tensor:
    """Project each layer's shared vector, squash, and average across layers."""
    if not r_list:
        raise InputError("pool_task_features: empty feature list")
    w_t = transpose(head.proj_weight)
    acc = None
    for r in r_list:
        u = sigmoid(_affine(r, w_t, head.proj_bias))
        u = dropout(u, dropout_p, rng, train)
        acc = u if acc is None else add(acc, u)
    return scale(acc, 1.0 / len(r_list))


def classify(z: Tensor, head: TaskHead) -> Tensor:
    """Independent per-class probabilities in (0, 1)."""
    return sigmoid(_affine(z, transpose(head.head_weight), head.head_bias))


def predict_labels(probs, threshold: float) -> set[int]:
    """Indices of classes whose probability clears the threshold (maybe none)."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"predict_labels: threshold must be in (0, 1), got {threshold}")
    values = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    if values.ndim != 1:
        raise ShapeError(f"predict_labels: expected a probability vector, got {values.shape}")
    return {int(i) for i in np.nonzero(values >= threshold)[0]}

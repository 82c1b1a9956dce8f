"""Joint loss, Adam, training loop, threshold selection, gradient checking,
and transfer fine-tuning onto a binary task."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Example, Vocabulary, encode, pad_batch, split
from .encoder import EncoderConfig, encoder_forward_batch, encoder_init
from .errors import ConfigError, DivergedError, ShapeError, StateError
from .metrics import Metrics, evaluate
from .model import ModelConfig, MultiTaskModel
from .sharing import TaskHead, classify, init_task_head, pool_task_features, predict_labels
from .tensor import (
    Parameters,
    Rng,
    Tensor,
    add,
    backward,
    clamp,
    finite_difference_grad,
    log,
    mean_all,
    mul,
    no_grad,
    scale,
    sub,
    zero_grad,
)

DEFAULT_THRESHOLD_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))
PROB_CLAMP_EPS = 1e-12


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-4
    dropout_p: float = 0.5
    loss_weight_primary: float = 0.7
    loss_weight_aux: float = 0.3
    seed: int = 0
    threshold_grid: tuple[float, ...] = DEFAULT_THRESHOLD_GRID

    def __post_init__(self):
        if self.loss_weight_primary < 0 or self.loss_weight_aux < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "dropout_p": self.dropout_p,
            "loss_weight_primary": self.loss_weight_primary,
            "loss_weight_aux": self.loss_weight_aux,
            "seed": self.seed,
            "threshold_grid": list(self.threshold_grid),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "threshold_grid" in d:
            d["threshold_grid"] = tuple(d["threshold_grid"])
        return cls(**d)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def binary_cross_entropy(probs: Tensor, gold: np.ndarray) -> Tensor:
    """BCE averaged over every (example, class) cell; probs clamped away from
    0/1 before the logs."""
    gold = np.asarray(gold, dtype=np.float64)
    if probs.shape != gold.shape:
        raise ShapeError(f"bce: probs {probs.shape} vs gold {gold.shape}")
    p = clamp(probs, PROB_CLAMP_EPS, 1.0 - PROB_CLAMP_EPS)
    y = Tensor(gold)
    one_minus_y = Tensor(1.0 - gold)
    ll = add(mul(y, log(p)), mul(one_minus_y, log(sub(Tensor(np.ones(p.shape)), p))))
    return scale(mean_all(ll), -1.0)


def multitask_loss(
    probs_primary: Tensor,
    gold_primary: np.ndarray,
    probs_aux: Tensor,
    gold_aux: np.ndarray,
    weights: tuple[float, float] = (0.7, 0.3),
) -> Tensor:
    w_primary, w_aux = weights
    return add(scale(binary_cross_entropy(probs_primary, gold_primary), w_primary),
               scale(binary_cross_entropy(probs_aux, gold_aux), w_aux))


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: Parameters) -> AdamState:
    state = AdamState()
    for name, t in params.items():
        state.m[name] = np.zeros(t.shape)
        state.v[name] = np.zeros(t.shape)
    return state


def adam_step(params: Parameters, state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update in place; grads must be populated."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, t in params.items():
        if t.grad is None:
            raise StateError(f"adam_step: parameter {name!r} has no gradient")
        g = t.grad
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        t.data -= (lr / bc1) * m / (np.sqrt(v / bc2) + state.eps)


# ---------------------------------------------------------------------------
# threshold selection
# ---------------------------------------------------------------------------

def best_threshold(probs: np.ndarray, gold_sets: list[set[int]], grid,
                   class_names: list[str]) -> tuple[float, float]:
    """Grid value maximizing weighted F1; ties resolve to the smaller value."""
    if len(grid) == 0 or len(gold_sets) == 0:
        raise ConfigError("best_threshold: empty grid or dev set")
    best_t, best_f1 = None, -1.0
    for t in grid:
        preds = [predict_labels(row, t) for row in probs]
        f1 = evaluate(preds, gold_sets, class_names).weighted.f1
        if f1 > best_f1:
            best_t, best_f1 = t, f1
    return best_t, best_f1


# ---------------------------------------------------------------------------
# batching helpers
# ---------------------------------------------------------------------------

def _encode_all(dataset: list[Example], vocab: Vocabulary, max_len: int):
    seqs = [encode(ex, vocab, max_len) for ex in dataset]
    y_primary = np.array([ex.primary_labels for ex in dataset], dtype=np.float64)
    y_aux = np.array([ex.aux_labels for ex in dataset], dtype=np.float64)
    return seqs, y_primary, y_aux


def _forward_dataset(model: MultiTaskModel, seqs, batch_size: int = 64):
    """Eval-mode forward over a whole dataset; returns stacked prob arrays."""
    chunks_p, chunks_a = [], []
    with no_grad():
        for lo in range(0, len(seqs), batch_size):
            ids, mask = pad_batch(seqs[lo: lo + batch_size])
            p, a = model.forward(ids, mask, train=False)
            chunks_p.append(p.data)
            chunks_a.append(a.data)
    return np.concatenate(chunks_p), np.concatenate(chunks_a)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainOutcome:
    model: MultiTaskModel
    threshold: float
    log: list[dict]


def train(
    model: MultiTaskModel,
    train_set: list[Example],
    dev_set: list[Example],
    config: TrainConfig,
    vocab: Vocabulary,
) -> TrainOutcome:
    """Epochs of shuffled minibatches; logs per-epoch train loss and the
    dev-selected threshold with its weighted F1."""
    if not train_set:
        raise ConfigError("train: empty training set")
    max_len = model.config.encoder.max_len
    seqs, y_primary, y_aux = _encode_all(train_set, vocab, max_len)
    dev_seqs, _, _ = _encode_all(dev_set, vocab, max_len) if dev_set else ([], None, None)
    dev_gold = [ex.primary_set() for ex in dev_set]
    primary_names = [f"class{i}" for i in range(model.config.class_counts[0])]

    rng = Rng(config.seed)
    shuffle_rng = rng.split("shuffle")
    dropout_rng = rng.split("dropout")
    weights = (config.loss_weight_primary, config.loss_weight_aux)
    state = adam_init(model.params)

    threshold = model.config.threshold
    records: list[dict] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(seqs))
        losses = []
        for b, lo in enumerate(range(0, len(order), config.batch_size)):
            idx = order[lo: lo + config.batch_size]
            ids, mask = pad_batch([seqs[i] for i in idx])
            probs_p, probs_a = model.forward(ids, mask, train=True,
                                             dropout_p=config.dropout_p, rng=dropout_rng)
            loss = multitask_loss(probs_p, y_primary[idx], probs_a, y_aux[idx], weights)
            value = loss.item()
            if not math.isfinite(value):
                raise DivergedError(f"non-finite loss at epoch {epoch} batch {b}",
                                    epoch=epoch, batch=b)
            losses.append(value)
            zero_grad(model.params)
            backward(loss)
            adam_step(model.params, state, config.learning_rate)

        dev_f1 = None
        if dev_set:
            dev_probs, _ = _forward_dataset(model, dev_seqs)
            threshold, dev_f1 = best_threshold(dev_probs, dev_gold,
                                               config.threshold_grid, primary_names)
        records.append({
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "dev_weighted_f1": dev_f1,
            "threshold": threshold,
        })
    return TrainOutcome(model=model, threshold=threshold, log=records)


def select_threshold(model: MultiTaskModel, dev_set: list[Example], grid,
                     vocab: Vocabulary) -> float:
    seqs, _, _ = _encode_all(dev_set, vocab, model.config.encoder.max_len)
    probs, _ = _forward_dataset(model, seqs)
    names = [f"class{i}" for i in range(model.config.class_counts[0])]
    t, _ = best_threshold(probs, [ex.primary_set() for ex in dev_set], grid, names)
    return t


def predict_dataset(model: MultiTaskModel, dataset: list[Example], vocab: Vocabulary,
                    threshold: float, aux_threshold: float = 0.5):
    """Thresholded label sets for both tasks over a dataset."""
    seqs, _, _ = _encode_all(dataset, vocab, model.config.encoder.max_len)
    probs_p, probs_a = _forward_dataset(model, seqs)
    preds_p = [predict_labels(row, threshold) for row in probs_p]
    preds_a = [predict_labels(row, aux_threshold) for row in probs_a]
    return preds_p, preds_a


def evaluate_model(model: MultiTaskModel, dataset: list[Example], vocab: Vocabulary,
                   threshold: float, schema) -> tuple[Metrics, Metrics]:
    preds_p, preds_a = predict_dataset(model, dataset, vocab, threshold)
    m_primary = evaluate(preds_p, [ex.primary_set() for ex in dataset],
                         list(schema.primary_names))
    m_aux = evaluate(preds_a, [ex.aux_set() for ex in dataset], list(schema.aux_names))
    return m_primary, m_aux


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_param: str
    max_abs_err_near_zero: float
    passed: bool
    per_param: dict[str, float]


def gradient_check(
    model: MultiTaskModel,
    batch: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    eps: float = 1e-5,
    rel_tol: float = 1e-4,
    abs_tol: float = 1e-6,
    weights: tuple[float, float] = (0.7, 0.3),
) -> GradCheckReport:
    """Compare analytic loss gradients with central differences for every
    trainable parameter (dropout off). Failures are reported, not raised."""
    ids, mask, gold_p, gold_a = batch

    def run(params):
        probs_p, probs_a = model.forward(ids, mask, train=False)
        return multitask_loss(probs_p, gold_p, probs_a, gold_a, weights)

    numeric = finite_difference_grad(lambda p: run(p).item(), model.params, eps=eps)
    zero_grad(model.params)
    backward(run(model.params))

    per_param: dict[str, float] = {}
    worst_name, worst_rel, worst_abs = "", 0.0, 0.0
    for name, t in model.params.items():
        a, n = t.grad, numeric[name]
        err = np.abs(a - n)
        denom = np.maximum(np.abs(a), np.abs(n))
        near_zero = denom < abs_tol
        rel = np.zeros_like(err)
        big = ~near_zero
        rel[big] = err[big] / denom[big]
        param_rel = float(rel.max()) if rel.size else 0.0
        per_param[name] = param_rel
        if param_rel > worst_rel:
            worst_rel, worst_name = param_rel, name
        if near_zero.any():
            worst_abs = max(worst_abs, float(err[near_zero].max()))
    passed = worst_rel <= rel_tol and worst_abs <= abs_tol
    return GradCheckReport(max_rel_err=worst_rel, worst_param=worst_name,
                           max_abs_err_near_zero=worst_abs, passed=passed,
                           per_param=per_param)


# ---------------------------------------------------------------------------
# binary task model (transfer target)
# ---------------------------------------------------------------------------

class BinaryClassifier:
    """Single tower + single-logit head for the any-symptom-vs-none task."""

    def __init__(self, encoder_config: EncoderConfig, proj_dim: int, rng: Rng,
                 tower_init: dict[str, Tensor] | None = None):
        self.encoder_config = encoder_config
        self.proj_dim = proj_dim
        self.params: dict[str, Tensor] = {}
        if tower_init is None:
            self.params.update(encoder_init(encoder_config, rng.split("tower"), prefix="tower."))
        else:
            for name, src in tower_init.items():
                self.params["tower." + name] = Tensor(src.data.copy(), requires_grad=True)
        head = init_task_head(rng.split("head"), encoder_config.hidden_dim, proj_dim, 1)
        self.head = head
        self.params["head.proj_weight"] = head.proj_weight
        self.params["head.proj_bias"] = head.proj_bias
        self.params["head.head_weight"] = head.head_weight
        self.params["head.head_bias"] = head.head_bias

    def trainable(self, freeze_encoder: bool) -> dict[str, Tensor]:
        if not freeze_encoder:
            return self.params
        return {k: v for k, v in self.params.items() if k.startswith("head.")}

    def forward(self, ids, mask, train=False, dropout_p=0.0, rng=None) -> Tensor:
        # dropout regularizes the projected features; tower runs clean
        states = encoder_forward_batch(self.params, self.encoder_config, ids, mask,
                                       train=train, dropout_p=0.0, rng=rng,
                                       prefix="tower.")
        z = pool_task_features(states, self.head, train=train, dropout_p=dropout_p, rng=rng)
        return classify(z, self.head)


def train_binary(
    model: BinaryClassifier,
    train_set: list[Example],
    config: TrainConfig,
    vocab: Vocabulary,
    freeze_encoder: bool = False,
) -> list[dict]:
    """Minibatch BCE training of the binary classifier; returns the loss log."""
    if not train_set:
        raise ConfigError("train_binary: empty training set")
    max_len = model.encoder_config.max_len
    seqs = [encode(ex, vocab, max_len) for ex in train_set]
    gold = np.array([ex.primary_labels for ex in train_set], dtype=np.float64)

    rng = Rng(config.seed)
    shuffle_rng = rng.split("shuffle")
    dropout_rng = rng.split("dropout")
    trainable = model.trainable(freeze_encoder)
    state = adam_init(trainable)

    records = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(seqs))
        losses = []
        for b, lo in enumerate(range(0, len(order), config.batch_size)):
            idx = order[lo: lo + config.batch_size]
            ids, mask = pad_batch([seqs[i] for i in idx])
            probs = model.forward(ids, mask, train=True,
                                  dropout_p=config.dropout_p, rng=dropout_rng)
            loss = binary_cross_entropy(probs, gold[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise DivergedError(f"non-finite loss at epoch {epoch} batch {b}",
                                    epoch=epoch, batch=b)
            losses.append(value)
            zero_grad(model.params)
            backward(loss)
            adam_step(trainable, state, config.learning_rate)
        records.append({"epoch": epoch, "train_loss": float(np.mean(losses))})
    return records


def binary_accuracy(model: BinaryClassifier, dataset: list[Example], vocab: Vocabulary,
                    threshold: float = 0.5) -> float:
    seqs = [encode(ex, vocab, model.encoder_config.max_len) for ex in dataset]
    preds = []
    with no_grad():
        for lo in range(0, len(seqs), 64):
            ids, mask = pad_batch(seqs[lo: lo + 64])
            preds.append(model.forward(ids, mask).data[:, 0] >= threshold)
    predicted = np.concatenate(preds)
    gold = np.array([ex.primary_labels[0] for ex in dataset], dtype=bool)
    return float((predicted == gold).mean())


def transfer_finetune(
    checkpoint,
    binary_dataset: list[Example],
    config: TrainConfig,
    freeze_encoder: bool = False,
    expected_encoder: EncoderConfig | None = None,
) -> tuple[BinaryClassifier, dict]:
    """Initialize a binary classifier from a checkpoint's auxiliary-task tower,
    fine-tune it, and report accuracy on a held-out test cut."""
    enc = checkpoint.model_config.encoder
    if expected_encoder is not None and expected_encoder != enc:
        raise ConfigError(
            f"transfer_finetune: checkpoint encoder {enc} does not match requested {expected_encoder}")
    tower = checkpoint.tower_parameters("aux")
    rng = Rng(config.seed).split("transfer")
    model = BinaryClassifier(enc, checkpoint.model_config.proj_dim, rng, tower_init=tower)
    vocab = checkpoint.vocab

    train_set, dev_set, test_set = split(binary_dataset, seed=config.seed)
    log = train_binary(model, train_set, config, vocab, freeze_encoder=freeze_encoder)
    metrics = {
        "accuracy": binary_accuracy(model, test_set, vocab),
        "train_accuracy": binary_accuracy(model, train_set, vocab),
        "log": log,
    }
    return model, metrics

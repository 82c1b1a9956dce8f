"""Multi-label precision / recall / F1 with micro and support-weighted rollups.

All arithmetic is plain Python on integer counts so results are exactly
reproducible; 0/0 ratios are defined as 0. Weighted aggregates average
per-class scores with weights proportional to gold support, over positive
classes only.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SchemaError


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int
    fp: int
    fn: int


@dataclass
class Aggregate:
    precision: float
    recall: float
    f1: float


@dataclass
class Metrics:
    per_class: dict[str, ClassMetrics]
    micro: Aggregate
    weighted: Aggregate

    def to_dict(self) -> dict:
        return {
            "per_class": {
                name: {"precision": m.precision, "recall": m.recall,
                       "f1": m.f1, "support": m.support}
                for name, m in self.per_class.items()
            },
            "micro": vars(self.micro).copy(),
            "weighted": vars(self.weighted).copy(),
        }


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def evaluate(predictions: list[set[int]], gold: list[set[int]], class_names: list[str]) -> Metrics:
    """Score predicted label sets against gold label sets.

    predictions/gold: one set of class indices per example, aligned.
    """
    if len(predictions) != len(gold):
        raise SchemaError(
            f"evaluate: {len(predictions)} predictions vs {len(gold)} gold examples")
    num_classes = len(class_names)
    valid = set(range(num_classes))
    for labels in list(predictions) + list(gold):
        extra = set(labels) - valid
        if extra:
            raise SchemaError(f"evaluate: labels {sorted(extra)} outside schema of size {num_classes}")

    per_class: dict[str, ClassMetrics] = {}
    tp_total = fp_total = fn_total = 0
    weighted_p = weighted_r = weighted_f1 = 0.0
    support_total = 0
    for c, name in enumerate(class_names):
        tp = fp = fn = 0
        for pred, gld in zip(predictions, gold):
            hit = c in pred
            true = c in gld
            if hit and true:
                tp += 1
            elif hit:
                fp += 1
            elif true:
                fn += 1
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f1 = _ratio_f(2.0 * precision * recall, precision + recall)
        support = tp + fn
        per_class[name] = ClassMetrics(precision, recall, f1, support, tp, fp, fn)
        tp_total += tp
        fp_total += fp
        fn_total += fn
        weighted_p += precision * support
        weighted_r += recall * support
        weighted_f1 += f1 * support
        support_total += support

    micro_p = _ratio(tp_total, tp_total + fp_total)
    micro_r = _ratio(tp_total, tp_total + fn_total)
    micro = Aggregate(micro_p, micro_r, _ratio_f(2.0 * micro_p * micro_r, micro_p + micro_r))
    weighted = Aggregate(
        _ratio_f(weighted_p, support_total),
        _ratio_f(weighted_r, support_total),
        _ratio_f(weighted_f1, support_total),
    )
    return Metrics(per_class=per_class, micro=micro, weighted=weighted)


def _ratio_f(num: float, den: float) -> float:
    return num / den if den else 0.0


def multi_hot_to_set(bits) -> set[int]:
    return {i for i, b in enumerate(bits) if b}

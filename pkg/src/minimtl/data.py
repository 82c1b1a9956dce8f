"""Tokenization, vocabulary, JSONL ingestion, deterministic splits, encoding."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import PAD_ID, SEQ_START_ID, UNK_ID
from .errors import ConfigError, ParseError, SchemaError
from .tensor import Rng

PRIMARY_CLASS_NAMES = (
    "Lack of Interest",
    "Feeling Down",
    "Sleeping Disorder",
    "Lack of Energy",
    "Eating Disorder",
    "Low Self-Esteem",
    "Concentration Problem",
    "Hyper/Lower Activity",
    "Self-Harm",
)
AUX_CLASS_NAMES = ("metaphor", "sarcasm", "others")

DEFAULT_SPLIT_RATIOS = (0.7, 0.1, 0.2)
DEFAULT_MAX_LEN = 48

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")


@dataclass(frozen=True)
class LabelSchema:
    primary_names: tuple[str, ...] = PRIMARY_CLASS_NAMES
    aux_names: tuple[str, ...] = AUX_CLASS_NAMES

    def __post_init__(self):
        for names in (self.primary_names, self.aux_names):
            if len(set(names)) != len(names):
                raise SchemaError(f"duplicate label names in {names}")

    def to_dict(self) -> dict:
        return {"primary_names": list(self.primary_names), "aux_names": list(self.aux_names)}

    @classmethod
    def from_dict(cls, d: dict) -> "LabelSchema":
        return cls(tuple(d["primary_names"]), tuple(d["aux_names"]))


@dataclass
class Example:
    text: str
    primary_labels: tuple[int, ...]  # multi-hot, may be all zero
    aux_labels: tuple[int, ...]      # multi-hot over (metaphor, sarcasm, others)
    tokens: list[int] | None = None  # filled by encode()

    def primary_set(self) -> set[int]:
        return {i for i, b in enumerate(self.primary_labels) if b}

    def aux_set(self) -> set[int]:
        return {i for i, b in enumerate(self.aux_labels) if b}


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    token_to_id: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.token_to_id) + 3  # reserved: PAD, UNK, SEQ_START

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def to_dict(self) -> dict:
        return {"tokens": sorted(self.token_to_id.items(), key=lambda kv: kv[1])}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(token_to_id={tok: int(i) for tok, i in d["tokens"]})


def build_vocab(corpus: list[str], min_count: int = 1) -> Vocabulary:
    """Ids ordered by (frequency desc, token asc), starting after reserved ids."""
    counts = Counter()
    for text in corpus:
        counts.update(tokenize(text))
    kept = sorted((tok for tok, c in counts.items() if c >= min_count),
                  key=lambda tok: (-counts[tok], tok))
    return Vocabulary(token_to_id={tok: i + 3 for i, tok in enumerate(kept)})


def encode(example: Example, vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN) -> list[int]:
    """Sequence-start token plus token ids, truncated (never erroring) to max_len."""
    ids = [SEQ_START_ID] + [vocab.id_of(tok) for tok in tokenize(example.text)]
    return ids[:max_len]


def encode_dataset(dataset: list[Example], vocab: Vocabulary,
                   max_len: int = DEFAULT_MAX_LEN) -> list[Example]:
    for ex in dataset:
        ex.tokens = encode(ex, vocab, max_len)
    return dataset


def pad_batch(encoded: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad a list of id sequences; returns (ids, mask)."""
    width = max(len(seq) for seq in encoded)
    ids = np.full((len(encoded), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(encoded), width))
    for i, seq in enumerate(encoded):
        ids[i, : len(seq)] = seq
        mask[i, : len(seq)] = 1.0
    return ids, mask


# ---------------------------------------------------------------------------
# JSONL format: {"text": str, "symptoms": [names], "figurative": [names]}
# ---------------------------------------------------------------------------

def _labels_from_names(names, allowed: tuple[str, ...], what: str) -> tuple[int, ...]:
    bits = [0] * len(allowed)
    for name in names:
        if name not in allowed:
            raise SchemaError(f"unknown {what} label {name!r}")
        bits[allowed.index(name)] = 1
    return tuple(bits)


def example_from_record(record: dict, schema: LabelSchema) -> Example:
    for key in ("text", "symptoms", "figurative"):
        if key not in record:
            raise ParseError(f"record missing field {key!r}")
    if not isinstance(record["text"], str):
        raise ParseError("field 'text' must be a string")
    primary = _labels_from_names(record["symptoms"], schema.primary_names, "symptom")

    figurative = list(record["figurative"])
    others_idx = schema.aux_names.index("others")
    if "others" in figurative and len(figurative) > 1:
        raise SchemaError("'others' cannot combine with figurative labels")
    figurative = [n for n in figurative if n != "others"]
    aux = list(_labels_from_names(figurative, schema.aux_names, "figurative"))
    if not any(aux):
        aux[others_idx] = 1
    return Example(text=record["text"], primary_labels=primary, aux_labels=tuple(aux))


def record_from_example(ex: Example, schema: LabelSchema) -> dict:
    symptoms = [schema.primary_names[i] for i in sorted(ex.primary_set())]
    others_idx = schema.aux_names.index("others")
    figurative = [schema.aux_names[i] for i in sorted(ex.aux_set()) if i != others_idx]
    return {"text": ex.text, "symptoms": symptoms, "figurative": figurative}


def load_jsonl(path, schema: LabelSchema | None = None) -> list[Example]:
    schema = schema or LabelSchema()
    dataset = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise ParseError(f"{path}:{lineno}: record must be an object")
            try:
                dataset.append(example_from_record(record, schema))
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return dataset


def save_jsonl(dataset: list[Example], path, schema: LabelSchema | None = None) -> None:
    schema = schema or LabelSchema()
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for ex in dataset:
            fh.write(json.dumps(record_from_example(ex, schema), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def split(dataset: list[Example], ratios=DEFAULT_SPLIT_RATIOS, seed: int = 0):
    """Seeded shuffle then contiguous cut; sizes floor down, remainder to test."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"split needs three non-negative ratios, got {ratios}")
    order = Rng(seed).split("dataset_split").permutation(len(dataset))
    shuffled = [dataset[i] for i in order]
    n_train = int(len(dataset) * ratios[0])
    n_dev = int(len(dataset) * ratios[1])
    return (shuffled[:n_train],
            shuffled[n_train: n_train + n_dev],
            shuffled[n_train + n_dev:])


def to_binary_dataset(dataset: list[Example]) -> list[Example]:
    """Collapse symptom labels to one any-symptom bit (aux labels kept as-is)."""
    out = []
    for ex in dataset:
        bit = 1 if any(ex.primary_labels) else 0
        out.append(Example(text=ex.text, primary_labels=(bit,), aux_labels=ex.aux_labels))
    return out

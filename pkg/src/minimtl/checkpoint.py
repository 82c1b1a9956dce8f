"""Self-describing JSON checkpoints.

A checkpoint captures everything needed to rebuild the model bit-for-bit:
configs, label schema, vocabulary, the selected threshold, and every named
parameter as shape + row-major values. Floats survive the JSON round trip
exactly (shortest-repr float64 serialization is lossless).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LabelSchema, Vocabulary
from .encoder import EncoderConfig
from .errors import ConfigError
from .model import ModelConfig, MultiTaskModel
from .tensor import Rng, Tensor
from .train import TrainConfig

FORMAT_VERSION = 1


def _encoder_to_dict(cfg: EncoderConfig) -> dict:
    return {
        "vocab_size": cfg.vocab_size,
        "num_layers": cfg.num_layers,
        "hidden_dim": cfg.hidden_dim,
        "num_heads": cfg.num_heads,
        "ffn_dim": cfg.ffn_dim,
        "max_len": cfg.max_len,
        "tap_top_k": cfg.tap_top_k,
    }


def _model_config_to_dict(cfg: ModelConfig) -> dict:
    return {
        "encoder": _encoder_to_dict(cfg.encoder),
        "class_counts": list(cfg.class_counts),
        "proj_dim": cfg.proj_dim,
        "threshold": cfg.threshold,
        "share_form": cfg.share_form,
        "encoder_dropout_p": cfg.encoder_dropout_p,
    }


def _model_config_from_dict(d: dict) -> ModelConfig:
    return ModelConfig(
        encoder=EncoderConfig(**d["encoder"]),
        class_counts=tuple(d["class_counts"]),
        proj_dim=d["proj_dim"],
        threshold=d["threshold"],
        share_form=d.get("share_form", "symmetric"),
        encoder_dropout_p=d.get("encoder_dropout_p", 0.0),
    )


@dataclass
class Checkpoint:
    strategy: str
    model_config: ModelConfig
    train_config: TrainConfig
    schema: LabelSchema
    vocab: Vocabulary
    parameters: dict[str, np.ndarray]
    selected_threshold: float
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_model(cls, model: MultiTaskModel, train_config: TrainConfig,
                   schema: LabelSchema, vocab: Vocabulary,
                   selected_threshold: float) -> "Checkpoint":
        return cls(
            strategy=model.strategy,
            model_config=model.config,
            train_config=train_config,
            schema=schema,
            vocab=vocab,
            parameters={name: t.data.copy() for name, t in model.params.items()},
            selected_threshold=selected_threshold,
        )

    def tower_parameters(self, task: str) -> dict[str, Tensor]:
        """Unprefixed tower weights for 'primary' or 'aux' (hard-shared
        checkpoints expose their single tower for either name)."""
        for prefix in (f"{task}.", "shared."):
            found = {name[len(prefix):]: Tensor(arr.copy())
                     for name, arr in self.parameters.items() if name.startswith(prefix)}
            if found:
                return found
        raise ConfigError(f"checkpoint has no tower for task {task!r}")

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "strategy": self.strategy,
            "model_config": _model_config_to_dict(self.model_config),
            "train_config": self.train_config.to_dict(),
            "schema": self.schema.to_dict(),
            "vocabulary": self.vocab.to_dict(),
            "selected_threshold": self.selected_threshold,
            "parameters": [
                {"name": name, "shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
                for name, arr in sorted(self.parameters.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        if d.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported checkpoint format_version {d.get('format_version')}")
        names = [p["name"] for p in d["parameters"]]
        if len(names) != len(set(names)):
            raise ConfigError("checkpoint parameter names are not unique")
        return cls(
            strategy=d["strategy"],
            model_config=_model_config_from_dict(d["model_config"]),
            train_config=TrainConfig.from_dict(d["train_config"]),
            schema=LabelSchema.from_dict(d["schema"]),
            vocab=Vocabulary.from_dict(d["vocabulary"]),
            parameters={
                p["name"]: np.array(p["data"], dtype=np.float64).reshape(p["shape"])
                for p in d["parameters"]
            },
            selected_threshold=d["selected_threshold"],
        )


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_text(json.dumps(ckpt.to_dict()) + "\n", encoding="utf-8")


def load_checkpoint(path) -> Checkpoint:
    return Checkpoint.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def rebuild_model(ckpt: Checkpoint) -> MultiTaskModel:
    """Reconstruct the model and overwrite its parameters bit-for-bit."""
    model = MultiTaskModel(ckpt.model_config, ckpt.strategy, Rng(0))
    expected = set(model.params)
    stored = set(ckpt.parameters)
    if expected != stored:
        missing = expected - stored
        extra = stored - expected
        raise ConfigError(f"checkpoint parameters mismatch: missing {sorted(missing)}, "
                          f"unexpected {sorted(extra)}")
    for name, arr in ckpt.parameters.items():
        if model.params[name].shape != arr.shape:
            raise ConfigError(f"checkpoint parameter {name!r} has shape {arr.shape}, "
                              f"expected {model.params[name].shape}")
        model.params[name].data = arr.copy()
    return model

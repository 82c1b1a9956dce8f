"""Command-line surface: synth, train, eval, predict, gradcheck, compare.

Exit codes: 0 success, 2 I/O problems, 3 training divergence, 64 usage errors.
All randomness flows from --seed, so every command is reproducible.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, rebuild_model, save_checkpoint
from .data import (
    DEFAULT_SPLIT_RATIOS,
    LabelSchema,
    build_vocab,
    load_jsonl,
    save_jsonl,
    split,
)
from .encoder import SEQ_START_ID, EncoderConfig
from .errors import ConfigError, DivergedError, MiniMtlError, ParseError, SchemaError
from .model import ModelConfig, MultiTaskModel
from .sharing import predict_labels
from .synth import SynthSpec, synth_generate
from .tensor import Rng, no_grad
from .train import (
    DEFAULT_THRESHOLD_GRID,
    TrainConfig,
    evaluate_model,
    gradient_check,
    train,
)

EXIT_OK = 0
EXIT_IO = 2
EXIT_DIVERGED = 3
EXIT_USAGE = 64

STRATEGY_ALIASES = {
    "stl": "single_task",
    "hard": "hard_shared",
    "cross-stitch": "cross_stitch",
    "cotask": "co_task_aware",
}


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fail_io(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_IO


# ---------------------------------------------------------------------------
# config assembly
# ---------------------------------------------------------------------------

ENCODER_FIELDS = ("num_layers", "hidden_dim", "num_heads", "ffn_dim", "max_len", "tap_top_k")
MODEL_FIELDS = ("proj_dim", "threshold", "share_form", "encoder_dropout_p")


def _load_config_file(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None


def _build_configs(args) -> tuple[TrainConfig, dict, dict]:
    """Merge config-file values with flag overrides; flags win."""
    file_cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
    train_kw = {k: file_cfg[k] for k in TrainConfig().to_dict() if k in file_cfg}
    enc_kw = {k: file_cfg[k] for k in ENCODER_FIELDS if k in file_cfg}
    model_kw = {k: file_cfg[k] for k in MODEL_FIELDS if k in file_cfg}
    if getattr(args, "seed", None) is not None:
        train_kw["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        train_kw["epochs"] = args.epochs
    return TrainConfig.from_dict(train_kw), enc_kw, model_kw


def _train_one(dataset, strategy: str, train_config: TrainConfig, enc_kw: dict,
               model_kw: dict):
    schema = LabelSchema()
    train_set, dev_set, test_set = split(dataset, DEFAULT_SPLIT_RATIOS, train_config.seed)
    vocab = build_vocab([ex.text for ex in train_set])
    encoder = EncoderConfig(vocab_size=len(vocab), **enc_kw)
    model_config = ModelConfig(encoder=encoder, **model_kw)
    model = MultiTaskModel(model_config, strategy, Rng(train_config.seed))
    outcome = train(model, train_set, dev_set, train_config, vocab)
    ckpt = Checkpoint.from_model(model, train_config, schema, vocab, outcome.threshold)
    return ckpt, outcome, (train_set, dev_set, test_set)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        return _fail_io(f"{out} already exists (use --force to overwrite)")
    spec = SynthSpec(figurative_fraction=args.figurative_fraction)
    dataset = synth_generate(args.n, seed=args.seed, spec=spec)
    try:
        save_jsonl(dataset, out)
    except OSError as exc:
        return _fail_io(str(exc))
    print(f"wrote {len(dataset)} examples to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        dataset = load_jsonl(args.data)
    except OSError as exc:
        return _fail_io(str(exc))
    train_config, enc_kw, model_kw = _build_configs(args)
    try:
        ckpt, outcome, _ = _train_one(dataset, STRATEGY_ALIASES[args.strategy],
                                      train_config, enc_kw, model_kw)
    except DivergedError as exc:
        print(f"error: diverged at epoch {exc.epoch} batch {exc.batch}", file=sys.stderr)
        return EXIT_DIVERGED
    try:
        save_checkpoint(ckpt, args.out_checkpoint)
        log_path = Path(args.log) if args.log else Path(args.out_checkpoint).with_suffix(".log.jsonl")
        with open(log_path, "w", encoding="utf-8") as fh:
            for record in outcome.log:
                fh.write(json.dumps(record) + "\n")
    except OSError as exc:
        return _fail_io(str(exc))
    final = outcome.log[-1]
    print(json.dumps({"final_train_loss": final["train_loss"],
                      "dev_weighted_f1": final["dev_weighted_f1"],
                      "threshold": outcome.threshold,
                      "checkpoint": str(args.out_checkpoint)}))
    return EXIT_OK


def _eval_split(ckpt: Checkpoint, dataset, which: str):
    if which == "all":
        return dataset
    train_set, dev_set, test_set = split(dataset, DEFAULT_SPLIT_RATIOS,
                                         ckpt.train_config.seed)
    return {"train": train_set, "dev": dev_set, "test": test_set}[which]


def cmd_eval(args) -> int:
    try:
        ckpt = load_checkpoint(args.checkpoint)
    except OSError as exc:
        return _fail_io(str(exc))
    try:
        dataset = load_jsonl(args.data)
    except OSError as exc:
        return _fail_io(str(exc))
    model = rebuild_model(ckpt)
    part = _eval_split(ckpt, dataset, args.split)
    if not part:
        return _fail_io(f"split {args.split!r} is empty for this dataset")
    m_primary, m_aux = evaluate_model(model, part, ckpt.vocab,
                                      ckpt.selected_threshold, ckpt.schema)
    payload = m_primary.to_dict()
    payload["threshold"] = ckpt.selected_threshold
    payload["split"] = args.split
    payload["aux"] = m_aux.to_dict()
    print(json.dumps(payload))
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        ckpt = load_checkpoint(args.checkpoint)
    except OSError as exc:
        return _fail_io(str(exc))
    model = rebuild_model(ckpt)
    from .data import Example, encode, pad_batch

    example = Example(text=args.text, primary_labels=(0,) * len(ckpt.schema.primary_names),
                      aux_labels=(0, 0, 1))
    seq = encode(example, ckpt.vocab, ckpt.model_config.encoder.max_len)
    ids, mask = pad_batch([seq])
    with no_grad():
        probs_p, probs_a = model.forward(ids, mask)
    p, a = probs_p.data[0], probs_a.data[0]
    threshold = ckpt.selected_threshold
    payload = {
        "primary": {
            "probabilities": {name: float(v) for name, v in zip(ckpt.schema.primary_names, p)},
            "labels": [ckpt.schema.primary_names[i] for i in sorted(predict_labels(p, threshold))],
            "threshold": threshold,
        },
        "aux": {
            "probabilities": {name: float(v) for name, v in zip(ckpt.schema.aux_names, a)},
            "labels": [ckpt.schema.aux_names[i] for i in sorted(predict_labels(a, 0.5))],
            "threshold": 0.5,
        },
    }
    print(json.dumps(payload))
    return EXIT_OK


def _gradcheck_model_config(enc_kw: dict, model_kw: dict, vocab_size: int = 11) -> ModelConfig:
    enc_defaults = dict(num_layers=2, hidden_dim=8, num_heads=2, ffn_dim=10,
                        max_len=6, tap_top_k=2)
    enc_defaults.update(enc_kw)
    model_defaults = dict(class_counts=(3, 3), proj_dim=4)
    model_defaults.update(model_kw)
    return ModelConfig(encoder=EncoderConfig(vocab_size=vocab_size, **enc_defaults),
                       **model_defaults)


def cmd_gradcheck(args) -> int:
    train_config, enc_kw, model_kw = _build_configs(args)
    cfg = _gradcheck_model_config(enc_kw, model_kw)
    strategies = ([STRATEGY_ALIASES[args.strategy]] if args.strategy
                  else list(STRATEGY_ALIASES.values()))
    rng = Rng(train_config.seed)
    batch_rng = rng.split("gradcheck_batch")
    n = 4
    ids = np.full((2, n), SEQ_START_ID, dtype=np.int64)
    ids[:, 1:] = batch_rng.integers(3, cfg.encoder.vocab_size, (2, n - 1))
    mask = np.ones((2, n))
    gold_p = (batch_rng.random((2, cfg.class_counts[0])) < 0.5).astype(float)
    gold_a = (batch_rng.random((2, cfg.class_counts[1])) < 0.5).astype(float)

    all_ok = True
    for strategy in strategies:
        model = MultiTaskModel(cfg, strategy, rng.split(strategy))
        report = gradient_check(model, (ids, mask, gold_p, gold_a))
        status = "pass" if report.passed else "FAIL"
        all_ok &= report.passed
        print(f"{strategy}: {status} max_rel_err={report.max_rel_err:.3e} "
              f"worst={report.worst_param}")
    return EXIT_OK if all_ok else 1


def cmd_compare(args) -> int:
    try:
        dataset = load_jsonl(args.data)
    except OSError as exc:
        return _fail_io(str(exc))
    train_config, enc_kw, model_kw = _build_configs(args)
    strategies = [STRATEGY_ALIASES[s] for s in args.strategies]

    results: dict[tuple[str, str], list[float]] = {}
    for strategy in strategies:
        for seed in range(args.seeds):
            cfg = TrainConfig.from_dict({**train_config.to_dict(), "seed": seed})
            try:
                ckpt, outcome, parts = _train_one(dataset, strategy, cfg, enc_kw, model_kw)
            except DivergedError as exc:
                print(f"error: {strategy} seed {seed} diverged at epoch {exc.epoch}",
                      file=sys.stderr)
                return EXIT_DIVERGED
            model = rebuild_model(ckpt)
            test_set = parts[2]
            m_primary, m_aux = evaluate_model(model, test_set, ckpt.vocab,
                                              ckpt.selected_threshold, ckpt.schema)
            results.setdefault((strategy, "primary"), []).append(m_primary.weighted.f1)
            results.setdefault((strategy, "aux"), []).append(m_aux.weighted.f1)

    rows = []
    for (strategy, task), values in results.items():
        med = statistics.median(values)
        if len(values) > 1:
            q = statistics.quantiles(values, n=4)
            iqr = q[2] - q[0]
        else:
            iqr = 0.0
        rows.append({"strategy": strategy, "task": task,
                     "median_weighted_f1": med, "iqr": iqr, "seeds": len(values)})
        print(f"{strategy:13s} {task:7s} median={med:.4f} iqr={iqr:.4f} n={len(values)}")
    if args.out:
        try:
            Path(args.out).write_text(json.dumps(rows) + "\n", encoding="utf-8")
        except OSError as exc:
            return _fail_io(str(exc))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> Parser:
    parser = Parser(prog="minimtl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic JSONL corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--figurative-fraction", type=float, default=0.4,
                   dest="figurative_fraction")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--strategy", choices=sorted(STRATEGY_ALIASES), default="cotask")
    p.add_argument("--config", help="JSON file with TrainConfig/EncoderConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out-checkpoint", required=True, dest="out_checkpoint")
    p.add_argument("--log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "dev", "test", "all"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify one text with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="verify analytic gradients numerically")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=sorted(STRATEGY_ALIASES))
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("compare", help="seed sweep across sharing strategies")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--strategies", nargs="+", choices=sorted(STRATEGY_ALIASES),
                   default=sorted(STRATEGY_ALIASES))
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    return parser


def _validate(args, parser: Parser) -> None:
    if args.command == "synth" and args.n < 1:
        parser.error("--n must be a positive integer")
    if args.command == "predict" and not args.text.strip():
        parser.error("--text must be non-empty")
    if args.command == "compare" and args.seeds < 1:
        parser.error("--seeds must be a positive integer")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(args, parser)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail_io(str(exc))
    except (ParseError, SchemaError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MiniMtlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Transfer fine-tuning: reuse the auxiliary-task tower from a two-task
checkpoint as the starting point for a binary screening task, against a
from-scratch baseline at the same budget."""

from minimtl.checkpoint import Checkpoint
from minimtl.data import LabelSchema, build_vocab, split, to_binary_dataset
from minimtl.encoder import EncoderConfig
from minimtl.model import ModelConfig, MultiTaskModel
from minimtl.synth import synth_generate
from minimtl.tensor import Rng
from minimtl.train import (
    BinaryClassifier,
    TrainConfig,
    binary_accuracy,
    train,
    train_binary,
    transfer_finetune,
)

dataset = synth_generate(800, seed=9)
train_set, dev_set, _ = split(dataset, seed=9)
vocab = build_vocab([ex.text for ex in train_set])
schema = LabelSchema()

# Stage 1: joint two-task pretraining.
pretrain_cfg = TrainConfig(epochs=6, learning_rate=1e-3, seed=9)
model = MultiTaskModel(ModelConfig(encoder=EncoderConfig(vocab_size=len(vocab))),
                       "co_task_aware", Rng(9))
outcome = train(model, train_set, dev_set, pretrain_cfg, vocab)
ckpt = Checkpoint.from_model(model, pretrain_cfg, schema, vocab, outcome.threshold)
print(f"pretrained two-task model; selected threshold {outcome.threshold}")

# Stage 2: binary task = any symptom vs none.
binary = to_binary_dataset(dataset)
finetune_cfg = TrainConfig(epochs=2, learning_rate=1e-3, seed=0)

_, metrics = transfer_finetune(ckpt, binary, finetune_cfg)
print(f"transfer fine-tune accuracy: {metrics['accuracy']:.3f}")

# From-scratch arm with identical budget, vocabulary, and geometry.
b_train, b_dev, b_test = split(binary, seed=finetune_cfg.seed)
scratch = BinaryClassifier(ckpt.model_config.encoder, ckpt.model_config.proj_dim,
                           Rng(finetune_cfg.seed).split("scratch"))
train_binary(scratch, b_train, finetune_cfg, vocab)
print(f"from-scratch accuracy:       {binary_accuracy(scratch, b_test, vocab):.3f}")

# Frozen-tower variant touches only the head parameters.
frozen, metrics_frozen = transfer_finetune(ckpt, binary, finetune_cfg, freeze_encoder=True)
print(f"frozen-tower transfer:       {metrics_frozen['accuracy']:.3f}")

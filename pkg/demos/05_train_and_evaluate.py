"""End-to-end training on a small corpus: split, train, pick the decision
threshold on dev, evaluate both tasks on test, and inspect a prediction."""

from minimtl.data import LabelSchema, build_vocab, split
from minimtl.encoder import EncoderConfig
from minimtl.model import ModelConfig, MultiTaskModel
from minimtl.sharing import predict_labels
from minimtl.synth import synth_generate
from minimtl.tensor import Rng
from minimtl.train import TrainConfig, evaluate_model, predict_dataset, train

dataset = synth_generate(800, seed=5)
train_set, dev_set, test_set = split(dataset, seed=5)
vocab = build_vocab([ex.text for ex in train_set])
schema = LabelSchema()
print(f"train/dev/test = {len(train_set)}/{len(dev_set)}/{len(test_set)}, vocab={len(vocab)}")

config = TrainConfig(epochs=6, learning_rate=1e-3, seed=5)
encoder = EncoderConfig(vocab_size=len(vocab))
model = MultiTaskModel(ModelConfig(encoder=encoder), "co_task_aware", Rng(5))

outcome = train(model, train_set, dev_set, config, vocab)
for record in outcome.log:
    print(f"  epoch {record['epoch']}: train_loss={record['train_loss']:.4f} "
          f"dev_wF1={record['dev_weighted_f1']:.3f} threshold={record['threshold']}")

m_primary, m_aux = evaluate_model(model, test_set, vocab, outcome.threshold, schema)
print(f"\ntest symptom task:    weighted F1 = {m_primary.weighted.f1:.3f}")
print(f"test figurative task: weighted F1 = {m_aux.weighted.f1:.3f}")

print("\nlearned task factors:\n", model.task_factors.data.round(3))
print("layer factors (per tapped layer):\n", model.layer_factors.data.round(3))

preds_p, preds_a = predict_dataset(model, test_set[:3], vocab, outcome.threshold)
for ex, pp, pa in zip(test_set[:3], preds_p, preds_a):
    want = [schema.primary_names[i] for i in sorted(ex.primary_set())]
    got = [schema.primary_names[i] for i in sorted(pp)]
    print(f"\n  text: {ex.text}\n  gold: {want}\n  pred: {got} "
          f"aux={[schema.aux_names[i] for i in sorted(pa)]}")

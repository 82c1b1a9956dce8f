import json

import numpy as np
import pytest

from minimtl.data import (
    DEFAULT_SPLIT_RATIOS,
    Example,
    LabelSchema,
    Vocabulary,
    build_vocab,
    encode,
    load_jsonl,
    pad_batch,
    save_jsonl,
    split,
    to_binary_dataset,
    tokenize,
)
from minimtl.encoder import PAD_ID, SEQ_START_ID, UNK_ID
from minimtl.errors import ConfigError, ParseError, SchemaError
from minimtl.synth import (
    METAPHOR_WORDS,
    NEUTRAL_WORDS,
    SARCASM_WORDS,
    TOPIC_POOLS,
    SynthSpec,
    synth_generate,
)


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

def test_tokenize_lowercases_and_splits():
    assert tokenize("I am SAD") == ["i", "am", "sad"]


def test_tokenize_punctuation_boundaries():
    assert tokenize("can't sleep!!") == ["can", "'", "t", "sleep", "!", "!"]


def test_tokenize_empty():
    assert tokenize("") == []


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------

def test_build_vocab_ordering():
    vocab = build_vocab(["a a b"], min_count=1)
    assert vocab.token_to_id == {"a": 3, "b": 4}


def test_build_vocab_min_count_filters():
    vocab = build_vocab(["a a b"], min_count=2)
    assert "b" not in vocab.token_to_id
    assert vocab.id_of("b") == UNK_ID


def test_build_vocab_deterministic():
    corpus = ["the cat sat", "the dog sat down"]
    assert build_vocab(corpus).token_to_id == build_vocab(corpus).token_to_id


def test_vocab_ties_break_alphabetically():
    vocab = build_vocab(["b a"], min_count=1)
    assert vocab.token_to_id == {"a": 3, "b": 4}


def test_vocab_round_trip():
    vocab = build_vocab(["x y z z"])
    again = Vocabulary.from_dict(vocab.to_dict())
    assert again.token_to_id == vocab.token_to_id


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

def _example(text, symptoms=(), figurative=()):
    schema = LabelSchema()
    bits = [0] * 9
    for s in symptoms:
        bits[schema.primary_names.index(s)] = 1
    aux = [0, 0, 0]
    for f in figurative:
        aux[schema.aux_names.index(f)] = 1
    if not any(aux):
        aux[2] = 1
    return Example(text=text, primary_labels=tuple(bits), aux_labels=tuple(aux))


def test_encode_prepends_sequence_start():
    vocab = build_vocab(["up all night"])
    ids = encode(_example("up all night"), vocab)
    assert ids[0] == SEQ_START_ID
    assert len(ids) == 4
    assert all(i >= 3 for i in ids[1:])


def test_encode_truncates_to_max_len():
    vocab = build_vocab(["w"])
    ids = encode(_example("w " * 100), vocab, max_len=5)
    assert len(ids) == 5


def test_encode_unknown_tokens_map_to_unk():
    vocab = build_vocab(["hello"])
    ids = encode(_example("hello stranger"), vocab)
    assert ids == [SEQ_START_ID, vocab.id_of("hello"), UNK_ID]


def test_pad_batch_shapes_and_mask():
    ids, mask = pad_batch([[2, 3], [2, 3, 4, 5]])
    assert ids.shape == (2, 4)
    assert ids[0, 2] == PAD_ID and ids[0, 3] == PAD_ID
    np.testing.assert_array_equal(mask, [[1, 1, 0, 0], [1, 1, 1, 1]])


# ---------------------------------------------------------------------------
# JSONL ingestion
# ---------------------------------------------------------------------------

def test_load_record_with_symptom_and_empty_figurative(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps({"text": "up all night",
                                "symptoms": ["Sleeping Disorder"],
                                "figurative": []}) + "\n")
    (ex,) = load_jsonl(path)
    assert ex.primary_labels == (0, 0, 1, 0, 0, 0, 0, 0, 0)
    assert ex.aux_labels == (0, 0, 1)  # others auto-set


def test_load_record_with_both_figurative_tags(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps({"text": "x", "symptoms": [],
                                "figurative": ["sarcasm", "metaphor"]}) + "\n")
    (ex,) = load_jsonl(path)
    assert ex.primary_labels == (0,) * 9
    assert ex.aux_labels == (1, 1, 0)


def test_load_rejects_missing_text(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps({"symptoms": [], "figurative": []}) + "\n")
    with pytest.raises(ParseError, match="text"):
        load_jsonl(path)


def test_load_reports_line_number_for_bad_json(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"text": "ok", "symptoms": [], "figurative": []}\n{broken\n')
    with pytest.raises(ParseError, match=":2:"):
        load_jsonl(path)


def test_load_rejects_unknown_label(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps({"text": "x", "symptoms": ["Boredom"],
                                "figurative": []}) + "\n")
    with pytest.raises(SchemaError, match="Boredom"):
        load_jsonl(path)


def test_load_rejects_others_combined_with_tags(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps({"text": "x", "symptoms": [],
                                "figurative": ["others", "sarcasm"]}) + "\n")
    with pytest.raises(SchemaError):
        load_jsonl(path)


def test_jsonl_round_trip(tmp_path):
    dataset = synth_generate(60, seed=5)
    path = tmp_path / "d.jsonl"
    save_jsonl(dataset, path)
    again = load_jsonl(path)
    assert again == dataset


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def test_split_sizes_floor_then_remainder_to_test():
    dataset = [_example(f"t {i}") for i in range(10)]
    train, dev, test = split(dataset, DEFAULT_SPLIT_RATIOS, seed=1)
    assert (len(train), len(dev), len(test)) == (7, 1, 2)


def test_split_deterministic():
    dataset = [_example(f"t {i}") for i in range(23)]
    a = split(dataset, seed=9)
    b = split(dataset, seed=9)
    assert a == b


def test_split_all_train():
    dataset = [_example(f"t {i}") for i in range(5)]
    train, dev, test = split(dataset, (1.0, 0.0, 0.0), seed=0)
    assert len(train) == 5 and not dev and not test


def test_split_rejects_bad_ratios():
    with pytest.raises(ConfigError):
        split([_example("x")], (0.5, 0.2, 0.2), seed=0)


def test_split_partitions_are_disjoint_and_exhaustive():
    dataset = [_example(f"t {i}") for i in range(57)]
    for seed in range(5):
        train, dev, test = split(dataset, (0.6, 0.2, 0.2), seed=seed)
        texts = [ex.text for part in (train, dev, test) for ex in part]
        assert sorted(texts) == sorted(ex.text for ex in dataset)
        assert len(texts) == len(set(texts))


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------

def test_synth_figurative_fraction_among_depressive():
    dataset = synth_generate(1000, seed=0)
    depressive = [ex for ex in dataset if any(ex.primary_labels)]
    figurative = [ex for ex in depressive if not ex.aux_labels[2]]
    frac = len(figurative) / len(depressive)
    assert 0.35 <= frac <= 0.45


def test_synth_deterministic():
    assert synth_generate(200, seed=3) == synth_generate(200, seed=3)
    assert synth_generate(200, seed=3) != synth_generate(200, seed=4)


def test_synth_zero_figurative_fraction():
    dataset = synth_generate(300, seed=1, spec=SynthSpec(figurative_fraction=0.0))
    assert all(ex.aux_labels == (0, 0, 1) for ex in dataset)


def test_synth_others_bit_rule_holds_at_scale():
    for seed in range(10):
        for ex in synth_generate(1000, seed=seed):
            metaphor, sarcasm, others = ex.aux_labels
            assert others == (0 if (metaphor or sarcasm) else 1)


def test_synth_rejects_bad_fractions():
    with pytest.raises(ConfigError):
        SynthSpec(figurative_fraction=1.5)
    with pytest.raises(ConfigError):
        synth_generate(0, seed=0)


def test_synth_marker_usage_is_contextual():
    # figurative texts carry marker vocabulary, but marker vocabulary also
    # shows up (used literally) in a designed share of others-labeled texts,
    # so word presence alone cannot decide the figurative label; label noise
    # blurs the boundary further in both directions
    markers = set(METAPHOR_WORDS) | set(SARCASM_WORDS)
    counts = {True: [0, 0], False: [0, 0]}  # figurative-labeled -> [with, total]
    for ex in synth_generate(1500, seed=2):
        toks = set(tokenize(ex.text))
        fig = not ex.aux_labels[2]
        counts[fig][0] += bool(toks & markers)
        counts[fig][1] += 1
    fig_frac = counts[True][0] / counts[True][1]
    others_frac = counts[False][0] / counts[False][1]
    assert fig_frac > 0.8          # figurative labels mostly sit on marker texts
    assert 0.2 < others_frac < 0.5  # but markers are common in plain texts too


def test_synth_noise_free_labels_are_deterministic():
    spec = SynthSpec(aux_noise_p=0.0)
    markers = set(METAPHOR_WORDS) | set(SARCASM_WORDS)
    for ex in synth_generate(600, seed=3, spec=spec):
        if not ex.aux_labels[2]:
            assert set(tokenize(ex.text)) & markers


def test_synth_figurative_topics_come_from_next_class():
    # single-symptom figurative examples never contain their own class's
    # topic words; they borrow the next class's vocabulary (label noise off
    # so the aux bit reflects the true surface form)
    for ex in synth_generate(1500, seed=6, spec=SynthSpec(aux_noise_p=0.0)):
        classes = [i for i, b in enumerate(ex.primary_labels) if b]
        if len(classes) != 1 or ex.aux_labels[2]:
            continue
        toks = set(tokenize(ex.text))
        own = toks & set(TOPIC_POOLS[classes[0]])
        borrowed = toks & set(TOPIC_POOLS[(classes[0] + 1) % 9])
        assert not own and borrowed


def test_synth_nondepressive_use_neutral_vocabulary():
    topic_words = {w for pool in TOPIC_POOLS for w in pool}
    for ex in synth_generate(500, seed=7):
        if not any(ex.primary_labels):
            toks = set(tokenize(ex.text))
            assert not (toks & topic_words)
            assert toks & set(NEUTRAL_WORDS)


def test_to_binary_dataset():
    dataset = synth_generate(100, seed=8)
    binary = to_binary_dataset(dataset)
    for raw, b in zip(dataset, binary):
        assert b.primary_labels == (1 if any(raw.primary_labels) else 0,)
        assert b.aux_labels == raw.aux_labels

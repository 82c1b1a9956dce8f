"""The synthetic corpus: label schema, calibrated fractions, and the
figurative flip that couples the two tasks."""

from collections import Counter

from minimtl.data import AUX_CLASS_NAMES, PRIMARY_CLASS_NAMES, tokenize
from minimtl.synth import METAPHOR_WORDS, SARCASM_WORDS, TOPIC_POOLS, synth_generate

dataset = synth_generate(2000, seed=0)

depressive = [ex for ex in dataset if any(ex.primary_labels)]
figurative = [ex for ex in dataset if not ex.aux_labels[2]]
print(f"examples: {len(dataset)}")
print(f"non-depressive fraction: {1 - len(depressive) / len(dataset):.3f} (target 0.69)")
print(f"figurative among depressive: {len(figurative) / len(depressive):.3f} (target 0.40)")

counts = Counter()
for ex in depressive:
    for i, bit in enumerate(ex.primary_labels):
        if bit:
            counts[PRIMARY_CLASS_NAMES[i]] += 1
print("\nper-class depressive support:")
for name, c in counts.most_common():
    print(f"  {name:22s} {c}")

aux_counts = Counter()
for ex in dataset:
    for i, bit in enumerate(ex.aux_labels):
        if bit:
            aux_counts[AUX_CLASS_NAMES[i]] += 1
print("\naux label counts:", dict(aux_counts))

# The coupling: literal texts use their own class's topic words; figurative
# texts describe class k with class (k+1)'s vocabulary plus marker words, so
# figurative-usage detection is exactly the signal that un-flips the surface.
print("\nsample literal vs figurative for the same class:")
markers = set(METAPHOR_WORDS) | set(SARCASM_WORDS)
for want_fig in (False, True):
    for ex in dataset:
        is_fig = not ex.aux_labels[2]
        if is_fig == want_fig and ex.primary_labels == (0, 0, 1, 0, 0, 0, 0, 0, 0):
            kind = "figurative" if want_fig else "literal   "
            print(f"  [{kind}] {ex.text}")
            break

own = set(TOPIC_POOLS[2])
borrowed = set(TOPIC_POOLS[3])
for ex in dataset:
    if ex.primary_labels == (0, 0, 1, 0, 0, 0, 0, 0, 0) and not ex.aux_labels[2]:
        toks = set(tokenize(ex.text))
        print("  figurative sleep example uses energy-pool words:",
              sorted(toks & borrowed), "| own-pool words:", sorted(toks & own))
        break

"""Synthetic correlated-task corpus generator.

Each symptom class owns a pool of topic words. Literal examples of class k
draw topic words from pool k; figurative examples of class k instead draw
topic words from the *next* class's pool and add figurative marker words
(metaphor and/or sarcasm vocabulary). The figurative flag therefore flips
which surface vocabulary encodes the symptom: a reader that cannot detect
figurative usage systematically mislabels figurative texts, which is exactly
the coupling that makes the auxiliary task informative for the primary one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import AUX_CLASS_NAMES, PRIMARY_CLASS_NAMES, Example
from .errors import ConfigError
from .tensor import Rng

TOPIC_POOLS = (
    ("bored", "pointless", "apathy", "uninterested"),
    ("sad", "crying", "lonely", "hopeless"),
    ("insomnia", "awake", "nightmares", "sleepless"),
    ("exhausted", "drained", "sluggish", "weary"),
    ("appetite", "meals", "starving", "portions"),
    ("worthless", "ugly", "failure", "pathetic"),
    ("unfocused", "scattered", "foggy", "jumbled"),
    ("restless", "pacing", "fidgety", "jittery"),
    ("scars", "blade", "bleeding", "razor"),
)

# wide pools keep each marker rare: the figurative signal is easy to learn
# from dense figurative labels but slow to learn from sparse symptom labels
METAPHOR_WORDS = (
    "drowning", "storm", "cage", "shadow", "stone", "hollow", "anchor", "fog",
    "tide", "quicksand", "avalanche", "labyrinth", "glacier", "thorn", "ember",
    "chasm", "rust", "driftwood", "eclipse", "undertow", "gravel", "cobweb",
    "tundra", "mirage", "sinkhole", "static", "permafrost",
)
SARCASM_WORDS = (
    "yay", "wonderful", "fantastic", "obviously", "thrilled", "perfect",
    "classic", "splendid", "bravo", "delightful", "marvelous", "glorious",
    "superb", "charming", "magnificent", "stellar", "dazzling", "peachy",
    "terrific", "fabulous", "radiant", "exquisite", "sublime", "golden",
    "majestic", "blissful", "heavenly",
)
NEUTRAL_WORDS = ("coffee", "sunshine", "traffic", "football", "recipes", "playlist",
                 "homework", "garden", "weekend", "movie", "bus", "picnic",
                 "shopping", "concert", "puzzle")

LITERAL_PATTERNS = (
    "so {t} today {t2} all week still {t3} and {t4} tonight",
    "{t} again i feel {t2} and {t3} so {t4} every day",
    "why always {t} and {t2} im {t3} just {t4} these days",
    "honestly {t} right now {t2} since morning {t3} and {t4} again",
    "cant shake this {t} feeling been {t2} {t3} and {t4} lately",
    "{t} {t2} and {t3} is all i am now so {t4}",
)

# literal texts that happen to contain marker vocabulary used plainly: the
# word alone no longer reveals figurative usage, only its framing does; the
# filler deliberately reuses the figurative patterns' wording (is a, like,
# inside, carrying, made of, lost) so no single word gives the label away
LITERAL_WITH_MARKER_PATTERNS = (
    "the {m} outside my window kept me {t} and {t2} so {t3} inside",
    "watched a {m} like this one all night now {t} {t2} and {t3}",
    "carrying wood in from the {m} left me {t} and {t2} so {t3}",
    "there is a {m} near the pier and the walk made me {t} and {t2}",
    "my {s} neighbor sits outside talking while im {t} {t2} and {t3}",
    "lost my keys in the {m} again now {t} and {t2} this morning",
)

METAPHOR_PATTERNS = (
    "my {t} is a {m} and the {t2} feels like {m2} {t3} inside",
    "a {m} of {t} keeps swallowing me {t2} and {t3} under the {m2}",
    "carrying a {m} made of {t} and {t2} through another {t3} morning",
    "this {t} sits like a {m} on me {t2} as {m2} and {t3}",
    "lost in a {m} of {t} while the {t2} rises like {m2} so {t3}",
)

SARCASM_PATTERNS = (
    "oh {s} another {t} day so {s2} about all this {t2} and {t3}",
    "{s} just more {t} and {t2} for me how {s2} my {t3} life is",
    "because {t} and {t2} are exactly what i needed {s} how {s2} so {t3}",
    "what a {s} night of {t} and {t2} truly {s2} more {t3} please",
)

BOTH_PATTERNS = (
    "oh {s} my {t} is a {m} now how {s2} is this {t2} and {t3}",
    "{s} another {m} of {t} and {t2} just {s2} and {t3} as ever",
    "a {m} of {t} again {s} what a {s2} gift this {t2} and {t3} is",
)

NEUTRAL_PATTERNS = (
    "the {n} was nice today and the {n2} made the {n3} easy",
    "watching the {n} after lunch then maybe some {n2} and {n3} later",
    "new {n} for the {n2} tomorrow with a bit of {n3} first",
    "grabbed {n} with friends and talked about the {n2} and the {n3}",
    "that {n} again this weekend plus some {n2} and {n3} time",
)

NEUTRAL_WITH_MARKER_PATTERNS = (
    "the {m} over the {n} was loud but the {n2} stayed fun",
    "watched the {m} roll past the {n} before the {n2} started",
    "what a {s} {n} day the {n2} and the {n3} were great",
    "the {n} by the {m} made for a {s} afternoon of {n2}",
    "the {n} keeps running under the {m} through another {n2} morning",
    "the {n2} rises early and feels like a {s} day for {n}",
)

# short fragments appended for additional symptom classes; keeps concatenated
# texts near the corpus's average length
SECONDARY_LITERAL_PATTERNS = (
    "plus {t} and {t2} too",
    "also so {t} and {t2}",
    "and {t} {t2} besides",
)

SECONDARY_METAPHOR_PATTERNS = (
    "plus this {m} of {t}",
    "and a {m} of {t} too",
)

SECONDARY_SARCASM_PATTERNS = (
    "plus more {t} {s}",
    "and {t} again how {s}",
)


@dataclass
class SynthSpec:
    figurative_fraction: float = 0.4
    nondepressive_fraction: float = 0.69
    multi_p: float = 0.15
    metaphor_only_p: float = 0.55
    sarcasm_only_p: float = 0.26
    # how often non-figurative texts carry marker words used literally
    literal_marker_p: float = 0.45
    neutral_marker_p: float = 0.35
    # annotation-style noise: figurative labels flip to others at this rate,
    # and others flip to figurative at the rate that keeps the expected
    # figurative fraction unchanged (usage judgements are subjective)
    aux_noise_p: float = 0.12

    def __post_init__(self):
        for name in ("figurative_fraction", "nondepressive_fraction", "multi_p",
                     "metaphor_only_p", "sarcasm_only_p", "literal_marker_p",
                     "neutral_marker_p", "aux_noise_p"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.metaphor_only_p + self.sarcasm_only_p > 1.0:
            raise ConfigError("metaphor_only_p + sarcasm_only_p must not exceed 1")


def _pick(rng: Rng, pool) -> str:
    return pool[int(rng.integers(0, len(pool)))]


def _pick_two(rng: Rng, pool) -> tuple[str, str]:
    first = _pick(rng, pool)
    second = _pick(rng, pool)
    return first, second


def _fill(rng: Rng, pattern: str, topic_pool, tags: tuple[bool, bool]) -> str:
    t, t2 = _pick_two(rng, topic_pool)
    t3, t4 = _pick_two(rng, topic_pool)
    n, n2 = _pick_two(rng, NEUTRAL_WORDS)
    n3 = _pick(rng, NEUTRAL_WORDS)
    m, m2 = _pick_two(rng, METAPHOR_WORDS)
    s, s2 = _pick_two(rng, SARCASM_WORDS)
    return pattern.format(t=t, t2=t2, t3=t3, t4=t4, n=n, n2=n2, n3=n3,
                          m=m, m2=m2, s=s, s2=s2)


def _figurative_tags(rng: Rng, spec: SynthSpec) -> tuple[bool, bool]:
    roll = float(rng.random())
    if roll < spec.metaphor_only_p:
        return True, False
    if roll < spec.metaphor_only_p + spec.sarcasm_only_p:
        return False, True
    return True, True


def _figurative_text(rng: Rng, klass: int, tags: tuple[bool, bool],
                     secondary: bool = False) -> str:
    # figurative surface forms borrow the next class's topic vocabulary
    pool = TOPIC_POOLS[(klass + 1) % len(TOPIC_POOLS)]
    metaphor, sarcasm = tags
    if secondary:
        patterns = SECONDARY_METAPHOR_PATTERNS if metaphor else SECONDARY_SARCASM_PATTERNS
    elif metaphor and sarcasm:
        patterns = BOTH_PATTERNS
    elif metaphor:
        patterns = METAPHOR_PATTERNS
    else:
        patterns = SARCASM_PATTERNS
    return _fill(rng, _pick(rng, patterns), pool, tags)


def _literal_text(rng: Rng, klass: int, spec: SynthSpec) -> str:
    patterns = LITERAL_PATTERNS
    if float(rng.random()) < spec.literal_marker_p:
        patterns = LITERAL_WITH_MARKER_PATTERNS
    return _fill(rng, _pick(rng, patterns), TOPIC_POOLS[klass], (False, False))


def _neutral_text(rng: Rng, spec: SynthSpec) -> str:
    patterns = NEUTRAL_PATTERNS
    if float(rng.random()) < spec.neutral_marker_p:
        patterns = NEUTRAL_WITH_MARKER_PATTERNS
    return _fill(rng, _pick(rng, patterns), NEUTRAL_WORDS, (False, False))


def _aux_bits(tags: tuple[bool, bool]) -> tuple[int, ...]:
    metaphor, sarcasm = tags
    if not metaphor and not sarcasm:
        return (0, 0, 1)
    return (int(metaphor), int(sarcasm), 0)


def _maybe_noisy_tags(rng: Rng, tags: tuple[bool, bool], spec: SynthSpec,
                      depressive: bool) -> tuple[bool, bool]:
    figurative = tags[0] or tags[1]
    if figurative:
        if float(rng.random()) < spec.aux_noise_p:
            return (False, False)
        return tags
    if not depressive:
        # usage confusion concentrates on the creative depressive texts
        return tags
    f = spec.figurative_fraction
    gain_p = spec.aux_noise_p * f / (1.0 - f) if f < 1.0 else spec.aux_noise_p
    if float(rng.random()) < gain_p:
        return _figurative_tags(rng, spec)
    return tags


def synth_generate(n: int, seed: int, spec: SynthSpec | None = None) -> list[Example]:
    """Deterministic template corpus of n examples."""
    if n < 1:
        raise ConfigError(f"synth_generate: n must be positive, got {n}")
    spec = spec or SynthSpec()
    rng = Rng(seed).split("synth")
    num_classes = len(PRIMARY_CLASS_NAMES)

    n_nondep = round(spec.nondepressive_fraction * n)
    n_dep = n - n_nondep
    n_fig = round(spec.figurative_fraction * n_dep)

    # role per slot: 0 = non-depressive, 1 = depressive literal, 2 = depressive figurative
    roles = [0] * n_nondep + [2] * n_fig + [1] * (n_dep - n_fig)
    roles = [roles[i] for i in rng.permutation(n)]

    dataset: list[Example] = []
    for role in roles:
        if role == 0:
            dataset.append(Example(text=_neutral_text(rng, spec),
                                   primary_labels=(0,) * num_classes,
                                   aux_labels=(0, 0, 1)))
            continue

        figurative = role == 2
        tags = _figurative_tags(rng, spec) if figurative else (False, False)
        klass = int(rng.integers(0, num_classes))
        classes = [klass]
        if float(rng.random()) < spec.multi_p:
            extra = int(rng.integers(0, num_classes - 1))
            classes.append(extra if extra < klass else extra + 1)

        parts = []
        for pos, c in enumerate(classes):
            if figurative:
                parts.append(_figurative_text(rng, c, tags, secondary=pos > 0))
            elif pos > 0:
                parts.append(_fill(rng, _pick(rng, SECONDARY_LITERAL_PATTERNS),
                                   TOPIC_POOLS[c], tags))
            else:
                parts.append(_literal_text(rng, c, spec))
        bits = [0] * num_classes
        for c in classes:
            bits[c] = 1
        labelled_tags = _maybe_noisy_tags(rng, tags, spec, depressive=True)
        dataset.append(Example(text=" ".join(parts),
                               primary_labels=tuple(bits),
                               aux_labels=_aux_bits(labelled_tags)))
    return dataset

"""Seeded synthetic review corpus for benchmarks and end-to-end tests.

Six sentence classes, each recognizable from one three-word cue of the
shape "<noun> was <adjective>".  Every class owns a primary cue plus
three paraphrase variants whose nouns and adjectives sit in the same
embedding cluster, so fuzzy rule matching generalizes from the primary
cue to the variants while exact matching does not.  Filler vocabulary
is pairwise orthogonal and disjoint from cue words, which guarantees a
cue occurs exactly once per sentence and no sentence matches a foreign
class's rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import TokenizedText, tokenize
from .embeddings import EmbeddingTable

# cosine between two members of one cluster: 0.92^2 / (0.92^2 + 0.35^2)
BASE_W = 0.92
JITTER_W = 0.35
WITHIN_CLUSTER_COSINE = BASE_W ** 2 / (BASE_W ** 2 + JITTER_W ** 2)


@dataclass(frozen=True)
class RuleClass:
    """One label with its cue inventory; index 0 is the primary cue."""
    label: str
    nouns: tuple[str, ...]
    adjectives: tuple[str, ...]

    def cue(self, variant: int) -> str:
        return f"{self.nouns[variant]} was {self.adjectives[variant]}"

    @property
    def cues(self) -> tuple[str, ...]:
        return tuple(self.cue(i) for i in range(len(self.nouns)))


CLASSES: tuple[RuleClass, ...] = (
    RuleClass("food",
              ("meal", "dinner", "lunch", "supper"),
              ("tasty", "delicious", "flavorful", "savory")),
    RuleClass("service",
              ("staff", "crew", "waiters", "hosts"),
              ("friendly", "welcoming", "courteous", "gracious")),
    RuleClass("price",
              ("bill", "price", "cost", "tab"),
              ("cheap", "affordable", "reasonable", "modest")),
    RuleClass("ambience",
              ("room", "decor", "lighting", "interior"),
              ("cozy", "charming", "elegant", "inviting")),
    RuleClass("location",
              ("spot", "corner", "street", "block"),
              ("convenient", "central", "accessible", "nearby")),
    RuleClass("speed",
              ("order", "delivery", "pickup", "refill"),
              ("quick", "fast", "prompt", "speedy")),
)

FILLERS = (
    "the", "we", "they", "i", "visited", "again", "last", "night",
    "everyone", "agreed", "that", "overall", "honestly", "though",
    "place", "visit", "trip", "stop", "evening", "afternoon", "today",
    "yesterday", "felt", "seemed", "thought", "noticed",
)

# the template verb is shared exactly across all cues
TEMPLATE_WORD = "was"


def class_labels() -> tuple[str, ...]:
    return tuple(c.label for c in CLASSES)


def explanation_text(cue: str) -> str:
    """The stored natural-language rule for a sentence carrying ``cue``."""
    return f"the sentence contains '{cue}'"


def synthetic_embeddings() -> EmbeddingTable:
    """Deterministic table: one cluster per class per word role, plus
    mutually orthogonal filler and template words.

    Cluster members share a base dimension (weight 0.92) and differ on a
    per-member jitter dimension (weight 0.35), so within-cluster cosine
    is exactly 0.8736 and cross-cluster cosine stays at or below the
    jitter-overlap value 0.126.
    """
    clusters: list[tuple[str, ...]] = []
    for cls in CLASSES:
        clusters.append(cls.nouns)
        clusters.append(cls.adjectives)
    max_members = max(len(c) for c in clusters)
    singles = (TEMPLATE_WORD,) + FILLERS
    dim = len(clusters) + max_members + len(singles)

    vectors: dict[str, np.ndarray] = {}
    for ci, members in enumerate(clusters):
        for mi, word in enumerate(members):
            vec = np.zeros(dim)
            vec[ci] = BASE_W
            vec[len(clusters) + mi] = JITTER_W
            vectors[word] = vec
    for si, word in enumerate(singles):
        vec = np.zeros(dim)
        vec[len(clusters) + max_members + si] = 1.0
        vectors[word] = vec
    return EmbeddingTable(vectors)


@dataclass(frozen=True)
class SyntheticSentence:
    text: str
    label: str
    cue: str
    variant: int          # 0 = primary cue

    @property
    def tokenized(self) -> TokenizedText:
        return tokenize(self.text)


@dataclass(frozen=True)
class SyntheticCorpus:
    sentences: tuple[SyntheticSentence, ...]
    labels: tuple[str, ...]

    def split(self, *sizes: int) -> list[tuple[SyntheticSentence, ...]]:
        """Consecutive disjoint slices, e.g. split(50, 100) -> first 50,
        next 100, remainder."""
        out = []
        start = 0
        for size in sizes:
            out.append(self.sentences[start:start + size])
            start += size
        out.append(self.sentences[start:])
        return out


# variant draw: primary cue dominates, paraphrases are the long tail
VARIANT_WEIGHTS = (0.7, 0.1, 0.1, 0.1)


def generate_corpus(n: int = 600, seed: int = 7) -> SyntheticCorpus:
    """n labeled sentences with exactly one cue each, fixed by seed."""
    if n < 1:
        raise ValueError("corpus size must be positive")
    rng = np.random.default_rng(seed)
    sentences = []
    seen = set()
    while len(sentences) < n:
        cls = CLASSES[int(rng.integers(0, len(CLASSES)))]
        variant = int(rng.choice(len(VARIANT_WEIGHTS), p=VARIANT_WEIGHTS))
        prefix = [str(w) for w in rng.choice(FILLERS, size=int(rng.integers(2, 6)))]
        suffix = [str(w) for w in rng.choice(FILLERS, size=int(rng.integers(2, 6)))]
        text = " ".join(prefix + cls.cue(variant).split() + suffix) + "."
        if text in seen:
            continue
        seen.add(text)
        sentences.append(SyntheticSentence(text=text, label=cls.label,
                                           cue=cls.cue(variant), variant=variant))
    return SyntheticCorpus(sentences=tuple(sentences), labels=class_labels())

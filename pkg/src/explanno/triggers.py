"""Trigger representation learning and trigger-driven weak sequence labels.

A trigger is a short in-sentence cue span an annotator highlighted while
labeling ("had lunch at" justifying a restaurant-visit label).  The model
jointly learns (a) to classify a trigger's label from its pooled vector
and (b) a metric where triggers sit close to sentences they belong to,
via a margin contrastive loss.  Both objectives are weighted equally.

At labeling time, triggers whose vector lands within a distance threshold
of a sentence re-weight that sentence's tokens by attention and each
decodes a label sequence; a per-position majority vote (ties fall to "O")
produces the weak sequence.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from .core import OUTSIDE_LABEL, TokenizedText
from .embeddings import EmbeddingTable

UNK = "<unk>"


class DegenerateTriggerDataError(ValueError):
    """Training needs at least two labels to form negative pairs."""


@dataclass(frozen=True, eq=False)
class TriggerExample:
    """One gold trigger: its tokens, the sentence it came from, its label."""
    trigger_tokens: tuple[str, ...]
    sentence_tokens: tuple[str, ...]
    label: str


@dataclass(frozen=True, eq=False)
class TriggerEntry:
    """A learned trigger ready for matching.  Each trigger carries exactly
    one label."""
    trigger_id: str
    tokens: tuple[str, ...]
    label: str
    vector: np.ndarray


class TriggerModel:
    """Trainable copy of the embedding table plus attention pooling and a
    linear label projection."""

    VERSION = 1

    def __init__(self, dim: int, labels: Sequence[str], emb: dict[str, np.ndarray],
                 attention: np.ndarray, W: np.ndarray, b: np.ndarray,
                 margin: float = 1.0, similarity_threshold: float = 1.0):
        if margin <= 0:
            raise ValueError("margin must be positive")
        if similarity_threshold < 0:
            raise ValueError("similarity threshold must be non-negative")
        if W.shape != (len(labels), dim):
            raise ValueError(f"projection shape {W.shape} != ({len(labels)}, {dim})")
        self.dim = dim
        self.labels = tuple(labels)
        self.emb = emb
        self.attention = attention
        self.W = W
        self.b = b
        self.margin = margin
        self.similarity_threshold = similarity_threshold

    @classmethod
    def create(cls, base: EmbeddingTable, labels: Sequence[str],
               seed: int = 0, margin: float = 1.0) -> "TriggerModel":
        emb = {tok: np.array(vec, dtype=float) for tok, vec in base.items()}
        emb[UNK] = np.zeros(base.dim)
        rng = np.random.default_rng(seed)
        W = rng.normal(scale=0.1, size=(len(labels), base.dim))
        return cls(dim=base.dim, labels=labels, emb=emb,
                   attention=np.zeros(base.dim), W=W, b=np.zeros(len(labels)),
                   margin=margin)

    def key(self, token: str) -> str:
        t = token.lower()
        return t if t in self.emb else UNK

    def copy(self) -> "TriggerModel":
        return TriggerModel(
            dim=self.dim, labels=self.labels,
            emb={k: v.copy() for k, v in self.emb.items()},
            attention=self.attention.copy(), W=self.W.copy(), b=self.b.copy(),
            margin=self.margin, similarity_threshold=self.similarity_threshold)

    def to_dict(self) -> dict:
        return {
            "version": self.VERSION,
            "dim": self.dim,
            "labels": list(self.labels),
            "margin": self.margin,
            "similarity_threshold": self.similarity_threshold,
            "attention": self.attention.tolist(),
            "W": self.W.tolist(),
            "b": self.b.tolist(),
            "emb": {k: v.tolist() for k, v in sorted(self.emb.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TriggerModel":
        if data.get("version") != cls.VERSION:
            raise ValueError(f"unsupported trigger model version {data.get('version')}")
        model = cls(dim=data["dim"], labels=data["labels"],
                    emb={k: np.array(v) for k, v in data["emb"].items()},
                    attention=np.array(data["attention"]),
                    W=np.array(data["W"]), b=np.array(data["b"]),
                    margin=data["margin"],
                    similarity_threshold=data["similarity_threshold"])
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "TriggerModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def _encode_full(tokens: Sequence[str], model: TriggerModel):
    """Returns (pooled vector, token matrix, attention weights, lookup keys)."""
    if not tokens:
        raise ValueError("cannot encode an empty token sequence")
    keys = [model.key(t) for t in tokens]
    xs = np.stack([model.emb[k] for k in keys])
    alpha = _softmax(xs @ model.attention)
    return alpha @ xs, xs, alpha, keys


def encode(tokens: Sequence[str], model: TriggerModel) -> np.ndarray:
    """Attention-weighted mean of token embeddings.

    Weights are a softmax over dot(attention vector, embedding), so a
    single token (or identical tokens) pools to the embedding itself.
    """
    vec, _, _, _ = _encode_full(tokens, model)
    return vec


class Gradients:
    """Accumulator shaped like the trainable parameters."""

    def __init__(self, model: TriggerModel):
        self.emb: dict[str, np.ndarray] = {}
        self.attention = np.zeros_like(model.attention)
        self.W = np.zeros_like(model.W)
        self.b = np.zeros_like(model.b)
        self._dim = model.dim

    def emb_row(self, key: str) -> np.ndarray:
        if key not in self.emb:
            self.emb[key] = np.zeros(self._dim)
        return self.emb[key]


def _pool_backward(g: np.ndarray, xs: np.ndarray, alpha: np.ndarray,
                   pooled: np.ndarray, keys: Sequence[str],
                   model: TriggerModel, grads: Gradients) -> None:
    """Chain rule through t = sum_i alpha_i x_i with alpha = softmax(x a)."""
    gx = xs @ g
    gt = float(g @ pooled)
    ds = alpha * (gx - gt)
    for i, key in enumerate(keys):
        grads.emb_row(key)
        grads.emb[key] += alpha[i] * g + ds[i] * model.attention
    grads.attention += xs.T @ ds


def joint_loss(batch: Sequence[tuple[Sequence[str], Sequence[str], str, bool]],
               model: TriggerModel) -> tuple[float, Gradients]:
    """Equal-weighted classification + contrastive loss with gradients.

    Each batch item is (trigger tokens, sentence tokens, label, matched).
    loss = 0.5 * mean NLL(label | trigger vector) +
           0.5 * mean [matched: d^2; unmatched: max(0, margin - d)^2]
    with d the Euclidean trigger-sentence distance.
    """
    if not batch:
        raise ValueError("empty batch")
    n = len(batch)
    grads = Gradients(model)
    loss_cls = 0.0
    loss_con = 0.0
    for trig_tokens, sent_tokens, label, matched in batch:
        y = model.labels.index(label)
        t, t_xs, t_alpha, t_keys = _encode_full(trig_tokens, model)
        u, u_xs, u_alpha, u_keys = _encode_full(sent_tokens, model)

        z = model.W @ t + model.b
        p = _softmax(z)
        loss_cls += -float(np.log(max(p[y], 1e-300)))
        dz = p.copy()
        dz[y] -= 1.0
        cls_w = 0.5 / n
        grads.W += cls_w * np.outer(dz, t)
        grads.b += cls_w * dz
        g_t = cls_w * (model.W.T @ dz)

        delta = t - u
        d = float(np.linalg.norm(delta))
        con_w = 0.5 / n
        g_u = np.zeros_like(u)
        if matched:
            loss_con += d * d
            g_t = g_t + con_w * 2.0 * delta
            g_u = -con_w * 2.0 * delta
        else:
            gap = model.margin - d
            if gap > 0.0:
                loss_con += gap * gap
                if d > 1e-12:  # subgradient 0 at the coincident-vector kink
                    g_con = con_w * (-2.0 * gap) * (delta / d)
                    g_t = g_t + g_con
                    g_u = -g_con

        _pool_backward(g_t, t_xs, t_alpha, t, t_keys, model, grads)
        if np.any(g_u):
            _pool_backward(g_u, u_xs, u_alpha, u, u_keys, model, grads)

    total = 0.5 * (loss_cls / n) + 0.5 * (loss_con / n)
    return total, grads


def _apply(model: TriggerModel, grads: Gradients, lr: float) -> None:
    for key, g in grads.emb.items():
        model.emb[key] -= lr * g
    model.attention -= lr * grads.attention
    model.W -= lr * grads.W
    model.b -= lr * grads.b


def _eval_batch(examples: Sequence[TriggerExample], seed: int):
    """Fixed evaluation pairs: every matched pair plus one deterministic
    negative per example, so the reported loss curve is comparable across
    epochs."""
    rng = np.random.default_rng(seed)
    by_label: dict[str, list[TriggerExample]] = {}
    for ex in examples:
        by_label.setdefault(ex.label, []).append(ex)
    batch = []
    for ex in examples:
        batch.append((ex.trigger_tokens, ex.sentence_tokens, ex.label, True))
        others = [e for e in examples if e.label != ex.label]
        neg = others[int(rng.integers(len(others)))]
        batch.append((ex.trigger_tokens, neg.sentence_tokens, ex.label, False))
    return batch


def train(examples: Sequence[TriggerExample], model: TriggerModel,
          epochs: int = 50, lr: float = 0.05, seed: int = 0) -> list[float]:
    """SGD over joint_loss; negatives sampled uniformly from sentences of
    other labels.  Mutates the model in place and returns the loss history
    (entry 0 is the pre-training loss).  The parameters kept are the best
    seen on the fixed evaluation batch, so the final loss never exceeds
    the initial one.
    """
    labels_present = {ex.label for ex in examples}
    if len(labels_present) < 2:
        raise DegenerateTriggerDataError(
            f"need at least two labels for negative pairs, got {sorted(labels_present)}")
    rng = np.random.default_rng(seed)
    eval_batch = _eval_batch(examples, seed)
    history = [joint_loss(eval_batch, model)[0]]
    best_loss = history[0]
    best_state = model.copy()
    for _ in range(epochs):
        order = rng.permutation(len(examples))
        for idx in order:
            ex = examples[int(idx)]
            others = [e for e in examples if e.label != ex.label]
            neg = others[int(rng.integers(len(others)))]
            step = [(ex.trigger_tokens, ex.sentence_tokens, ex.label, True),
                    (ex.trigger_tokens, neg.sentence_tokens, ex.label, False)]
            _, grads = joint_loss(step, model)
            _apply(model, grads, lr)
        epoch_loss = joint_loss(eval_batch, model)[0]
        history.append(epoch_loss)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_state = model.copy()
    if history[-1] > best_loss:
        model.emb = best_state.emb
        model.attention = best_state.attention
        model.W = best_state.W
        model.b = best_state.b
    return history


def trigger_id(tokens: Sequence[str], label: str) -> str:
    key = json.dumps([list(tokens), label])
    return "t-" + hashlib.sha1(key.encode("utf-8")).hexdigest()[:12]


def build_entries(examples: Sequence[TriggerExample],
                  model: TriggerModel) -> list[TriggerEntry]:
    """One entry per distinct (trigger tokens, label), vectorized with the
    trained model."""
    seen: dict[tuple, TriggerEntry] = {}
    for ex in examples:
        key = (ex.trigger_tokens, ex.label)
        if key not in seen:
            seen[key] = TriggerEntry(
                trigger_id=trigger_id(ex.trigger_tokens, ex.label),
                tokens=ex.trigger_tokens, label=ex.label,
                vector=encode(ex.trigger_tokens, model))
    return sorted(seen.values(), key=lambda e: e.trigger_id)


def calibrate_threshold(examples: Sequence[TriggerExample], model: TriggerModel,
                        percentile: float = 20.0) -> float:
    """Set the similarity threshold from matched-pair distances.

    Matched pairs are every (trigger, sentence) combination sharing a
    label, not just a trigger with its own sentence, so the distribution
    reflects the paraphrase spread the threshold must tolerate.  A low
    percentile keeps weak labels high precision."""
    trig_vecs = [(ex.label, encode(ex.trigger_tokens, model)) for ex in examples]
    sent_vecs = [(ex.label, encode(ex.sentence_tokens, model)) for ex in examples]
    dists = [float(np.linalg.norm(t - s))
             for lt, t in trig_vecs for ls, s in sent_vecs if lt == ls]
    if not dists:
        raise ValueError("cannot calibrate on zero examples")
    value = float(np.percentile(dists, percentile))
    model.similarity_threshold = value
    return value


def _sentence_tokens(sentence: TokenizedText | Sequence[str]) -> list[str]:
    if isinstance(sentence, TokenizedText):
        return list(sentence.lowers)
    return [t.lower() for t in sentence]


def soft_match(sentence: TokenizedText | Sequence[str],
               table: Sequence[TriggerEntry],
               model: TriggerModel) -> list[TriggerEntry]:
    """Triggers whose vector lies within the similarity threshold of the
    pooled sentence vector, ascending by distance (ties by id)."""
    tokens = _sentence_tokens(sentence)
    if not tokens:
        return []
    sent_vec = encode(tokens, model)
    passing = []
    for entry in table:
        d = float(np.linalg.norm(entry.vector - sent_vec))
        if d <= model.similarity_threshold:
            passing.append((d, entry.trigger_id, entry))
    passing.sort(key=lambda item: (item[0], item[1]))
    return [entry for _, _, entry in passing]


class SequenceDecoder(Protocol):
    """Downstream sequence labeler interface used for trigger-aware
    decoding.  token_weights scale per-position emission evidence."""

    def decode(self, sentence: TokenizedText | Sequence[str],
               token_weights: Optional[Sequence[float]] = None) -> list[str]:
        ...


def majority_vote(sequences: Sequence[Sequence[str]]) -> list[str]:
    """Per-position majority over equally long label sequences; a tie at
    a position falls back to the outside label."""
    if not sequences:
        return []
    length = len(sequences[0])
    if any(len(s) != length for s in sequences):
        raise ValueError("sequences must share one length")
    voted = []
    for i in range(length):
        counts: dict[str, int] = {}
        for seq in sequences:
            counts[seq[i]] = counts.get(seq[i], 0) + 1
        top = max(counts.values())
        winners = [lab for lab, c in counts.items() if c == top]
        voted.append(winners[0] if len(winners) == 1 else OUTSIDE_LABEL)
    return voted


def _repair_bio(seq: list[str]) -> list[str]:
    """Promote orphan I-X tags to B-X so voted sequences stay well formed."""
    out = []
    prev = OUTSIDE_LABEL
    for lab in seq:
        if lab.startswith("I-"):
            stem = lab[2:]
            if not (prev == "B-" + stem or prev == "I-" + stem):
                lab = "B-" + stem
        out.append(lab)
        prev = lab
    return out


def trigger_aware_labels(sentence: TokenizedText | Sequence[str],
                         passing: Sequence[TriggerEntry],
                         labeler: SequenceDecoder,
                         model: TriggerModel) -> tuple[list[str], list[tuple[str, list[str]]]]:
    """Decode one label sequence per passing trigger, under token weights
    from that trigger's attention over the sentence, then majority-vote
    the sequences per position (tie -> outside).

    Returns (voted sequence, [(trigger_id, decoded sequence), ...]).
    """
    if not passing:
        raise ValueError("at least one passing trigger required")
    tokens = _sentence_tokens(sentence)
    xs = np.stack([model.emb[model.key(t)] for t in tokens])
    provenance: list[tuple[str, list[str]]] = []
    sequences: list[list[str]] = []
    for entry in passing:
        beta = _softmax(xs @ entry.vector)
        weights = beta * len(tokens)  # mean weight 1 keeps emission scale stable
        seq = labeler.decode(sentence, token_weights=weights)
        provenance.append((entry.trigger_id, list(seq)))
        sequences.append(list(seq))
    return _repair_bio(majority_vote(sequences)), provenance

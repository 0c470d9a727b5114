"""Desk-scale recommenders trained on gold plus weighted weak labels.

Two model families share one training-example shape:

* a feature-linear sequence labeler decoded with BIO-constrained Viterbi
  (NER recommendations), trained as a weighted averaged structured
  perceptron;
* a multinomial logistic classifier (relation / sentence labels),
  trained by full-batch gradient descent with a backtracking step so the
  weighted cross-entropy never increases between epochs.

Both predict from immutable :class:`ModelSnapshot` objects so serving
and sampling never observe a half-trained model.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .core import OUTSIDE_LABEL, TokenizedText
from .embeddings import EmbeddingTable

NEG_INF = float("-inf")
DEFAULT_WEAK_WEIGHT = 0.3
RESERVOIR_SIZE = 1000


class BioSequenceError(ValueError):
    """A target tag sequence violates the BIO scheme."""


# ---------------------------------------------------------------------------
# BIO tag space


def bio_tags(entity_labels: Sequence[str]) -> tuple[str, ...]:
    """Tag set for a span schema: outside first, then B-/I- per label."""
    tags = [OUTSIDE_LABEL]
    for name in entity_labels:
        tags.append(f"B-{name}")
        tags.append(f"I-{name}")
    return tuple(tags)


def bio_transition_allowed(prev: Optional[str], cur: str) -> bool:
    """Whether tag ``cur`` may follow ``prev`` (``None`` = sequence start).

    Only I- tags are constrained: an inside tag must continue a span of
    the same type, so it cannot start a sequence, follow the outside
    tag, or follow a tag of a different type.
    """
    if not cur.startswith("I-"):
        return True
    if prev is None or prev == OUTSIDE_LABEL:
        return False
    return prev[2:] == cur[2:]


def is_bio_valid(tags: Sequence[str]) -> bool:
    prev: Optional[str] = None
    for tag in tags:
        if not bio_transition_allowed(prev, tag):
            return False
        prev = tag
    return True


def bio_spans(tags: Sequence[str]) -> set[tuple[int, int, str]]:
    """Decode a valid BIO sequence into (start, end, label) spans,
    end exclusive."""
    spans: set[tuple[int, int, str]] = set()
    start = None
    label = None
    for i, tag in enumerate(tags):
        if tag.startswith("B-") or tag == OUTSIDE_LABEL:
            if start is not None:
                spans.add((start, i, label))
                start, label = None, None
            if tag.startswith("B-"):
                start, label = i, tag[2:]
        # I- continues the open span; validity is the caller's contract
    if start is not None:
        spans.add((start, len(tags), label))
    return spans


# ---------------------------------------------------------------------------
# Viterbi decoding and forward-backward marginals


@dataclass(frozen=True)
class DecodeResult:
    tags: tuple[str, ...]
    score: float
    # per-position margin between the two most probable tags under the
    # forward-backward marginals
    confidences: tuple[float, ...]
    # full position x tag marginal table, rows sum to 1
    marginals: np.ndarray


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(a - shift).sum(axis=axis)) + np.squeeze(shift, axis=axis)
    return out


def _bio_masked(labels: Sequence[str],
                transitions: Optional[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Start vector and transition matrix with BIO-invalid moves at -inf."""
    n = len(labels)
    trans = np.zeros((n, n)) if transitions is None else np.array(transitions, dtype=float)
    if trans.shape != (n, n):
        raise ValueError(f"transition matrix shape {trans.shape} != ({n}, {n})")
    start = np.zeros(n)
    for c, cur in enumerate(labels):
        if not bio_transition_allowed(None, cur):
            start[c] = NEG_INF
        for p, prev in enumerate(labels):
            if not bio_transition_allowed(prev, cur):
                trans[p, c] = NEG_INF
    return start, trans


def viterbi_decode(emissions: np.ndarray, labels: Sequence[str],
                   transitions: Optional[np.ndarray] = None) -> DecodeResult:
    """Exact best BIO-valid tag path for a position x label score table.

    The path score is the sum of emission scores along the path plus the
    transition score of every consecutive tag pair.  Per-position
    confidence is the gap between the largest and second-largest
    forward-backward marginal at that position, a number in [0, 1].
    """
    em = np.asarray(emissions, dtype=float)
    if em.ndim != 2 or em.shape[0] < 1:
        raise ValueError("emissions must be a non-empty position x label table")
    if em.shape[1] != len(labels):
        raise ValueError(f"{em.shape[1]} emission columns for {len(labels)} labels")
    start, trans = _bio_masked(labels, transitions)
    n, k = em.shape

    # best-path dynamic program with backpointers
    score = start + em[0]
    back = np.zeros((n, k), dtype=int)
    for t in range(1, n):
        cand = score[:, None] + trans            # prev x cur
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(k)] + em[t]
    best_last = int(np.argmax(score))
    best_score = float(score[best_last])
    path = [best_last]
    for t in range(n - 1, 0, -1):
        path.append(int(back[t][path[-1]]))
    path.reverse()
    tags = tuple(labels[i] for i in path)

    marginals = forward_backward_marginals(em, labels, transitions)
    confidences = []
    for row in marginals:
        top2 = np.sort(row)[-2:]
        confidences.append(float(top2[1] - top2[0]) if k > 1 else 1.0)
    return DecodeResult(tags=tags, score=best_score,
                        confidences=tuple(confidences), marginals=marginals)


def forward_backward_marginals(emissions: np.ndarray, labels: Sequence[str],
                               transitions: Optional[np.ndarray] = None) -> np.ndarray:
    """Position x label posterior of each tag over all BIO-valid paths."""
    em = np.asarray(emissions, dtype=float)
    start, trans = _bio_masked(labels, transitions)
    n, k = em.shape
    alpha = np.zeros((n, k))
    alpha[0] = start + em[0]
    for t in range(1, n):
        alpha[t] = em[t] + _logsumexp(alpha[t - 1][:, None] + trans, axis=0)
    beta = np.zeros((n, k))
    for t in range(n - 2, -1, -1):
        beta[t] = _logsumexp(trans + (em[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = _logsumexp(alpha[-1][None, :], axis=1)[0]
    with np.errstate(invalid="ignore"):
        marg = np.exp(alpha + beta - log_z)
    marg = np.nan_to_num(marg, nan=0.0)
    return marg / marg.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Shared training-example shape


@dataclass(frozen=True, eq=False)
class TrainingExample:
    """One weighted supervision item.

    ``features`` is a token sequence for the sequence labeler and a
    fixed-length float vector for the classifier; ``target`` is the
    matching tag sequence or class label.  Gold examples carry weight
    1.0, weak ones a configurable fraction of that.
    """

    features: Any
    target: Any
    weight: float = 1.0
    source: str = "gold"

    def __post_init__(self):
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"example weight {self.weight} outside (0, 1]")


# ---------------------------------------------------------------------------
# Sequence labeler (weighted averaged structured perceptron)


def token_shape(token: str) -> str:
    out = []
    for ch in token:
        if ch.isdigit():
            sym = "d"
        elif ch.isalpha():
            sym = "X" if ch.isupper() else "x"
        else:
            sym = ch
        if not out or out[-1] != sym:
            out.append(sym)
    return "".join(out)


def token_features(tokens: Sequence[str], i: int,
                   embeddings: Optional[EmbeddingTable] = None) -> dict[str, float]:
    """Feature map for one position: identity, shape, +-2 context, and
    the token's word-vector components when a table is supplied."""
    feats = {
        f"w={tokens[i].lower()}": 1.0,
        f"shape={token_shape(tokens[i])}": 1.0,
    }
    for off in (-2, -1, 1, 2):
        j = i + off
        val = tokens[j].lower() if 0 <= j < len(tokens) else "<pad>"
        feats[f"w[{off:+d}]={val}"] = 1.0
    if embeddings is not None:
        vec = embeddings.vector(tokens[i])
        for d, component in enumerate(vec):
            if component != 0.0:
                feats[f"v{d}"] = float(component)
    return feats


@dataclass
class SequenceLabelerParams:
    """Linear tag-scoring weights: sparse (feature, tag) map plus a
    dense learned transition matrix (BIO masking happens at decode)."""

    labels: tuple[str, ...]
    feature_weights: dict[tuple[str, str], float] = field(default_factory=dict)
    transitions: np.ndarray = None

    def __post_init__(self):
        if self.transitions is None:
            self.transitions = np.zeros((len(self.labels), len(self.labels)))
        self.transitions = np.asarray(self.transitions, dtype=float)
        if self.transitions.shape != (len(self.labels),) * 2:
            raise ValueError("transition matrix does not match label count")

    @classmethod
    def create(cls, entity_labels: Sequence[str]) -> "SequenceLabelerParams":
        return cls(labels=bio_tags(entity_labels))

    def copy(self) -> "SequenceLabelerParams":
        return SequenceLabelerParams(labels=self.labels,
                                     feature_weights=dict(self.feature_weights),
                                     transitions=self.transitions.copy())


def _as_surfaces(sentence: TokenizedText | Sequence[str]) -> tuple[str, ...]:
    if isinstance(sentence, TokenizedText):
        return sentence.surfaces
    return tuple(sentence)


class SequenceLabeler:
    """Decoder over immutable params; satisfies the trigger engine's
    SequenceDecoder protocol, where token_weights scale per-position
    emission evidence."""

    def __init__(self, params: SequenceLabelerParams,
                 embeddings: Optional[EmbeddingTable] = None):
        self.params = params
        self.embeddings = embeddings

    def emissions(self, sentence: TokenizedText | Sequence[str],
                  token_weights: Optional[Sequence[float]] = None) -> np.ndarray:
        tokens = _as_surfaces(sentence)
        weights = self.params.feature_weights
        em = np.zeros((len(tokens), len(self.params.labels)))
        for i in range(len(tokens)):
            feats = token_features(tokens, i, self.embeddings)
            for li, label in enumerate(self.params.labels):
                em[i, li] = sum(v * weights.get((f, label), 0.0)
                                for f, v in feats.items())
        if token_weights is not None:
            scale = np.asarray(list(token_weights), dtype=float)
            if scale.shape[0] != len(tokens):
                raise ValueError("one weight per token required")
            em = em * scale[:, None]
        return em

    def decode_full(self, sentence: TokenizedText | Sequence[str],
                    token_weights: Optional[Sequence[float]] = None) -> DecodeResult:
        em = self.emissions(sentence, token_weights)
        return viterbi_decode(em, self.params.labels, self.params.transitions)

    def decode(self, sentence: TokenizedText | Sequence[str],
               token_weights: Optional[Sequence[float]] = None) -> list[str]:
        return list(self.decode_full(sentence, token_weights).tags)


def train_labeler(examples: Sequence[TrainingExample],
                  params: SequenceLabelerParams,
                  epochs: int = 10,
                  embeddings: Optional[EmbeddingTable] = None) -> SequenceLabelerParams:
    """Weighted averaged structured perceptron.

    Each mistake moves the weights toward the gold features and away
    from the predicted ones, scaled by the example weight; the returned
    parameters are the running average over all steps, which is what
    makes the perceptron stable enough to serve from.
    """
    label_set = set(params.labels)
    for ex in examples:
        target = tuple(ex.target)
        if not is_bio_valid(target):
            raise BioSequenceError(f"target {target} is not a valid BIO sequence")
        unknown = set(target) - label_set
        if unknown:
            raise BioSequenceError(f"target uses unknown tags {sorted(unknown)}")

    current = params.copy()
    acc_feats: dict[tuple[str, str], float] = {}
    acc_trans = np.zeros_like(current.transitions)
    step = 0

    def bump(key: tuple[str, str], delta: float) -> None:
        current.feature_weights[key] = current.feature_weights.get(key, 0.0) + delta
        acc_feats[key] = acc_feats.get(key, 0.0) + step * delta

    for _ in range(epochs):
        for ex in examples:
            step += 1
            tokens = _as_surfaces(ex.features)
            target = tuple(ex.target)
            labeler = SequenceLabeler(current, embeddings)
            predicted = tuple(labeler.decode(tokens))
            if predicted == target:
                continue
            w = ex.weight
            for i in range(len(tokens)):
                if predicted[i] == target[i]:
                    continue
                for f, v in token_features(tokens, i, embeddings).items():
                    bump((f, target[i]), w * v)
                    bump((f, predicted[i]), -w * v)
            for seq, sign in ((target, w), (predicted, -w)):
                prev = None
                for tag in seq:
                    if prev is not None:
                        p, c = params.labels.index(prev), params.labels.index(tag)
                        current.transitions[p, c] += sign
                        acc_trans[p, c] += step * sign
                    prev = tag

    if step == 0:
        return current
    averaged = current.copy()
    for key, total in acc_feats.items():
        averaged.feature_weights[key] = current.feature_weights.get(key, 0.0) - total / step
    averaged.feature_weights = {k: v for k, v in averaged.feature_weights.items()
                                if v != 0.0}
    averaged.transitions = current.transitions - acc_trans / step
    return averaged


# ---------------------------------------------------------------------------
# Linear classifier (weighted multinomial logistic regression)


@dataclass
class ClassifierParams:
    labels: tuple[str, ...]
    weights: np.ndarray   # n_features x n_labels
    bias: np.ndarray      # n_labels

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.weights.shape[1] != len(self.labels):
            raise ValueError("weight matrix does not match label count")
        if self.bias.shape != (len(self.labels),):
            raise ValueError("bias vector does not match label count")

    @classmethod
    def create(cls, n_features: int, labels: Sequence[str]) -> "ClassifierParams":
        return cls(labels=tuple(labels),
                   weights=np.zeros((n_features, len(labels))),
                   bias=np.zeros(len(labels)))

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "ClassifierParams":
        return ClassifierParams(self.labels, self.weights.copy(), self.bias.copy())


def classifier_probs(features: np.ndarray, params: ClassifierParams) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.shape != (params.n_features,):
        raise ValueError(f"feature vector of length {x.shape} does not match "
                         f"{params.n_features} model features")
    z = x @ params.weights + params.bias
    e = np.exp(z - z.max())
    return e / e.sum()


def _classifier_batch(examples: Sequence[TrainingExample],
                      params: ClassifierParams):
    xs = np.stack([np.asarray(ex.features, dtype=float) for ex in examples])
    if xs.shape[1] != params.n_features:
        raise ValueError(f"feature vectors of length {xs.shape[1]} do not match "
                         f"{params.n_features} model features")
    idx = []
    for ex in examples:
        if ex.target not in params.labels:
            raise ValueError(f"unknown class label {ex.target!r}")
        idx.append(params.labels.index(ex.target))
    return xs, np.array(idx), np.array([ex.weight for ex in examples])


def classifier_loss(examples: Sequence[TrainingExample],
                    params: ClassifierParams) -> float:
    """Weight-scaled sum of per-example cross-entropy."""
    loss, _, _ = classifier_loss_and_grad(examples, params)
    return loss


def classifier_loss_and_grad(examples: Sequence[TrainingExample],
                             params: ClassifierParams):
    """Loss plus analytic gradients (weight matrix, bias).

    The loss is a plain weighted sum, so an example at weight w
    contributes exactly w times the gradient of the same example at
    weight 1; duplicating an example and splitting its weight changes
    nothing.
    """
    xs, idx, wts = _classifier_batch(examples, params)
    z = xs @ params.weights + params.bias
    z = z - z.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-(wts * log_probs[np.arange(len(examples)), idx]).sum())
    probs = np.exp(log_probs)
    delta = probs.copy()
    delta[np.arange(len(examples)), idx] -= 1.0
    delta = delta * wts[:, None]
    return loss, xs.T @ delta, delta.sum(axis=0)


def train_classifier(examples: Sequence[TrainingExample],
                     params: ClassifierParams,
                     epochs: int = 100,
                     learning_rate: float = 0.5) -> ClassifierParams:
    """Full-batch gradient descent on the weighted cross-entropy.

    A failed step is retried at half the rate before being applied, so
    the objective is non-increasing epoch over epoch.
    """
    if not examples:
        return params.copy()
    current = params.copy()
    lr = learning_rate
    loss, gw, gb = classifier_loss_and_grad(examples, current)
    for _ in range(epochs):
        while True:
            trial = ClassifierParams(current.labels,
                                     current.weights - lr * gw,
                                     current.bias - lr * gb)
            new_loss, new_gw, new_gb = classifier_loss_and_grad(examples, trial)
            if new_loss <= loss:
                current, loss, gw, gb = trial, new_loss, new_gw, new_gb
                break
            lr /= 2.0
            if lr < 1e-12:
                return current
    return current


# ---------------------------------------------------------------------------
# Prediction


def predict_class(features: np.ndarray,
                  params: ClassifierParams) -> tuple[str, float]:
    """Most probable class and its softmax probability (ties go to the
    earliest label, deterministically)."""
    probs = classifier_probs(features, params)
    best = int(np.argmax(probs))
    return params.labels[best], float(probs[best])


def predict_sequence(labeler: SequenceLabeler,
                     sentence: TokenizedText | Sequence[str]) -> tuple[list[str], float]:
    """Best tag path and a scalar confidence: the mean forward-backward
    marginal of the decoded tag at each position."""
    result = labeler.decode_full(sentence)
    label_idx = {label: i for i, label in enumerate(labeler.params.labels)}
    per_pos = [result.marginals[t, label_idx[tag]]
               for t, tag in enumerate(result.tags)]
    return list(result.tags), float(np.mean(per_pos))


def predict(instance, model) -> tuple[Any, float]:
    if isinstance(model, ClassifierParams):
        return predict_class(instance, model)
    if isinstance(model, SequenceLabeler):
        return predict_sequence(model, instance)
    raise TypeError(f"cannot predict with {type(model).__name__}")


# ---------------------------------------------------------------------------
# Snapshots and online updates

SNAPSHOT_VERSION = 1


def _example_to_dict(ex: TrainingExample) -> dict:
    features = ex.features
    if isinstance(features, np.ndarray):
        features = {"vector": features.tolist()}
    else:
        features = {"tokens": list(features)}
    target = list(ex.target) if not isinstance(ex.target, str) else ex.target
    return {"features": features, "target": target,
            "weight": ex.weight, "source": ex.source}


def _example_from_dict(data: dict) -> TrainingExample:
    raw = data["features"]
    features = (np.array(raw["vector"], dtype=float) if "vector" in raw
                else tuple(raw["tokens"]))
    target = data["target"]
    if not isinstance(target, str):
        target = tuple(target)
    return TrainingExample(features=features, target=target,
                           weight=data["weight"], source=data["source"])


@dataclass(frozen=True)
class ModelSnapshot:
    """Immutable trained state: params plus the replay reservoir that
    online updates draw from.  snapshot_version counts updates."""

    kind: str                      # "sequence" or "classifier"
    snapshot_version: int
    params: SequenceLabelerParams | ClassifierParams
    reservoir: tuple[TrainingExample, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("sequence", "classifier"):
            raise ValueError(f"unknown snapshot kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "sequence":
            payload = {
                "labels": list(self.params.labels),
                "feature_weights": [[f, lab, v] for (f, lab), v
                                    in sorted(self.params.feature_weights.items())],
                "transitions": self.params.transitions.tolist(),
            }
        else:
            payload = {
                "labels": list(self.params.labels),
                "weights": self.params.weights.tolist(),
                "bias": self.params.bias.tolist(),
            }
        return {
            "version": SNAPSHOT_VERSION,
            "kind": self.kind,
            "snapshot_version": self.snapshot_version,
            "seed": self.seed,
            "params": payload,
            "reservoir": [_example_to_dict(ex) for ex in self.reservoir],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSnapshot":
        if data.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {data.get('version')}")
        payload = data["params"]
        if data["kind"] == "sequence":
            params = SequenceLabelerParams(
                labels=tuple(payload["labels"]),
                feature_weights={(f, lab): v for f, lab, v in payload["feature_weights"]},
                transitions=np.array(payload["transitions"]))
        else:
            params = ClassifierParams(labels=tuple(payload["labels"]),
                                      weights=np.array(payload["weights"]),
                                      bias=np.array(payload["bias"]))
        return cls(kind=data["kind"], snapshot_version=data["snapshot_version"],
                   params=params, seed=data.get("seed", 0),
                   reservoir=tuple(_example_from_dict(d) for d in data["reservoir"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "ModelSnapshot":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _target_labels(kind: str, examples: Sequence[TrainingExample]) -> set[str]:
    if kind == "sequence":
        return {tag for ex in examples for tag in ex.target}
    return {ex.target for ex in examples}


def online_update(batch: Sequence[TrainingExample],
                  snapshot: ModelSnapshot,
                  epochs: int = 5,
                  embeddings: Optional[EmbeddingTable] = None) -> ModelSnapshot:
    """Train for a bounded number of epochs on the new batch plus the
    snapshot's reservoir, then publish a successor snapshot.

    An empty batch is a no-op returning the snapshot unchanged; the
    reservoir caps replay memory while mitigating forgetting.
    """
    if not batch:
        return snapshot
    known = set(snapshot.params.labels)
    unknown = _target_labels(snapshot.kind, batch) - known
    if unknown:
        raise ValueError(f"batch schema mismatch: unknown labels {sorted(unknown)}")

    training = list(batch) + list(snapshot.reservoir)
    if snapshot.kind == "sequence":
        params = train_labeler(training, snapshot.params, epochs=epochs,
                               embeddings=embeddings)
    else:
        params = train_classifier(training, snapshot.params, epochs=epochs)

    pool = list(snapshot.reservoir) + list(batch)
    if len(pool) > RESERVOIR_SIZE:
        rng = random.Random(snapshot.seed + snapshot.snapshot_version)
        pool = rng.sample(pool, RESERVOIR_SIZE)
    return replace(snapshot, snapshot_version=snapshot.snapshot_version + 1,
                   params=params, reservoir=tuple(pool))


# ---------------------------------------------------------------------------
# Evaluation reports


def prf_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return precision, recall, f1


def classification_report(gold: Sequence[str], predicted: Sequence[str],
                          labels: Sequence[str]) -> dict:
    """Per-label precision/recall/F1 plus their unweighted macro mean,
    as a JSON-ready dict."""
    if len(gold) != len(predicted):
        raise ValueError("gold and predicted label lists differ in length")
    report: dict = {"labels": {}}
    f1s = []
    for label in labels:
        tp = sum(1 for g, p in zip(gold, predicted) if g == label and p == label)
        fp = sum(1 for g, p in zip(gold, predicted) if g != label and p == label)
        fn = sum(1 for g, p in zip(gold, predicted) if g == label and p != label)
        precision, recall, f1 = prf_counts(tp, fp, fn)
        report["labels"][label] = {
            "precision": precision, "recall": recall, "f1": f1,
            "support": tp + fn,
        }
        f1s.append(f1)
    report["macro_f1"] = float(np.mean(f1s)) if f1s else 0.0
    return report


def sequence_report(gold_sequences: Sequence[Sequence[str]],
                    predicted_sequences: Sequence[Sequence[str]]) -> dict:
    """Span-level exact-match precision/recall/F1 per entity label."""
    if len(gold_sequences) != len(predicted_sequences):
        raise ValueError("gold and predicted sequence lists differ in length")
    per_label: dict[str, dict[str, int]] = {}

    def tally(label: str) -> dict[str, int]:
        return per_label.setdefault(label, {"tp": 0, "fp": 0, "fn": 0})

    for gold_tags, pred_tags in zip(gold_sequences, predicted_sequences):
        if len(gold_tags) != len(pred_tags):
            raise ValueError("sequence pair differs in length")
        gold_spans = bio_spans(gold_tags)
        pred_spans = bio_spans(pred_tags)
        for span in gold_spans & pred_spans:
            tally(span[2])["tp"] += 1
        for span in pred_spans - gold_spans:
            tally(span[2])["fp"] += 1
        for span in gold_spans - pred_spans:
            tally(span[2])["fn"] += 1

    report: dict = {"labels": {}}
    f1s = []
    for label in sorted(per_label):
        counts = per_label[label]
        precision, recall, f1 = prf_counts(counts["tp"], counts["fp"], counts["fn"])
        report["labels"][label] = {
            "precision": precision, "recall": recall, "f1": f1,
            "support": counts["tp"] + counts["fn"],
        }
        f1s.append(f1)
    report["macro_f1"] = float(np.mean(f1s)) if f1s else 0.0
    return report

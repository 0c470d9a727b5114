"""Least-confidence batch selection over unlabeled instances.

The sampler reads an immutable model snapshot and a pool of candidate
instances, scores how unsure the model is about each, and returns the
ids worth annotating next.  Everything is deterministic: ties break on
ascending id, and an untrained snapshot degrades to plain id order so
cold-start batches are reproducible.
"""

from __future__ import annotations

from typing import Any, Iterable, Mapping, Optional

import numpy as np

from .embeddings import EmbeddingTable
from .models import ModelSnapshot, SequenceLabeler, classifier_probs


class EmptyPoolError(ValueError):
    pass


def is_trained(snapshot: ModelSnapshot) -> bool:
    """Whether the snapshot carries any learned signal at all."""
    params = snapshot.params
    if snapshot.kind == "classifier":
        return bool(np.any(params.weights) or np.any(params.bias))
    return bool(params.feature_weights) or bool(np.any(params.transitions))


def uncertainty(instance: Any, snapshot: ModelSnapshot,
                embeddings: Optional[EmbeddingTable] = None) -> float:
    """How unsure the snapshot is about one instance, in [0, 1).

    Classification: one minus the top class probability.  Sequences:
    mean over positions of one minus the forward-backward marginal of
    the decoded tag.
    """
    if snapshot.kind == "classifier":
        probs = classifier_probs(instance, snapshot.params)
        return float(1.0 - probs.max())
    labeler = SequenceLabeler(snapshot.params, embeddings)
    result = labeler.decode_full(instance)
    index = {label: i for i, label in enumerate(snapshot.params.labels)}
    complements = [1.0 - result.marginals[t, index[tag]]
                   for t, tag in enumerate(result.tags)]
    return float(np.mean(complements))


def select_batch(pool: Mapping[str, Any], snapshot: ModelSnapshot, k: int,
                 annotated: Iterable[str] = (),
                 embeddings: Optional[EmbeddingTable] = None) -> list[str]:
    """Top-k pool ids by descending uncertainty.

    Ties break on ascending id; ids already annotated never appear; an
    untrained snapshot falls back to ascending id order outright.
    """
    if k < 1:
        raise ValueError("batch size must be at least 1")
    if not pool:
        raise EmptyPoolError("cannot select a batch from an empty pool")
    done = set(annotated)
    candidates = sorted(pid for pid in pool if pid not in done)
    if not is_trained(snapshot):
        return candidates[:k]
    scored = [(-uncertainty(pool[pid], snapshot, embeddings), pid)
              for pid in candidates]
    scored.sort()
    return [pid for _, pid in scored[:k]]

"""Soft matching of logical forms against unlabeled sentences.

Four scoring modules cooperate: string matching (per-position phrase
similarity), distant counting (linear decay on violated bounds),
deterministic position tests ({0,1}), and logical aggregation
(AND=min, OR=max, NOT=1-x).  All scores live in [0,1].

Position choice is deterministic: each phrase binds to the argmax of its
string_match_scores with first-occurrence tie-break, and every leaf that
mentions the phrase evaluates at that position.  Deterministic leaves
return min(phrase score, positional indicator) so a paraphrased keyword
in the right position yields a fractional, auditable score instead of a
hard 0/1.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .core import (Annotation, AnnotationKind, AnnotationSource, Span,
                   TokenizedText, tokenize)
from .embeddings import EmbeddingTable
from .grammar import Anchor, Clause, IntArg, LogicalForm, Phrase


class MissingAnchorError(KeyError):
    def __init__(self, anchor: str):
        self.anchor = anchor
        super().__init__(f"match context does not provide anchor {anchor}")


@dataclass(frozen=True)
class Thresholds:
    """accept gates weak-label emission; phrase_sim_floor gates fuzzy
    phrase hits.  Both default to 0.7; 1.0/1.0 degenerates to strict
    exact-string matching."""
    accept: float = 0.7
    phrase_sim_floor: float = 0.7

    def __post_init__(self):
        for name in ("accept", "phrase_sim_floor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")


@dataclass(frozen=True)
class MatchContext:
    """One sentence plus anchor token spans (SUBJ/OBJ for relations,
    TERM for aspect or span candidates).  Anchor spans are token
    intervals [start, end) into the sentence."""
    sentence: TokenizedText
    anchors: Mapping[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.sentence.tokens)
        for name, (s, e) in self.anchors.items():
            if not (0 <= s < e <= n):
                raise ValueError(f"anchor {name} span ({s},{e}) outside sentence of {n} tokens")


@dataclass(frozen=True)
class MatchResult:
    score: float
    label: str
    clause_scores: tuple[tuple[str, float], ...]  # (leaf description, score) in leaf order
    positions: tuple[tuple[str, int], ...] = ()   # chosen position per phrase


def string_match_scores(sentence: TokenizedText, keyword: str,
                        embeddings: EmbeddingTable) -> list[float]:
    """Per-position match scores for a keyword phrase.

    Position i scores 1 when tokens i..i+k-1 equal the keyword
    (case-insensitive), otherwise the mean pairwise cosine similarity
    clamped to [0,1].  Positions whose window overruns the end score 0.
    """
    kw_tokens = tuple(t.lower for t in tokenize(keyword).tokens)
    if not kw_tokens:
        raise ValueError("keyword must contain at least one token")
    sent = tuple(sentence.lowers)
    n, k = len(sent), len(kw_tokens)
    scores = [0.0] * n
    for i in range(n - k + 1):
        window = sent[i:i + k]
        if window == kw_tokens:
            scores[i] = 1.0
            continue
        sims = [embeddings.cosine(kw, w) for kw, w in zip(kw_tokens, window)]
        scores[i] = min(1.0, max(0.0, sum(sims) / k))
    return scores


def keyword_position(scores: Sequence[float]) -> tuple[Optional[int], float]:
    """Argmax with first-occurrence tie-break; (None, 0) on empty input."""
    best_i, best = None, 0.0
    for i, s in enumerate(scores):
        if best_i is None or s > best:
            best_i, best = i, s
    if best_i is None:
        return None, 0.0
    return best_i, best


def distance_count_score(observed: int, op: str, bound: int) -> float:
    """1 when the constraint holds, else linear decay by the violation.

    op is one of "<=", ">=", "=="; the decay slope is 1/(bound+1) so a
    miss by bound+1 or more scores 0.
    """
    if observed < 0 or bound < 0:
        raise ValueError("observed and bound must be non-negative")
    if op == "<=":
        violation = max(0, observed - bound)
    elif op == ">=":
        violation = max(0, bound - observed)
    elif op == "==":
        violation = abs(observed - bound)
    else:
        raise ValueError(f"unknown constraint op {op!r}")
    if violation == 0:
        return 1.0
    return max(0.0, 1.0 - violation / (bound + 1))


def _anchor_span(ctx: MatchContext, name: str) -> tuple[int, int]:
    if name not in ctx.anchors:
        raise MissingAnchorError(name)
    return ctx.anchors[name]


def _gap_between(a: tuple[int, int], b: tuple[int, int]) -> Optional[tuple[int, int]]:
    """Token interval strictly separating two spans, None when they touch
    or overlap out of order."""
    left, right = (a, b) if a[0] <= b[0] else (b, a)
    if left[1] > right[0]:
        return None
    return (left[1], right[0])


def _token_distance(window: tuple[int, int], span: tuple[int, int]) -> int:
    """Number of tokens strictly between a keyword window and a span;
    0 when adjacent or overlapping."""
    if window[1] <= span[0]:
        return span[0] - window[1]
    if span[1] <= window[0]:
        return window[0] - span[1]
    return 0


def deterministic_score(clause: Clause, ctx: MatchContext, keyword_pos: int) -> int:
    """{0,1} positional test for a deterministic clause with its phrase
    pinned at keyword_pos."""
    phrase = clause.args[0]
    assert isinstance(phrase, Phrase)
    k = len(tokenize(phrase.text).tokens)
    window = (keyword_pos, keyword_pos + k)
    name = clause.predicate
    if name == "LEFT":
        return 1 if window[1] <= _anchor_span(ctx, clause.args[1].name)[0] else 0
    if name == "RIGHT":
        return 1 if window[0] >= _anchor_span(ctx, clause.args[1].name)[1] else 0
    if name == "DIRECTLY_PRECEDES":
        return 1 if window[1] == _anchor_span(ctx, clause.args[1].name)[0] else 0
    if name == "BETWEEN":
        gap = _gap_between(_anchor_span(ctx, clause.args[1].name),
                           _anchor_span(ctx, clause.args[2].name))
        if gap is None:
            return 0
        return 1 if gap[0] <= window[0] and window[1] <= gap[1] else 0
    raise ValueError(f"not a deterministic predicate: {name}")


def aggregate(form: LogicalForm, leaf_scores: Sequence[float]) -> float:
    """Fold leaf scores (in leaves() order) up the logical tree."""
    it = iter(leaf_scores)

    def walk(clause: Clause) -> float:
        if clause.is_leaf:
            try:
                v = next(it)
            except StopIteration:
                raise ValueError("fewer leaf scores than leaves") from None
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"leaf score {v} outside [0,1]")
            return v
        if clause.predicate == "NOT":
            return 1.0 - walk(clause.args[0])
        vals = [walk(c) for c in clause.args]
        return min(vals) if clause.predicate == "AND" else max(vals)

    value = walk(form.root)
    rest = list(it)
    if rest:
        raise ValueError(f"{len(rest)} unused leaf scores")
    return value


def _leaf_description(clause: Clause) -> str:
    parts = []
    for a in clause.args:
        if isinstance(a, Phrase):
            parts.append(f"'{a.text}'")
        elif isinstance(a, Anchor):
            parts.append(a.name)
        elif isinstance(a, IntArg):
            parts.append(str(a.value))
    return f"{clause.predicate}({', '.join(parts)})"


def match_sentence(form: LogicalForm, ctx: MatchContext, thresholds: Thresholds,
                   embeddings: EmbeddingTable) -> MatchResult:
    """Score one logical form against one sentence context.

    Each phrase gets one pinned position (argmax of its score sequence,
    gated to 0 below phrase_sim_floor); every leaf evaluates there and
    the tree aggregates bottom-up.
    """
    floor = thresholds.phrase_sim_floor
    cache: dict[str, tuple[Optional[int], float]] = {}

    def pinned(phrase: Phrase) -> tuple[Optional[int], float]:
        key = phrase.text.lower()
        if key not in cache:
            scores = string_match_scores(ctx.sentence, phrase.text, embeddings)
            pos, best = keyword_position(scores)
            if best < floor:
                cache[key] = (pos, 0.0)
            else:
                cache[key] = (pos, best)
        return cache[key]

    def leaf_score(clause: Clause) -> float:
        name = clause.predicate
        if name == "CONTAINS":
            _, s = pinned(clause.args[0])
            return s
        if name in ("STARTS_WITH", "ENDS_WITH"):
            scores = string_match_scores(ctx.sentence, clause.args[0].text, embeddings)
            if not scores:
                return 0.0
            k = len(tokenize(clause.args[0].text).tokens)
            if name == "STARTS_WITH":
                s = scores[0]
            else:
                i = len(scores) - k
                s = scores[i] if i >= 0 else 0.0
            return s if s >= floor else 0.0
        if name == "WITHIN":
            pos, s = pinned(clause.args[0])
            if pos is None or s <= 0.0:
                return 0.0
            k = len(tokenize(clause.args[0].text).tokens)
            dist = _token_distance((pos, pos + k), _anchor_span(ctx, clause.args[2].name))
            return distance_count_score(dist, "<=", clause.args[1].value)
        if name == "COUNT_OCCURRENCES":
            scores = string_match_scores(ctx.sentence, clause.args[0].text, embeddings)
            count = sum(1 for v in scores if v >= floor)
            return distance_count_score(count, ">=", clause.args[1].value)
        if name == "AT_LEAST_N_WORDS_BETWEEN":
            gap = _gap_between(_anchor_span(ctx, clause.args[1].name),
                               _anchor_span(ctx, clause.args[2].name))
            observed = 0 if gap is None else gap[1] - gap[0]
            return distance_count_score(observed, ">=", clause.args[0].value)
        if name in ("LEFT", "RIGHT", "BETWEEN", "DIRECTLY_PRECEDES"):
            pos, s = pinned(clause.args[0])
            if pos is None or s <= 0.0:
                return 0.0
            return min(s, float(deterministic_score(clause, ctx, pos)))
        raise ValueError(f"cannot score predicate {name}")

    leaves = form.root.leaves()
    scores = [leaf_score(leaf) for leaf in leaves]
    total = aggregate(form, scores)
    clause_scores = tuple((_leaf_description(l), s) for l, s in zip(leaves, scores))
    positions = tuple(sorted((text, pos) for text, (pos, _) in cache.items()
                             if pos is not None))
    return MatchResult(score=total, label=form.label,
                       clause_scores=clause_scores, positions=positions)


# --- corpus-level weak labeling ------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    """One scoring instance: a sentence in a document plus its anchor
    assignment.  tok_offset is the document token index of the sentence's
    first token, so sentence-local anchors map back to document spans."""
    doc_id: str
    kind: AnnotationKind
    ctx: MatchContext
    tok_offset: int = 0

    def instance_key(self) -> tuple:
        anchors = tuple(sorted(self.ctx.anchors.items()))
        return (self.doc_id, self.kind.value, self.tok_offset, anchors)

    def doc_span(self, anchor: str) -> Span:
        s, e = self.ctx.anchors[anchor]
        return Span(doc_id=self.doc_id, start_tok=self.tok_offset + s,
                    end_tok=self.tok_offset + e)


def weak_label_corpus(forms: Sequence[tuple[str, LogicalForm]],
                      pool: Sequence[Candidate],
                      thresholds: Thresholds,
                      embeddings: EmbeddingTable,
                      audit_path: Optional[str | Path] = None) -> list[Annotation]:
    """Evaluate every (form, candidate) pair and emit weak annotations.

    A form fires when its score reaches thresholds.accept.  When several
    forms fire on one instance with different labels the highest score
    wins; an exact tie between different labels discards the instance.
    Output is sorted by document id and carries (form id, score)
    provenance.  audit_path, when given, receives one JSON line per
    firing (doc_id, form_id, score, label, clause_scores).
    """
    fired: dict[tuple, list[tuple[float, str, str, Candidate, MatchResult]]] = {}
    audit_lines: list[str] = []
    for cand in pool:
        for form_id, form in forms:
            try:
                result = match_sentence(form, cand.ctx, thresholds, embeddings)
            except MissingAnchorError:
                continue  # form needs anchors this candidate lacks
            if result.score >= thresholds.accept:
                fired.setdefault(cand.instance_key(), []).append(
                    (result.score, form.label, form_id, cand, result))
                audit_lines.append(json.dumps({
                    "doc_id": cand.doc_id,
                    "form_id": form_id,
                    "score": result.score,
                    "label": form.label,
                    "clause_scores": list(result.clause_scores),
                }, sort_keys=True))

    annotations: list[Annotation] = []
    for key in sorted(fired):
        hits = fired[key]
        best = max(h[0] for h in hits)
        top = [h for h in hits if h[0] == best]
        labels = {h[1] for h in top}
        if len(labels) > 1:
            continue  # conflicting labels at identical score: drop instance
        score, label, form_id, cand, _result = top[0]
        annotations.append(_emit(cand, label, form_id, score))

    if audit_path is not None:
        with open(audit_path, "a", encoding="utf-8") as fh:
            for line in audit_lines:
                fh.write(line + "\n")
    return annotations


def _weak_id(cand: Candidate, form_id: str) -> str:
    key = json.dumps([cand.instance_key(), form_id])
    return "w-" + hashlib.sha1(key.encode("utf-8")).hexdigest()[:12]


def _emit(cand: Candidate, label: str, form_id: str, score: float) -> Annotation:
    """Weak annotation ids are content-derived so re-running the labeler
    over the same pool emits identical, dedupable annotations."""
    provenance = (("form_id", form_id), ("score", f"{score:.6f}"))
    ann_id = _weak_id(cand, form_id)
    if cand.kind is AnnotationKind.RELATION:
        return Annotation.relation(
            ann_id, subj=cand.doc_span("SUBJ"), obj=cand.doc_span("OBJ"),
            label=label, source=AnnotationSource.WEAK, provenance=provenance)
    if cand.kind is AnnotationKind.CLASS:
        aspect = cand.doc_span("TERM") if "TERM" in cand.ctx.anchors else None
        return Annotation.classification(
            ann_id, doc_id=cand.doc_id, label=label, aspect=aspect,
            source=AnnotationSource.WEAK, provenance=provenance)
    return Annotation.span_label(
        ann_id, span=cand.doc_span("TERM"), label=label,
        source=AnnotationSource.WEAK, provenance=provenance)

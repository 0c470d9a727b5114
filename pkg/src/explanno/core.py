"""Core data types shared by every part of the annotation engine.

Documents, token spans, label schemas, annotations and explanations are
plain immutable dataclasses.  Tokenization is deterministic by design:
span and trigger offsets stay stable no matter when or where a document
is re-tokenized.
"""

from __future__ import annotations

import hashlib
import re
import string
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Optional, Union

# Characters peeled off the edges of whitespace-separated chunks.  Kept as an
# explicit constant: changing it invalidates every stored token offset.  The
# escapes are curly quotes, en and em dashes, and the ellipsis.
_PUNCT = set(string.punctuation) | set(
    "‘’“”–—…")

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")


class EmptyTextError(ValueError):
    """Raised when asked to tokenize whitespace-only input."""


class Task(str, Enum):
    SEQUENCE_LABELING = "sequence_labeling"
    RELATION_EXTRACTION = "relation_extraction"
    SENTIMENT_ANALYSIS = "sentiment_analysis"


class AnnotationKind(str, Enum):
    SPAN = "span"
    RELATION = "relation"
    CLASS = "class"


class AnnotationSource(str, Enum):
    HUMAN = "human"
    WEAK = "weak"
    RECOMMENDATION = "recommendation"


OUTSIDE_LABEL = "O"


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    lower: str = field(compare=False)

    @classmethod
    def make(cls, text: str, start: int, end: int) -> "Token":
        return cls(text=text, start=start, end=end, lower=text.lower())


@dataclass(frozen=True)
class TokenizedText:
    text: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)

    @property
    def lowers(self) -> tuple[str, ...]:
        return tuple(t.lower for t in self.tokens)


def tokenize(text: str) -> TokenizedText:
    """Split on whitespace, then peel leading/trailing punctuation into
    their own tokens.

    Every non-whitespace character ends up in exactly one token and token
    char ranges are strictly increasing, so char offsets are a stable
    addressing scheme for spans and triggers.
    """
    if not text.strip():
        raise EmptyTextError("cannot tokenize empty or whitespace-only text")
    tokens: list[Token] = []
    for m in re.finditer(r"\S+", text):
        chunk, offset = m.group(), m.start()
        lo, hi = 0, len(chunk)
        leading: list[tuple[int, int]] = []
        trailing: list[tuple[int, int]] = []
        while lo < hi and chunk[lo] in _PUNCT:
            leading.append((lo, lo + 1))
            lo += 1
        while hi > lo and chunk[hi - 1] in _PUNCT:
            trailing.append((hi - 1, hi))
            hi -= 1
        pieces = leading + ([(lo, hi)] if lo < hi else []) + list(reversed(trailing))
        for a, b in pieces:
            tokens.append(Token.make(chunk[a:b], offset + a, offset + b))
    return TokenizedText(text=text, tokens=tuple(tokens))


def split_sentences(text: str) -> list[str]:
    """Split multi-sentence input on sentence-ending punctuation followed by
    whitespace.  Returns non-empty stripped sentences."""
    return [s for s, _ in split_sentences_with_offsets(text)]


def split_sentences_with_offsets(text: str) -> list[tuple[str, int]]:
    """Like split_sentences, but each sentence carries its character
    offset in the original text so token indices can be re-anchored."""
    pieces: list[tuple[str, int]] = []
    start = 0
    for m in _SENTENCE_BOUNDARY.finditer(text):
        pieces.append((text[start:m.start()], start))
        start = m.end()
    pieces.append((text[start:], start))
    out: list[tuple[str, int]] = []
    for piece, offset in pieces:
        stripped = piece.strip()
        if stripped:
            lead = len(piece) - len(piece.lstrip())
            out.append((stripped, offset + lead))
    return out


def content_id(text: str) -> str:
    """Deterministic document id derived from content; doubles as the
    dedup key on import."""
    return "d-" + hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    tokens: tuple[Token, ...]
    meta: tuple[tuple[str, str], ...] = ()

    @classmethod
    def create(cls, text: str, doc_id: Optional[str] = None,
               meta: Optional[dict[str, str]] = None) -> "Document":
        tt = tokenize(text)
        return cls(
            id=doc_id if doc_id is not None else content_id(text),
            text=text,
            tokens=tt.tokens,
            meta=tuple(sorted((meta or {}).items())),
        )

    @property
    def tokenized(self) -> TokenizedText:
        return TokenizedText(text=self.text, tokens=self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def meta_dict(self) -> dict[str, str]:
        return dict(self.meta)


@dataclass(frozen=True, order=True)
class Span:
    """Token-index span, end exclusive.

    Deliberately constructible in invalid states: validate_annotation
    reports bad bounds as violations instead of raising.
    """
    doc_id: str
    start_tok: int
    end_tok: int  # exclusive

    def overlaps(self, other: "Span") -> bool:
        return self.start_tok < other.end_tok and other.start_tok < self.end_tok

    def text_of(self, doc: Document) -> str:
        toks = doc.tokens[self.start_tok:self.end_tok]
        return doc.text[toks[0].start:toks[-1].end]

    def char_range(self, doc: Document) -> tuple[int, int]:
        toks = doc.tokens[self.start_tok:self.end_tok]
        return toks[0].start, toks[-1].end


def span_from_char_range(doc: Document, char_start: int, char_end: int) -> Span:
    """Resolve a character range back to token indices.  The range must
    align with token boundaries (as produced by char_range)."""
    start_tok = end_tok = None
    for i, tok in enumerate(doc.tokens):
        if tok.start == char_start:
            start_tok = i
        if tok.end == char_end:
            end_tok = i + 1
    if start_tok is None or end_tok is None:
        raise ValueError(
            f"char range ({char_start}, {char_end}) does not align with "
            f"token boundaries of document {doc.id}")
    return Span(doc_id=doc.id, start_tok=start_tok, end_tok=end_tok)


@dataclass(frozen=True)
class Label:
    name: str
    shortcut_key: str = ""
    color: str = ""


@dataclass(frozen=True)
class LabelSchema:
    task: Task
    labels: tuple[Label, ...]
    outside_label: str = OUTSIDE_LABEL

    def __post_init__(self) -> None:
        names = [l.name for l in self.labels]
        if len(set(names)) != len(names):
            raise ValueError("label names must be unique")
        keys = [l.shortcut_key for l in self.labels if l.shortcut_key]
        if len(set(keys)) != len(keys):
            raise ValueError("shortcut keys must be unique")
        if self.task is Task.SEQUENCE_LABELING and self.outside_label != OUTSIDE_LABEL:
            raise ValueError('sequence task outside label is fixed to "O"')
        if self.task is Task.SEQUENCE_LABELING and self.outside_label in names:
            raise ValueError(
                f"label {self.outside_label!r} is reserved for unlabeled positions")

    @classmethod
    def create(cls, task: Task | str, labels) -> "LabelSchema":
        task = Task(task)
        out = []
        for item in labels:
            if isinstance(item, Label):
                out.append(item)
            elif isinstance(item, str):
                out.append(Label(name=item))
            else:
                out.append(Label(*item) if not isinstance(item, dict) else Label(**item))
        return cls(task=task, labels=tuple(out))

    @property
    def label_names(self) -> tuple[str, ...]:
        return tuple(l.name for l in self.labels)

    def has_label(self, name: str) -> bool:
        return name in self.label_names


@dataclass(frozen=True)
class TriggerExplanation:
    """One or more in-sentence cue spans justifying a label."""
    trigger_spans: tuple[Span, ...]

    variant = "trigger"

    def __post_init__(self) -> None:
        if not self.trigger_spans:
            raise ValueError("trigger explanation requires at least one span")


@dataclass(frozen=True)
class NLExplanation:
    """Free-text rationale plus the rule it parsed to.

    ``parsed_form`` is a grammar.LogicalForm; typed loosely here to keep
    core free of a parser dependency.
    """
    nl_text: str
    parsed_form: object

    variant = "natural_language"

    def __post_init__(self) -> None:
        if not self.nl_text.strip():
            raise ValueError("empty natural-language explanation")
        if self.parsed_form is None:
            raise ValueError("natural-language explanation requires a parsed form")


Explanation = Union[TriggerExplanation, NLExplanation]


@dataclass(frozen=True)
class Annotation:
    id: str
    doc_id: str
    kind: AnnotationKind
    label: str
    span: Optional[Span] = None          # span kind
    subj: Optional[Span] = None          # relation kind, click-order first
    obj: Optional[Span] = None           # relation kind, click-order second
    aspect: Optional[Span] = None        # class kind, optional aspect term
    explanation: Optional[Explanation] = None
    source: AnnotationSource = AnnotationSource.HUMAN
    created_at: str = ""
    provenance: tuple[tuple[str, str], ...] = ()  # rule/trigger link for weak labels

    @classmethod
    def span_label(cls, ann_id: str, span: Span, label: str, **kw) -> "Annotation":
        return cls(id=ann_id, doc_id=span.doc_id, kind=AnnotationKind.SPAN,
                   label=label, span=span, created_at=kw.pop("created_at", now_iso()), **kw)

    @classmethod
    def relation(cls, ann_id: str, subj: Span, obj: Span, label: str, **kw) -> "Annotation":
        return cls(id=ann_id, doc_id=subj.doc_id, kind=AnnotationKind.RELATION,
                   label=label, subj=subj, obj=obj,
                   created_at=kw.pop("created_at", now_iso()), **kw)

    @classmethod
    def classification(cls, ann_id: str, doc_id: str, label: str,
                       aspect: Optional[Span] = None, **kw) -> "Annotation":
        return cls(id=ann_id, doc_id=doc_id, kind=AnnotationKind.CLASS,
                   label=label, aspect=aspect,
                   created_at=kw.pop("created_at", now_iso()), **kw)

    def with_id(self, ann_id: str) -> "Annotation":
        return replace(self, id=ann_id)

    def provenance_dict(self) -> dict[str, str]:
        return dict(self.provenance)


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def validate_annotation(ann: Annotation, doc: Document, schema: LabelSchema) -> list[str]:
    """Check an annotation against its document and schema.

    Violations are data, not faults: the result is a (possibly empty) list
    of human-readable messages.  An empty list means the annotation is ok.
    """
    violations: list[str] = []
    if ann.doc_id != doc.id:
        violations.append(f"annotation doc_id {ann.doc_id!r} does not match document {doc.id!r}")
    if not schema.has_label(ann.label):
        violations.append(f"unknown label {ann.label!r}")

    def check_span(sp: Optional[Span], what: str, required: bool) -> None:
        if sp is None:
            if required:
                violations.append(f"missing {what} span")
            return
        if sp.start_tok >= sp.end_tok:
            violations.append(f"empty {what} span ({sp.start_tok}, {sp.end_tok})")
        if sp.start_tok < 0 or sp.end_tok > len(doc.tokens):
            violations.append(
                f"{what} span ({sp.start_tok}, {sp.end_tok}) out of bounds "
                f"for {len(doc.tokens)}-token document")

    if ann.kind is AnnotationKind.SPAN:
        check_span(ann.span, "target", required=True)
    elif ann.kind is AnnotationKind.RELATION:
        check_span(ann.subj, "subject", required=True)
        check_span(ann.obj, "object", required=True)
        if ann.subj is not None and ann.obj is not None and ann.subj.overlaps(ann.obj):
            violations.append("relation arguments overlap")
    elif ann.kind is AnnotationKind.CLASS:
        check_span(ann.aspect, "aspect", required=False)

    expl = ann.explanation
    if isinstance(expl, TriggerExplanation):
        for sp in expl.trigger_spans:
            if sp.doc_id != doc.id:
                violations.append(f"trigger span belongs to document {sp.doc_id!r}")
            elif sp.end_tok > len(doc.tokens) or sp.start_tok < 0:
                violations.append(
                    f"trigger span ({sp.start_tok}, {sp.end_tok}) outside the sentence")
    if ann.source is AnnotationSource.WEAK and not ann.provenance:
        violations.append("weak annotation is missing rule/trigger provenance")
    return violations

"""Project orchestration: one object that owns the store, turns stored
explanations into weak labels, trains the downstream model, and serves
recommendations, batches and autosuggest from the result.

The heart is :meth:`Project.pipeline_tick`, which runs the full weak
supervision pass in order: re-parse natural-language explanations,
retrain the trigger matcher when triggers exist, weak-label the
unlabeled pool, train the downstream model on gold plus weighted weak
examples, and publish an immutable snapshot.  A tick with nothing new
is a no-op, and per-explanation failures are reported without aborting
the pass.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import (
    Annotation,
    AnnotationKind,
    AnnotationSource,
    Document,
    LabelSchema,
    NLExplanation,
    Span,
    Task,
    TokenizedText,
    TriggerExplanation,
    split_sentences_with_offsets,
    tokenize,
    validate_annotation,
)
from .embeddings import EmbeddingTable, toy_table
from .grammar import LogicalForm
from .matcher import Candidate, MatchContext, Thresholds, weak_label_corpus
from .models import (
    ClassifierParams,
    DEFAULT_WEAK_WEIGHT,
    ModelSnapshot,
    SequenceLabeler,
    SequenceLabelerParams,
    TrainingExample,
    bio_spans,
    predict_class,
    train_classifier,
    train_labeler,
)
from .parser import ExplanationParseError, parse, suggest
from .sampler import select_batch
from .store import ProjectStore
from .triggers import (
    DegenerateTriggerDataError,
    TriggerExample,
    TriggerModel,
    build_entries,
    calibrate_threshold,
    soft_match,
    train,
    trigger_aware_labels,
)

# function words skipped when proposing candidate argument spans
_SPAN_STOPWORDS = frozenset("""
the a an and or but was were is are be been being by of to in on at for
with from as that this these those it its he she they we i you his her
their our your my not no do does did has have had will would can could
than then there here when where who whom which while so if because very
""".split())

_MAX_ARG_SPAN = 4


@dataclass
class EngineConfig:
    """Tunable knobs of the supervision pipeline."""
    accept: float = 0.7
    phrase_sim_floor: float = 0.7
    weak_weight: float = DEFAULT_WEAK_WEIGHT
    train_epochs: int = 15
    trigger_epochs: int = 40
    trigger_lr: float = 0.05
    trigger_percentile: float = 20.0
    retrain_batch: int = 10
    retrain_seconds: float = 60.0

    @property
    def thresholds(self) -> Thresholds:
        return Thresholds(accept=self.accept, phrase_sim_floor=self.phrase_sim_floor)


def config_from_dict(data: Mapping) -> EngineConfig:
    known = {f for f in EngineConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    return EngineConfig(**data)


# ---------------------------------------------------------------------------
# Sentence bookkeeping


@dataclass(frozen=True)
class SentenceRef:
    """One sentence of a document plus how it maps back: tok_offset is
    the document token index of the sentence's first token."""
    doc_id: str
    index: int
    tokenized: TokenizedText
    tok_offset: int
    char_offset: int

    def doc_span(self, start: int, end: int) -> Span:
        return Span(doc_id=self.doc_id, start_tok=self.tok_offset + start,
                    end_tok=self.tok_offset + end)


def doc_sentences(doc: Document) -> list[SentenceRef]:
    refs = []
    for idx, (sentence, offset) in enumerate(split_sentences_with_offsets(doc.text)):
        tok_offset = sum(1 for t in doc.tokens if t.start < offset)
        refs.append(SentenceRef(doc_id=doc.id, index=idx,
                                tokenized=tokenize(sentence),
                                tok_offset=tok_offset, char_offset=offset))
    return refs


def argument_spans(sentence: TokenizedText) -> list[tuple[int, int]]:
    """Maximal runs of content tokens, the candidate argument spans for
    relation matching.  Length-capped so pairs stay tractable."""
    spans = []
    start = None
    for i, tok in enumerate(sentence.lowers):
        content = any(ch.isalnum() for ch in tok) and tok not in _SPAN_STOPWORDS
        if content and start is None:
            start = i
        elif not content and start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, len(sentence.lowers)))
    out = []
    for s, e in spans:
        while e - s > _MAX_ARG_SPAN:
            out.append((s, s + _MAX_ARG_SPAN))
            s += _MAX_ARG_SPAN
        out.append((s, e))
    return out


# ---------------------------------------------------------------------------
# Classification features


class Featurizer:
    """Instance vectors for the linear classifier: a bag-of-token block
    over a fixed vocabulary plus a second block for tokens within two
    positions of an argument span.  Tokens outside the vocabulary are
    dropped, so the dimension is stable for a given corpus state."""

    WINDOW = 2

    def __init__(self, vocab: Sequence[str]):
        self.vocab = tuple(vocab)
        self._index = {w: i for i, w in enumerate(self.vocab)}

    @classmethod
    def build(cls, texts: Iterable[TokenizedText]) -> "Featurizer":
        words = sorted({w for text in texts for w in text.lowers})
        return cls(words)

    @property
    def dim(self) -> int:
        return 2 * len(self.vocab)

    def vector(self, sentence: TokenizedText,
               anchors: Mapping[str, tuple[int, int]] = ()) -> np.ndarray:
        vec = np.zeros(self.dim)
        lowers = sentence.lowers
        for w in lowers:
            i = self._index.get(w)
            if i is not None:
                vec[i] = 1.0
        offset = len(self.vocab)
        for start, end in dict(anchors).values():
            lo = max(0, start - self.WINDOW)
            hi = min(len(lowers), end + self.WINDOW)
            for w in lowers[lo:hi]:
                i = self._index.get(w)
                if i is not None:
                    vec[offset + i] = 1.0
        return vec


# ---------------------------------------------------------------------------


@dataclass
class TickReport:
    parsed_forms: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)
    weak_labels: int = 0
    trigger_count: int = 0
    snapshot_version: int = 0
    no_op: bool = False

    def to_dict(self) -> dict:
        return {"parsed_forms": self.parsed_forms,
                "failures": [list(f) for f in self.failures],
                "weak_labels": self.weak_labels,
                "trigger_count": self.trigger_count,
                "snapshot_version": self.snapshot_version,
                "no_op": self.no_op}


def _weak_id(*parts) -> str:
    key = json.dumps([str(p) for p in parts])
    return "w-" + hashlib.sha1(key.encode("utf-8")).hexdigest()[:12]


class Project:
    """Annotation project bound to one store, one embedding table and
    one config.  Snapshots and the featurizer live in memory and are
    rebuilt by pipeline_tick; the store is the durable part."""

    def __init__(self, store: ProjectStore,
                 embeddings: Optional[EmbeddingTable] = None,
                 config: Optional[EngineConfig] = None):
        if store.schema is None:
            raise ValueError("store has no project (call create_project first)")
        self.store = store
        self.embeddings = embeddings if embeddings is not None else toy_table()
        self.config = config or EngineConfig()
        self.snapshot: Optional[ModelSnapshot] = None
        self.featurizer: Optional[Featurizer] = None
        self.trigger_model: Optional[TriggerModel] = None
        self.trigger_entries = []
        self.usage_counts: Counter[str] = Counter()
        self.last_weak_count = 0
        self._tick_cursor = 0
        self._restore()

    @classmethod
    def create(cls, name: str, schema: LabelSchema,
               store: Optional[ProjectStore] = None,
               embeddings: Optional[EmbeddingTable] = None,
               config: Optional[EngineConfig] = None) -> "Project":
        store = store if store is not None else ProjectStore()
        store.create_project(name, schema)
        return cls(store, embeddings=embeddings, config=config)

    def _restore(self) -> None:
        for ann in self.store.annotations.values():
            if isinstance(ann.explanation, NLExplanation):
                self._count_usage(ann.explanation.parsed_form)
        payload = self.store.latest_snapshot
        if payload and "snapshot" in payload:
            self.snapshot = ModelSnapshot.from_dict(payload["snapshot"])
            self.featurizer = Featurizer(payload.get("vocab", ()))
        for event in self.store.events:
            if event["type"] == "snapshot_published":
                self._tick_cursor = event["event_id"]

    # -- basic facts --------------------------------------------------------

    @property
    def schema(self) -> LabelSchema:
        return self.store.schema

    @property
    def task(self) -> Task:
        return self.schema.task

    @property
    def model_kind(self) -> str:
        return "sequence" if self.task is Task.SEQUENCE_LABELING else "classifier"

    def human_annotations(self) -> list[Annotation]:
        return [a for a in self.store.annotations.values()
                if a.source is AnnotationSource.HUMAN]

    def weak_annotations(self) -> list[Annotation]:
        return [a for a in self.store.annotations.values()
                if a.source is AnnotationSource.WEAK]

    def unlabeled_doc_ids(self) -> list[str]:
        labeled = {a.doc_id for a in self.human_annotations()}
        return [d for d in self.store.documents if d not in labeled]

    def add_annotation(self, ann: Annotation) -> Annotation:
        doc = self.store.documents.get(ann.doc_id)
        if doc is None:
            raise ValueError(f"unknown document {ann.doc_id!r}")
        problems = validate_annotation(ann, doc, self.schema)
        if problems:
            raise ValueError("; ".join(problems))
        added = self.store.add_annotation(ann)
        if isinstance(ann.explanation, NLExplanation):
            self._count_usage(ann.explanation.parsed_form)
        return added

    def _count_usage(self, form: LogicalForm) -> None:
        for leaf in form.root.leaves():
            self.usage_counts[leaf.predicate] += 1

    def suggest(self, prefix: str, cursor: Optional[int] = None) -> list[str]:
        return suggest(prefix, self.task, cursor=cursor, usage=self.usage_counts)

    # -- candidate generation -------------------------------------------------

    def _sentences(self, doc_ids: Iterable[str]) -> list[SentenceRef]:
        refs = []
        for doc_id in doc_ids:
            refs.extend(doc_sentences(self.store.documents[doc_id]))
        return refs

    def candidate_pool(self, doc_ids: Optional[Iterable[str]] = None) -> list[Candidate]:
        """Matchable instances over the given documents (default: docs
        with no human annotation)."""
        ids = list(doc_ids) if doc_ids is not None else self.unlabeled_doc_ids()
        out = []
        for ref in self._sentences(ids):
            if self.task is Task.RELATION_EXTRACTION:
                spans = argument_spans(ref.tokenized)
                for subj in spans:
                    for obj in spans:
                        if subj == obj:
                            continue
                        out.append(Candidate(
                            doc_id=ref.doc_id, kind=AnnotationKind.RELATION,
                            ctx=MatchContext(ref.tokenized,
                                             {"SUBJ": subj, "OBJ": obj}),
                            tok_offset=ref.tok_offset))
            else:
                out.append(Candidate(doc_id=ref.doc_id, kind=AnnotationKind.CLASS,
                                     ctx=MatchContext(ref.tokenized),
                                     tok_offset=ref.tok_offset))
                for term in argument_spans(ref.tokenized):
                    out.append(Candidate(
                        doc_id=ref.doc_id, kind=AnnotationKind.CLASS,
                        ctx=MatchContext(ref.tokenized, {"TERM": term}),
                        tok_offset=ref.tok_offset))
        return out

    # -- explanation harvesting -----------------------------------------------

    def _harvest_forms(self, failures: list) -> list[tuple[str, LogicalForm]]:
        """Re-parse stored NL explanations; the text is authoritative and
        a stale or hand-edited one that no longer parses is reported,
        not fatal."""
        forms = []
        for ann in sorted(self.human_annotations(), key=lambda a: a.id):
            if not isinstance(ann.explanation, NLExplanation):
                continue
            try:
                form = parse(ann.explanation.nl_text, self.task, ann.label)
                forms.append((ann.id, form))
            except ValueError as exc:
                failures.append((ann.id, str(exc)))
        return forms

    def _harvest_triggers(self) -> list[TriggerExample]:
        examples = []
        for ann in sorted(self.human_annotations(), key=lambda a: a.id):
            if not isinstance(ann.explanation, TriggerExplanation):
                continue
            doc = self.store.documents[ann.doc_id]
            refs = doc_sentences(doc)
            for trig in ann.explanation.trigger_spans:
                ref = _containing_sentence(refs, trig)
                if ref is None:
                    continue
                trig_tokens = tuple(
                    t.text for t in doc.tokens[trig.start_tok:trig.end_tok])
                examples.append(TriggerExample(
                    trigger_tokens=trig_tokens,
                    sentence_tokens=ref.tokenized.surfaces,
                    label=ann.label))
        return examples

    # -- training example extraction --------------------------------------------

    def _sequence_examples(self, source: AnnotationSource,
                           weight: float) -> list[TrainingExample]:
        anns = [a for a in self.store.annotations.values()
                if a.source is source and a.kind is AnnotationKind.SPAN]
        by_doc: dict[str, list[Annotation]] = {}
        for ann in anns:
            by_doc.setdefault(ann.doc_id, []).append(ann)
        examples = []
        for doc_id in sorted(by_doc):
            refs = doc_sentences(self.store.documents[doc_id])
            for ref in refs:
                tags = ["O"] * len(ref.tokenized.tokens)
                hit = False
                for ann in by_doc[doc_id]:
                    local = _localize(ref, ann.span)
                    if local is None:
                        continue
                    start, end = local
                    tags[start] = f"B-{ann.label}"
                    for i in range(start + 1, end):
                        tags[i] = f"I-{ann.label}"
                    hit = True
                if hit or source is AnnotationSource.HUMAN:
                    # a human-reviewed doc vouches for its O positions
                    examples.append(TrainingExample(
                        features=ref.tokenized.surfaces, target=tuple(tags),
                        weight=weight, source=source.value))
        return examples

    def _classifier_examples(self, featurizer: Featurizer,
                             source: AnnotationSource,
                             weight: float) -> list[TrainingExample]:
        examples = []
        anns = [a for a in self.store.annotations.values() if a.source is source
                and a.kind is not AnnotationKind.SPAN]
        for ann in sorted(anns, key=lambda a: a.id):
            doc = self.store.documents[ann.doc_id]
            if ann.kind is AnnotationKind.RELATION:
                located = _locate_pair(doc, ann.subj, ann.obj)
                if located is None:
                    continue
                ref, subj_local, obj_local = located
                vec = featurizer.vector(ref.tokenized,
                                        {"SUBJ": subj_local, "OBJ": obj_local})
            else:
                anchors = {}
                if ann.aspect is not None:
                    refs = doc_sentences(doc)
                    ref = _containing_sentence(refs, ann.aspect)
                    if ref is not None:
                        anchors = {"TERM": _localize(ref, ann.aspect)}
                        vec = featurizer.vector(ref.tokenized, anchors)
                        examples.append(TrainingExample(
                            features=vec, target=ann.label,
                            weight=weight, source=source.value))
                        continue
                vec = featurizer.vector(doc.tokenized, anchors)
            examples.append(TrainingExample(features=vec, target=ann.label,
                                            weight=weight, source=source.value))
        return examples

    # -- the tick ----------------------------------------------------------------

    def _new_gold_since_cursor(self) -> bool:
        for event in self.store.events:
            if event["event_id"] <= self._tick_cursor:
                continue
            if event["type"] == "annotation_added" and \
                    event["payload"]["source"] == AnnotationSource.HUMAN.value:
                return True
            if event["type"] == "explanation_added":
                return True
        return False

    def pipeline_tick(self) -> TickReport:
        if not self._new_gold_since_cursor():
            version = self.snapshot.snapshot_version if self.snapshot else 0
            return TickReport(snapshot_version=version, no_op=True)

        report = TickReport()
        forms = self._harvest_forms(report.failures)
        report.parsed_forms = len(forms)

        weak: list[Annotation] = []
        if self.task is Task.SEQUENCE_LABELING:
            weak = self._trigger_weak_pass(report)
        elif forms:
            pool = self.candidate_pool()
            anchored = [(fid, f) for fid, f in forms if f.root.anchors()]
            plain = [(fid, f) for fid, f in forms if not f.root.anchors()]
            plain_pool = [c for c in pool if not c.ctx.anchors]
            anchored_pool = [c for c in pool if c.ctx.anchors]
            if plain:
                weak.extend(weak_label_corpus(plain, plain_pool,
                                              self.config.thresholds,
                                              self.embeddings))
            if anchored:
                weak.extend(weak_label_corpus(anchored, anchored_pool,
                                              self.config.thresholds,
                                              self.embeddings))

        self._replace_weak(weak)
        report.weak_labels = len(weak)
        self.last_weak_count = len(weak)

        self._train_downstream()
        report.trigger_count = len(self.trigger_entries)
        report.snapshot_version = self.snapshot.snapshot_version

        self.store.publish_snapshot({
            "snapshot": self.snapshot.to_dict(),
            "vocab": list(self.featurizer.vocab) if self.featurizer else [],
        })
        self._tick_cursor = self.store.events[-1]["event_id"]
        return report

    def _trigger_weak_pass(self, report: TickReport) -> list[Annotation]:
        examples = self._harvest_triggers()
        if not examples:
            return []
        model = TriggerModel.create(self.embeddings, self.schema.label_names)
        try:
            train(examples, model, epochs=self.config.trigger_epochs,
                  lr=self.config.trigger_lr)
        except DegenerateTriggerDataError as exc:
            report.failures.append(("triggers", str(exc)))
            return []
        calibrate_threshold(examples, model,
                            percentile=self.config.trigger_percentile)
        self.trigger_model = model
        self.trigger_entries = build_entries(examples, model)

        # decode weak spans with a labeler fit on gold alone
        gold = self._sequence_examples(AnnotationSource.HUMAN, 1.0)
        provisional = train_labeler(gold, SequenceLabelerParams.create(
            self.schema.label_names), epochs=self.config.train_epochs,
            embeddings=self.embeddings)
        labeler = SequenceLabeler(provisional, self.embeddings)

        weak = []
        for ref in self._sentences(self.unlabeled_doc_ids()):
            passing = soft_match(ref.tokenized, self.trigger_entries, model)
            if not passing:
                continue
            voted, provenance = trigger_aware_labels(ref.tokenized, passing,
                                                     labeler, model)
            trigger_ids = ",".join(t for t, _ in provenance)
            for start, end, label in sorted(bio_spans(voted)):
                span = ref.doc_span(start, end)
                weak.append(Annotation.span_label(
                    _weak_id(ref.doc_id, ref.index, start, end, label),
                    span=span, label=label, source=AnnotationSource.WEAK,
                    provenance=(("triggers", trigger_ids),)))
        return weak

    def _replace_weak(self, weak: Sequence[Annotation]) -> None:
        for ann in list(self.weak_annotations()):
            self.store.remove_annotation(ann.id)
        for ann in weak:
            if ann.id not in self.store.annotations:
                self.store.add_annotation(ann)

    def _train_downstream(self) -> None:
        version = (self.snapshot.snapshot_version + 1) if self.snapshot else 1
        if self.model_kind == "sequence":
            examples = (self._sequence_examples(AnnotationSource.HUMAN, 1.0)
                        + self._sequence_examples(AnnotationSource.WEAK,
                                                  self.config.weak_weight))
            params = train_labeler(examples, SequenceLabelerParams.create(
                self.schema.label_names), epochs=self.config.train_epochs,
                embeddings=self.embeddings)
        else:
            self.featurizer = Featurizer.build(
                [doc.tokenized for doc in self.store.documents.values()])
            examples = (self._classifier_examples(self.featurizer,
                                                  AnnotationSource.HUMAN, 1.0)
                        + self._classifier_examples(self.featurizer,
                                                    AnnotationSource.WEAK,
                                                    self.config.weak_weight))
            params = train_classifier(examples, ClassifierParams.create(
                self.featurizer.dim, self.schema.label_names),
                epochs=self.config.train_epochs * 4)
        self.snapshot = ModelSnapshot(
            kind=self.model_kind, snapshot_version=version, params=params,
            reservoir=tuple(examples[:1000]))

    # -- serving -----------------------------------------------------------------

    def recommendations(self, doc_id: str) -> list[dict]:
        """Model suggestions for one document from the latest snapshot,
        with char offsets and the label to circle."""
        if self.snapshot is None:
            return []
        doc = self.store.documents.get(doc_id)
        if doc is None:
            raise KeyError(doc_id)
        out = []
        if self.model_kind == "sequence":
            labeler = SequenceLabeler(self.snapshot.params, self.embeddings)
            for ref in doc_sentences(doc):
                result = labeler.decode_full(ref.tokenized)
                index = {l: i for i, l in enumerate(self.snapshot.params.labels)}
                for start, end, label in sorted(bio_spans(result.tags)):
                    span = ref.doc_span(start, end)
                    cs, ce = span.char_range(doc)
                    confidence = float(np.mean(
                        [result.marginals[t, index[result.tags[t]]]
                         for t in range(start, end)]))
                    out.append({"kind": "span", "label": label,
                                "char_start": cs, "char_end": ce,
                                "text": span.text_of(doc),
                                "confidence": confidence})
        elif self.featurizer is not None:
            if self.task is Task.RELATION_EXTRACTION:
                for ref in doc_sentences(doc):
                    spans = argument_spans(ref.tokenized)
                    for subj in spans:
                        for obj in spans:
                            if subj == obj:
                                continue
                            vec = self.featurizer.vector(
                                ref.tokenized, {"SUBJ": subj, "OBJ": obj})
                            label, conf = predict_class(vec, self.snapshot.params)
                            subj_span = ref.doc_span(*subj)
                            obj_span = ref.doc_span(*obj)
                            out.append({
                                "kind": "relation", "label": label,
                                "confidence": conf,
                                "subj": list(subj_span.char_range(doc)),
                                "obj": list(obj_span.char_range(doc)),
                            })
                out.sort(key=lambda r: -r["confidence"])
                out = out[:10]
            else:
                label, conf = predict_class(
                    self.featurizer.vector(doc.tokenized), self.snapshot.params)
                out.append({"kind": "class", "label": label, "confidence": conf})
        return out

    def next_batch(self, k: int) -> list[str]:
        """Ids of the unlabeled documents most worth annotating."""
        ids = self.unlabeled_doc_ids()
        if not ids:
            return []
        if self.snapshot is None:
            return sorted(ids)[:k]
        if self.model_kind == "sequence":
            pool = {d: self.store.documents[d].tokenized.surfaces for d in ids}
            return select_batch(pool, self.snapshot, k,
                                embeddings=self.embeddings)
        pool = {d: self.featurizer.vector(self.store.documents[d].tokenized)
                for d in ids}
        return select_batch(pool, self.snapshot, k)

    def status(self) -> dict:
        return {
            "snapshot_version": self.snapshot.snapshot_version if self.snapshot else 0,
            "documents": len(self.store.documents),
            "gold_annotations": len(self.human_annotations()),
            "weak_labels": self.last_weak_count,
            "pending_changes": self._new_gold_since_cursor(),
            "trigger_count": len(self.trigger_entries),
        }


# ---------------------------------------------------------------------------
# span geometry helpers


def _localize(ref: SentenceRef, span: Span) -> Optional[tuple[int, int]]:
    """Sentence-local token interval of a document span, None when the
    span is not fully inside this sentence."""
    n = len(ref.tokenized.tokens)
    start = span.start_tok - ref.tok_offset
    end = span.end_tok - ref.tok_offset
    if 0 <= start < end <= n:
        return start, end
    return None


def _containing_sentence(refs: Sequence[SentenceRef],
                         span: Span) -> Optional[SentenceRef]:
    for ref in refs:
        if _localize(ref, span) is not None:
            return ref
    return None


def _locate_pair(doc: Document, subj: Span, obj: Span):
    refs = doc_sentences(doc)
    for ref in refs:
        subj_local = _localize(ref, subj)
        obj_local = _localize(ref, obj)
        if subj_local is not None and obj_local is not None:
            return ref, subj_local, obj_local
    return None

"""Durable project storage and export.

A project is an append-only event log (one JSON object per line when
backed by a file) plus the state materialized from it: documents,
annotations, schema, latest published model snapshot.  Replaying the
log always reproduces the materialized state, which is the whole
recovery story; there is no database.

Exports serialize (data, label, explanation) triples to JSON and CSV
with character offsets, so they survive tokenizer changes.  JSON
exports re-import losslessly; weak annotations stay out of exports
unless explicitly requested.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Optional

from .core import (
    Annotation,
    AnnotationKind,
    AnnotationSource,
    Document,
    LabelSchema,
    NLExplanation,
    Span,
    Task,
    TriggerExplanation,
    content_id,
    now_iso,
    span_from_char_range,
)
from .grammar import form_from_dict, form_to_dict

CSV_COLUMNS = ("doc_id", "text", "kind", "span_start", "span_end",
               "span2_start", "span2_end", "label", "source",
               "explanation_variant", "explanation_payload")


class StoreError(ValueError):
    pass


class MalformedRecordError(StoreError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateAnnotationError(StoreError):
    pass


class UnknownDocumentError(StoreError):
    pass


class UnknownAnnotationError(StoreError):
    pass


# ---------------------------------------------------------------------------
# Log payload (de)serialization.  Log records keep token offsets; the
# export schema further down converts to character offsets.


def _span_to_list(span: Optional[Span]) -> Optional[list]:
    if span is None:
        return None
    return [span.doc_id, span.start_tok, span.end_tok]


def _span_from_list(raw: Optional[list]) -> Optional[Span]:
    if raw is None:
        return None
    return Span(doc_id=raw[0], start_tok=raw[1], end_tok=raw[2])


def explanation_to_dict(explanation) -> Optional[dict]:
    if explanation is None:
        return None
    if isinstance(explanation, TriggerExplanation):
        return {"variant": explanation.variant,
                "spans": [_span_to_list(s) for s in explanation.trigger_spans]}
    if isinstance(explanation, NLExplanation):
        return {"variant": explanation.variant,
                "nl_text": explanation.nl_text,
                "logical_form": form_to_dict(explanation.parsed_form)}
    raise TypeError(f"unexpected explanation {explanation!r}")


def explanation_from_dict(raw: Optional[dict]):
    if raw is None:
        return None
    if raw["variant"] == "trigger":
        return TriggerExplanation(
            trigger_spans=tuple(_span_from_list(s) for s in raw["spans"]))
    return NLExplanation(nl_text=raw["nl_text"],
                         parsed_form=form_from_dict(raw["logical_form"]))


def annotation_to_dict(ann: Annotation) -> dict:
    return {
        "id": ann.id,
        "doc_id": ann.doc_id,
        "kind": ann.kind.value,
        "label": ann.label,
        "span": _span_to_list(ann.span),
        "subj": _span_to_list(ann.subj),
        "obj": _span_to_list(ann.obj),
        "aspect": _span_to_list(ann.aspect),
        "explanation": explanation_to_dict(ann.explanation),
        "source": ann.source.value,
        "created_at": ann.created_at,
        "provenance": [list(pair) for pair in ann.provenance],
    }


def annotation_from_dict(raw: dict) -> Annotation:
    return Annotation(
        id=raw["id"],
        doc_id=raw["doc_id"],
        kind=AnnotationKind(raw["kind"]),
        label=raw["label"],
        span=_span_from_list(raw["span"]),
        subj=_span_from_list(raw["subj"]),
        obj=_span_from_list(raw["obj"]),
        aspect=_span_from_list(raw["aspect"]),
        explanation=explanation_from_dict(raw["explanation"]),
        source=AnnotationSource(raw["source"]),
        created_at=raw["created_at"],
        provenance=tuple((k, v) for k, v in raw["provenance"]),
    )


# ---------------------------------------------------------------------------


class ProjectStore:
    """Event-sourced project state, optionally persisted to one file."""

    def __init__(self, log_path: Optional[str | Path] = None):
        self.log_path = Path(log_path) if log_path is not None else None
        self.events: list[dict] = []
        self.name: str = ""
        self.schema: Optional[LabelSchema] = None
        self.documents: dict[str, Document] = {}
        self.annotations: dict[str, Annotation] = {}
        self.latest_snapshot: Optional[dict] = None
        self._texts: dict[str, str] = {}   # content hash -> doc id

    # -- event machinery ----------------------------------------------------

    def _append(self, event_type: str, payload: dict) -> dict:
        event = {"event_id": len(self.events) + 1, "type": event_type,
                 "at": now_iso(), "payload": payload}
        self._apply(event)
        self.events.append(event)
        if self.log_path is not None:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")
        return event

    def _apply(self, event: dict) -> None:
        payload = event["payload"]
        kind = event["type"]
        if kind == "project_created":
            self.name = payload["name"]
            self.schema = LabelSchema.create(
                Task(payload["task"]),
                [(l["name"], l["shortcut_key"], l["color"])
                 for l in payload["labels"]])
        elif kind == "document_added":
            doc = Document.create(payload["text"], doc_id=payload["id"],
                                  meta=payload.get("meta") or None)
            self.documents[doc.id] = doc
            self._texts[content_id(doc.text)] = doc.id
        elif kind == "annotation_added":
            ann = annotation_from_dict(payload)
            self.annotations[ann.id] = ann
        elif kind == "annotation_removed":
            self.annotations.pop(payload["id"], None)
        elif kind == "explanation_added":
            ann = self.annotations[payload["annotation_id"]]
            self.annotations[ann.id] = replace(
                ann, explanation=explanation_from_dict(payload["explanation"]))
        elif kind == "snapshot_published":
            self.latest_snapshot = payload
        else:
            raise StoreError(f"unknown event type {kind!r}")

    @classmethod
    def replay(cls, events: Iterable[dict]) -> "ProjectStore":
        store = cls()
        for event in events:
            store._apply(event)
            store.events.append(event)
        return store

    @classmethod
    def load(cls, path: str | Path) -> "ProjectStore":
        events = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    events.append(json.loads(line))
        store = cls.replay(events)
        store.log_path = Path(path)
        return store

    # -- write operations -----------------------------------------------------

    def create_project(self, name: str, schema: LabelSchema) -> None:
        self._append("project_created", {
            "name": name,
            "task": schema.task.value,
            "labels": [{"name": l.name, "shortcut_key": l.shortcut_key,
                        "color": l.color} for l in schema.labels],
        })

    def add_document(self, text: str, doc_id: Optional[str] = None,
                     meta: Optional[dict[str, str]] = None) -> Optional[Document]:
        """Add one document; identical text is deduplicated and returns None."""
        key = content_id(text)
        if key in self._texts:
            return None
        if doc_id is not None and doc_id in self.documents:
            raise StoreError(f"document id {doc_id!r} already holds different text")
        doc = Document.create(text, doc_id=doc_id, meta=meta)
        self._append("document_added",
                     {"id": doc.id, "text": doc.text, "meta": doc.meta_dict()})
        return self.documents[doc.id]

    def add_annotation(self, ann: Annotation) -> Annotation:
        if ann.id in self.annotations:
            raise DuplicateAnnotationError(f"annotation id {ann.id!r} already exists")
        if ann.doc_id not in self.documents:
            raise UnknownDocumentError(f"unknown document {ann.doc_id!r}")
        self._append("annotation_added", annotation_to_dict(ann))
        return ann

    def remove_annotation(self, ann_id: str) -> None:
        if ann_id not in self.annotations:
            raise UnknownAnnotationError(f"unknown annotation {ann_id!r}")
        self._append("annotation_removed", {"id": ann_id})

    def attach_explanation(self, ann_id: str, explanation) -> None:
        if ann_id not in self.annotations:
            raise UnknownAnnotationError(f"unknown annotation {ann_id!r}")
        self._append("explanation_added", {
            "annotation_id": ann_id,
            "explanation": explanation_to_dict(explanation)})

    def publish_snapshot(self, snapshot_dict: dict) -> None:
        self._append("snapshot_published", snapshot_dict)

    # -- queries --------------------------------------------------------------

    def annotations_for(self, doc_id: str) -> list[Annotation]:
        return sorted((a for a in self.annotations.values() if a.doc_id == doc_id),
                      key=lambda a: a.id)

    def annotated_doc_ids(self, include_weak: bool = True) -> set[str]:
        return {a.doc_id for a in self.annotations.values()
                if include_weak or a.source is not AnnotationSource.WEAK}

    def state_fingerprint(self) -> dict:
        """Comparable view of the materialized state (replay checks)."""
        return {
            "name": self.name,
            "schema": None if self.schema is None else {
                "task": self.schema.task.value,
                "labels": [(l.name, l.shortcut_key, l.color)
                           for l in self.schema.labels],
            },
            "documents": {d.id: d.text for d in self.documents.values()},
            "annotations": {a.id: annotation_to_dict(a)
                            for a in self.annotations.values()},
            "latest_snapshot": self.latest_snapshot,
        }

    # -- corpus import ----------------------------------------------------------

    def import_corpus(self, payload: str | bytes, fmt: str = "plain") -> int:
        """Load documents (and, for exported JSON, annotations) from a
        text payload.  Returns the number of new documents; duplicate
        texts are skipped."""
        if isinstance(payload, bytes):
            payload = payload.decode("utf-8")
        if fmt == "plain":
            return self._import_plain(payload)
        if fmt == "csv":
            return self._import_csv(payload)
        if fmt == "json":
            return self._import_json(payload)
        raise StoreError(f"unknown import format {fmt!r}")

    def _import_plain(self, payload: str) -> int:
        count = 0
        for line_no, line in enumerate(payload.splitlines(), start=1):
            text = line.strip()
            if not text:
                continue
            if self.add_document(text) is not None:
                count += 1
        return count

    def _import_csv(self, payload: str) -> int:
        reader = csv.reader(io.StringIO(payload))
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRecordError(1, "empty CSV payload") from None
        if "text" not in header:
            raise MalformedRecordError(1, 'missing required column "text"')
        text_col = header.index("text")
        count = 0
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRecordError(
                    line_no, f"expected {len(header)} fields, got {len(row)}")
            text = row[text_col].strip()
            if not text:
                raise MalformedRecordError(line_no, "empty text field")
            if self.add_document(text) is not None:
                count += 1
        return count

    def _import_json(self, payload: str) -> int:
        try:
            records = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(exc.lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(records, list):
            raise MalformedRecordError(1, "top-level JSON value must be an array")
        count = 0
        for idx, record in enumerate(records, start=1):
            if isinstance(record, dict) and "doc" in record:
                count += self._import_exported_record(idx, record)
            elif isinstance(record, dict) and "text" in record:
                text = record["text"]
                if not isinstance(text, str) or not text.strip():
                    raise MalformedRecordError(idx, "record has no usable text")
                meta = record.get("meta") or None
                if self.add_document(text, meta=meta) is not None:
                    count += 1
            else:
                raise MalformedRecordError(
                    idx, 'record needs a "text" or "doc" field')
        return count

    def _import_exported_record(self, idx: int, record: dict) -> int:
        doc_info = record["doc"]
        try:
            added = self.add_document(doc_info["text"], doc_id=doc_info["id"],
                                      meta=doc_info.get("meta") or None)
        except KeyError as exc:
            raise MalformedRecordError(idx, f"doc record missing {exc}") from None
        doc = self.documents[self._texts[content_id(doc_info["text"])]]

        def to_span(pair):
            if pair is None:
                return None
            return span_from_char_range(doc, pair[0], pair[1])

        for raw in record.get("annotations", []):
            if raw["id"] in self.annotations:
                continue
            explanation = None
            if raw.get("explanation") is not None:
                exp = raw["explanation"]
                if exp["variant"] == "trigger":
                    explanation = TriggerExplanation(trigger_spans=tuple(
                        to_span(pair) for pair in exp["triggers"]))
                else:
                    explanation = NLExplanation(
                        nl_text=exp["nl_text"],
                        parsed_form=form_from_dict(exp["logical_form"]))
            ann = Annotation(
                id=raw["id"], doc_id=doc.id, kind=AnnotationKind(raw["kind"]),
                label=raw["label"],
                span=to_span(raw.get("span")), subj=to_span(raw.get("subj")),
                obj=to_span(raw.get("obj")), aspect=to_span(raw.get("aspect")),
                explanation=explanation,
                source=AnnotationSource(raw["source"]),
                created_at=raw["created_at"],
                provenance=tuple((k, v) for k, v in raw.get("provenance", [])),
            )
            self.add_annotation(ann)
        return 1 if added is not None else 0

    # -- exports ------------------------------------------------------------

    def _exportable(self, include_weak: bool) -> list[Annotation]:
        return [a for a in self.annotations.values()
                if include_weak or a.source is not AnnotationSource.WEAK]

    def _char_pair(self, span: Optional[Span]) -> Optional[list[int]]:
        if span is None:
            return None
        start, end = span.char_range(self.documents[span.doc_id])
        return [start, end]

    def export_json(self, include_weak: bool = False) -> bytes:
        """Array of {doc, annotations} with character offsets; importing
        the output and exporting again is byte-identical."""
        keep = {a.id for a in self._exportable(include_weak)}
        out = []
        for doc in self.documents.values():
            anns = []
            for ann in self.annotations_for(doc.id):
                if ann.id not in keep:
                    continue
                exp = None
                if ann.explanation is not None:
                    if isinstance(ann.explanation, TriggerExplanation):
                        exp = {"variant": ann.explanation.variant,
                               "triggers": [self._char_pair(s)
                                            for s in ann.explanation.trigger_spans]}
                    else:
                        exp = {"variant": ann.explanation.variant,
                               "nl_text": ann.explanation.nl_text,
                               "logical_form": form_to_dict(ann.explanation.parsed_form)}
                anns.append({
                    "id": ann.id,
                    "kind": ann.kind.value,
                    "label": ann.label,
                    "source": ann.source.value,
                    "created_at": ann.created_at,
                    "span": self._char_pair(ann.span),
                    "subj": self._char_pair(ann.subj),
                    "obj": self._char_pair(ann.obj),
                    "aspect": self._char_pair(ann.aspect),
                    "explanation": exp,
                    "provenance": [list(p) for p in ann.provenance],
                })
            out.append({"doc": {"id": doc.id, "text": doc.text,
                                "meta": doc.meta_dict()},
                        "annotations": anns})
        return json.dumps(out, sort_keys=True, ensure_ascii=False,
                          separators=(",", ":")).encode("utf-8")

    def export_csv(self, include_weak: bool = False) -> bytes:
        """One RFC 4180 row per annotation; relation arguments land in
        the span/span2 column pairs, class aspects in span."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(CSV_COLUMNS)
        for doc in self.documents.values():
            for ann in self.annotations_for(doc.id):
                if ann.source is AnnotationSource.WEAK and not include_weak:
                    continue
                first = ann.span if ann.kind is AnnotationKind.SPAN else (
                    ann.subj if ann.kind is AnnotationKind.RELATION else ann.aspect)
                second = ann.obj if ann.kind is AnnotationKind.RELATION else None
                pair1 = self._char_pair(first) or ["", ""]
                pair2 = self._char_pair(second) or ["", ""]
                variant, payload = "", ""
                if ann.explanation is not None:
                    variant = ann.explanation.variant
                    if isinstance(ann.explanation, TriggerExplanation):
                        payload = json.dumps(
                            [self._char_pair(s)
                             for s in ann.explanation.trigger_spans],
                            sort_keys=True)
                    else:
                        payload = json.dumps(
                            {"nl_text": ann.explanation.nl_text,
                             "logical_form": form_to_dict(ann.explanation.parsed_form)},
                            sort_keys=True)
                writer.writerow([doc.id, doc.text, ann.kind.value,
                                 pair1[0], pair1[1], pair2[0], pair2[1],
                                 ann.label, ann.source.value, variant, payload])
        return buf.getvalue().encode("utf-8")

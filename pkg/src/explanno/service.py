"""HTTP facade over annotation projects.

All payloads are JSON and all text positions are character offsets into
the document text, which is what a browser selection naturally yields;
the server converts to token spans and rejects ranges that do not line
up with token boundaries.  Validation failures come back as 400 with
the full list of violated invariants, unknown resources as 404, and a
second annotation with an already-used id as 409 (unless the retry
carries the same request id, in which case the recorded response is
replayed).

Training runs in the request path, guarded by a per-project lock: a
tick fires once `retrain_batch` submissions accumulate or once the
oldest unprocessed submission is `retrain_seconds` old.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from fastapi import Body, FastAPI, HTTPException, Response

from .core import (
    Annotation,
    AnnotationKind,
    Document,
    LabelSchema,
    NLExplanation,
    Span,
    Task,
    TriggerExplanation,
    span_from_char_range,
)
from .embeddings import EmbeddingTable, toy_table
from .engine import EngineConfig, Project, config_from_dict
from .grammar import inventory_json
from .parser import parse
from .store import (
    DuplicateAnnotationError,
    MalformedRecordError,
    ProjectStore,
    StoreError,
)

ENV_PORT = "EXPLANNO_PORT"
ENV_DATA_DIR = "EXPLANNO_DATA_DIR"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8780
    data_dir: Optional[str] = None
    embeddings_path: Optional[str] = None
    engine: EngineConfig = field(default_factory=EngineConfig)


def load_config(path: Optional[str | Path] = None,
                env: Optional[dict] = None) -> ServiceConfig:
    """Config file plus environment overrides.  TOML is accepted on
    interpreters that ship tomllib; JSON always works."""
    env = os.environ if env is None else env
    data = {}
    if path is not None:
        path = Path(path)
        raw = path.read_bytes()
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError as exc:
                raise ValueError(
                    "TOML config needs Python 3.11+; use JSON instead") from exc
            data = tomllib.loads(raw.decode("utf-8"))
        elif path.suffix == ".json":
            data = json.loads(raw)
        else:
            raise ValueError(f"unsupported config format {path.suffix!r}")
    engine = config_from_dict(data.pop("engine", {}))
    known = {"host", "port", "data_dir", "embeddings_path"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    config = ServiceConfig(engine=engine, **data)
    if ENV_PORT in env:
        config.port = int(env[ENV_PORT])
    if ENV_DATA_DIR in env:
        config.data_dir = env[ENV_DATA_DIR]
    return config


# ---------------------------------------------------------------------------
# JSON <-> annotation with char offsets


def _char_span(doc: Document, payload, what: str,
               violations: list[str]) -> Optional[Span]:
    if payload is None:
        return None
    try:
        start, end = int(payload["start"]), int(payload["end"])
    except (KeyError, TypeError, ValueError):
        violations.append(f"{what} must be {{start, end}} character offsets")
        return None
    try:
        return span_from_char_range(doc, start, end)
    except ValueError as exc:
        violations.append(f"{what}: {exc}")
        return None


def annotation_from_json(payload: dict, doc: Document, task: Task,
                         violations: list[str]) -> Optional[Annotation]:
    """Build an annotation from the wire shape, accumulating invariant
    violations instead of raising."""
    ann_id = payload.get("id")
    if not ann_id or not isinstance(ann_id, str):
        violations.append("annotation id is required")
    try:
        kind = AnnotationKind(payload.get("kind"))
    except ValueError:
        violations.append(f"unknown annotation kind {payload.get('kind')!r}")
        return None
    label = payload.get("label")
    if not isinstance(label, str) or not label:
        violations.append("label is required")
        label = ""

    span = _char_span(doc, payload.get("span"), "span", violations)
    subj = _char_span(doc, payload.get("subj"), "subj", violations)
    obj = _char_span(doc, payload.get("obj"), "obj", violations)
    aspect = _char_span(doc, payload.get("aspect"), "aspect", violations)
    if kind is AnnotationKind.SPAN and span is None:
        violations.append("span annotation requires a span")
    if kind is AnnotationKind.RELATION and (subj is None or obj is None):
        violations.append("relation requires subj and obj (click order)")

    explanation = None
    exp = payload.get("explanation")
    if exp is not None:
        variant = exp.get("variant")
        if variant == "trigger":
            spans = []
            for i, item in enumerate(exp.get("trigger_spans") or ()):
                got = _char_span(doc, item, f"trigger_spans[{i}]", violations)
                if got is not None:
                    spans.append(got)
            if not spans:
                violations.append("trigger explanation needs at least one trigger span")
            else:
                explanation = TriggerExplanation(trigger_spans=tuple(spans))
        elif variant == "natural_language":
            nl_text = exp.get("nl_text") or ""
            try:
                form = parse(nl_text, task, label)
                explanation = NLExplanation(nl_text=nl_text, parsed_form=form)
            except ValueError as exc:
                violations.append(f"explanation does not parse: {exc}")
        else:
            violations.append(f"unknown explanation variant {variant!r}")

    if violations:
        return None
    return Annotation(id=ann_id, doc_id=doc.id, kind=kind, label=label,
                      span=span, subj=subj, obj=obj, aspect=aspect,
                      explanation=explanation)


def annotation_to_json(ann: Annotation, doc: Document) -> dict:
    def chars(span: Optional[Span]):
        if span is None:
            return None
        start, end = span.char_range(doc)
        return {"start": start, "end": end, "text": doc.text[start:end]}

    exp = None
    if isinstance(ann.explanation, TriggerExplanation):
        exp = {"variant": "trigger",
               "trigger_spans": [chars(s) for s in ann.explanation.trigger_spans]}
    elif isinstance(ann.explanation, NLExplanation):
        exp = {"variant": "natural_language", "nl_text": ann.explanation.nl_text}
    return {"id": ann.id, "doc_id": ann.doc_id, "kind": ann.kind.value,
            "label": ann.label, "span": chars(ann.span), "subj": chars(ann.subj),
            "obj": chars(ann.obj), "aspect": chars(ann.aspect),
            "explanation": exp, "source": ann.source.value,
            "provenance": ann.provenance_dict()}


# ---------------------------------------------------------------------------


@dataclass
class ProjectHandle:
    project: Project
    lock: threading.Lock = field(default_factory=threading.Lock)
    pending: int = 0
    oldest_pending: Optional[float] = None
    seen_requests: dict = field(default_factory=dict)
    last_report: Optional[dict] = None


class ServiceState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.handles: dict[str, ProjectHandle] = {}
        self.clock: Callable[[], float] = time.monotonic
        self.embeddings = (EmbeddingTable.load(config.embeddings_path)
                           if config.embeddings_path else toy_table())
        if config.data_dir:
            self._reload(Path(config.data_dir))

    def _reload(self, data_dir: Path) -> None:
        data_dir.mkdir(parents=True, exist_ok=True)
        for log in sorted(data_dir.glob("*.jsonl")):
            store = ProjectStore.load(log)
            project = Project(store, embeddings=self.embeddings,
                              config=self.config.engine)
            self.handles[log.stem] = ProjectHandle(project=project)

    def new_project(self, name: str, schema: LabelSchema) -> str:
        pid = f"p{len(self.handles) + 1}"
        log_path = None
        if self.config.data_dir:
            log_path = Path(self.config.data_dir) / f"{pid}.jsonl"
        store = ProjectStore(log_path=log_path)
        store.create_project(name, schema)
        project = Project(store, embeddings=self.embeddings,
                          config=self.config.engine)
        self.handles[pid] = ProjectHandle(project=project)
        return pid

    def handle(self, pid: str) -> ProjectHandle:
        if pid not in self.handles:
            raise HTTPException(404, f"unknown project {pid!r}")
        return self.handles[pid]

    def maybe_tick(self, handle: ProjectHandle, force: bool = False) -> Optional[dict]:
        """Run the training pass when due.  One at a time per project."""
        config = self.config.engine
        with handle.lock:
            due = force or handle.pending >= config.retrain_batch or (
                handle.oldest_pending is not None
                and self.clock() - handle.oldest_pending >= config.retrain_seconds)
            if not due:
                return None
            report = handle.project.pipeline_tick().to_dict()
            handle.pending = 0
            handle.oldest_pending = None
            handle.last_report = report
            return report


def _bad_request(violations: list[str]):
    return HTTPException(400, {"violations": violations})


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="explanno", docs_url=None, redoc_url=None)
    state = ServiceState(config)
    app.state.service = state

    @app.post("/projects")
    def create_project(payload: dict = Body(...)):
        violations = []
        name = payload.get("name")
        if not name or not isinstance(name, str):
            violations.append("project name is required")
        try:
            task = Task(payload.get("task"))
        except ValueError:
            violations.append(f"unknown task {payload.get('task')!r}")
            task = None
        labels = payload.get("labels") or []
        if not labels:
            violations.append("at least one label is required")
        if violations:
            raise _bad_request(violations)
        schema = LabelSchema.create(task, labels)
        pid = state.new_project(name, schema)
        return {"project_id": pid, "name": name, "task": task.value,
                "labels": [{"name": l.name, "shortcut_key": l.shortcut_key,
                            "color": l.color} for l in schema.labels]}

    @app.get("/projects/{pid}")
    def project_info(pid: str):
        project = state.handle(pid).project
        schema = project.schema
        return {"project_id": pid, "name": project.store.name,
                "task": schema.task.value,
                "labels": [{"name": l.name, "shortcut_key": l.shortcut_key,
                            "color": l.color} for l in schema.labels]}

    @app.post("/projects/{pid}/documents")
    def upload_corpus(pid: str, payload: dict = Body(...)):
        handle = state.handle(pid)
        fmt = payload.get("format", "plain")
        content = payload.get("content", "")
        try:
            with handle.lock:
                added = handle.project.store.import_corpus(content, fmt=fmt)
        except MalformedRecordError as exc:
            raise _bad_request([str(exc)])
        except StoreError as exc:
            raise _bad_request([str(exc)])
        return {"added": added,
                "documents": len(handle.project.store.documents)}

    @app.get("/projects/{pid}/documents")
    def list_documents(pid: str):
        project = state.handle(pid).project
        annotated = {a.doc_id for a in project.human_annotations()}
        return {"documents": [
            {"id": doc.id, "text": doc.text, "annotated": doc.id in annotated}
            for doc in project.store.documents.values()]}

    @app.get("/projects/{pid}/documents/{doc_id}")
    def get_document(pid: str, doc_id: str):
        project = state.handle(pid).project
        doc = project.store.documents.get(doc_id)
        if doc is None:
            raise HTTPException(404, f"unknown document {doc_id!r}")
        return {"id": doc.id, "text": doc.text,
                "tokens": [{"text": t.text, "start": t.start, "end": t.end}
                           for t in doc.tokens],
                "annotations": [annotation_to_json(a, doc)
                                for a in project.store.annotations_for(doc_id)]}

    @app.get("/projects/{pid}/batch")
    def next_batch(pid: str, k: int = 10):
        project = state.handle(pid).project
        ids = project.next_batch(k)
        docs = [project.store.documents[d] for d in ids]
        return {"doc_ids": ids,
                "documents": [{"id": d.id, "text": d.text} for d in docs]}

    @app.post("/projects/{pid}/annotations")
    def submit_annotation(pid: str, payload: dict = Body(...)):
        handle = state.handle(pid)
        project = handle.project
        request_id = payload.get("request_id")
        if request_id and request_id in handle.seen_requests:
            return handle.seen_requests[request_id]

        doc_id = payload.get("doc_id")
        doc = project.store.documents.get(doc_id)
        if doc is None:
            raise HTTPException(404, f"unknown document {doc_id!r}")
        violations: list[str] = []
        ann = annotation_from_json(payload.get("annotation") or {}, doc,
                                   project.task, violations)
        if ann is None:
            raise _bad_request(violations)
        try:
            with handle.lock:
                stored = project.add_annotation(ann)
                handle.pending += 1
                if handle.oldest_pending is None:
                    handle.oldest_pending = state.clock()
        except DuplicateAnnotationError as exc:
            raise HTTPException(409, str(exc))
        except ValueError as exc:
            raise _bad_request(str(exc).split("; "))

        report = state.maybe_tick(handle)
        response = {"annotation": annotation_to_json(stored, doc),
                    "training": report}
        if request_id:
            handle.seen_requests[request_id] = response
        return response

    @app.get("/projects/{pid}/documents/{doc_id}/recommendations")
    def get_recommendations(pid: str, doc_id: str):
        project = state.handle(pid).project
        try:
            recs = project.recommendations(doc_id)
        except KeyError:
            raise HTTPException(404, f"unknown document {doc_id!r}")
        return {"recommendations": recs,
                "snapshot_version": project.snapshot.snapshot_version
                if project.snapshot else 0}

    @app.get("/projects/{pid}/suggest")
    def get_suggest(pid: str, prefix: str = "", cursor: Optional[int] = None):
        project = state.handle(pid).project
        return {"suggestions": project.suggest(prefix, cursor=cursor)}

    @app.get("/projects/{pid}/grammar")
    def get_grammar(pid: str):
        state.handle(pid)
        return {"predicates": inventory_json()}

    @app.get("/projects/{pid}/export")
    def export(pid: str, format: str = "json", include_weak: bool = False):
        project = state.handle(pid).project
        if format == "json":
            body = project.store.export_json(include_weak=include_weak)
            return Response(content=body, media_type="application/json")
        if format == "csv":
            body = project.store.export_csv(include_weak=include_weak)
            return Response(content=body, media_type="text/csv")
        raise _bad_request([f"unknown export format {format!r}"])

    @app.get("/projects/{pid}/status")
    def training_status(pid: str):
        handle = state.handle(pid)
        status = handle.project.status()
        status["queue_depth"] = handle.pending
        status["last_tick"] = handle.last_report
        return status

    @app.post("/projects/{pid}/tick")
    def force_tick(pid: str):
        handle = state.handle(pid)
        return state.maybe_tick(handle, force=True)

    return app


def run(config: ServiceConfig) -> None:  # pragma: no cover - thin wrapper
    import uvicorn
    uvicorn.run(create_app(config), host=config.host, port=config.port)

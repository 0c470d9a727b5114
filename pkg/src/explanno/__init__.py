"""Label-efficient text annotation: capture a label and the reason for
it, turn the reason into matchable rules, weak-label the rest of the
corpus, and train recommenders that keep up with the annotator.

The pieces compose bottom-up: `core` holds documents, spans and
annotations; `grammar`/`parser` turn natural-language rationales into
logical forms; `matcher` scores those forms against unlabeled text;
`triggers` learns cue-phrase representations for sequence tasks;
`models` trains the downstream taggers and classifiers; `engine.Project`
wires all of it to the append-only `store`; `service` and `cli` expose
the result over HTTP and the shell.
"""

from .core import (
    Annotation,
    AnnotationKind,
    AnnotationSource,
    Document,
    Label,
    LabelSchema,
    NLExplanation,
    Span,
    Task,
    TriggerExplanation,
    tokenize,
)
from .embeddings import EmbeddingTable, toy_table
from .engine import EngineConfig, Project, TickReport
from .grammar import LogicalForm
from .matcher import MatchContext, MatchResult, Thresholds, match_sentence, weak_label_corpus
from .models import ModelSnapshot, TrainingExample, online_update, predict
from .parser import ExplanationParseError, parse, suggest
from .sampler import select_batch, uncertainty
from .store import ProjectStore
from .triggers import TriggerExample, TriggerModel, soft_match

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AnnotationKind",
    "AnnotationSource",
    "Document",
    "EmbeddingTable",
    "EngineConfig",
    "ExplanationParseError",
    "Label",
    "LabelSchema",
    "LogicalForm",
    "MatchContext",
    "MatchResult",
    "ModelSnapshot",
    "NLExplanation",
    "Project",
    "ProjectStore",
    "Span",
    "Task",
    "Thresholds",
    "TickReport",
    "TrainingExample",
    "TriggerExample",
    "TriggerExplanation",
    "TriggerModel",
    "match_sentence",
    "online_update",
    "parse",
    "predict",
    "select_batch",
    "soft_match",
    "suggest",
    "tokenize",
    "toy_table",
    "uncertainty",
    "weak_label_corpus",
    "__version__",
]

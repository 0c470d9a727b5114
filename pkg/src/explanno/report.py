"""Label-efficiency benchmark and report rendering.

The benchmark pits two annotation budgets against each other on the
bundled synthetic corpus: a small set of labeled sentences whose
explanations drive weak labeling of a large pool, versus twice as many
labeled sentences used alone.  Both conditions share one corpus, one
train/pool/test split and one downstream model; the only difference is
whether explanations are attached.  Reports land as a delimited metrics
file plus rendered figures next to it.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .core import Annotation, LabelSchema, Task, tokenize
from .engine import EngineConfig, Project
from .models import classification_report, predict_class
from .parser import parse
from .synthetic import (
    SyntheticSentence,
    explanation_text,
    generate_corpus,
    synthetic_embeddings,
)
from .core import NLExplanation


@dataclass
class ConditionResult:
    name: str
    gold_docs: int
    weak_labels: int
    rules: int
    macro_f1: float
    per_label_f1: dict[str, float] = field(default_factory=dict)


@dataclass
class BenchmarkResult:
    explained: ConditionResult
    baseline: ConditionResult
    test_size: int
    seed: int
    seconds: float

    @property
    def gap(self) -> float:
        return self.explained.macro_f1 - self.baseline.macro_f1


def _build_condition(name: str,
                     gold: Sequence[SyntheticSentence],
                     pool: Sequence[SyntheticSentence],
                     labels: Sequence[str],
                     embeddings,
                     explain: bool,
                     config: EngineConfig) -> tuple[Project, int, int]:
    project = Project.create(
        name, LabelSchema.create(Task.SENTIMENT_ANALYSIS, labels),
        embeddings=embeddings, config=config)
    gold_docs = [project.store.add_document(s.text) for s in gold]
    for s in pool:
        project.store.add_document(s.text)
    rules = set()
    for i, (sentence, doc) in enumerate(zip(gold, gold_docs)):
        explanation = None
        if explain:
            text = explanation_text(sentence.cue)
            explanation = NLExplanation(
                nl_text=text,
                parsed_form=parse(text, Task.SENTIMENT_ANALYSIS, sentence.label))
            rules.add(sentence.cue)
        project.add_annotation(Annotation.classification(
            f"g{i}", doc.id, sentence.label, explanation=explanation))
    report = project.pipeline_tick()
    return project, report.weak_labels, len(rules)


def _evaluate(project: Project,
              test: Sequence[SyntheticSentence]) -> tuple[float, dict[str, float]]:
    gold, predicted = [], []
    for sentence in test:
        vec = project.featurizer.vector(tokenize(sentence.text))
        label, _ = predict_class(vec, project.snapshot.params)
        gold.append(sentence.label)
        predicted.append(label)
    report = classification_report(gold, predicted,
                                   labels=project.schema.label_names)
    per_label = {name: stats["f1"] for name, stats in report["labels"].items()}
    return report["macro_f1"], per_label


def run_benchmark(n_sentences: int = 600,
                  explained_budget: int = 50,
                  baseline_budget: int = 100,
                  test_size: int = 200,
                  seed: int = 7,
                  config: Optional[EngineConfig] = None) -> BenchmarkResult:
    """Fixed-seed comparison on a fresh synthetic corpus.  The explained
    condition annotates `explained_budget` sentences with their cue
    explanations and weak-labels the pool; the baseline annotates
    `baseline_budget` sentences and uses nothing else."""
    if n_sentences < baseline_budget + test_size:
        raise ValueError("corpus too small for the requested budgets")
    started = time.perf_counter()
    corpus = generate_corpus(n_sentences, seed=seed)
    embeddings = synthetic_embeddings()
    annotatable = corpus.sentences[:baseline_budget]
    pool = corpus.sentences[baseline_budget:n_sentences - test_size]
    test = corpus.sentences[n_sentences - test_size:]
    config = config or EngineConfig()

    project, weak_count, rules = _build_condition(
        "explained", annotatable[:explained_budget], pool,
        corpus.labels, embeddings, True, config)
    macro, per_label = _evaluate(project, test)
    explained = ConditionResult(
        name="explained", gold_docs=explained_budget, weak_labels=weak_count,
        rules=rules, macro_f1=macro, per_label_f1=per_label)

    project, weak_count, _ = _build_condition(
        "baseline", annotatable, pool, corpus.labels, embeddings, False, config)
    macro, per_label = _evaluate(project, test)
    baseline = ConditionResult(
        name="baseline", gold_docs=baseline_budget, weak_labels=weak_count,
        rules=0, macro_f1=macro, per_label_f1=per_label)

    return BenchmarkResult(explained=explained, baseline=baseline,
                           test_size=len(test), seed=seed,
                           seconds=time.perf_counter() - started)


# ---------------------------------------------------------------------------
# Rendering


def benchmark_csv(result: BenchmarkResult) -> str:
    """Delimited view of the benchmark, one row per condition."""
    labels = sorted(result.explained.per_label_f1)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["condition", "gold_docs", "weak_labels", "rules",
                     "macro_f1"] + [f"f1_{l}" for l in labels])
    for cond in (result.explained, result.baseline):
        writer.writerow(
            [cond.name, cond.gold_docs, cond.weak_labels, cond.rules,
             f"{cond.macro_f1:.4f}"]
            + [f"{cond.per_label_f1.get(l, 0.0):.4f}" for l in labels])
    return buf.getvalue()


def render_figures(result: BenchmarkResult, out_dir: str | Path) -> list[Path]:
    """Write the comparison charts next to the metrics file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(5, 4))
    conds = [result.explained, result.baseline]
    names = [f"{c.name}\n({c.gold_docs} gold)" for c in conds]
    scores = [c.macro_f1 for c in conds]
    bars = ax.bar(names, scores, color=["#2a7fba", "#999999"])
    for bar, score in zip(bars, scores):
        ax.text(bar.get_x() + bar.get_width() / 2, score + 0.01,
                f"{score:.3f}", ha="center")
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("macro F1")
    ax.set_title(f"Label efficiency (gap {result.gap * 100:+.1f} F1 points)")
    path = out_dir / "macro_f1.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    paths.append(path)

    labels = sorted(result.explained.per_label_f1)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.38
    xs = range(len(labels))
    ax.bar([x - width / 2 for x in xs],
           [result.explained.per_label_f1[l] for l in labels],
           width, label=f"explained ({result.explained.gold_docs} gold)",
           color="#2a7fba")
    ax.bar([x + width / 2 for x in xs],
           [result.baseline.per_label_f1[l] for l in labels],
           width, label=f"baseline ({result.baseline.gold_docs} gold)",
           color="#999999")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=20)
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("F1")
    ax.set_title("Per-label F1 by condition")
    ax.legend()
    path = out_dir / "per_label_f1.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    paths.append(path)
    return paths


def write_report(result: BenchmarkResult, out_dir: str | Path) -> dict:
    """Metrics CSV plus figures in one directory; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = out_dir / "metrics.csv"
    metrics.write_text(benchmark_csv(result), encoding="utf-8")
    figures = render_figures(result, out_dir)
    return {"metrics": metrics, "figures": figures, "gap": result.gap}

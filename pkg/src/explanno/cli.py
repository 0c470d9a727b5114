"""Command line entry points.

Every subcommand except `serve` and `report` operates on a project
event log, the same append-only file the HTTP service writes, so the
two front ends are interchangeable: annotate over HTTP, then train or
export from the shell, or the other way around.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import click

from .core import AnnotationKind, AnnotationSource, LabelSchema, Task
from .engine import EngineConfig, Project
from .models import predict_class, prf_counts
from .store import CSV_COLUMNS, ProjectStore, StoreError


@click.group()
def main():
    """Label-efficient annotation: explanations in, weak labels and
    trained recommenders out."""


def _load_project(log: str, config: EngineConfig | None = None) -> Project:
    try:
        store = ProjectStore.load(log)
    except (StoreError, OSError) as exc:
        raise click.ClickException(str(exc))
    if store.schema is None:
        raise click.ClickException(f"{log} contains no project; run init first")
    return Project(store, config=config)


@main.command()
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Service config file (.json, or .toml on Python 3.11+).")
def serve(config_path):
    """Run the HTTP service."""
    from .service import load_config, run
    try:
        config = load_config(config_path)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"listening on {config.host}:{config.port}")
    run(config)


@main.command()
@click.option("--log", required=True, type=click.Path(dir_okay=False),
              help="Event log file to create.")
@click.option("--name", required=True)
@click.option("--task", required=True,
              type=click.Choice([t.value for t in Task]))
@click.option("--label", "labels", multiple=True, required=True,
              help="Label name; repeat for each label.")
def init(log, name, task, labels):
    """Create a new project event log."""
    path = Path(log)
    if path.exists():
        raise click.ClickException(f"{log} already exists")
    store = ProjectStore(log_path=path)
    store.create_project(name, LabelSchema.create(task, list(labels)))
    click.echo(f"created project {name!r} ({task}) in {log}")


@main.command(name="import")
@click.argument("source", type=click.File("rb"))
@click.option("--log", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", default="plain",
              type=click.Choice(["plain", "csv", "json"]))
def import_cmd(source, log, fmt):
    """Add documents (and annotations, for exported JSON) to a project."""
    project = _load_project(log)
    try:
        added = project.store.import_corpus(source.read(), fmt=fmt)
    except StoreError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"added {added} new documents "
               f"({len(project.store.documents)} total)")


@main.command()
@click.option("--log", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", default="json",
              type=click.Choice(["json", "csv"]))
@click.option("--include-weak", is_flag=True, default=False)
@click.option("-o", "--output", type=click.File("wb"), default="-")
def export(log, fmt, include_weak, output):
    """Write the project's documents and annotations."""
    project = _load_project(log)
    if fmt == "json":
        body = project.store.export_json(include_weak=include_weak)
    else:
        body = project.store.export_csv(include_weak=include_weak)
    output.write(body)


def _echo_report(report) -> None:
    click.echo(f"parsed explanations: {report.parsed_forms}")
    click.echo(f"trigger entries:     {report.trigger_count}")
    click.echo(f"weak labels:         {report.weak_labels}")
    click.echo(f"snapshot version:    {report.snapshot_version}")
    for name, message in report.failures:
        click.echo(f"failure [{name}]: {message}", err=True)


@main.command()
@click.option("--log", required=True, type=click.Path(exists=True, dir_okay=False))
def train(log):
    """Run one weak supervision pass and publish a snapshot."""
    project = _load_project(log)
    report = project.pipeline_tick()
    if report.no_op:
        click.echo(f"nothing new since snapshot {report.snapshot_version}; "
                   "no retraining needed")
        return
    _echo_report(report)


@main.command()
@click.option("--log", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.File("wb"), default="-")
def weaklabel(log, output):
    """Weak-label the unlabeled pool and emit those rows as CSV."""
    project = _load_project(log)
    report = project.pipeline_tick()
    if not report.no_op:
        _echo_report(report)
    full = project.store.export_csv(include_weak=True).decode("utf-8")
    rows = list(csv.reader(io.StringIO(full)))
    source_col = CSV_COLUMNS.index("source")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(rows[0])
    kept = 0
    for row in rows[1:]:
        if row[source_col] == AnnotationSource.WEAK.value:
            writer.writerow(row)
            kept += 1
    output.write(buf.getvalue().encode("utf-8"))
    click.echo(f"{kept} weak labels", err=True)


@main.command(name="eval")
@click.argument("corpus", type=click.File("rb"))
@click.option("--log", required=True, type=click.Path(exists=True, dir_okay=False))
def eval_cmd(corpus, log):
    """Score the trained model against a labeled corpus (exported JSON)."""
    project = _load_project(log)
    project.pipeline_tick()
    if project.snapshot is None:
        raise click.ClickException("project has no trained model")
    test = ProjectStore()
    test.create_project("eval", project.schema)
    try:
        test.import_corpus(corpus.read(), fmt="json")
    except StoreError as exc:
        raise click.ClickException(str(exc))

    if project.model_kind == "classifier":
        results = _eval_classifier(project, test)
    else:
        results = _eval_spans(project, test)
    width = max(len(l) for l in results) + 2
    click.echo(f"{'label'.ljust(width)}precision  recall     f1")
    macro = 0.0
    for label, (p, r, f1) in sorted(results.items()):
        click.echo(f"{label.ljust(width)}{p:<11.3f}{r:<11.3f}{f1:.3f}")
        macro += f1
    click.echo(f"macro F1: {macro / len(results):.4f}")


def _eval_classifier(project: Project, test: ProjectStore) -> dict:
    counts = {l: [0, 0, 0] for l in project.schema.label_names}  # tp, fp, fn
    for doc_id, doc in test.documents.items():
        gold = [a for a in test.annotations_for(doc_id)
                if a.kind is AnnotationKind.CLASS]
        if not gold:
            continue
        vec = project.featurizer.vector(doc.tokenized)
        predicted, _ = predict_class(vec, project.snapshot.params)
        actual = gold[0].label
        if predicted == actual:
            counts[actual][0] += 1
        else:
            if predicted in counts:
                counts[predicted][1] += 1
            counts[actual][2] += 1
    return {l: prf_counts(tp, fp, fn) for l, (tp, fp, fn) in counts.items()}


def _eval_spans(project: Project, test: ProjectStore) -> dict:
    from .engine import doc_sentences
    from .models import SequenceLabeler, bio_spans

    labeler = SequenceLabeler(project.snapshot.params, project.embeddings)
    counts = {l: [0, 0, 0] for l in project.schema.label_names}
    for doc_id, doc in test.documents.items():
        gold = {(a.span.start_tok, a.span.end_tok, a.label)
                for a in test.annotations_for(doc_id)
                if a.kind is AnnotationKind.SPAN}
        predicted = set()
        for ref in doc_sentences(doc):
            for start, end, label in bio_spans(labeler.decode(ref.tokenized)):
                predicted.add((ref.tok_offset + start, ref.tok_offset + end, label))
        for span in predicted & gold:
            counts[span[2]][0] += 1
        for span in predicted - gold:
            if span[2] in counts:
                counts[span[2]][1] += 1
        for span in gold - predicted:
            counts[span[2]][2] += 1
    return {l: prf_counts(tp, fp, fn) for l, (tp, fp, fn) in counts.items()}


@main.command()
@click.option("-o", "--out-dir", default="report",
              type=click.Path(file_okay=False))
@click.option("--sentences", default=600, show_default=True)
@click.option("--seed", default=7, show_default=True)
def report(out_dir, sentences, seed):
    """Run the label-efficiency benchmark; write metrics CSV and figures."""
    from .report import run_benchmark, write_report
    try:
        result = run_benchmark(n_sentences=sentences, seed=seed)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    manifest = write_report(result, out_dir)
    click.echo(f"explained ({result.explained.gold_docs} gold + "
               f"{result.explained.rules} rules): "
               f"macro F1 {result.explained.macro_f1:.4f}")
    click.echo(f"baseline  ({result.baseline.gold_docs} gold): "
               f"macro F1 {result.baseline.macro_f1:.4f}")
    click.echo(f"gap: {result.gap * 100:+.2f} F1 points "
               f"in {result.seconds:.1f}s")
    click.echo(f"metrics: {manifest['metrics']}")
    for figure in manifest["figures"]:
        click.echo(f"figure:  {figure}")


if __name__ == "__main__":
    main()

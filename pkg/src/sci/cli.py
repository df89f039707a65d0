"""The ``sci`` command line tool.

Exit codes are uniform across subcommands: 0 success, 1 when violations or
command failures were found, 2 on usage/IO errors. All subcommands are
offline; the HTTP service is started separately (``python -m sci.service``).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import edits
from .graph import export_dot
from .induction import (
    BackendFailure,
    EmptyGeneration,
    InductionConfig,
    InductionInput,
    QnodeCatalog,
    StubBackend,
    run_induction,
)
from .instantiation import (
    MatcherConfig,
    MissingProvenance,
    Stoplist,
    coverage_stats,
    load_instances,
    run_pipeline,
)
from .sdf import SdfError, parse_schema, serialize_schema, validate


def _read_file(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        sys.exit(2)


def _parse_file(path: str):
    try:
        return parse_schema(_read_file(path))
    except SdfError as exc:
        click.echo(f"error: {path}: {exc}", err=True)
        sys.exit(2)


@click.group()
def main() -> None:
    """Curation toolkit for hierarchical event schemas."""


@main.command(name="validate")
@click.argument("file", type=click.Path())
@click.option("--strict", is_flag=True, help="Treat warnings as errors for the exit code.")
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def validate_cmd(file: str, strict: bool, as_json: bool) -> None:
    """Check a schema file against every structural invariant."""
    doc = _parse_file(file)
    report = validate(doc)
    if as_json:
        click.echo(json.dumps(report.to_jsonable(), indent=2, ensure_ascii=False))
    else:
        for violation in report.violations:
            click.echo(f"{violation.code}\t{violation.element_id}\t{violation.message}")
    failing = report.violations if strict else report.errors()
    sys.exit(1 if failing else 0)


def _render_stats_table(stats) -> str:
    rows = [
        ("Induced", stats.induced_events, stats.induced_participants),
        ("Manually Curated", stats.curated_events, stats.curated_participants),
        ("Total", stats.total_events, stats.total_participants),
        ("Increase (%)", stats.increase_pct_events, stats.increase_pct_participants),
    ]
    label_width = max(len(r[0]) for r in rows)
    events_width = max(len("Events"), *(len(str(r[1])) for r in rows))
    parts_width = max(len("Participants"), *(len(str(r[2])) for r in rows))
    lines = [
        f"{'':<{label_width}}  {'Events':>{events_width}}  {'Participants':>{parts_width}}"
    ]
    for label, ev_count, part_count in rows:
        lines.append(
            f"{label:<{label_width}}  {ev_count:>{events_width}}  {part_count:>{parts_width}}"
        )
    return "\n".join(lines)


@main.command()
@click.argument("directory", type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Emit the aggregate as JSON.")
@click.option(
    "--figures",
    type=click.Path(),
    default=None,
    help="Also render a coverage chart (PNG) into this directory.",
)
def stats(directory: str, as_json: bool, figures: str | None) -> None:
    """Aggregate provenance statistics over a directory of schema files."""
    base = Path(directory)
    if not base.is_dir():
        click.echo(f"error: {directory} is not a directory", err=True)
        sys.exit(2)
    library = [_parse_file(str(path)) for path in sorted(base.glob("*.json"))]
    try:
        aggregate = coverage_stats(library)
    except MissingProvenance as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if as_json:
        click.echo(json.dumps(aggregate.to_jsonable(), indent=2))
    else:
        click.echo(_render_stats_table(aggregate))
    if figures:
        from .report import save_stats_figure

        out_dir = Path(figures)
        out_dir.mkdir(parents=True, exist_ok=True)
        target = save_stats_figure(aggregate, out_dir / "coverage_stats.png")
        click.echo(f"figure written to {target}", err=True)
    sys.exit(0)


@main.command()
@click.option("--scenario", required=True, help="Scenario name.")
@click.option("--chapters", required=True, help="Comma-separated chapter names, in order.")
@click.option("--fixture", "fixture_path", required=True, type=click.Path(), help="Stub fixture JSON.")
@click.option("--catalog", "catalog_path", type=click.Path(), default=None, help="Qnode catalog JSON.")
@click.option("--edge-threshold", type=float, default=0.5, show_default=True)
@click.option("--grounding-threshold", type=float, default=0.5, show_default=True)
@click.option("--expansion-depth", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Write the schema here instead of stdout.")
def induce(
    scenario: str,
    chapters: str,
    fixture_path: str,
    catalog_path: str | None,
    edge_threshold: float,
    grounding_threshold: float,
    expansion_depth: int,
    out: str | None,
) -> None:
    """Induce a schema from a stub fixture: skeleton, expansion, verification."""
    chapter_list = [c.strip() for c in chapters.split(",") if c.strip()]
    if not chapter_list:
        click.echo("error: at least one chapter is required", err=True)
        sys.exit(2)
    try:
        backend = StubBackend.from_file(fixture_path)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: cannot load fixture: {exc}", err=True)
        sys.exit(2)
    catalog = None
    if catalog_path:
        try:
            catalog = QnodeCatalog.from_file(catalog_path)
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            click.echo(f"error: cannot load catalog: {exc}", err=True)
            sys.exit(2)
    config = InductionConfig(
        edge_threshold=edge_threshold,
        grounding_threshold=grounding_threshold,
        expansion_depth=expansion_depth,
    )
    try:
        document = run_induction(
            backend,
            InductionInput(scenario_name=scenario, chapters=chapter_list),
            config=config,
            catalog=catalog,
        )
    except (BackendFailure, EmptyGeneration) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    data = serialize_schema(document)
    if out:
        Path(out).write_bytes(data)
    else:
        click.echo(data.decode("utf-8"), nl=False)
    sys.exit(0)


@main.command()
@click.argument("schema", type=click.Path())
@click.argument("instances", type=click.Path())
@click.option("--tau", type=float, default=0.7, show_default=True, help="Rematch similarity threshold.")
@click.option("--stoplist", "stoplist_path", type=click.Path(), default=None)
@click.option("--json", "as_json", is_flag=True, help="Emit worklist plus stats (service shape).")
@click.option(
    "--figures",
    type=click.Path(),
    default=None,
    help="Also render a worklist frequency chart (PNG) into this directory.",
)
def coverage(
    schema: str,
    instances: str,
    tau: float,
    stoplist_path: str | None,
    as_json: bool,
    figures: str | None,
) -> None:
    """Run the unmatched-event pipeline and print the curation worklist."""
    doc = _parse_file(schema)
    try:
        instance_list = load_instances(_read_file(instances))
    except (ValueError, KeyError, TypeError) as exc:
        click.echo(f"error: bad instance file: {exc}", err=True)
        sys.exit(2)
    stoplist = None
    if stoplist_path:
        try:
            stoplist = Stoplist.from_file(stoplist_path)
        except OSError as exc:
            click.echo(f"error: cannot read stoplist: {exc}", err=True)
            sys.exit(2)
    try:
        config = MatcherConfig(similarity_threshold=tau)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    worklist, recovered, _ = run_pipeline(instance_list, doc, config, stoplist)
    if as_json:
        payload: dict = {"worklist": worklist, "recovered": [i.to_jsonable() for i in recovered]}
        try:
            payload["stats"] = coverage_stats([doc]).to_jsonable()
        except MissingProvenance:
            payload["stats"] = None
        click.echo(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        click.echo(json.dumps(worklist, indent=2, ensure_ascii=False))
    if figures:
        from .report import save_worklist_figure

        out_dir = Path(figures)
        out_dir.mkdir(parents=True, exist_ok=True)
        target = save_worklist_figure(worklist, out_dir / "worklist_frequencies.png")
        click.echo(f"figure written to {target}", err=True)
    sys.exit(0)


@main.command(name="export-dot")
@click.argument("file", type=click.Path())
def export_dot_cmd(file: str) -> None:
    """Render a schema's graph topology as DOT text."""
    doc = _parse_file(file)
    click.echo(export_dot(doc), nl=False)
    sys.exit(0)


@main.command(name="apply")
@click.argument("file", type=click.Path())
@click.argument("envelopes", type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="Write the result here instead of stdout.")
def apply_cmd(file: str, envelopes: str, out: str | None) -> None:
    """Batch-apply command envelopes (one JSON object per line) to a schema."""
    doc = _parse_file(file)
    session = edits.DocumentSession(doc)
    for line_no, line in enumerate(_read_file(envelopes).decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            envelope = json.loads(line)
        except json.JSONDecodeError as exc:
            click.echo(f"error: line {line_no}: bad envelope: {exc}", err=True)
            sys.exit(2)
        expect = envelope.get("expect_version")
        if expect is not None and expect != session.doc_version:
            click.echo(
                f"error: line {line_no}: version conflict "
                f"(expected {expect!r}, at {session.doc_version!r})",
                err=True,
            )
            sys.exit(1)
        try:
            session.apply(envelope.get("op"), envelope.get("args") or {})
        except edits.EditError as exc:
            click.echo(f"error: line {line_no}: {exc.code}: {exc}", err=True)
            sys.exit(1)
    data = serialize_schema(session.current)
    if out:
        Path(out).write_bytes(data)
    else:
        click.echo(data.decode("utf-8"), nl=False)
    sys.exit(0)


if __name__ == "__main__":
    main()

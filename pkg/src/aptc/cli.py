"""Command-line front end.

Exit codes: 0 success or related, 1 not related, 2 usage or input error,
3 analysis error (state bound, unguarded recursion, rewriting failure).
"""

from __future__ import annotations

import json
import os
import sys
from importlib import resources
from pathlib import Path

import click

from . import casestudies
from .dsl import DslSyntaxError, load_model, parse_term, pretty, render_model
from .equivalence import RBS, STEP, Verdict, compare_terms
from .fuzz import soundness_fuzz
from .model import ModelError
from .pes import PesError, build_pes, hhp_bisimilar, hp_bisimilar, pes_step_bisimilar, pomset_bisimilar
from .rewriter import RewriteError, normalize_to_basic
from .sos import DEFAULT_BOUND, SosError, generate_lts

EXIT_OK, EXIT_UNRELATED, EXIT_USAGE, EXIT_ANALYSIS = 0, 1, 2, 3

PES_RELATIONS = {
    "step": pes_step_bisimilar,
    "pomset": pomset_bisimilar,
    "hp": hp_bisimilar,
    "hhp": hhp_bisimilar,
}
ALL_RELATIONS = ("step", "pomset", "hp", "hhp", "rbs")


class AnalysisFailure(click.ClickException):
    exit_code = EXIT_ANALYSIS


class InputFailure(click.ClickException):
    exit_code = EXIT_USAGE


def load_schema(name: str) -> dict:
    """A committed JSON schema for one of the outputs: verdict, fuzz or examples."""
    text = resources.files("aptc").joinpath("schemas").joinpath(f"{name}.schema.json").read_text(
        encoding="utf-8")
    return json.loads(text)


def _color() -> bool | None:
    return False if os.environ.get("APTC_COLOR", "1") == "0" else None


def _say(text: str = "", **style) -> None:
    if style:
        text = click.style(text, **style)
    click.echo(text, color=_color())


def _emit_json(data) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False), color=False)


def _load(path: str):
    try:
        return load_model(path)
    except OSError as exc:
        raise InputFailure(f"cannot read {path}: {exc.strerror}") from None
    except DslSyntaxError as exc:
        raise InputFailure(f"{path}: {exc}") from None
    except ModelError as exc:
        raise InputFailure(f"{path}: {type(exc).__name__}: {exc}") from None


def _term(m, text: str):
    try:
        return parse_term(text, m)
    except ModelError as exc:
        raise InputFailure(f"term {text!r}: {type(exc).__name__}: {exc}") from None


def _verdict_line(v: Verdict) -> None:
    word = "related" if v.related else "not related"
    _say(f"{word} ({v.relation})", fg="green" if v.related else "red", bold=True)
    if not v.related:
        _say(json.dumps(v.witness, sort_keys=True, ensure_ascii=False))


def _finish(v: Verdict, as_json: bool) -> None:
    if as_json:
        _emit_json(v.to_dict())
    else:
        _verdict_line(v)
    sys.exit(EXIT_OK if v.related else EXIT_UNRELATED)


def compare_relation(m, left, right, rel: str, bound: int = DEFAULT_BOUND, jobs: int = 1) -> Verdict:
    """One entry point for the transition-system and event-structure relations."""
    if rel in (STEP, RBS):
        return compare_terms(m, left, right, rel, bound, jobs)
    p1, p2 = build_pes(left, m), build_pes(right, m)
    related = PES_RELATIONS[rel](p1, p2)
    witness = {"kind": "event-structures",
               "left_events": len(p1.labels), "right_events": len(p2.labels)}
    return Verdict(related, rel, witness, {"states": len(p1.labels) + len(p2.labels)})


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli() -> None:
    """Truly concurrent process algebra toolkit."""


@cli.command("parse")
@click.argument("file", type=click.Path(dir_okay=False))
def parse_cmd(file: str) -> None:
    """Parse a model and print its canonical form."""
    click.echo(render_model(_load(file)), nl=False)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--term", "term_text", required=True, help="Process name or term text.")
@click.option("--trace", is_flag=True, help="Print every rewrite step.")
def normalize(file: str, term_text: str, trace: bool) -> None:
    """Rewrite a recursion-free term to a basic term."""
    m = _load(file)
    t = _term(m, term_text)
    try:
        result, proof = normalize_to_basic(t, m)
    except RewriteError as exc:
        raise AnalysisFailure(f"{type(exc).__name__}: {exc}") from None
    if trace:
        click.echo(proof.render())
    click.echo(pretty(result, "."))


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--term", "term_text", default="system", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Output file; stdout when omitted.")
@click.option("--dot", is_flag=True, help="Write Graphviz DOT instead of AUT.")
@click.option("--bound", type=click.IntRange(min=1), default=DEFAULT_BOUND, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
def lts(file: str, term_text: str, out: str | None, dot: bool, bound: int, jobs: int) -> None:
    """Generate the step transition system of a term."""
    m = _load(file)
    t = _term(m, term_text)
    try:
        ts = generate_lts(m, t, bound, jobs)
    except SosError as exc:
        raise AnalysisFailure(f"{type(exc).__name__}: {exc}") from None
    text = ts.to_dot() if dot else ts.to_aut()
    if out:
        Path(out).write_text(text, encoding="utf-8")
        _say(f"{ts.n_states} states, {len(ts.transitions)} transitions -> {out}")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--term", "term_text", required=True)
@click.option("--dot", is_flag=True, help="Print Graphviz DOT.")
def pes(file: str, term_text: str, dot: bool) -> None:
    """Build the prime event structure of a recursion-free term."""
    m = _load(file)
    t = _term(m, term_text)
    try:
        p = build_pes(t, m)
    except PesError as exc:
        raise AnalysisFailure(f"{type(exc).__name__}: {exc}") from None
    if dot:
        click.echo(p.to_dot(), nl=False)
    else:
        _say(f"{len(p.labels)} events, {len(p.configurations())} configurations")


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--left", required=True)
@click.option("--right", required=True)
@click.option("--rel", type=click.Choice(ALL_RELATIONS), default="step", show_default=True)
@click.option("--bound", type=click.IntRange(min=1), default=DEFAULT_BOUND, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def check(file: str, left: str, right: str, rel: str, bound: int, jobs: int, as_json: bool) -> None:
    """Decide an equivalence between two terms."""
    m = _load(file)
    lt, rt = _term(m, left), _term(m, right)
    try:
        v = compare_relation(m, lt, rt, rel, bound, jobs)
    except (SosError, PesError) as exc:
        raise AnalysisFailure(f"{type(exc).__name__}: {exc}") from None
    _finish(v, as_json)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--rel", type=click.Choice(ALL_RELATIONS), default="rbs", show_default=True)
@click.option("--bound", type=click.IntRange(min=1), default=DEFAULT_BOUND, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def verify(file: str, rel: str, bound: int, jobs: int, as_json: bool) -> None:
    """Compare a model's system with its spec."""
    m = _load(file)
    if m.system is None or m.spec_term is None:
        raise InputFailure(f"{file}: model needs both 'system' and 'spec'")
    try:
        v = compare_relation(m, m.system, m.spec_term, rel, bound, jobs)
    except (SosError, PesError) as exc:
        raise AnalysisFailure(f"{type(exc).__name__}: {exc}") from None
    _finish(v, as_json)


@cli.command()
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--count", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--size", type=click.IntRange(min=1), default=7, show_default=True)
@click.option("--table", "tables", multiple=True, help="Restrict to these axiom tables.")
@click.option("--json", "as_json", is_flag=True)
def fuzz(seed: int, count: int, size: int, tables: tuple[str, ...], as_json: bool) -> None:
    """Check random axiom instances against the operational semantics."""
    from .fuzz import fuzz_tables

    unknown = sorted(set(tables) - set(fuzz_tables()))
    if unknown:
        raise click.UsageError(f"unknown tables {unknown}; choose from {fuzz_tables()}")
    report = soundness_fuzz(seed, count, size, list(tables) or None)
    if as_json:
        _emit_json(report.to_dict())
    else:
        for name, tr in sorted(report.tables.items()):
            _say(f"{name:6} instances={tr.instances:5} skipped={tr.skipped:4} violations={tr.violations}",
                 fg="green" if tr.violations == 0 else "red")
        for v in report.violations:
            _say(f"  {v.axiom} [{v.relation}] {v.lhs}  vs  {v.rhs}: {v.reason}")
    sys.exit(EXIT_OK if report.total_violations == 0 else EXIT_UNRELATED)


@cli.command()
@click.argument("case_id", required=False)
@click.option("--run", is_flag=True, help="Verify the case studies instead of listing them.")
@click.option("--mutations", is_flag=True, help="Also check that each mutation breaks the model.")
@click.option("--bound", type=click.IntRange(min=1), default=DEFAULT_BOUND, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def examples(case_id: str | None, run: bool, mutations: bool, bound: int, jobs: int,
             as_json: bool) -> None:
    """List or verify the bundled case studies."""
    catalog = casestudies.list_case_studies()
    if case_id is not None:
        try:
            name, _ = casestudies.parse_case_id(case_id)
        except casestudies.UnknownCaseStudy as exc:
            raise click.UsageError(f"unknown case study {exc}") from None
        catalog = [c for c in catalog if c.id == name]
    if not run:
        for c in catalog:
            params = ",".join(f"{k}={v}" for k, v in c.params.items())
            _say(f"{c.id:12} {params:8} expected={c.expected} states={c.system_states}")
        return
    rows, ok = [], True
    for c in catalog:
        target = case_id if case_id is not None else c.id
        try:
            v = casestudies.verify_case_study(target, bound, jobs)
        except SosError as exc:
            raise AnalysisFailure(f"{target}: {type(exc).__name__}: {exc}") from None
        row = {"id": target, "expected": c.expected,
               "verdict": "related" if v.related else "not related", "states": v.stats["states"]}
        good = row["verdict"] == c.expected
        if mutations:
            mr = casestudies.run_mutation(target, bound)
            row["mutation"] = {"description": mr.mutation.description,
                               "verdict": "related" if mr.verdict.related else "not related",
                               "witness_replayed": mr.replayed}
            good = good and not mr.verdict.related and mr.replayed
        ok = ok and good
        rows.append(row)
        if not as_json:
            line = f"{target:12} {row['verdict']:12} states={row['states']}"
            if mutations:
                line += f"  mutation: {row['mutation']['verdict']}"
            _say(line, fg="green" if good else "red")
    if as_json:
        _emit_json(rows)
    sys.exit(EXIT_OK if ok else EXIT_UNRELATED)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="aptc", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Randomised soundness checks of the axiom catalogue against the operational semantics."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .dsl import parse_model, pretty
from .equivalence import RBS, STEP, compare_terms
from .model import Model
from .rewriter import (
    CATALOG, ROOT_CONTEXT, Axiom, RewriteError, _fires, ac, apply_axiom_once, instantiate,
)
from .sos import SosError
from .terms import (
    DELTA, EPS, TAU, Abstract, Alt, AtomPred, Comm, ConflictElim, Encapsulate, FalseGuard,
    GuardAtom, Merge, New, Not, Par, Seq, Shadow, Term, TrueGuard, Unless, atom, label, size,
)

FUZZ_MODEL_TEXT = """\
model fuzz;
domain Bit = {0,1};
act a, b, c, d;
comm a | b = d;
conflict a # b;
order b <= c;
var v : Bit = 0;
pred p = v == 1;
effect a = v := 1;
set H = {c};
set I = {b};
"""

WEAK_ROWS = {"G26", "G27", "G28", "G29"}


def fuzz_model() -> Model:
    return parse_model(FUZZ_MODEL_TEXT)


@dataclass(frozen=True)
class TermShape:
    """Leaves and operators a table's random terms are drawn from."""

    leaves: tuple[Term, ...]
    binary: tuple[type, ...]
    unary: tuple[str, ...] = ()


_A, _B, _C = atom("a"), atom("b"), atom("c")
_P = GuardAtom(AtomPred("p"))
_GUARDS = (_P, GuardAtom(Not(AtomPred("p"))), GuardAtom(TrueGuard()), GuardAtom(FalseGuard()))
_SHADOWS = tuple(Shadow(label(n), 1) for n in "abc")
_BASE = (_A, _B, _C, DELTA)

SHAPES: dict[str, TermShape] = {
    "BATC": TermShape(_BASE + (EPS,), (Seq, Alt)),
    "APTC": TermShape(_BASE, (Seq, Alt, Par, Comm, Merge)),
    "CE": TermShape(_BASE, (Seq, Alt, Par, Comm), ("theta",)),
    "U": TermShape(_BASE, (Seq, Alt, Par, Comm, Unless)),
    "D": TermShape(_BASE, (Seq, Alt, Par), ("encap",)),
    "TAU": TermShape(_BASE + (TAU,), (Seq, Alt, Par)),
    "TI": TermShape(_BASE + (TAU,), (Seq, Alt, Par), ("hide",)),
    "G": TermShape(_BASE + (EPS,) + _GUARDS, (Seq, Alt, Par)),
    "SC": TermShape(_BASE + _SHADOWS, (Seq, Alt, Par, Merge)),
    "PC": TermShape(_BASE, (Seq, Alt, Par, Merge), ("new",)),
    "APTCG": TermShape(_BASE + (EPS,) + _GUARDS, (Seq, Alt, Par, Comm)),
    "DER": TermShape(_BASE + (EPS, TAU) + _GUARDS + _SHADOWS, (Seq, Alt, Par, Comm, Unless)),
}


def relation_for(ax: Axiom) -> str:
    if ax.weak or ax.id.table in ("TAU", "TI") or ax.id.row in WEAK_ROWS:
        return RBS
    return STEP


class _Generator:
    def __init__(self, rng: random.Random, m: Model):
        self.rng = rng
        self.m = m

    def term(self, shape: TermShape, budget: int) -> Term:
        rng = self.rng
        if budget < 2 or rng.random() < 0.3:
            return rng.choice(shape.leaves)
        if shape.unary and rng.random() < 0.2:
            body = self.term(shape, budget - 1)
            kind = rng.choice(shape.unary)
            if kind == "theta":
                return ConflictElim(body)
            if kind == "new":
                return New(body)
            if kind == "encap":
                return Encapsulate(self.m.H, body)
            return Abstract(self.m.I, body)
        if budget < 3:
            return rng.choice(shape.leaves)
        left_budget = rng.randint(1, budget - 2)
        cls = rng.choice(shape.binary)
        return cls(self.term(shape, left_budget), self.term(shape, budget - 1 - left_budget))

    def head(self, shape: TermShape, budget: int) -> Term:
        pool = [t for t in (_A, _B, _C, TAU) + _SHADOWS if t in shape.leaves or t in (_A, _B, _C)]
        if budget >= 3 and self.rng.random() < 0.3:
            return Par(self.rng.choice(pool), self.rng.choice(pool))
        return self.rng.choice(pool)

    def bind(self, ax: Axiom, schema: tuple, shape: TermShape, size_bound: int) -> dict:
        """Random bindings for every metavariable of the schema."""
        names: dict[str, str] = {}
        _collect(schema, names)
        budget = max(size_bound, len(names))
        b: dict = {}
        order = list(names.items())
        self.rng.shuffle(order)
        for name, kind in order:
            share = max(1, budget // max(1, len(order)))
            share = self.rng.randint(1, max(1, share + self.rng.randint(0, 2)))
            if kind == "term":
                b[name] = self.term(shape, share)
            elif kind == "event":
                b[name] = self.rng.choice((_A, _B, _C))
            elif kind == "head":
                b[name] = self.head(shape, share)
            elif kind == "guard":
                b[name] = self.rng.choice(_GUARDS)
            elif kind == "shadowed":
                b[name] = self.rng.choice((_A, _B, _C))
        return b


def _collect(p: tuple, names: dict) -> None:
    """Metavariables of a schema with their kinds."""
    tag = p[0]
    if tag == "var":
        names.setdefault(p[1], p[2])
    elif tag in ("shadow", "notg"):
        names.setdefault(p[1], "shadowed" if tag == "shadow" else "guard")
    elif tag != "const":
        for c in p[1:]:
            _collect(c, names)


def binding_size(b: dict) -> int:
    """Total size of the random subterms substituted into an axiom schema."""
    return sum(size(v) for v in b.values() if isinstance(v, Term))


@dataclass
class Violation:
    axiom: str
    relation: str
    lhs: str
    rhs: str
    reason: str
    witness: object = None

    def to_dict(self) -> dict:
        return {"axiom": self.axiom, "relation": self.relation, "lhs": self.lhs,
                "rhs": self.rhs, "reason": self.reason, "witness": self.witness}


@dataclass
class TableReport:
    instances: int = 0
    violations: int = 0
    skipped: int = 0
    per_axiom: dict[str, int] = field(default_factory=dict)


@dataclass
class FuzzReport:
    seed: int
    count: int
    size: int
    tables: dict[str, TableReport] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return len(self.violations)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "count": self.count, "size": self.size,
            "tables": {name: {"instances": r.instances, "violations": r.violations,
                              "skipped": r.skipped, "per_axiom": dict(sorted(r.per_axiom.items()))}
                       for name, r in sorted(self.tables.items())},
            "violations": [v.to_dict() for v in self.violations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def fuzz_tables() -> list[str]:
    return sorted({ax.id.table for ax in CATALOG})


def check_instance(ax: Axiom, lhs: Term, rhs: Term, m: Model) -> Violation | None:
    """Compare both sides of one instance, and the rewriter's own result, semantically."""
    rel = relation_for(ax)
    show = lambda t: pretty(t, "·")  # noqa: E731
    try:
        applied = apply_axiom_once(lhs, ax, (), m=m)
    except RewriteError as exc:
        return Violation(str(ax.id.qualified), rel, show(lhs), show(rhs), f"rewriter refused: {exc}")
    for other, reason in ((rhs, "sides differ"), (applied, "rewrite result differs")):
        if reason == "rewrite result differs" and ac(other) is ac(rhs):
            continue
        try:
            verdict = compare_terms(m, lhs, other, rel)
        except SosError as exc:
            return Violation(ax.id.qualified, rel, show(lhs), show(other), f"semantic error: {exc}")
        if not verdict.related:
            return Violation(ax.id.qualified, rel, show(lhs), show(other), reason, verdict.witness)
    return None


def soundness_fuzz(seed: int = 1, count: int = 1000, size_bound: int = 7,
                   tables: list[str] | None = None, m: Model | None = None) -> FuzzReport:
    """count random instances per axiom table, each compared under the table's relation."""
    m = m or fuzz_model()
    rng = random.Random(seed)
    gen = _Generator(rng, m)
    report = FuzzReport(seed, count, size_bound)
    for table in tables or fuzz_tables():
        axioms = [ax for ax in CATALOG if ax.id.table == table]
        shape = SHAPES[table]
        tr = report.tables.setdefault(table, TableReport())
        for i in range(count):
            ax = axioms[i % len(axioms)]
            instance = _draw(gen, ax, shape, size_bound, m)
            if instance is None:
                tr.skipped += 1
                continue
            lhs, rhs = instance
            tr.instances += 1
            tr.per_axiom[ax.id.row] = tr.per_axiom.get(ax.id.row, 0) + 1
            violation = check_instance(ax, lhs, rhs, m)
            if violation is not None:
                tr.violations += 1
                report.violations.append(violation)
    return report


def _draw(gen: _Generator, ax: Axiom, shape: TermShape, size_bound: int, m: Model,
          attempts: int = 200):
    for _ in range(attempts):
        lhs_p, rhs_p = gen.rng.choice(ax.schemas)
        b = gen.bind(ax, lhs_p, shape, size_bound)
        if "__H" not in b:
            b["__H"] = (m.H, None)
        if "__I" not in b:
            b["__I"] = (m.I, None)
        try:
            lhs = instantiate(lhs_p, b, m)
            rhs = instantiate(rhs_p, b, m)
        except (RewriteError, KeyError):
            continue
        if binding_size(b) > size_bound:
            continue
        if not _fires(ax, b, ROOT_CONTEXT, m):
            continue
        return lhs, rhs
    return None

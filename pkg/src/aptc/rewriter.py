"""The axiom tables as a directed rewrite system.

Every axiom is described once by schema patterns with typed metavariables.
The same description drives single-step application in both directions,
the leftmost-innermost normalizer and random instance generation for the
soundness fuzzer. Associativity and commutativity of + and the synchronous
merge are structural: `ac` flattens, sorts by the fixed term order and
right-nests, and runs after every rewrite.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, NamedTuple

from .datastate import DataState, EMPTY_STATE, all_stores, apply_effect, eval_guard
from .dsl import pretty
from .model import Model, name_matches
from .terms import (
    DELTA, EPS, TAU, VISIBLE, Abstract, ActionLabel, Alt, Atom, Comm, ConflictElim,
    Encapsulate, GuardAtom, Merge, New, Not, Par, Seq, Shadow, Term, Unless,
    chain, flatten, guard_predicates, is_basic_term, is_step_head,
)

DEFAULT_FUEL = 100_000
LEFT_TO_RIGHT = "ltr"
RIGHT_TO_LEFT = "rtl"


class RewriteError(Exception):
    pass


class NoMatch(RewriteError):
    def __init__(self, axiom, pos):
        super().__init__(f"{axiom} does not match at {render_pos(pos)}")
        self.axiom = axiom
        self.pos = pos


class SideConditionFailed(RewriteError):
    pass


class FuelExhausted(RewriteError):
    def __init__(self, fuel: int):
        super().__init__(f"no normal form within {fuel} rewrites")
        self.fuel = fuel


class NonBasicResidue(RewriteError):
    def __init__(self, node: Term):
        super().__init__(f"cannot eliminate {pretty(node)}")
        self.node = node


class UnknownAxiom(RewriteError):
    pass


class AxiomId(NamedTuple):
    table: str
    row: str

    def __str__(self) -> str:
        return self.row

    @property
    def qualified(self) -> str:
        return f"{self.table}.{self.row}"


# ------------------------------------------------------------ patterns


def var(name: str, kind: str = "term") -> tuple:
    return ("var", name, kind)


def const(t: Term) -> tuple:
    return ("const", t)


def seq(a, b):
    return ("seq", a, b)


def alt(a, b):
    return ("alt", a, b)


def par(a, b):
    return ("par", a, b)


def comm(a, b):
    return ("comm", a, b)


def merge(a, b):
    return ("merge", a, b)


def unless(a, b):
    return ("unless", a, b)


def theta(a):
    return ("theta", a)


def encap(a):
    return ("encap", a)


def hide(a):
    return ("hide", a)


def new(a):
    return ("new", a)


def shadow(name: str):
    return ("shadow", name)


def notg(name: str):
    return ("notg", name)


def gamma(a: str, b: str):
    return ("gamma", a, b)


_BINARY = {"seq": Seq, "alt": Alt, "par": Par, "comm": Comm, "merge": Merge, "unless": Unless}
_UNARY = {"theta": ConflictElim, "new": New}
_SCOPED = {"encap": (Encapsulate, "__H"), "hide": (Abstract, "__I")}

X, Y, Z = var("x"), var("y"), var("z")
E, E1, E2, E3 = var("e", "event"), var("e1", "event"), var("e2", "event"), var("e3", "event")
H1, H2 = var("e1", "head"), var("e2", "head")
PHI, PSI, PHI0, PHI1 = var("phi", "guard"), var("psi", "guard"), var("phi0", "guard"), var("phi1", "guard")
D_, EPS_, TAU_ = const(DELTA), const(EPS), const(TAU)


def _kind_ok(kind: str, t: Term) -> bool:
    if kind == "term":
        return True
    if kind == "event":
        return isinstance(t, Atom) and t.label.kind == VISIBLE
    if kind == "head":
        return is_step_head(t)
    if kind == "guard":
        return isinstance(t, GuardAtom)
    raise RewriteError(f"unknown metavariable kind {kind}")


def match(p: tuple, t: Term, b: dict) -> bool:
    """Extend bindings b so that p instantiates to t; b may be partly filled on failure."""
    tag = p[0]
    if tag == "var":
        _, name, kind = p
        if not _kind_ok(kind, t):
            return False
        if name in b:
            return b[name] is t
        b[name] = t
        return True
    if tag == "const":
        return t is p[1]
    if tag == "shadow":
        if not isinstance(t, Shadow):
            return False
        base = Atom(t.base)
        if p[1] in b:
            return b[p[1]] is base
        b[p[1]] = base
        return True
    if tag == "notg":
        if not (isinstance(t, GuardAtom) and isinstance(t.guard, Not)):
            return False
        inner = GuardAtom(t.guard.inner)
        if p[1] in b:
            return b[p[1]] is inner
        b[p[1]] = inner
        return True
    if tag in _BINARY:
        return type(t) is _BINARY[tag] and match(p[1], t.left, b) and match(p[2], t.right, b)
    if tag in _UNARY:
        return type(t) is _UNARY[tag] and match(p[1], t.body, b)
    if tag in _SCOPED:
        cls, key = _SCOPED[tag]
        if type(t) is not cls:
            return False
        scope = (t.names, t.alias)
        if key in b and b[key] != scope:
            return False
        b[key] = scope
        return match(p[1], t.body, b)
    if tag == "gamma":
        return False
    raise RewriteError(f"bad pattern {p!r}")


def gamma_term(left: Term, right: Term, m: Model | None) -> Term:
    """Communication of two step heads, totalised to deadlock."""
    if m is None or not (isinstance(left, Atom) and isinstance(right, Atom)):
        return DELTA
    if left.label.kind != VISIBLE or right.label.kind != VISIBLE:
        return DELTA
    result = m.gamma_of(left.label, right.label)
    return DELTA if result is None else Atom(result)


def instantiate(p: tuple, b: dict, m: Model | None) -> Term:
    tag = p[0]
    if tag == "var":
        if p[1] not in b:
            raise SideConditionFailed(f"metavariable {p[1]} is not determined")
        return b[p[1]]
    if tag == "const":
        return p[1]
    if tag == "shadow":
        return Shadow(b[p[1]].label, 1)
    if tag == "notg":
        return GuardAtom(Not(b[p[1]].guard))
    if tag == "gamma":
        return gamma_term(instantiate(p[1], b, m), instantiate(p[2], b, m), m)
    if tag in _BINARY:
        return _BINARY[tag](instantiate(p[1], b, m), instantiate(p[2], b, m))
    if tag in _UNARY:
        return _UNARY[tag](instantiate(p[1], b, m))
    if tag in _SCOPED:
        cls, key = _SCOPED[tag]
        names, alias = b.get(key) or _default_scope(key, m)
        return cls(names, instantiate(p[1], b, m), alias)
    raise RewriteError(f"bad pattern {p!r}")


def _default_scope(key: str, m: Model | None):
    if m is None:
        return (frozenset(), None)
    return (m.H, None) if key == "__H" else (m.I, None)


def pattern_text(p: tuple) -> str:
    tag = p[0]
    if tag == "var":
        return {"phi": "φ", "psi": "ψ", "phi0": "φ0", "phi1": "φ1"}.get(p[1], p[1])
    if tag == "const":
        return pretty(p[1], "·").replace("delta", "δ").replace("eps", "ε").replace("tau", "τ")
    if tag == "shadow":
        return f"Ⓢ^{p[1]}"
    if tag == "notg":
        return f"¬{pattern_text(var(p[1]))}"
    if tag == "gamma":
        return f"γ({pattern_text(p[1])},{pattern_text(p[2])})"
    if tag in _BINARY:
        op = {"seq": "·", "alt": "+", "par": "∥", "comm": "∣", "merge": "≬", "unless": "◁"}[tag]
        return f"({pattern_text(p[1])}{op}{pattern_text(p[2])})"
    name = {"theta": "Θ", "new": "new", "encap": "∂_H", "hide": "τ_I"}[tag]
    return f"{name}({pattern_text(p[1])})"


# ------------------------------------------------------------ context


@dataclass(frozen=True)
class Context:
    """Where a redex sits: under a merge, at a creating sequence head, under hiding."""

    in_par: bool = False
    creating: bool = False
    hidden: frozenset = frozenset()


ROOT_CONTEXT = Context()


def child_context(node: Term, index: int, ctx: Context) -> Context:
    if isinstance(node, (Par, Merge, Comm)):
        return Context(True, False, ctx.hidden)
    if isinstance(node, Seq):
        return Context(ctx.in_par, index == 0, ctx.hidden)
    if isinstance(node, Alt):
        return ctx
    if isinstance(node, Abstract):
        return Context(ctx.in_par, False, ctx.hidden | node.names)
    return Context(ctx.in_par, False, ctx.hidden)


def _guard_hidden(g: Term, ctx: Context) -> bool:
    preds = guard_predicates(g.guard)
    return bool(preds) and preds <= ctx.hidden


# ------------------------------------------------------------ axioms

Condition = Callable[[dict, Context, "Model | None"], bool]
Matcher = Callable[[Term, Context, "Model | None"], "Term | None"]


@dataclass(frozen=True)
class Axiom:
    id: AxiomId
    schemas: tuple[tuple[tuple, tuple], ...]
    condition: Condition | None = None
    matcher: Matcher | None = None
    weak: bool = False
    in_strategy: bool = True
    top_only: bool = False
    hidden_guards: bool = False
    note: str = ""

    @property
    def text(self) -> str:
        lhs, rhs = self.schemas[0]
        return f"{pattern_text(lhs)} = {pattern_text(rhs)}"


def _fires(ax: Axiom, b: dict, ctx: Context, m: Model | None) -> bool:
    if ax.top_only and ctx.in_par:
        return False
    if not ax.hidden_guards:
        for value in b.values():
            if isinstance(value, GuardAtom) and _guard_hidden(value, ctx):
                return False
    if ax.condition is not None:
        try:
            return bool(ax.condition(b, ctx, m))
        except KeyError:
            return False
    return True


def rewrite_here(ax: Axiom, t: Term, ctx: Context, m: Model | None,
                 direction: str = LEFT_TO_RIGHT) -> Term | None:
    """The result of one application at the root of t, or None if no schema matches.

    Raises SideConditionFailed when a schema matches but its side condition does not hold.
    """
    if direction == LEFT_TO_RIGHT and ax.matcher is not None:
        if ax.top_only and ctx.in_par:
            return None
        result = ax.matcher(t, ctx, m)
        if result is not None:
            return result
    matched = False
    for lhs, rhs in ax.schemas:
        src, dst = (lhs, rhs) if direction == LEFT_TO_RIGHT else (rhs, lhs)
        b: dict = {}
        if not match(src, t, b):
            continue
        matched = True
        if not _fires(ax, b, ctx, m):
            continue
        return instantiate(dst, b, m)
    if matched:
        raise SideConditionFailed(f"{ax.id} side condition fails")
    return None


def _H(b, m):
    return b["__H"][0] if "__H" in b else m.H


def _I(b, m):
    return b["__I"][0] if "__I" in b else m.I


def _stores(m: Model | None) -> list[DataState]:
    if m is None or not m.variables:
        return [EMPTY_STATE]
    return [DataState(store) for store in all_stores(m.variable_domains())]


def _test(g: Term, s: DataState, m: Model | None) -> bool:
    return eval_guard(g.guard, s, m.predicates if m is not None else {})


def guard_valid(g: Term, m: Model | None) -> bool:
    return all(_test(g, s, m) for s in _stores(m))


def guards_unsatisfiable(gs: Iterable[Term], m: Model | None) -> bool:
    gs = list(gs)
    return all(any(not _test(g, s, m) for g in gs) for s in _stores(m))


def _wp_implies(psi: Term, e: Term, chi: Term, m: Model | None) -> bool:
    table = m.effects if m is not None else None
    for s in _stores(m):
        if _test(psi, s, m):
            if not all(_test(chi, s2, m) for s2 in apply_effect(e.label, s, table)):
                return False
    return True


def _kills(m: Model, lab: ActionLabel, other: ActionLabel) -> bool:
    """Some e2 in conflict with other lies below lab."""
    for pair in m.conflicts:
        if other in pair:
            rest = [p for p in pair if p != other]
            partner = rest[0] if rest else other
            if m.below(partner, lab):
                return True
    return False


# --------------------------- chain matchers (work on a flattened + or ∥ chain)


def _alt_dup(t, ctx, m):
    if not isinstance(t, Alt):
        return None
    items = flatten(t, Alt)
    seen, out = set(), []
    for it in items:
        if it not in seen:
            seen.add(it)
            out.append(it)
    return chain(Alt, out) if len(out) < len(items) else None


def _alt_delta(t, ctx, m):
    if not isinstance(t, Alt):
        return None
    items = flatten(t, Alt)
    out = [it for it in items if it is not DELTA]
    if len(out) == len(items):
        return None
    return chain(Alt, out) if out else DELTA


def _alt_excluded_middle(t, ctx, m):
    if not isinstance(t, Alt):
        return None
    items = flatten(t, Alt)
    for i, g in enumerate(items):
        if isinstance(g, GuardAtom) and isinstance(g.guard, Not):
            inner = GuardAtom(g.guard.inner)
            if inner in items and not _guard_hidden(g, ctx):
                rest = [it for j, it in enumerate(items) if j != i and it is not inner]
                return chain(Alt, [EPS] + rest)
    return None


def _par_delta(t, ctx, m):
    if isinstance(t, Par) and DELTA in flatten(t, Par):
        return DELTA
    return None


def _par_eps(t, ctx, m):
    if not isinstance(t, Par):
        return None
    items = flatten(t, Par)
    out = [it for it in items if it is not EPS]
    if len(out) == len(items):
        return None
    return chain(Par, out) if out else EPS


def _par_shadow_cancel(t, ctx, m):
    if not isinstance(t, Par):
        return None
    items = flatten(t, Par)
    present = {it.label for it in items if isinstance(it, Atom) and it.label.kind == VISIBLE}
    out = [it for it in items if not (isinstance(it, Shadow) and it.base in present)]
    if len(out) == len(items):
        return None
    return chain(Par, out)


def _par_shadow_mismatch(t, ctx, m):
    if not isinstance(t, Par):
        return None
    items = flatten(t, Par)
    if not all(isinstance(it, (Atom, Shadow)) for it in items):
        return None
    labels = {it.label for it in items if isinstance(it, Atom)}
    if not labels:
        return None
    if any(isinstance(it, Shadow) and it.base not in labels for it in items):
        return DELTA
    return None


def _par_drop_tau(t, ctx, m):
    if not isinstance(t, Par):
        return None
    items = flatten(t, Par)
    taus = items.count(TAU)
    others = [it for it in items if it is not TAU]
    if any(isinstance(it, Atom) and it.label.kind == VISIBLE for it in others):
        keep = others
    elif taus > 1:
        keep = others + [TAU]
    else:
        return None
    return chain(Par, keep) if taus else None


def _par_guard_clash(t, ctx, m):
    if not isinstance(t, Par):
        return None
    items = flatten(t, Par)
    guards = [g for g in items if isinstance(g, GuardAtom) and not _guard_hidden(g, ctx)]
    if len(guards) >= 2 and guards_unsatisfiable(guards, m):
        return DELTA
    return None


# --------------------------- side conditions


def _not_in_h(b, ctx, m):
    return not name_matches(_H(b, m), b["e"].label)


def _in_h(b, ctx, m):
    return name_matches(_H(b, m), b["e"].label)


def _not_in_i(b, ctx, m):
    return not name_matches(_I(b, m), b["e"].label)


def _in_i(b, ctx, m):
    return name_matches(_I(b, m), b["e"].label)


def _guard_in_i(b, ctx, m):
    preds = guard_predicates(b["phi"].guard)
    return bool(preds) and preds <= _I(b, m)


def _guard_not_in_i(b, ctx, m):
    return not _guard_in_i(b, ctx, m)


def _u25(b, ctx, m):
    return m is not None and m.in_conflict(b["e1"].label, b["e2"].label)


def _u26(b, ctx, m):
    e1, e3 = b["e1"].label, b["e3"].label
    return (m is not None and _kills(m, e3, e1)
            and not m.in_conflict(e1, e3) and not _kills(m, e1, e3))


def _u27(b, ctx, m):
    return m is not None and _kills(m, b["e3"].label, b["e1"].label)


def _g8(b, ctx, m):
    return guard_valid(b["phi"], m)


def _g9_single(b, ctx, m):
    return guards_unsatisfiable([b["phi"]], m)


def _g9_pair(b, ctx, m):
    return guards_unsatisfiable([b["phi0"], b["phi1"]], m)


def _g10(b, ctx, m):
    return _wp_implies(b["psi"], b["e"], b["chi"], m)


def _g11(b, ctx, m):
    return isinstance(b["chi"].guard, Not) and _wp_implies(b["psi"], b["e"], b["chi"], m)


def _differ(b, ctx, m):
    return b["e"] is not b["f"]


def _not_creating(b, ctx, m):
    return not ctx.creating


CHI = var("chi", "guard")


def _ax(table, row, *schemas, **kw) -> Axiom:
    return Axiom(AxiomId(table, row), tuple(schemas), **kw)


CATALOG: list[Axiom] = [
    # BATC
    _ax("BATC", "A1", (alt(X, Y), alt(Y, X)), in_strategy=False, note="structural"),
    _ax("BATC", "A2", (alt(alt(X, Y), Z), alt(X, alt(Y, Z))), in_strategy=False, note="structural"),
    _ax("BATC", "A3", (alt(X, X), X), matcher=_alt_dup),
    _ax("BATC", "A4", (seq(alt(X, Y), Z), alt(seq(X, Z), seq(Y, Z)))),
    _ax("BATC", "A5", (seq(seq(X, Y), Z), seq(X, seq(Y, Z)))),
    _ax("BATC", "A6", (alt(X, D_), X), (alt(D_, X), X), matcher=_alt_delta),
    _ax("BATC", "A7", (seq(D_, X), D_)),
    _ax("BATC", "A8", (seq(EPS_, X), X)),
    _ax("BATC", "A9", (seq(X, EPS_), X)),
    # APTC
    _ax("APTC", "P1", (merge(X, Y), alt(par(X, Y), comm(X, Y)))),
    _ax("APTC", "P2", (par(X, Y), par(Y, X)), in_strategy=False, note="structural"),
    _ax("APTC", "P3", (par(par(X, Y), Z), par(X, par(Y, Z))), in_strategy=False, note="structural"),
    _ax("APTC", "P4", (par(H1, seq(H2, Y)), seq(par(H1, H2), Y))),
    _ax("APTC", "P5", (par(seq(H1, X), H2), seq(par(H1, H2), X))),
    _ax("APTC", "P6", (par(seq(H1, X), seq(H2, Y)), seq(par(H1, H2), merge(X, Y)))),
    _ax("APTC", "P7", (par(alt(X, Y), Z), alt(par(X, Z), par(Y, Z)))),
    _ax("APTC", "P8", (par(X, alt(Y, Z)), alt(par(X, Y), par(X, Z)))),
    _ax("APTC", "P9", (par(D_, X), D_), matcher=_par_delta),
    _ax("APTC", "P10", (par(X, D_), D_), matcher=_par_delta),
    _ax("APTC", "C11", (comm(H1, H2), gamma(H1, H2))),
    _ax("APTC", "C12", (comm(H1, seq(H2, Y)), seq(gamma(H1, H2), Y))),
    _ax("APTC", "C13", (comm(seq(H1, X), H2), seq(gamma(H1, H2), X))),
    _ax("APTC", "C14", (comm(seq(H1, X), seq(H2, Y)), seq(gamma(H1, H2), merge(X, Y)))),
    _ax("APTC", "C15", (comm(alt(X, Y), Z), alt(comm(X, Z), comm(Y, Z)))),
    _ax("APTC", "C16", (comm(X, alt(Y, Z)), alt(comm(X, Y), comm(X, Z)))),
    _ax("APTC", "C17", (comm(D_, X), D_)),
    _ax("APTC", "C18", (comm(X, D_), D_)),
    # conflict elimination and unless
    _ax("CE", "CE19", (theta(E), E)),
    _ax("CE", "CE20", (theta(D_), D_)),
    _ax("CE", "CE21", (theta(alt(X, Y)), alt(unless(theta(X), Y), unless(theta(Y), X)))),
    _ax("CE", "CE22", (theta(seq(X, Y)), seq(theta(X), theta(Y)))),
    _ax("CE", "CE23", (theta(par(X, Y)), alt(par(unless(theta(X), Y), Y), par(unless(theta(Y), X), X)))),
    _ax("CE", "CE24", (theta(comm(X, Y)), alt(comm(unless(theta(X), Y), Y), comm(unless(theta(Y), X), X)))),
    _ax("U", "U25", (unless(E1, E2), TAU_), condition=_u25),
    _ax("U", "U26", (unless(E1, E3), E1), condition=_u26),
    _ax("U", "U27", (unless(E3, E1), TAU_), condition=_u27),
    _ax("U", "U28", (unless(E, D_), E)),
    _ax("U", "U29", (unless(D_, E), D_)),
    _ax("U", "U30", (unless(alt(X, Y), Z), alt(unless(X, Z), unless(Y, Z)))),
    _ax("U", "U31", (unless(seq(X, Y), Z), seq(unless(X, Z), unless(Y, Z)))),
    _ax("U", "U32", (unless(par(X, Y), Z), par(unless(X, Z), unless(Y, Z)))),
    _ax("U", "U33", (unless(comm(X, Y), Z), comm(unless(X, Z), unless(Y, Z)))),
    _ax("U", "U34", (unless(X, alt(Y, Z)), unless(unless(X, Y), Z))),
    _ax("U", "U35", (unless(X, seq(Y, Z)), unless(unless(X, Y), Z))),
    _ax("U", "U36", (unless(X, par(Y, Z)), unless(unless(X, Y), Z))),
    _ax("U", "U37", (unless(X, comm(Y, Z)), unless(unless(X, Y), Z))),
    # encapsulation
    _ax("D", "D1", (encap(E), E), condition=_not_in_h),
    _ax("D", "D2", (encap(E), D_), condition=_in_h),
    _ax("D", "D3", (encap(D_), D_)),
    _ax("D", "D4", (encap(alt(X, Y)), alt(encap(X), encap(Y)))),
    _ax("D", "D5", (encap(seq(X, Y)), seq(encap(X), encap(Y)))),
    _ax("D", "D6", (encap(par(X, Y)), par(encap(X), encap(Y)))),
    # silent step and abstraction
    _ax("TAU", "B1", (seq(E, TAU_), E), weak=True, in_strategy=False),
    _ax("TAU", "B2", (seq(E, alt(seq(TAU_, alt(X, Y)), X)), seq(E, alt(X, Y))),
        weak=True, in_strategy=False),
    _ax("TAU", "B3", (par(X, TAU_), X), weak=True, matcher=_par_drop_tau),
    _ax("TI", "TI1", (hide(E), E), condition=_not_in_i),
    _ax("TI", "TI2", (hide(E), TAU_), condition=_in_i),
    _ax("TI", "TI3", (hide(D_), D_)),
    _ax("TI", "TI4", (hide(alt(X, Y)), alt(hide(X), hide(Y)))),
    _ax("TI", "TI5", (hide(seq(X, Y)), seq(hide(X), hide(Y)))),
    _ax("TI", "TI6", (hide(par(X, Y)), par(hide(X), hide(Y)))),
    # guards
    _ax("G", "G1", (seq(PHI, notg("phi")), D_), (seq(PHI, seq(notg("phi"), X)), seq(D_, X))),
    _ax("G", "G2", (alt(PHI, notg("phi")), EPS_), matcher=_alt_excluded_middle),
    _ax("G", "G3", (seq(PHI, D_), D_)),
    _ax("G", "G4", (seq(PHI, alt(X, Y)), alt(seq(PHI, X), seq(PHI, Y))), in_strategy=False),
    _ax("G", "G5", (seq(PHI, seq(X, Y)), seq(seq(PHI, X), Y)), in_strategy=False),
    _ax("G", "G6", (seq(alt(PHI, PSI), X), alt(seq(PHI, X), seq(PSI, X))), in_strategy=False),
    _ax("G", "G7", (seq(seq(PHI, PSI), X), seq(PHI, seq(PSI, X))), in_strategy=False),
    _ax("G", "G8", (PHI, EPS_), condition=_g8),
    _ax("G", "G9", (PHI, D_), condition=_g9_single),
    _ax("G", "G9b", (seq(PHI0, PHI1), D_), (seq(PHI0, seq(PHI1, X)), seq(D_, X)), condition=_g9_pair),
    _ax("G", "G10", (seq(PSI, seq(E, CHI)), seq(PSI, E)), condition=_g10, in_strategy=False),
    _ax("G", "G11", (seq(PSI, seq(E, CHI)), seq(PSI, E)), condition=_g11, in_strategy=False),
    _ax("G", "G12", (seq(PHI, par(X, Y)), par(seq(PHI, X), seq(PHI, Y))), in_strategy=False),
    _ax("G", "G13", (seq(PHI, comm(X, Y)), comm(seq(PHI, X), seq(PHI, Y))), in_strategy=False),
    _ax("G", "G14", (par(PHI, D_), D_)),
    _ax("G", "G15", (par(D_, PHI), D_)),
    _ax("G", "G16", (comm(PHI, D_), D_)),
    _ax("G", "G17", (comm(D_, PHI), D_)),
    _ax("G", "G18", (par(PHI, EPS_), PHI)),
    _ax("G", "G19", (par(EPS_, PHI), PHI)),
    _ax("G", "G20", (comm(PHI, EPS_), D_)),
    _ax("G", "G21", (comm(EPS_, PHI), D_)),
    _ax("G", "G22", (par(PHI, notg("phi")), D_), (par(notg("phi"), PHI), D_)),
    _ax("G", "G23", (theta(PHI), PHI)),
    _ax("G", "G24", (encap(PHI), PHI)),
    _ax("G", "G25", (par(PHI0, PHI1), D_), condition=_g9_pair, matcher=_par_guard_clash),
    _ax("G", "G26", (seq(PHI, TAU_), PHI), weak=True, in_strategy=False),
    _ax("G", "G27", (seq(PHI, alt(seq(TAU_, alt(X, Y)), X)), seq(PHI, alt(X, Y))),
        weak=True, in_strategy=False),
    _ax("G", "G28", (hide(PHI), PHI), condition=_guard_not_in_i, hidden_guards=True),
    _ax("G", "G29", (hide(PHI), TAU_), condition=_guard_in_i, hidden_guards=True),
    # shadow constant
    _ax("SC", "SC1", (seq(shadow("e"), X), X), top_only=True),
    _ax("SC", "SC2", (seq(X, shadow("e")), X), top_only=True),
    _ax("SC", "SC3", (par(shadow("e"), E), E), (par(E, shadow("e")), E), matcher=_par_shadow_cancel),
    _ax("SC", "SC4", (par(E, seq(shadow("e"), Y)), seq(E, Y))),
    _ax("SC", "SC5", (par(shadow("e"), seq(E, Y)), seq(E, Y))),
    _ax("SC", "SC6", (par(seq(E, X), shadow("e")), seq(E, X))),
    _ax("SC", "SC7", (par(seq(shadow("e"), X), E), seq(E, X))),
    _ax("SC", "SC8", (par(seq(E, X), seq(shadow("e"), Y)), seq(E, merge(X, Y)))),
    _ax("SC", "SC9", (par(seq(shadow("e"), X), seq(E, Y)), seq(E, merge(X, Y)))),
    # process creation
    _ax("PC", "PC1", (seq(new(X), Y), merge(X, Y))),
    _ax("PC", "PC2", (merge(new(X), Y), merge(X, Y))),
    _ax("PC", "PC3", (merge(X, new(Y)), merge(X, Y))),
    # derived rows completing the elimination over empty process, guards and shadows
    _ax("APTCG", "P9", (par(EPS_, X), X), (par(X, EPS_), X), matcher=_par_eps),
    _ax("APTCG", "C9", (comm(EPS_, X), D_)),
    _ax("APTCG", "C10", (comm(X, EPS_), D_)),
    _ax("DER", "GP1", (par(PHI, X), seq(PHI, X))),
    _ax("DER", "GP2", (par(X, PHI), seq(PHI, X))),
    _ax("DER", "GP3", (par(seq(PHI, X), Y), seq(PHI, par(X, Y)))),
    _ax("DER", "GP4", (par(Y, seq(PHI, X)), seq(PHI, par(Y, X)))),
    _ax("DER", "GC1", (comm(PHI, X), D_)),
    _ax("DER", "GC2", (comm(X, PHI), D_)),
    _ax("DER", "GC3", (comm(seq(PHI, X), Y), seq(PHI, comm(X, Y)))),
    _ax("DER", "GC4", (comm(Y, seq(PHI, X)), seq(PHI, comm(Y, X)))),
    _ax("DER", "SCX", (par(E, shadow("f")), D_), condition=_differ, top_only=True,
        matcher=_par_shadow_mismatch),
    _ax("DER", "UE1", (unless(EPS_, X), EPS_)),
    _ax("DER", "UE2", (unless(X, EPS_), X)),
    _ax("DER", "UE3", (unless(TAU_, X), TAU_)),
    _ax("DER", "UE4", (unless(X, TAU_), X)),
    _ax("DER", "UE5", (unless(PHI, X), PHI)),
    _ax("DER", "UE6", (unless(X, PHI), X)),
    _ax("DER", "UE7", (unless(shadow("e"), X), shadow("e"))),
    _ax("DER", "UE8", (unless(X, shadow("e")), X)),
    _ax("DER", "UE9", (unless(D_, X), D_)),
    _ax("DER", "UE10", (unless(X, D_), X)),
    _ax("DER", "CE0", (theta(EPS_), EPS_), (theta(TAU_), TAU_)),
    _ax("DER", "CE1", (theta(shadow("e")), shadow("e"))),
    _ax("DER", "D0", (encap(EPS_), EPS_), (encap(TAU_), TAU_)),
    _ax("DER", "D7", (encap(shadow("e")), shadow("e"))),
    _ax("DER", "TI0", (hide(EPS_), EPS_), (hide(TAU_), TAU_)),
    _ax("DER", "TI7", (hide(shadow("e")), shadow("e")), condition=lambda b, c, m: not _in_i(b, c, m)),
    _ax("DER", "TI8", (hide(shadow("e")), EPS_), condition=_in_i),
    _ax("DER", "N1", (new(X), X), condition=_not_creating),
]

_BY_NAME: dict[str, Axiom] = {}
for _a in CATALOG:
    _BY_NAME[_a.id.qualified] = _a
    _BY_NAME.setdefault(_a.id.row, _a)


def axiom(name: str | AxiomId | Axiom) -> Axiom:
    if isinstance(name, Axiom):
        return name
    if isinstance(name, AxiomId):
        name = name.qualified
    found = _BY_NAME.get(name)
    if found is None:
        raise UnknownAxiom(name)
    return found


# rule order tried at each node class by the normalizer
_STRATEGY: dict[type, list[str]] = {
    Alt: ["A3", "A6", "G2"],
    Seq: ["A7", "A8", "G3", "A9", "A5", "A4", "PC1", "SC1", "SC2", "G1", "G9b"],
    GuardAtom: ["G8", "G9"],
    Par: ["P9", "APTCG.P9", "G25", "G22", "SC3", "SCX", "B3", "GP3", "GP4", "GP1", "GP2",
          "P7", "P8", "SC4", "SC5", "SC6", "SC7", "SC8", "SC9", "P4", "P5", "P6"],
    Comm: ["C17", "C18", "APTCG.C9", "APTCG.C10", "GC1", "GC2", "GC3", "GC4", "C15", "C16",
           "C11", "C12", "C13", "C14"],
    Merge: ["PC2", "PC3", "P1"],
    ConflictElim: ["CE20", "CE0", "CE1", "G23", "CE19", "CE21", "CE22", "CE23", "CE24"],
    Unless: ["U30", "U31", "U32", "U33", "UE9", "UE10", "UE1", "UE2", "UE3", "UE4", "UE5", "UE6",
             "UE7", "UE8", "U34", "U35", "U36", "U37", "U25", "U26", "U27"],
    Encapsulate: ["D3", "D0", "D7", "G24", "D1", "D2", "D4", "D5", "D6"],
    Abstract: ["TI3", "TI0", "TI7", "TI8", "G28", "G29", "TI1", "TI2", "TI4", "TI5", "TI6"],
    New: ["N1"],
}
_STRATEGY_AXIOMS = {cls: [axiom(n) for n in names] for cls, names in _STRATEGY.items()}


# ------------------------------------------------------------ AC normal form


def _ac_node(t: Term, memo: dict) -> Term:
    got = memo.get(t)
    if got is not None:
        return got
    kids = t.children()
    if kids:
        new_kids = tuple(_ac_node(k, memo) for k in kids)
        node = t.with_children(new_kids) if new_kids != kids else t
    else:
        node = t
    if isinstance(node, (Alt, Par)):
        cls = type(node)
        items = sorted(flatten(node, cls), key=lambda s: s.sort_key)
        node = chain(cls, items)
    memo[t] = node
    return node


def ac(t: Term) -> Term:
    """Flatten, sort and right-nest every + and ∥ chain."""
    return _ac_node(t, {})


# ------------------------------------------------------------ positions


Position = tuple[int, ...]


def parse_pos(pos: str | Iterable[int]) -> Position:
    if isinstance(pos, str):
        text = pos.strip()
        if text in ("", "root", "ε"):
            return ()
        return tuple(int(p) for p in text.split("."))
    return tuple(pos)


def render_pos(pos) -> str:
    pos = parse_pos(pos)
    return ".".join(map(str, pos)) if pos else "root"


def subterm_at(t: Term, pos: Position) -> Term:
    for i in pos:
        kids = t.children()
        if i >= len(kids):
            raise IndexError(render_pos(pos))
        t = kids[i]
    return t


def context_at(t: Term, pos: Position) -> Context:
    ctx = ROOT_CONTEXT
    for i in pos:
        ctx = child_context(t, i, ctx)
        t = t.children()[i]
    return ctx


def replace_at(t: Term, pos: Position, new_sub: Term) -> Term:
    if not pos:
        return new_sub
    kids = list(t.children())
    kids[pos[0]] = replace_at(kids[pos[0]], pos[1:], new_sub)
    return t.with_children(tuple(kids))


def apply_axiom_once(t: Term, ax, pos="root", direction: str = LEFT_TO_RIGHT,
                     m: Model | None = None) -> Term:
    """Rewrite the subterm at pos by one instance of the axiom."""
    ax = axiom(ax)
    pos = parse_pos(pos)
    try:
        sub = subterm_at(t, pos)
    except (IndexError, AttributeError):
        raise NoMatch(ax.id, pos) from None
    result = rewrite_here(ax, sub, context_at(t, pos), m, direction)
    if result is None:
        raise NoMatch(ax.id, pos)
    return replace_at(t, pos, result)


# ------------------------------------------------------------ traces


@dataclass(frozen=True)
class TraceStep:
    axiom: AxiomId
    pos: Position
    before: Term
    after: Term

    def render(self) -> str:
        return f"{self.axiom} @ {render_pos(self.pos)} : {_show(self.before)} ⇒ {_show(self.after)}"


def _show(t: Term) -> str:
    return pretty(t, "·")


@dataclass
class ProofTrace:
    start: Term
    steps: list[TraceStep] = field(default_factory=list)
    final: Term | None = None

    def render(self) -> str:
        return "\n".join(step.render() for step in self.steps)

    def replay(self, m: Model | None = None) -> Term:
        t = ac(self.start)
        for step in self.steps:
            t = ac(apply_axiom_once(t, step.axiom, step.pos, LEFT_TO_RIGHT, m))
        return t

    def __len__(self) -> int:
        return len(self.steps)


# ------------------------------------------------------------ normalization

INNERMOST = "innermost"
OUTERMOST = "outermost"


class _Normalizer:
    def __init__(self, m: Model | None, strategy: str):
        self.m = m
        self.outermost = strategy == OUTERMOST
        self.stuck: set[tuple[Term, Context]] = set()

    def try_here(self, t: Term, ctx: Context):
        for ax in _STRATEGY_AXIOMS.get(type(t), ()):
            try:
                result = rewrite_here(ax, t, ctx, self.m)
            except SideConditionFailed:
                continue
            if result is not None and result is not t:
                return ax, result
        return None

    def find(self, t: Term, ctx: Context, path: Position):
        key = (t, ctx)
        if key in self.stuck:
            return None
        if self.outermost:
            hit = self.try_here(t, ctx)
            if hit is not None:
                return path, hit[0], hit[1]
        for i, kid in enumerate(t.children()):
            found = self.find(kid, child_context(t, i, ctx), path + (i,))
            if found is not None:
                return found
        if not self.outermost:
            hit = self.try_here(t, ctx)
            if hit is not None:
                return path, hit[0], hit[1]
        self.stuck.add(key)
        return None


def first_non_basic(t: Term) -> Term:
    """The leftmost-innermost subterm that keeps t from being basic."""
    for kid in t.children():
        if not is_basic_term(kid):
            return first_non_basic(kid)
    return t


def normalize_to_basic(t: Term, m: Model | None = None, fuel: int = DEFAULT_FUEL,
                       strategy: str = INNERMOST) -> tuple[Term, ProofTrace]:
    """Rewrite a closed recursion-free term to a basic term, recording every step."""
    trace = ProofTrace(t)
    norm = _Normalizer(m, strategy)
    current = ac(t)
    while True:
        found = norm.find(current, ROOT_CONTEXT, ())
        if found is None:
            break
        if len(trace.steps) >= fuel:
            raise FuelExhausted(fuel)
        pos, ax, result = found
        trace.steps.append(TraceStep(ax.id, pos, subterm_at(current, pos), result))
        current = ac(replace_at(current, pos, result))
    if not is_basic_term(current):
        raise NonBasicResidue(first_non_basic(current))
    trace.final = current
    return current, trace


def strategy_axioms() -> list[Axiom]:
    return [ax for ax in CATALOG if ax.in_strategy]


def with_model_sets(m: Model, **sets) -> Model:
    """A copy of m whose named action sets are replaced."""
    merged = dict(m.sets)
    merged.update({k: frozenset(v) for k, v in sets.items()})
    return replace(m, sets=merged)

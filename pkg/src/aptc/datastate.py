"""Data states: finite stores, guard evaluation, effects and mailboxes."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping

from .terms import (
    ActionLabel, AltG, AtomPred, FalseGuard, GuardExpr, Not, ParG, SeqG, TrueGuard,
)

DEFAULT_CAPACITY = 4


class DataError(Exception):
    pass


class UndeclaredPredicate(DataError):
    pass


class MailboxFull(DataError):
    pass


@dataclass(frozen=True, order=True)
class DataState:
    """An immutable store plus mailbox multisets, kept in canonical sorted form."""

    store: tuple[tuple[str, str], ...] = ()
    mailboxes: tuple[tuple[str, tuple[tuple[tuple[str, ...], int], ...]], ...] = ()

    @classmethod
    def of(cls, store: Mapping[str, str] | None = None,
           mailboxes: Mapping[str, Mapping[tuple[str, ...], int]] | None = None) -> "DataState":
        boxes = []
        for name, msgs in sorted((mailboxes or {}).items()):
            boxes.append((name, tuple(sorted((m, c) for m, c in msgs.items() if c > 0))))
        return cls(tuple(sorted((store or {}).items())), tuple(boxes))

    def value(self, var: str) -> str:
        for name, val in self.store:
            if name == var:
                return val
        raise KeyError(var)

    def assign(self, updates: Mapping[str, str]) -> "DataState":
        if not updates:
            return self
        merged = dict(self.store)
        merged.update(updates)
        return DataState(tuple(sorted(merged.items())), self.mailboxes)

    def box(self, name: str) -> dict[tuple[str, ...], int]:
        for box_name, msgs in self.mailboxes:
            if box_name == name:
                return dict(msgs)
        return {}

    def box_size(self, name: str) -> int:
        return sum(self.box(name).values())

    def with_box(self, name: str, msgs: Mapping[tuple[str, ...], int]) -> "DataState":
        entry = (name, tuple(sorted((m, c) for m, c in msgs.items() if c > 0)))
        rest = [b for b in self.mailboxes if b[0] != name]
        if entry[1]:
            rest.append(entry)
        return DataState(self.store, tuple(sorted(rest)))

    def render(self) -> str:
        parts = [f"{k}={v}" for k, v in self.store]
        for name, msgs in self.mailboxes:
            inner = ",".join(f"({','.join(m)})x{c}" for m, c in msgs)
            parts.append(f"{name}[{inner}]")
        return "{" + ";".join(parts) + "}"


EMPTY_STATE = DataState()


# ------------------------------------------------------------ predicates


@dataclass(frozen=True)
class Cmp:
    """Comparison of a store variable with a value or a predicate parameter."""

    var: str
    value: str
    negated: bool = False


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or" | "not" | "true" | "false"
    args: tuple = ()


@dataclass(frozen=True)
class Predicate:
    """A named state predicate defined by an expression over the store."""

    name: str
    params: tuple[str, ...]
    body: object
    param_domains: tuple[str, ...] = ()

    def holds(self, args: tuple[str, ...], state: DataState) -> bool:
        binding = dict(zip(self.params, args))
        return _eval_expr(self.body, binding, state)


@dataclass(frozen=True)
class ExtensionalPredicate:
    """A predicate given by the set of stores in which it holds."""

    name: str
    true_stores: frozenset

    params: tuple[str, ...] = ()

    def holds(self, args: tuple[str, ...], state: DataState) -> bool:
        return state.store in self.true_stores


def _eval_expr(expr: object, binding: Mapping[str, str], state: DataState) -> bool:
    if isinstance(expr, Cmp):
        target = binding.get(expr.value, expr.value)
        return (state.value(expr.var) == target) != expr.negated
    assert isinstance(expr, BoolOp)
    if expr.op == "true":
        return True
    if expr.op == "false":
        return False
    if expr.op == "not":
        return not _eval_expr(expr.args[0], binding, state)
    if expr.op == "and":
        return all(_eval_expr(a, binding, state) for a in expr.args)
    if expr.op == "or":
        return any(_eval_expr(a, binding, state) for a in expr.args)
    raise DataError(f"unknown operator {expr.op}")


def eval_guard(g: GuardExpr, s: DataState, predicates: Mapping[str, object]) -> bool:
    if isinstance(g, TrueGuard):
        return True
    if isinstance(g, FalseGuard):
        return False
    if isinstance(g, AtomPred):
        pred = predicates.get(g.name)
        if pred is None:
            raise UndeclaredPredicate(g.name)
        return pred.holds(g.args, s)
    if isinstance(g, Not):
        return not eval_guard(g.inner, s, predicates)
    if isinstance(g, AltG):
        return eval_guard(g.left, s, predicates) or eval_guard(g.right, s, predicates)
    if isinstance(g, (SeqG, ParG)):
        return eval_guard(g.left, s, predicates) and eval_guard(g.right, s, predicates)
    raise DataError(f"not a guard: {g!r}")


# ------------------------------------------------------------ effects

Assignment = tuple[tuple[str, str], ...]


@dataclass
class EffectTable:
    """Ground action label to alternative assignment sets.

    An assigned value naming a store variable reads that variable in the
    pre-state; anything else is a literal.
    """

    entries: dict[ActionLabel, tuple[Assignment, ...]] = field(default_factory=dict)

    def add(self, action: ActionLabel, branches: Iterable[Assignment]) -> None:
        branches = tuple(branches)
        if not branches:
            raise DataError(f"effect of {action} has no branches")
        self.entries[action] = branches

    def writes(self, action: ActionLabel) -> frozenset[str]:
        return frozenset(var for branch in self.entries.get(action, ()) for var, _ in branch)

    def is_deterministic(self, action: ActionLabel) -> bool:
        return len(self.entries.get(action, ((),))) <= 1


def apply_effect(e: ActionLabel, s: DataState, table: EffectTable | None) -> list[DataState]:
    if table is None or not e.is_visible or e not in table.entries:
        return [s]
    out = []
    for branch in table.entries[e]:
        updates = {}
        for var, value in branch:
            try:
                updates[var] = s.value(value)
            except KeyError:
                updates[var] = value
        out.append(s.assign(updates))
    return sorted(set(out))


def apply_effects(labels: Iterable[ActionLabel], s: DataState,
                  table: EffectTable | None) -> list[DataState]:
    """Apply the effects of a step's actions one after another in the given order."""
    states = [s]
    for lab in labels:
        nxt: set[DataState] = set()
        for st in states:
            nxt.update(apply_effect(lab, st, table))
        states = sorted(nxt)
    return states


def wp_holds(e: ActionLabel, g: GuardExpr, s: DataState, table: EffectTable | None,
             predicates: Mapping[str, object]) -> bool:
    return all(eval_guard(g, t, predicates) for t in apply_effect(e, s, table))


# ------------------------------------------------------------ mailboxes


def mailbox_send(box: str, msg: tuple[str, ...], s: DataState,
                 capacity: int = DEFAULT_CAPACITY) -> DataState:
    msgs = s.box(box)
    if sum(msgs.values()) >= capacity:
        raise MailboxFull(box)
    msgs[msg] = msgs.get(msg, 0) + 1
    return s.with_box(box, msgs)


def mailbox_receive(box: str, msg: tuple[str, ...], s: DataState) -> DataState | None:
    msgs = s.box(box)
    if msgs.get(msg, 0) == 0:
        return None
    msgs[msg] -= 1
    return s.with_box(box, msgs)


def all_stores(variables: Mapping[str, tuple[str, ...]]) -> list[tuple[tuple[str, str], ...]]:
    """Every store over the given variable domains, in canonical order."""
    names = sorted(variables)
    return [tuple(zip(names, values)) for values in product(*(variables[n] for n in names))]

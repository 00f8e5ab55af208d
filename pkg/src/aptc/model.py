"""The Model: declarations that give meaning to a ground process term."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .datastate import DEFAULT_CAPACITY, DataState, EffectTable
from .terms import ActionLabel, RecursiveSpec, Term

MAIN_SPEC = "main"


class ModelError(Exception):
    pass


class UndeclaredName(ModelError):
    pass


class ArityMismatch(ModelError):
    pass


class AsymmetricGamma(ModelError):
    pass


@dataclass(frozen=True)
class ActionDecl:
    name: str
    params: tuple[str, ...] = ()
    mailbox: str | None = None
    role: str | None = None  # "send" | "recv"


@dataclass
class Model:
    name: str = "model"
    domains: dict[str, tuple[str, ...]] = field(default_factory=dict)
    functions: dict[str, tuple[str, str, dict[str, str]]] = field(default_factory=dict)
    actions: dict[str, ActionDecl] = field(default_factory=dict)
    externs: set[ActionLabel] = field(default_factory=set)
    gamma: dict[tuple[ActionLabel, ActionLabel], ActionLabel] = field(default_factory=dict)
    conflicts: set[frozenset] = field(default_factory=set)
    order: set[tuple[ActionLabel, ActionLabel]] = field(default_factory=set)
    mailboxes: dict[str, int] = field(default_factory=dict)
    variables: dict[str, tuple[str, str]] = field(default_factory=dict)
    predicates: dict[str, object] = field(default_factory=dict)
    effects: EffectTable = field(default_factory=EffectTable)
    sets: dict[str, frozenset] = field(default_factory=dict)
    spec: RecursiveSpec = field(default_factory=lambda: RecursiveSpec(MAIN_SPEC))
    system: Term | None = None
    spec_term: Term | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, Model):
            return NotImplemented
        return self._identity() == other._identity()

    def _identity(self) -> tuple:
        return (
            self.name, self.domains, self.functions, self.actions, self.externs,
            self.gamma, self.conflicts, self.order, self.mailboxes, self.variables,
            self.predicates, self.effects.entries, self.sets, self.spec.equations,
            self.system, self.spec_term,
        )

    # -------------------------------------------------------------- lookups

    @property
    def specs(self) -> dict[str, RecursiveSpec]:
        return {self.spec.name: self.spec}

    @property
    def H(self) -> frozenset:
        return self.sets.get("H", frozenset())

    @property
    def I(self) -> frozenset:  # noqa: E743
        return self.sets.get("I", frozenset())

    def add_gamma(self, left: ActionLabel, right: ActionLabel, result: ActionLabel) -> None:
        for key in ((left, right), (right, left)):
            existing = self.gamma.get(key)
            if existing is not None and existing != result:
                raise AsymmetricGamma(f"{left} | {right}")
        self.gamma[(left, right)] = result
        self.gamma[(right, left)] = result

    def gamma_of(self, left: ActionLabel, right: ActionLabel) -> ActionLabel | None:
        return self.gamma.get((left, right))

    def gamma_rules(self) -> list[tuple[ActionLabel, ActionLabel, ActionLabel]]:
        """Each unordered communication rule once, in sorted order."""
        seen = set()
        out = []
        for (a, b), c in self.gamma.items():
            key = tuple(sorted((str(a), str(b))))
            if key in seen:
                continue
            seen.add(key)
            left, right = (a, b) if str(a) <= str(b) else (b, a)
            out.append((left, right, c))
        return sorted(out, key=lambda r: (str(r[0]), str(r[1])))

    def in_conflict(self, left: ActionLabel, right: ActionLabel) -> bool:
        return frozenset((left, right)) in self.conflicts

    @cached_property
    def _order_closure(self) -> frozenset:
        closure = set(self.order)
        changed = True
        while changed:
            changed = False
            for a, b in list(closure):
                for c, d in list(closure):
                    if b == c and (a, d) not in closure:
                        closure.add((a, d))
                        changed = True
        return frozenset(closure)

    def below(self, left: ActionLabel, right: ActionLabel) -> bool:
        return (left, right) in self._order_closure

    def mailbox_op(self, lab: ActionLabel) -> tuple[str, str, tuple[str, ...]] | None:
        """(role, mailbox, message) for mailbox-bound actions, else None."""
        decl = self.actions.get(lab.name)
        if decl is None or decl.mailbox is None or lab in self.externs:
            return None
        return decl.role, decl.mailbox, lab.args

    def capacity(self, box: str) -> int:
        return self.mailboxes.get(box, DEFAULT_CAPACITY)

    def initial_state(self) -> DataState:
        return DataState.of({v: init for v, (_, init) in self.variables.items()})

    def variable_domains(self) -> dict[str, tuple[str, ...]]:
        return {v: self.domains[d] for v, (d, _) in self.variables.items()}

    def writes(self, lab: ActionLabel) -> frozenset[str]:
        return self.effects.writes(lab)

    def labels_of(self, name: str) -> list[ActionLabel]:
        """All ground labels of a declared action, in domain order."""
        from itertools import product

        decl = self.actions.get(name)
        if decl is None:
            raise UndeclaredName(name)
        return [ActionLabel(name, tuple(vals)) for vals in product(*(self.domains[d] for d in decl.params))]


def name_matches(names: frozenset, lab: ActionLabel) -> bool:
    """Set membership for H and I: a bare name matches every instance."""
    return lab.name in names or str(lab) in names

"""Abstract syntax of process terms, guards and recursive specifications.

Terms are hash-consed: constructing a node that already exists returns the
existing object, so structural equality is identity and hashing is O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, ClassVar, Iterable, Iterator, NamedTuple


class TermError(Exception):
    pass


class EmptyDomain(TermError):
    pass


VISIBLE = "visible"
SILENT = "tau"
DEADLOCK = "delta"
EMPTY = "eps"
RESERVED = {"tau": SILENT, "delta": DEADLOCK, "eps": EMPTY}


class ActionLabel(NamedTuple):
    name: str
    args: tuple[str, ...] = ()
    kind: str = VISIBLE

    def __str__(self) -> str:
        if self.args:
            return f"{self.name}({','.join(self.args)})"
        return self.name

    @property
    def is_visible(self) -> bool:
        return self.kind == VISIBLE


TAU_LABEL = ActionLabel("tau", (), SILENT)
DELTA_LABEL = ActionLabel("delta", (), DEADLOCK)
EPS_LABEL = ActionLabel("eps", (), EMPTY)


def label(name: str, *args: str) -> ActionLabel:
    if name in RESERVED:
        if args:
            raise TermError(f"{name} takes no arguments")
        return ActionLabel(name, (), RESERVED[name])
    return ActionLabel(name, tuple(args))


# ---------------------------------------------------------------- guards


@dataclass(frozen=True)
class GuardExpr:
    def __str__(self) -> str:
        return render_guard(self)


@dataclass(frozen=True)
class TrueGuard(GuardExpr):
    pass


@dataclass(frozen=True)
class FalseGuard(GuardExpr):
    pass


@dataclass(frozen=True)
class AtomPred(GuardExpr):
    name: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class Not(GuardExpr):
    inner: GuardExpr


@dataclass(frozen=True)
class AltG(GuardExpr):
    left: GuardExpr
    right: GuardExpr


@dataclass(frozen=True)
class SeqG(GuardExpr):
    left: GuardExpr
    right: GuardExpr


@dataclass(frozen=True)
class ParG(GuardExpr):
    left: GuardExpr
    right: GuardExpr


def render_guard(g: GuardExpr) -> str:
    if isinstance(g, TrueGuard):
        return "true"
    if isinstance(g, FalseGuard):
        return "false"
    if isinstance(g, AtomPred):
        return f"{g.name}({','.join(g.args)})" if g.args else g.name
    if isinstance(g, Not):
        return f"!{render_guard(g.inner)}"
    op = {AltG: " + ", SeqG: " & ", ParG: " ||| "}[type(g)]
    return f"({render_guard(g.left)}{op}{render_guard(g.right)})"


def guard_predicates(g: GuardExpr) -> set[str]:
    if isinstance(g, AtomPred):
        return {g.name}
    if isinstance(g, Not):
        return guard_predicates(g.inner)
    if isinstance(g, (AltG, SeqG, ParG)):
        return guard_predicates(g.left) | guard_predicates(g.right)
    return set()


# ---------------------------------------------------------------- terms

_INTERN: dict[tuple, "Term"] = {}


class Term:
    """Base class of hash-consed process term nodes."""

    __slots__ = ("_hash", "_key")
    _fields: ClassVar[tuple[str, ...]] = ()
    _defaults: ClassVar[tuple] = ()

    def __new__(cls, *args):
        if len(args) < len(cls._fields):
            missing = len(cls._fields) - len(args)
            args = args + cls._defaults[len(cls._defaults) - missing:]
        key = (cls, *args)
        node = _INTERN.get(key)
        if node is None:
            node = object.__new__(cls)
            for name, value in zip(cls._fields, args):
                object.__setattr__(node, name, value)
            object.__setattr__(node, "_hash", hash(key))
            object.__setattr__(node, "_key", None)
            _INTERN[key] = node
        return node

    def __setattr__(self, name, value):
        raise AttributeError("terms are immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return self is other

    def __ne__(self, other) -> bool:
        return self is not other

    def __reduce__(self):
        return (type(self), tuple(getattr(self, f) for f in self._fields))

    def __repr__(self) -> str:
        inner = ", ".join(repr(getattr(self, f)) for f in self._fields)
        return f"{type(self).__name__}({inner})"

    def children(self) -> tuple["Term", ...]:
        return ()

    def with_children(self, kids: tuple["Term", ...]) -> "Term":
        return self

    @property
    def sort_key(self) -> tuple:
        key = self._key
        if key is None:
            key = _compute_key(self)
            object.__setattr__(self, "_key", key)
        return key


class Atom(Term):
    __slots__ = ("label",)
    _fields = ("label",)
    label: ActionLabel


class Shadow(Term):
    __slots__ = ("base", "index")
    _fields = ("base", "index")
    base: ActionLabel
    index: int


class GuardAtom(Term):
    __slots__ = ("guard",)
    _fields = ("guard",)
    guard: GuardExpr


class _Binary(Term):
    __slots__ = ("left", "right")
    _fields = ("left", "right")
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)

    def with_children(self, kids):
        return type(self)(kids[0], kids[1])


class Seq(_Binary):
    __slots__ = ()


class Alt(_Binary):
    __slots__ = ()


class Par(_Binary):
    __slots__ = ()


class Comm(_Binary):
    __slots__ = ()


class Merge(_Binary):
    __slots__ = ()


class Unless(_Binary):
    __slots__ = ()


class ConflictElim(Term):
    __slots__ = ("body",)
    _fields = ("body",)
    body: Term

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return ConflictElim(kids[0])


class New(Term):
    __slots__ = ("body",)
    _fields = ("body",)
    body: Term

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return New(kids[0])


class Encapsulate(Term):
    """Blocks every action whose name (or rendered ground label) is in names."""

    __slots__ = ("names", "body", "alias")
    _fields = ("names", "body", "alias")
    _defaults = (None,)
    names: frozenset
    body: Term
    alias: str | None

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return Encapsulate(self.names, kids[0], self.alias)


class Abstract(Term):
    """Renames actions (and atomic guards) listed in names to the silent step."""

    __slots__ = ("names", "body", "alias")
    _fields = ("names", "body", "alias")
    _defaults = (None,)
    names: frozenset
    body: Term
    alias: str | None

    def children(self):
        return (self.body,)

    def with_children(self, kids):
        return Abstract(self.names, kids[0], self.alias)


class RecVar(Term):
    __slots__ = ("name",)
    _fields = ("name",)
    name: str


class RecCall(Term):
    __slots__ = ("name", "spec")
    _fields = ("name", "spec")
    name: str
    spec: str


BINARY = (Seq, Alt, Par, Comm, Merge, Unless)
UNARY = (ConflictElim, New, Encapsulate, Abstract)

_RANK = {
    Atom: 0, Shadow: 1, GuardAtom: 2, RecVar: 3, RecCall: 4, Seq: 5, Par: 6,
    Comm: 7, Merge: 8, Alt: 9, ConflictElim: 10, Unless: 11, Encapsulate: 12,
    Abstract: 13, New: 14,
}
_KIND_RANK = {DEADLOCK: 0, EMPTY: 1, SILENT: 2, VISIBLE: 3}


def _compute_key(t: Term) -> tuple:
    if isinstance(t, Atom):
        lab = t.label
        return (0, _KIND_RANK[lab.kind], lab.name, lab.args)
    if isinstance(t, Shadow):
        return (1, t.base.name, t.base.args, t.index)
    if isinstance(t, GuardAtom):
        return (2, render_guard(t.guard))
    if isinstance(t, (RecVar, RecCall)):
        return (_RANK[type(t)], t.name)
    if isinstance(t, (Encapsulate, Abstract)):
        return (_RANK[type(t)], tuple(sorted(t.names)), t.body.sort_key)
    return (_RANK[type(t)],) + tuple(c.sort_key for c in t.children())


def atom(name: str, *args: str) -> Atom:
    return Atom(label(name, *args))


DELTA = Atom(DELTA_LABEL)
EPS = Atom(EPS_LABEL)
TAU = Atom(TAU_LABEL)
TRUE_GUARD = GuardAtom(TrueGuard())
FALSE_GUARD = GuardAtom(FalseGuard())


def is_deadlock(t: Term) -> bool:
    return t is DELTA or (isinstance(t, GuardAtom) and isinstance(t.guard, FalseGuard))


def is_empty(t: Term) -> bool:
    return t is EPS or (isinstance(t, GuardAtom) and isinstance(t.guard, TrueGuard))


def alt_of(terms: Iterable[Term]) -> Term:
    """Right-nested sum; the empty sum is deadlock."""
    items = list(terms)
    if not items:
        return DELTA
    result = items[-1]
    for t in reversed(items[:-1]):
        result = Alt(t, result)
    return result


def chain(cls: type, terms: Iterable[Term]) -> Term:
    items = list(terms)
    if not items:
        raise TermError("empty chain")
    result = items[-1]
    for t in reversed(items[:-1]):
        result = cls(t, result)
    return result


def flatten(t: Term, cls: type) -> list[Term]:
    out: list[Term] = []
    stack = [t]
    while stack:
        node = stack.pop()
        if type(node) is cls:
            stack.append(node.right)
            stack.append(node.left)
        else:
            out.append(node)
    return out


# ------------------------------------------------------------ recursion


@dataclass
class RecursiveSpec:
    name: str
    equations: dict[str, Term] = field(default_factory=dict)

    def rhs(self, var: str) -> Term:
        return self.equations[var]

    def free_vars(self) -> set[str]:
        used: set[str] = set()
        for body in self.equations.values():
            used |= rec_vars(body)
        return used - set(self.equations)


def map_term(t: Term, fn: Callable[[Term], Term | None]) -> Term:
    """Bottom-up rebuild: fn may return a replacement for a node or None."""
    memo: dict[Term, Term] = {}

    def go(node: Term) -> Term:
        if node in memo:
            return memo[node]
        replaced = fn(node)
        if replaced is None:
            kids = node.children()
            if kids:
                new_kids = tuple(go(k) for k in kids)
                replaced = node if new_kids == kids else node.with_children(new_kids)
            else:
                replaced = node
        memo[node] = replaced
        return replaced

    return go(t)


def substitute(t: Term, var: str, replacement: Term) -> Term:
    return map_term(t, lambda n: replacement if isinstance(n, RecVar) and n.name == var else None)


def rec_vars(t: Term) -> set[str]:
    return {n.name for n in subterms(t) if isinstance(n, RecVar)}


def close_spec(t: Term, spec_name: str) -> Term:
    """Turn free recursion variables into calls of the named specification."""
    return map_term(t, lambda n: RecCall(n.name, spec_name) if isinstance(n, RecVar) else None)


def subterms(t: Term) -> Iterator[Term]:
    seen: set[int] = set()
    stack = [t]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack.extend(node.children())


def size(t: Term) -> int:
    return 1 + sum(size(c) for c in t.children())


def substitute_data(t: Term, binder: str, value: str) -> Term:
    """Replace the data variable binder by value inside action and guard arguments."""

    def swap(args: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(value if a == binder else a for a in args)

    def guard_swap(g: GuardExpr) -> GuardExpr:
        if isinstance(g, AtomPred):
            return AtomPred(g.name, swap(g.args))
        if isinstance(g, Not):
            return Not(guard_swap(g.inner))
        if isinstance(g, (AltG, SeqG, ParG)):
            return type(g)(guard_swap(g.left), guard_swap(g.right))
        return g

    def fn(n: Term) -> Term | None:
        if isinstance(n, Atom) and binder in n.label.args:
            return Atom(n.label._replace(args=swap(n.label.args)))
        if isinstance(n, Shadow) and binder in n.base.args:
            return Shadow(n.base._replace(args=swap(n.base.args)), n.index)
        if isinstance(n, GuardAtom):
            return GuardAtom(guard_swap(n.guard))
        return None

    return map_term(t, fn)


def expand_finite_sum(binder: str, domain: Iterable[str], body: Term) -> Term:
    values = list(domain)
    if not values:
        raise EmptyDomain(binder)
    return alt_of(substitute_data(body, binder, v) for v in values)


# ------------------------------------------------------------ basic terms


def is_step_head(t: Term) -> bool:
    """An atom, shadow or a parallel bundle of them fired as one step."""
    if isinstance(t, Atom):
        return t.label.kind in (VISIBLE, SILENT)
    if isinstance(t, Shadow):
        return True
    if isinstance(t, Par):
        return is_step_head(t.left) and is_step_head(t.right)
    return False


def is_basic_term(t: Term) -> bool:
    if isinstance(t, (Atom, GuardAtom, Shadow)):
        return True
    if isinstance(t, Seq):
        head = t.left
        return (is_step_head(head) or isinstance(head, GuardAtom)) and is_basic_term(t.right)
    if isinstance(t, (Alt, Par)):
        return is_basic_term(t.left) and is_basic_term(t.right)
    return False


def alphabet(t: Term) -> set[str]:
    names: set[str] = set()
    for node in subterms(t):
        if isinstance(node, Atom) and node.label.kind == VISIBLE:
            names.add(node.label.name)
        elif isinstance(node, Shadow):
            names.add(f"{node.base.name}(shadow)")
    return names


def ground_actions(t: Term, specs: dict[str, RecursiveSpec] | None = None) -> set[ActionLabel]:
    """Visible ground actions reachable syntactically, unfolding recursion."""
    found: set[ActionLabel] = set()
    visited: set[tuple[str, str]] = set()
    stack = [t]
    while stack:
        node = stack.pop()
        for sub in subterms(node):
            if isinstance(sub, Atom) and sub.label.kind == VISIBLE:
                found.add(sub.label)
            elif isinstance(sub, RecCall) and specs is not None:
                key = (sub.spec, sub.name)
                if key not in visited:
                    visited.add(key)
                    stack.append(specs[sub.spec].rhs(sub.name))
    return found

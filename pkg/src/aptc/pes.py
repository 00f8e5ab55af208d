"""Prime event structures and truly concurrent bisimulations.

`build_pes` unfolds a closed recursion-free term of the pure fragment (atoms,
sequence, choice and the parallel operators) with its own small interpreter
that tags every atom occurrence with its position. Each firing is an event
whose history is the path of earlier firings, so causality is the prefix order
and distinct branches are in conflict.

The checkers work on any finite PES, including hand-built ones whose events
are genuinely concurrent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Iterable

from .model import Model
from .terms import (
    DEADLOCK, EMPTY, SILENT, TAU_LABEL, VISIBLE, ActionLabel, Alt, Atom, Comm, Merge, Par, Seq, Term,
)

EXPLOSION_LIMIT = 2 ** 20


class PesError(Exception):
    pass


class UnsupportedConstruct(PesError):
    pass


class ExplosionGuard(PesError):
    pass


Label = tuple[ActionLabel, ...]


@dataclass
class PES:
    """Events with step labels, transitive causes, and symmetric conflict."""

    labels: list[Label] = field(default_factory=list)
    causes: list[frozenset[int]] = field(default_factory=list)
    conflict: set[frozenset[int]] = field(default_factory=set)
    terminating: set[frozenset[int]] = field(default_factory=set)
    tags: list[frozenset[str]] = field(default_factory=list)

    def add_event(self, label: Label, causes: Iterable[int] = (), tags: Iterable[str] = ()) -> int:
        idx = len(self.labels)
        if idx >= EXPLOSION_LIMIT:
            raise ExplosionGuard(f"more than {EXPLOSION_LIMIT} events")
        direct = frozenset(causes)
        closed = set(direct)
        for c in direct:
            closed |= self.causes[c]
        self.labels.append(tuple(label))
        self.causes.append(frozenset(closed))
        self.tags.append(frozenset(tags))
        return idx

    def add_conflict(self, a: int, b: int) -> None:
        self.conflict.add(frozenset((a, b)))

    def in_conflict(self, a: int, b: int) -> bool:
        """Conflict inherited along causality."""
        for x in self.causes[a] | {a}:
            for y in self.causes[b] | {b}:
                if frozenset((x, y)) in self.conflict:
                    return True
        return False

    def concurrent(self, a: int, b: int) -> bool:
        return a != b and a not in self.causes[b] and b not in self.causes[a] and not self.in_conflict(a, b)

    def enabled(self, config: frozenset[int]) -> list[int]:
        return [
            e for e in range(len(self.labels))
            if e not in config and self.causes[e] <= config
            and not any(self.in_conflict(e, c) for c in config)
        ]

    def configurations(self) -> list[frozenset[int]]:
        """All finite configurations, in breadth-first order from the empty one."""
        seen = {frozenset()}
        order = [frozenset()]
        i = 0
        while i < len(order):
            c = order[i]
            i += 1
            for e in self.enabled(c):
                nxt = c | {e}
                if nxt not in seen:
                    if len(seen) >= EXPLOSION_LIMIT:
                        raise ExplosionGuard(f"more than {EXPLOSION_LIMIT} configurations")
                    seen.add(nxt)
                    order.append(nxt)
        return order

    def is_terminating(self, config: frozenset[int]) -> bool:
        return config in self.terminating

    def to_dot(self) -> str:
        lines = ["digraph pes {"]
        for e, lab in enumerate(self.labels):
            text = ",".join(str(x) for x in lab)
            lines.append(f'  e{e} [label="e{e}: {text}"];')
        for e in range(len(self.labels)):
            direct = self.causes[e] - {x for c in self.causes[e] for x in self.causes[c]}
            for c in sorted(direct):
                lines.append(f"  e{c} -> e{e};")
        for pair in sorted(tuple(sorted(p)) for p in self.conflict):
            lines.append(f'  e{pair[0]} -> e{pair[1]} [style=dashed, dir=none, label="#"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ tagged interpreter


def _tag(t: Term, path: str):
    if isinstance(t, Atom):
        kind = t.label.kind
        if kind == EMPTY:
            return ("eps",)
        if kind == DEADLOCK:
            return ("delta",)
        return ("act", path, t.label)
    for cls, name in ((Seq, "seq"), (Alt, "alt"), (Par, "par"), (Comm, "comm"), (Merge, "merge")):
        if type(t) is cls:
            return (name, _tag(t.left, path + "0"), _tag(t.right, path + "1"))
    raise UnsupportedConstruct(f"{type(t).__name__} is outside the event-structure fragment")


class _Unfolder:
    def __init__(self, m: Model | None):
        self.m = m

    def term(self, t) -> bool:
        kind = t[0]
        if kind == "eps":
            return True
        if kind in ("delta", "act", "comm"):
            return False
        if kind == "alt":
            return self.term(t[1]) or self.term(t[2])
        return self.term(t[1]) and self.term(t[2])

    def moves(self, t) -> list[tuple[frozenset[str], Label, object]]:
        kind = t[0]
        if kind == "act":
            return [(frozenset({t[1]}), (t[2],), None)]
        if kind in ("eps", "delta"):
            return []
        if kind == "alt":
            return self.moves(t[1]) + self.moves(t[2])
        if kind == "seq":
            out = [(tags, lab, ("seq", res, t[2]) if res is not None else t[2])
                   for tags, lab, res in self.moves(t[1])]
            if self.term(t[1]):
                out += self.moves(t[2])
            return out
        left, right = self.moves(t[1]), self.moves(t[2])
        out = []
        if kind in ("par", "merge"):
            for ta, la, ra in left:
                for tb, lb, rb in right:
                    joint = self.join(la + lb)
                    if joint is not None:
                        out.append((ta | tb, joint, _pair(ra, rb)))
            if self.term(t[1]):
                out += right
            if self.term(t[2]):
                out += left
        if kind in ("comm", "merge"):
            for ta, la, ra in left:
                for tb, lb, rb in right:
                    if len(la) == 1 and len(lb) == 1 and la[0].kind == VISIBLE and lb[0].kind == VISIBLE:
                        result = self.m.gamma_of(la[0], lb[0]) if self.m else None
                        if result is not None:
                            out.append((ta | tb, (result,), _pair(ra, rb)))
        return out

    def join(self, labels: Label) -> Label | None:
        visible = sorted(lab for lab in labels if lab.kind == VISIBLE)
        if not visible:
            return (TAU_LABEL,)
        if self.m is not None:
            for i in range(len(visible)):
                for j in range(i + 1, len(visible)):
                    if self.m.in_conflict(visible[i], visible[j]):
                        return None
        return tuple(visible)


def _pair(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return ("merge", a, b)


def build_pes(t: Term, m: Model | None = None) -> PES:
    """Unfold a closed term into its tree-shaped event structure."""
    unfolder = _Unfolder(m)
    pes = PES()
    root = _tag(t, "")
    stack = [(root, ())]
    if unfolder.term(root):
        pes.terminating.add(frozenset())
    while stack:
        residual, history = stack.pop()
        siblings = []
        for tags, lab, res in unfolder.moves(residual):
            e = pes.add_event(lab, history[-1:], sorted(tags))
            siblings.append(e)
            path = history + (e,)
            if res is None or unfolder.term(res):
                pes.terminating.add(frozenset(path))
            if res is not None:
                stack.append((res, path))
        for i in range(len(siblings)):
            for j in range(i + 1, len(siblings)):
                pes.add_conflict(siblings[i], siblings[j])
    return pes


# ------------------------------------------------------------------ pomsets


def pomset_canon(pes: PES, events: Iterable[int]) -> tuple:
    """Canonical form of the labelled partial order induced on a set of events."""
    evs = sorted(events)
    key = {e: (pes.labels[e], len(pes.causes[e] & set(evs))) for e in evs}
    groups: dict = {}
    for e in evs:
        groups.setdefault(key[e], []).append(e)
    ordered_keys = sorted(groups)
    best = None
    for choice in product(*(permutations(groups[k]) for k in ordered_keys)):
        seq = [e for part in choice for e in part]
        pos = {e: i for i, e in enumerate(seq)}
        edges = tuple(sorted((pos[c], pos[e]) for e in seq for c in pes.causes[e] if c in pos))
        code = (tuple(key[e][0] for e in seq), edges)
        if best is None or code < best:
            best = code
    return best or ((), ())


def _pomset_moves(pes: PES, configs: list[frozenset[int]]) -> dict:
    out = {}
    for c in configs:
        moves = []
        for d in configs:
            if len(d) > len(c) and c < d:
                moves.append((pomset_canon(pes, d - c), d))
        out[c] = moves
    return out


def _step_moves(pes: PES, configs: list[frozenset[int]]) -> dict:
    out = {}
    for c in configs:
        moves = []
        for d in configs:
            x = d - c
            if len(d) > len(c) and c < d and all(pes.concurrent(a, b) for a in x for b in x if a != b):
                moves.append((tuple(sorted(lab for e in x for lab in pes.labels[e])), d))
        out[c] = moves
    return out


def _pair_fixpoint(p1: PES, p2: PES, m1: dict, m2: dict) -> bool:
    rel = {
        (c1, c2) for c1 in m1 for c2 in m2
        if p1.is_terminating(c1) == p2.is_terminating(c2)
    }
    changed = True
    while changed:
        changed = False
        for c1, c2 in list(rel):
            ok = all(any(k1 == k2 and (d1, d2) in rel for k2, d2 in m2[c2]) for k1, d1 in m1[c1]) and \
                all(any(k1 == k2 and (d1, d2) in rel for k1, d1 in m1[c1]) for k2, d2 in m2[c2])
            if not ok:
                rel.discard((c1, c2))
                changed = True
    return (frozenset(), frozenset()) in rel


def pomset_bisimilar(p1: PES, p2: PES) -> bool:
    return _pair_fixpoint(p1, p2, _pomset_moves(p1, p1.configurations()), _pomset_moves(p2, p2.configurations()))


def pes_step_bisimilar(p1: PES, p2: PES) -> bool:
    return _pair_fixpoint(p1, p2, _step_moves(p1, p1.configurations()), _step_moves(p2, p2.configurations()))


# ------------------------------------------------------------------ history preserving


Triple = tuple[frozenset[int], frozenset[tuple[int, int]], frozenset[int]]


def _extensions(p1: PES, p2: PES, tri: Triple) -> list[tuple[int, int, Triple]]:
    c1, f, c2 = tri
    fmap = dict(f)
    out = []
    for e1 in p1.enabled(c1):
        image = frozenset(fmap[c] for c in p1.causes[e1])
        for e2 in p2.enabled(c2):
            if p1.labels[e1] == p2.labels[e2] and p2.causes[e2] == image:
                out.append((e1, e2, (c1 | {e1}, f | {(e1, e2)}, c2 | {e2})))
    return out


def _hp_relation(p1: PES, p2: PES, hereditary: bool) -> bool:
    start: Triple = (frozenset(), frozenset(), frozenset())
    universe = {start: None}
    succ: dict[Triple, list] = {}
    queue = [start]
    while queue:
        tri = queue.pop()
        succ[tri] = _extensions(p1, p2, tri)
        for _, _, nxt in succ[tri]:
            if nxt not in universe:
                if len(universe) >= EXPLOSION_LIMIT:
                    raise ExplosionGuard("too many history triples")
                universe[nxt] = None
                queue.append(nxt)
    rel = {t for t in universe if p1.is_terminating(t[0]) == p2.is_terminating(t[2])}
    changed = True
    while changed:
        changed = False
        for tri in list(rel):
            c1, f, c2 = tri
            moves = succ[tri]
            ok = all(any(a == e1 and n in rel for a, _, n in moves) for e1 in p1.enabled(c1)) and \
                all(any(b == e2 and n in rel for _, b, n in moves) for e2 in p2.enabled(c2))
            if ok and hereditary:
                for e1, e2 in f:
                    if any(e1 in p1.causes[x] for x in c1):
                        continue
                    below = (c1 - {e1}, f - {(e1, e2)}, c2 - {e2})
                    if below not in rel:
                        ok = False
                        break
            if not ok:
                rel.discard(tri)
                changed = True
    return start in rel


def hp_bisimilar(p1: PES, p2: PES) -> bool:
    return _hp_relation(p1, p2, hereditary=False)


def hhp_bisimilar(p1: PES, p2: PES) -> bool:
    return _hp_relation(p1, p2, hereditary=True)


def initial_steps(pes: PES) -> set[Label]:
    return {pes.labels[e] for e in pes.enabled(frozenset())}


def single_event_lts(pes: PES):
    """Configurations and single-event transitions as a transition system."""
    from .sos import Configuration, TransitionSystem
    from .datastate import DataState

    configs = pes.configurations()
    index = {c: i for i, c in enumerate(configs)}
    transitions = []
    for c in configs:
        for e in pes.enabled(c):
            transitions.append((index[c], pes.labels[e], index[c | {e}]))
    terminating = frozenset(index[c] for c in configs if pes.is_terminating(c))
    states = [Configuration(None, DataState()) for _ in configs]
    return TransitionSystem(states, transitions, terminating)

"""Operational semantics: enabled steps of configurations and LTS generation.

A configuration is a term (or the terminated marker None) paired with a data
state. Moves are computed compositionally. Each move records the observable
step labels, any unmatched shadow marks, the actions whose effects apply, and
the residual term.

Parallel composition pairs one move from each side (lockstep). The full merge
adds communication and lets one side move alone while the other side is
blocked waiting for a mailbox message.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .datastate import DataState, MailboxFull, apply_effect, apply_effects, eval_guard, mailbox_receive, mailbox_send
from .model import Model, name_matches
from .terms import (
    SILENT, TAU_LABEL, VISIBLE, Abstract, ActionLabel, Alt, Atom, Comm, ConflictElim,
    Encapsulate, EMPTY, GuardAtom, Merge, New, Par, RecCall, RecursiveSpec, RecVar, Seq,
    Shadow, Term, Unless, ground_actions, guard_predicates,
)

DEFAULT_BOUND = 1_000_000


class SosError(Exception):
    pass


class UnguardedRecursion(SosError):
    def __init__(self, spec: str, var: str):
        self.spec, self.var = spec, var
        super().__init__(f"unguarded recursion through {var} in {spec}")


class StateBoundExceeded(SosError):
    def __init__(self, bound: int):
        self.bound = bound
        super().__init__(f"state bound {bound} exceeded")


class UndeclaredConflictPair(SosError):
    pass


StepLabel = tuple[ActionLabel, ...]
TAU_STEP: StepLabel = (TAU_LABEL,)


class Configuration(NamedTuple):
    term: Term | None
    state: DataState


@dataclass(frozen=True)
class Move:
    labels: StepLabel
    marks: tuple[ActionLabel, ...]
    effects: tuple[ActionLabel, ...]
    target: Term | None


def step_text(labels: StepLabel) -> str:
    if labels == TAU_STEP:
        return "tau"
    return "{" + ",".join(sorted(str(lab) for lab in labels)) + "}"


def _merge(left: Term | None, right: Term | None) -> Term | None:
    if left is None:
        return right
    if right is None:
        return left
    return Merge(left, right)


def _dedupe(moves: Iterable[Move]) -> tuple[Move, ...]:
    return tuple(dict.fromkeys(moves))


def normalize_labels(labels: Iterable[ActionLabel]) -> StepLabel:
    """Silent components vanish from mixed steps; an all-silent step is one tau."""
    items = list(labels)
    visible = sorted(lab for lab in items if lab.kind == VISIBLE)
    if visible:
        return tuple(visible)
    return TAU_STEP if items else ()


class Engine:
    """Move generator for one model, memoised per (term, state, hidden guards)."""

    def __init__(self, model: Model, guard_steps: bool = False):
        self.m = model
        self.guard_steps = guard_steps
        self.specs: dict[str, RecursiveSpec] = model.specs
        self._moves: dict[tuple, tuple[tuple[Move, ...], bool]] = {}
        self._term: dict[tuple, bool] = {}
        self._alphabets: dict[Term, frozenset] = {}
        self._head_new: dict[Term, bool] = {}
        self._unfolding_moves: set[tuple] = set()
        self._unfolding_term: set[tuple] = set()
        self.guard_names = frozenset(model.predicates)

    # -------------------------------------------------------------- helpers

    def rhs(self, call: RecCall) -> Term:
        spec = self.specs.get(call.spec)
        if spec is None or call.name not in spec.equations:
            raise SosError(f"undefined recursion variable {call.name}")
        return spec.equations[call.name]

    def hidden_guard(self, node: GuardAtom, ctx: frozenset) -> bool:
        preds = guard_predicates(node.guard)
        return bool(preds) and preds <= ctx

    def writes(self, move: Move) -> frozenset:
        out: set[str] = set()
        for lab in move.effects:
            out |= self.m.writes(lab)
        return frozenset(out)

    def combine(self, left: Move, right: Move) -> Move | None:
        """Join two simultaneous moves into one step, or None if they cannot fire together.

        Actions declared in conflict are never concurrent, so they cannot share
        a step; the check uses the original actions, before any hiding. A
        shadow mark is discharged by any matching action in the joint step;
        undischarged marks stay on the move so an enclosing parallel context
        can still supply the action.
        """
        for x in left.effects:
            for y in right.effects:
                if self.m.in_conflict(x, y):
                    return None
        labels = left.labels + right.labels
        visible = sorted(lab for lab in labels if lab.kind == VISIBLE)
        present = set(visible)
        marks = tuple(sorted({m for m in left.marks + right.marks if m not in present}))
        effects = left.effects + right.effects
        target = _merge(left.target, right.target)
        if visible:
            step = tuple(visible)
        elif labels:
            step = TAU_STEP
        else:
            step = ()
        return Move(step, marks, effects, target)

    def alphabet(self, t: Term) -> frozenset:
        cached = self._alphabets.get(t)
        if cached is None:
            cached = frozenset(ground_actions(t, self.specs))
            self._alphabets[t] = cached
        return cached

    def unless_label(self, lab: ActionLabel, against: frozenset) -> ActionLabel:
        if lab.kind != VISIBLE:
            return lab
        for other in against:
            if self.m.in_conflict(lab, other):
                return TAU_LABEL
        for pair in self.m.conflicts:
            for other in against:
                if other in pair:
                    rest = [p for p in pair if p != other]
                    partner = rest[0] if rest else other
                    if self.m.below(partner, lab):
                        return TAU_LABEL
        return lab

    # -------------------------------------------------------------- termination

    def terminable(self, t: Term, s: DataState, ctx: frozenset = frozenset()) -> bool:
        key = (t, s, ctx)
        hit = self._term.get(key)
        if hit is not None:
            return hit
        if key in self._unfolding_term:
            return False
        self._unfolding_term.add(key)
        try:
            result = self._terminable(t, s, ctx)
        finally:
            self._unfolding_term.discard(key)
        self._term[key] = result
        return result

    def _terminable(self, t: Term, s: DataState, ctx: frozenset) -> bool:
        if isinstance(t, Atom):
            return t.label.kind == EMPTY
        if isinstance(t, Shadow):
            return False
        if isinstance(t, GuardAtom):
            if self.guard_steps or self.hidden_guard(t, ctx):
                return False
            return eval_guard(t.guard, s, self.m.predicates)
        if isinstance(t, Alt):
            return self.terminable(t.left, s, ctx) or self.terminable(t.right, s, ctx)
        if isinstance(t, Seq):
            if self.creates(t.left):
                return self.terminable(self.creation_form(t), s, ctx)
            return self.terminable(t.left, s, ctx) and self.terminable(t.right, s, ctx)
        if isinstance(t, (Par, Merge)):
            return self.terminable(t.left, s, ctx) and self.terminable(t.right, s, ctx)
        if isinstance(t, Comm):
            return False
        if isinstance(t, Unless):
            return self.terminable(t.left, s, ctx)
        if isinstance(t, ConflictElim):
            expanded = self.theta_expand(t.body)
            return self.terminable(expanded if expanded is not None else t.body, s, ctx)
        if isinstance(t, Abstract):
            return self.terminable(t.body, s, ctx | (t.names & self.guard_names))
        if isinstance(t, (Encapsulate, New)):
            return self.terminable(t.body, s, ctx)
        if isinstance(t, RecCall):
            return self.terminable(self.rhs(t), s, ctx)
        if isinstance(t, RecVar):
            raise SosError(f"free recursion variable {t.name}")
        raise SosError(f"unknown term {t!r}")

    # -------------------------------------------------------------- moves

    def moves(self, t: Term, s: DataState, ctx: frozenset = frozenset()) -> tuple[tuple[Move, ...], bool]:
        """Enabled moves of t in state s, and whether t is blocked on a mailbox."""
        key = (t, s, ctx)
        hit = self._moves.get(key)
        if hit is not None:
            return hit
        if key in self._unfolding_moves:
            name = t.name if isinstance(t, RecCall) else type(t).__name__
            raise UnguardedRecursion(getattr(t, "spec", "term"), name)
        self._unfolding_moves.add(key)
        try:
            result = self._compute(t, s, ctx)
        finally:
            self._unfolding_moves.discard(key)
        self._moves[key] = result
        return result

    def _compute(self, t: Term, s: DataState, ctx: frozenset) -> tuple[tuple[Move, ...], bool]:
        if isinstance(t, Atom):
            lab = t.label
            if lab.kind == SILENT:
                return (Move(TAU_STEP, (), (), None),), False
            if lab.kind != VISIBLE:
                return (), False
            op = self.m.mailbox_op(lab)
            if op is not None:
                role, box, msg = op
                if role == "recv" and s.box(box).get(msg, 0) == 0:
                    return (), True
                if role == "send" and s.box_size(box) >= self.m.capacity(box):
                    return (), False
            return (Move((lab,), (), (lab,), None),), False
        if isinstance(t, Shadow):
            return (Move((), (t.base,), (), None),), False
        if isinstance(t, GuardAtom):
            if self.hidden_guard(t, ctx):
                return (Move(TAU_STEP, (), (), None),), False
            if self.guard_steps and eval_guard(t.guard, s, self.m.predicates):
                return (Move(TAU_STEP, (), (), None),), False
            return (), False
        if isinstance(t, Alt):
            ml, wl = self.moves(t.left, s, ctx)
            mr, wr = self.moves(t.right, s, ctx)
            return _dedupe(ml + mr), wl or wr
        if isinstance(t, Seq):
            return self._seq(t, s, ctx)
        if isinstance(t, Par):
            return self._par(t.left, t.right, s, ctx)
        if isinstance(t, Comm):
            ml, wl = self.moves(t.left, s, ctx)
            mr, wr = self.moves(t.right, s, ctx)
            return _dedupe(self._comm(ml, mr)), wl or wr
        if isinstance(t, Merge):
            return self._full_merge(t.left, t.right, s, ctx)
        if isinstance(t, Unless):
            if not self.m.conflicts:
                raise UndeclaredConflictPair("unless used without any declared conflict")
            inner, waiting = self.moves(t.left, s, ctx)
            against = self.alphabet(t.right)
            out = []
            for mv in inner:
                labels = normalize_labels(self.unless_label(lab, against) for lab in mv.labels)
                target = Unless(mv.target, t.right) if mv.target is not None else None
                out.append(Move(labels, mv.marks, mv.effects, target))
            return _dedupe(out), waiting
        if isinstance(t, ConflictElim):
            if not self.m.conflicts:
                raise UndeclaredConflictPair("conflict elimination used without any declared conflict")
            expanded = self.theta_expand(t.body)
            if expanded is not None:
                return self.moves(expanded, s, ctx)
            inner, waiting = self.moves(t.body, s, ctx)
            return _dedupe(
                Move(mv.labels, mv.marks, mv.effects,
                     ConflictElim(mv.target) if mv.target is not None else None)
                for mv in inner
            ), waiting
        if isinstance(t, Encapsulate):
            inner, waiting = self.moves(t.body, s, ctx)
            out = []
            for mv in inner:
                if any(name_matches(t.names, lab) for lab in mv.labels if lab.kind == VISIBLE):
                    continue
                target = Encapsulate(t.names, mv.target, t.alias) if mv.target is not None else None
                out.append(Move(mv.labels, mv.marks, mv.effects, target))
            return _dedupe(out), waiting
        if isinstance(t, Abstract):
            inner, waiting = self.moves(t.body, s, ctx | (t.names & self.guard_names))
            out = []
            for mv in inner:
                labels = normalize_labels(
                    TAU_LABEL if lab.kind == VISIBLE and name_matches(t.names, lab) else lab
                    for lab in mv.labels
                )
                target = Abstract(t.names, mv.target, t.alias) if mv.target is not None else None
                out.append(Move(labels, mv.marks, mv.effects, target))
            return _dedupe(out), waiting
        if isinstance(t, New):
            return self.moves(t.body, s, ctx)
        if isinstance(t, RecCall):
            return self.moves(self.rhs(t), s, ctx)
        if isinstance(t, RecVar):
            raise SosError(f"free recursion variable {t.name}")
        raise SosError(f"unknown term {t!r}")

    def creates(self, t: Term) -> bool:
        """Whether a process creation sits at the head of t."""
        hit = self._head_new.get(t)
        if hit is None:
            if isinstance(t, New):
                hit = True
            elif isinstance(t, Alt):
                hit = self.creates(t.left) or self.creates(t.right)
            elif isinstance(t, Seq):
                hit = self.creates(t.left)
            else:
                hit = False
            self._head_new[t] = hit
        return hit

    def creation_form(self, t: Seq) -> Term:
        """Rewrite a sequence headed by a creation so the creation runs beside its continuation."""
        left = t.left
        if isinstance(left, New):
            return Merge(left.body, t.right)
        if isinstance(left, Seq):
            return Seq(left.left, Seq(left.right, t.right))
        return Alt(Seq(left.left, t.right), Seq(left.right, t.right))

    def _seq(self, t: Seq, s: DataState, ctx: frozenset):
        if self.creates(t.left):
            return self.moves(self.creation_form(t), s, ctx)
        ml, waiting = self.moves(t.left, s, ctx)
        out = [
            Move(mv.labels, mv.marks, mv.effects,
                 Seq(mv.target, t.right) if mv.target is not None else t.right)
            for mv in ml
        ]
        if self.terminable(t.left, s, ctx):
            mr, wr = self.moves(t.right, s, ctx)
            out.extend(mr)
            waiting = waiting or wr
        return _dedupe(out), waiting

    def _lockstep(self, left: Term, right: Term, ml, mr, s, ctx) -> list[Move]:
        out = []
        for a in ml:
            for b in mr:
                if self._races(a, b, s):
                    # order-dependent writes fire one at a time
                    out.append(Move(a.labels, a.marks, a.effects, _merge(a.target, right)))
                    out.append(Move(b.labels, b.marks, b.effects, _merge(left, b.target)))
                    continue
                joint = self.combine(a, b)
                if joint is not None:
                    out.append(joint)
        if self.terminable(left, s, ctx):
            out.extend(mr)
        if self.terminable(right, s, ctx):
            out.extend(ml)
        return out

    def _races(self, a: Move, b: Move, s: DataState) -> bool:
        if not (a.effects and b.effects and self.writes(a) & self.writes(b)):
            return False
        table = self.m.effects
        return apply_effects(a.effects + b.effects, s, table) != apply_effects(b.effects + a.effects, s, table)

    def _par(self, left: Term, right: Term, s: DataState, ctx: frozenset):
        ml, wl = self.moves(left, s, ctx)
        mr, wr = self.moves(right, s, ctx)
        return _dedupe(self._lockstep(left, right, ml, mr, s, ctx)), wl or wr

    def _comm(self, ml, mr) -> list[Move]:
        out = []
        for a in ml:
            if len(a.labels) != 1 or a.marks or a.labels[0].kind != VISIBLE:
                continue
            for b in mr:
                if len(b.labels) != 1 or b.marks or b.labels[0].kind != VISIBLE:
                    continue
                result = self.m.gamma_of(a.labels[0], b.labels[0])
                if result is not None:
                    out.append(Move((result,), (), (result,), _merge(a.target, b.target)))
        return out

    def _full_merge(self, left: Term, right: Term, s: DataState, ctx: frozenset):
        ml, wl = self.moves(left, s, ctx)
        mr, wr = self.moves(right, s, ctx)
        out = self._lockstep(left, right, ml, mr, s, ctx)
        out.extend(self._comm(ml, mr))
        if not ml and wl:
            out.extend(Move(b.labels, b.marks, b.effects, _merge(left, b.target)) for b in mr)
        if not mr and wr:
            out.extend(Move(a.labels, a.marks, a.effects, _merge(a.target, right)) for a in ml)
        return _dedupe(out), wl or wr

    def theta_expand(self, x: Term) -> Term | None:
        """One level of conflict elimination, or None when it only wraps residuals."""
        if isinstance(x, (Atom, GuardAtom, Shadow)):
            return x
        if isinstance(x, Alt):
            return Alt(Unless(ConflictElim(x.left), x.right), Unless(ConflictElim(x.right), x.left))
        if isinstance(x, Seq):
            return Seq(ConflictElim(x.left), ConflictElim(x.right))
        if isinstance(x, (Par, Comm)):
            cls = type(x)
            return Alt(cls(Unless(ConflictElim(x.left), x.right), x.right),
                       cls(Unless(ConflictElim(x.right), x.left), x.left))
        if isinstance(x, Merge):
            return self.theta_expand(Alt(Par(x.left, x.right), Comm(x.left, x.right)))
        if isinstance(x, RecCall):
            return ConflictElim(self.rhs(x))
        return None

    # -------------------------------------------------------------- steps

    def finalize(self, effects: Iterable[ActionLabel], s: DataState) -> list[DataState]:
        """Successor states after applying a step's effects in canonical order."""
        states = [s]
        for lab in sorted(effects):
            nxt: dict[DataState, None] = {}
            op = self.m.mailbox_op(lab)
            for st in states:
                if op is not None:
                    role, box, msg = op
                    if role == "recv":
                        st = mailbox_receive(box, msg, st)
                        if st is None:
                            continue
                    else:
                        try:
                            st = mailbox_send(box, msg, st, self.m.capacity(box))
                        except MailboxFull:
                            continue
                for out in apply_effect(lab, st, self.m.effects):
                    nxt[out] = None
            states = sorted(nxt)
        return states

    def enabled_steps(self, c: Configuration) -> tuple[list[tuple[StepLabel, Configuration]], bool]:
        """Observable steps of a configuration and whether it may terminate.

        A move made only of shadow marks is silent at the top level: the shadow
        simply terminates, so the residual's steps are taken instead. A step
        still carrying an undischarged mark is a mismatch and never fires.
        """
        if c.term is None:
            return [], True
        out: dict[tuple[StepLabel, Configuration], None] = {}
        terminating = False
        stack = [c.term]
        seen = {c.term}
        while stack:
            u = stack.pop()
            if self.terminable(u, c.state):
                terminating = True
            moves, _ = self.moves(u, c.state)
            for mv in moves:
                if mv.labels and mv.marks:
                    continue
                if not mv.labels:
                    if mv.target is None:
                        terminating = True
                    elif mv.target not in seen:
                        seen.add(mv.target)
                        stack.append(mv.target)
                    continue
                for st in self.finalize(mv.effects, c.state):
                    out[(mv.labels, Configuration(mv.target, st))] = None
        return list(out), terminating


def enabled_steps(c: Configuration, m: Model) -> list[tuple[StepLabel, Configuration]]:
    return Engine(m).enabled_steps(c)[0]


# ------------------------------------------------------------------ LTS


@dataclass
class TransitionSystem:
    states: list[Configuration]
    transitions: list[tuple[int, StepLabel, int]]
    terminating: frozenset[int]
    initial: int = 0
    _out: list | None = field(default=None, repr=False, compare=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def out(self, i: int) -> list[tuple[StepLabel, int]]:
        if self._out is None:
            table: list[list] = [[] for _ in self.states]
            for src, lab, dst in self.transitions:
                table[src].append((lab, dst))
            self._out = table
        return self._out[i]

    def to_aut(self) -> str:
        lines = []
        sink = len(self.states)
        body = [f'({src},"{step_text(lab)}",{dst})' for src, lab, dst in self.transitions]
        ticks = [f'({i},"tick",{sink})' for i in sorted(self.terminating)]
        nstates = len(self.states) + (1 if ticks else 0)
        lines.append(f"des ({self.initial},{len(body) + len(ticks)},{nstates})")
        lines.extend(body)
        lines.extend(ticks)
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        lines = ["digraph lts {", "  rankdir=LR;", f"  init [shape=point]; init -> {self.initial};"]
        for i in range(len(self.states)):
            shape = "doublecircle" if i in self.terminating else "circle"
            lines.append(f"  {i} [shape={shape}];")
        for src, lab, dst in self.transitions:
            lines.append(f'  {src} -> {dst} [label="{step_text(lab)}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def parse_aut(text: str) -> TransitionSystem:
    """Read an AUT file written by to_aut; tick transitions become termination."""
    import re

    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    head = re.fullmatch(r"des\s*\((\d+),(\d+),(\d+)\)", lines[0])
    if head is None:
        raise ValueError("missing des header")
    initial, _, nstates = map(int, head.groups())
    transitions, terminating, sinks = [], set(), set()
    for ln in lines[1:]:
        m = re.fullmatch(r'\((\d+),"([^"]*)",(\d+)\)', ln)
        if m is None:
            raise ValueError(f"bad transition line {ln!r}")
        src, lab, dst = int(m.group(1)), m.group(2), int(m.group(3))
        if lab == "tick":
            terminating.add(src)
            sinks.add(dst)
            continue
        if lab == "tau":
            step = TAU_STEP
        else:
            step = tuple(ActionLabel(*_split_label(x)) for x in _split_step(lab[1:-1]))
        transitions.append((src, step, dst))
    count = nstates - (1 if sinks else 0)
    states = [Configuration(None, DataState()) for _ in range(count)]
    return TransitionSystem(states, transitions, frozenset(terminating), initial)


def _split_step(text: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur:
        parts.append(cur)
    return parts


def _split_label(text: str) -> tuple[str, tuple[str, ...]]:
    if "(" not in text:
        return text, ()
    name, rest = text.split("(", 1)
    return name, tuple(rest[:-1].split(","))


_WORKER: Engine | None = None


def _init_worker(model: Model, guard_steps: bool) -> None:
    global _WORKER
    _WORKER = Engine(model, guard_steps)


def _expand_chunk(configs: list[Configuration]):
    return [_WORKER.enabled_steps(c) for c in configs]


def generate_lts(m: Model, root: Term, bound: int = DEFAULT_BOUND, jobs: int = 1,
                 guard_steps: bool = False, engine: Engine | None = None) -> TransitionSystem:
    """Breadth-first exploration from the root; states are numbered in discovery order.

    With guard_steps, passing a guard is a silent step rather than a condition;
    weak equivalences are decided on that variant.
    """
    if bound < 1:
        raise ValueError("bound must be at least 1")
    engine = engine or Engine(m, guard_steps)
    start = Configuration(root, m.initial_state())
    index = {start: 0}
    states = [start]
    transitions: list[tuple[int, StepLabel, int]] = []
    terminating: set[int] = set()
    frontier = [0]
    pool = ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(m, engine.guard_steps)) if jobs > 1 else None
    try:
        while frontier:
            configs = [states[i] for i in frontier]
            if pool is not None and len(configs) >= 2 * jobs:
                size = max(1, len(configs) // (jobs * 4))
                chunks = [configs[k:k + size] for k in range(0, len(configs), size)]
                results = [r for part in pool.map(_expand_chunk, chunks) for r in part]
            else:
                results = [engine.enabled_steps(c) for c in configs]
            nxt = []
            for i, (steps, term) in zip(frontier, results):
                if term:
                    terminating.add(i)
                for lab, target in steps:
                    j = index.get(target)
                    if j is None:
                        if len(states) >= bound:
                            raise StateBoundExceeded(bound)
                        j = len(states)
                        index[target] = j
                        states.append(target)
                        nxt.append(j)
                    transitions.append((i, lab, j))
            frontier = nxt
    finally:
        if pool is not None:
            pool.shutdown()
    return TransitionSystem(states, transitions, frozenset(terminating))


# ------------------------------------------------------------------ guardedness


@dataclass(frozen=True)
class GuardednessVerdict:
    guarded: bool
    cycle: tuple[str, ...] = ()


def _unguarded(t: Term, hidden: frozenset, specs) -> tuple[set[str], bool]:
    """Recursion names reachable before a visible action, and whether t always acts first."""
    if isinstance(t, Atom):
        lab = t.label
        if lab.kind == VISIBLE:
            return set(), not name_matches(hidden, lab)
        return set(), lab.kind == "delta"
    if isinstance(t, (Shadow, GuardAtom)):
        return set(), False
    if isinstance(t, (RecCall, RecVar)):
        return {t.name}, False
    if isinstance(t, Seq):
        refs, guards = _unguarded(t.left, hidden, specs)
        if isinstance(t.left, New) or not guards:
            more, right_guards = _unguarded(t.right, hidden, specs)
            return refs | more, guards or right_guards
        return refs, True
    if isinstance(t, Alt):
        a, ga = _unguarded(t.left, hidden, specs)
        b, gb = _unguarded(t.right, hidden, specs)
        return a | b, ga and gb
    if isinstance(t, (Par, Merge, Comm)):
        a, ga = _unguarded(t.left, hidden, specs)
        b, gb = _unguarded(t.right, hidden, specs)
        return a | b, ga or gb
    if isinstance(t, Abstract):
        return _unguarded(t.body, hidden | t.names, specs)
    if isinstance(t, Unless):
        return _unguarded(t.left, hidden, specs)
    if isinstance(t, (Encapsulate, ConflictElim, New)):
        return _unguarded(t.body, hidden, specs)
    raise SosError(f"unknown term {t!r}")


def check_guardedness(spec: RecursiveSpec, m: Model | None = None,
                      hidden: frozenset = frozenset()) -> GuardednessVerdict:
    """Reject specifications whose variables can reach themselves without a visible action."""
    graph = {name: sorted(_unguarded(body, hidden, None)[0]) for name, body in spec.equations.items()}
    color: dict[str, int] = {}
    path: list[str] = []

    def visit(node: str) -> tuple[str, ...] | None:
        color[node] = 1
        path.append(node)
        for nxt in graph.get(node, []):
            if color.get(nxt) == 1:
                return tuple(path[path.index(nxt):]) + (nxt,)
            if color.get(nxt) is None:
                found = visit(nxt)
                if found:
                    return found
        color[node] = 2
        path.pop()
        return None

    for name in spec.equations:
        if color.get(name) is None:
            cycle = visit(name)
            if cycle:
                return GuardednessVerdict(False, cycle)
    return GuardednessVerdict(True)

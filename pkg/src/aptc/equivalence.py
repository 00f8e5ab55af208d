"""Step bisimulation and rooted branching bisimulation on transition systems.

Both relations are decided by signature refinement over the disjoint union of
the two systems. Every verdict carries a witness: the partition when the roots
are related, otherwise a distinguishing trace or an unmatched step. Witnesses
can be re-checked by `validate_verdict`, which works from the definitions
rather than from signatures.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .model import Model
from .sos import DEFAULT_BOUND, TAU_STEP, StepLabel, TransitionSystem, generate_lts, step_text
from .terms import Term

STEP = "step"
RBS = "rbs"
RELATIONS = (STEP, RBS)
TICK = "tick"
SUBSET_LIMIT = 200_000


class EquivalenceError(Exception):
    pass


@dataclass
class Verdict:
    related: bool
    relation: str
    witness: dict
    stats: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = False) -> dict:
        stats = dict(self.stats)
        if not timing:
            stats.pop("millis", None)
        return {"relation": self.relation, "related": self.related,
                "witness": self.witness, "stats": stats}

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True, ensure_ascii=False)


class _Union:
    """Disjoint union of two systems with shared numbering."""

    def __init__(self, left: TransitionSystem, right: TransitionSystem):
        self.left, self.right = left, right
        self.offset = left.n_states
        self.n = left.n_states + right.n_states
        self.succ: list[list[tuple[StepLabel, int]]] = [[] for _ in range(self.n)]
        for src, lab, dst in left.transitions:
            self.succ[src].append((lab, dst))
        for src, lab, dst in right.transitions:
            self.succ[src + self.offset].append((lab, dst + self.offset))
        self.term = [False] * self.n
        for i in left.terminating:
            self.term[i] = True
        for i in right.terminating:
            self.term[i + self.offset] = True
        self.roots = (left.initial, right.initial + self.offset)

    def side(self, i: int) -> tuple[str, int]:
        return ("left", i) if i < self.offset else ("right", i - self.offset)


def _renumber(keys: list) -> tuple[list[int], int]:
    ids: dict = {}
    out = []
    for k in keys:
        out.append(ids.setdefault(k, len(ids)))
    return out, len(ids)


def _step_partition(u: _Union) -> tuple[list[int], int]:
    block = [0] * u.n
    count, iterations = 1, 0
    while True:
        iterations += 1
        sigs = [
            (u.term[s], frozenset((lab, block[t]) for lab, t in u.succ[s]))
            for s in range(u.n)
        ]
        block, new_count = _renumber(sigs)
        if new_count == count:
            return block, iterations
        count = new_count


def _branching_signatures(u: _Union, block: list[int]) -> list[frozenset]:
    local: list[set] = []
    inert_pred: list[list[int]] = [[] for _ in range(u.n)]
    for s in range(u.n):
        sig = set()
        if u.term[s]:
            sig.add(TICK)
        for lab, t in u.succ[s]:
            if lab == TAU_STEP and block[t] == block[s]:
                inert_pred[t].append(s)
            else:
                sig.add((lab, block[t]))
        local.append(sig)
    work = deque(range(u.n))
    queued = [True] * u.n
    while work:
        t = work.popleft()
        queued[t] = False
        for s in inert_pred[t]:
            before = len(local[s])
            local[s] |= local[t]
            if len(local[s]) != before and not queued[s]:
                queued[s] = True
                work.append(s)
    return [frozenset(sig) for sig in local]


def _branching_partition(u: _Union) -> tuple[list[int], int]:
    block = [0] * u.n
    count, iterations = 1, 0
    while True:
        iterations += 1
        block, new_count = _renumber(_branching_signatures(u, block))
        if new_count == count:
            return block, iterations
        count = new_count


def _rooted_match(u: _Union, block: list[int]) -> dict | None:
    """Exact-label matching of the two roots' first steps; None when it holds."""
    r1, r2 = u.roots
    if u.term[r1] != u.term[r2]:
        side = "left" if u.term[r1] else "right"
        return {"kind": "unmatched-step", "rooted": True, "side": side, "path": [], "step": TICK}
    for src, other in ((r1, r2), (r2, r1)):
        theirs = {(lab, block[t]) for lab, t in u.succ[other]}
        for lab, t in u.succ[src]:
            if (lab, block[t]) not in theirs:
                side = "left" if src == r1 else "right"
                return {"kind": "unmatched-step", "rooted": True, "side": side, "path": [],
                        "step": step_text(lab), "target": u.side(t)[1]}
    return None


# ------------------------------------------------------------------ witnesses


def _closure(u: _Union, states: Iterable[int], weak: bool) -> frozenset[int]:
    seen = set(states)
    if not weak:
        return frozenset(seen)
    stack = list(seen)
    while stack:
        s = stack.pop()
        for lab, t in u.succ[s]:
            if lab == TAU_STEP and t not in seen:
                seen.add(t)
                stack.append(t)
    return frozenset(seen)


def _after(u: _Union, states: frozenset[int], lab, weak: bool) -> frozenset[int]:
    if lab == TICK:
        return frozenset({-1}) if any(u.term[s] for s in states) else frozenset()
    return _closure(u, (t for s in states for l2, t in u.succ[s] if l2 == lab), weak)


def distinguishing_trace(u: _Union, weak: bool) -> dict | None:
    """Shortest trace (ending in tick for termination) accepted by exactly one side."""
    start = (_closure(u, [u.roots[0]], weak), _closure(u, [u.roots[1]], weak))
    seen = {start}
    queue = deque([(start, [])])
    while queue:
        (a, b), trace = queue.popleft()
        labels: dict = {}
        for s in sorted(a | b):
            if s < 0:
                continue
            for lab, _ in u.succ[s]:
                if not (weak and lab == TAU_STEP):
                    labels.setdefault(lab, None)
        if any(u.term[s] for s in a | b if s >= 0):
            labels[TICK] = None
        for lab in sorted(labels, key=lambda x: x if isinstance(x, str) else step_text(x)):
            na, nb = _after(u, a, lab, weak), _after(u, b, lab, weak)
            text = lab if lab == TICK else step_text(lab)
            if bool(na) != bool(nb):
                return {"kind": "trace", "side": "left" if na else "right", "trace": trace + [text]}
            if lab == TICK:
                continue
            key = (na, nb)
            if key not in seen:
                if len(seen) >= SUBSET_LIMIT:
                    return None
                seen.add(key)
                queue.append((key, trace + [text]))
    return None


def _unmatched_step(u: _Union, block: list[int], weak: bool) -> dict:
    r1, r2 = u.roots
    for src, other, side in ((r1, r2, "left"), (r2, r1, "right")):
        reach = _closure(u, [other], weak)
        if u.term[src] and not any(u.term[q] for q in reach):
            return {"kind": "unmatched-step", "rooted": False, "side": side, "path": [], "step": TICK}
        for lab, t in u.succ[src]:
            if weak and lab == TAU_STEP and block[t] == block[other]:
                continue
            matched = any(
                l2 == lab and block[t2] == block[t]
                for q in reach for l2, t2 in u.succ[q]
            )
            if not matched:
                return {"kind": "unmatched-step", "rooted": False, "side": side, "path": [],
                        "step": step_text(lab), "target": u.side(t)[1]}
    raise EquivalenceError("roots differ but no unmatched step was found")


def _partition_witness(u: _Union, block: list[int]) -> dict:
    groups: dict[int, dict[str, list[int]]] = {}
    for s in range(u.n):
        side, idx = u.side(s)
        groups.setdefault(block[s], {"left": [], "right": []})[side].append(idx)
    return {"kind": "partition", "blocks": [groups[k] for k in sorted(groups)]}


# ------------------------------------------------------------------ entry points


def compare(left: TransitionSystem, right: TransitionSystem, relation: str = STEP) -> Verdict:
    """Decide whether the roots of two systems are related."""
    if relation not in RELATIONS:
        raise EquivalenceError(f"unknown relation {relation!r}")
    started = time.perf_counter()
    u = _Union(left, right)
    weak = relation == RBS
    block, iterations = (_branching_partition if weak else _step_partition)(u)
    r1, r2 = u.roots
    related = block[r1] == block[r2]
    rooted_failure = None
    if related and weak:
        rooted_failure = _rooted_match(u, block)
        related = rooted_failure is None
    if related:
        witness = _partition_witness(u, block)
    elif rooted_failure is not None:
        witness = rooted_failure
    else:
        witness = distinguishing_trace(u, weak) or _unmatched_step(u, block, weak)
    stats = {"states": u.n, "iterations": iterations,
             "millis": round((time.perf_counter() - started) * 1000, 3)}
    return Verdict(related, relation, witness, stats)


def compare_terms(m: Model, left: Term, right: Term, relation: str = STEP,
                  bound: int = DEFAULT_BOUND, jobs: int = 1) -> Verdict:
    weak = relation == RBS
    return compare(generate_lts(m, left, bound, jobs, guard_steps=weak),
                   generate_lts(m, right, bound, jobs, guard_steps=weak), relation)


def step_bisimilar(m: Model, left: Term, right: Term) -> bool:
    return compare_terms(m, left, right, STEP).related


def rooted_branching_bisimilar(m: Model, left: Term, right: Term) -> bool:
    return compare_terms(m, left, right, RBS).related


# ------------------------------------------------------------------ validation


def _accepts(u: _Union, root: int, trace: list[str], weak: bool) -> bool:
    current = _closure(u, [root], weak)
    for text in trace:
        if text == TICK:
            return any(s >= 0 and u.term[s] for s in current)
        current = _closure(
            u, (t for s in current for lab, t in u.succ[s] if step_text(lab) == text), weak)
        if not current:
            return False
    return True


def naive_related(u: _Union, weak: bool) -> set[tuple[int, int]]:
    """Greatest bisimulation by pair elimination, straight from the transfer clauses."""
    rel = {(p, q) for p in range(u.n) for q in range(u.n)}
    tau_reach = [_closure(u, [s], True) for s in range(u.n)] if weak else None

    def answers(p: int, q: int) -> bool:
        if u.term[p]:
            if weak:
                if not any(u.term[x] and (p, x) in rel for x in tau_reach[q]):
                    return False
            elif not u.term[q]:
                return False
        for lab, p2 in u.succ[p]:
            if weak and lab == TAU_STEP and (p2, q) in rel:
                continue
            pivots = [x for x in tau_reach[q] if (p, x) in rel] if weak else [q]
            if not any(l2 == lab and (p2, q2) in rel for x in pivots for l2, q2 in u.succ[x]):
                return False
        return True

    changed = True
    while changed:
        changed = False
        for pair in sorted(rel):
            p, q = pair
            if pair in rel and not (answers(p, q) and answers(q, p)):
                rel.discard(pair)
                rel.discard((q, p))
                changed = True
    return rel


def naive_compare(left: TransitionSystem, right: TransitionSystem, relation: str = STEP) -> bool:
    """Independent quadratic decision procedure, used to cross-check `compare`."""
    u = _Union(left, right)
    weak = relation == RBS
    rel = naive_related(u, weak)
    r1, r2 = u.roots
    if (r1, r2) not in rel:
        return False
    if not weak:
        return True
    if u.term[r1] != u.term[r2]:
        return False
    for src, other in ((r1, r2), (r2, r1)):
        for lab, t in u.succ[src]:
            if not any(l2 == lab and (t, t2) in rel for l2, t2 in u.succ[other]):
                return False
    return True


def validate_verdict(left: TransitionSystem, right: TransitionSystem, verdict: Verdict) -> bool:
    """Re-check a verdict's witness against the transfer clauses."""
    u = _Union(left, right)
    weak = verdict.relation == RBS
    w = verdict.witness
    if verdict.related:
        if w.get("kind") != "partition":
            return False
        block = [0] * u.n
        for k, grp in enumerate(w["blocks"]):
            for i in grp["left"]:
                block[i] = k
            for j in grp["right"]:
                block[j + u.offset] = k
        return _partition_is_bisimulation(u, block, weak)
    if w.get("kind") == "trace":
        inside = u.roots[0] if w["side"] == "left" else u.roots[1]
        outside = u.roots[1] if w["side"] == "left" else u.roots[0]
        return _accepts(u, inside, w["trace"], weak) and not _accepts(u, outside, w["trace"], weak)
    if w.get("kind") == "unmatched-step":
        return not naive_compare(left, right, verdict.relation)
    return False


def _partition_is_bisimulation(u: _Union, block: list[int], weak: bool) -> bool:
    r1, r2 = u.roots
    if block[r1] != block[r2]:
        return False
    members: dict[int, list[int]] = {}
    for s in range(u.n):
        members.setdefault(block[s], []).append(s)

    def inert_reach(q: int) -> set[int]:
        seen, stack = {q}, [q]
        while stack:
            s = stack.pop()
            for lab, t in u.succ[s]:
                if lab == TAU_STEP and block[t] == block[q] and t not in seen:
                    seen.add(t)
                    stack.append(t)
        return seen

    def simulates(p: int, q: int) -> bool:
        pivots = inert_reach(q) if weak else {q}
        if u.term[p] and not any(u.term[x] for x in pivots):
            return False
        for lab, p2 in u.succ[p]:
            if weak and lab == TAU_STEP and block[p2] == block[p]:
                continue
            if not any(l2 == lab and block[q2] == block[p2] for x in pivots for l2, q2 in u.succ[x]):
                return False
        return True

    for group in members.values():
        rep = group[0]
        for p in group[1:]:
            if not (simulates(p, rep) and simulates(rep, p)):
                return False
    if weak:
        if u.term[r1] != u.term[r2]:
            return False
        for src, other in ((r1, r2), (r2, r1)):
            for lab, t in u.succ[src]:
                if not any(l2 == lab and block[t2] == block[t] for l2, t2 in u.succ[other]):
                    return False
    return True

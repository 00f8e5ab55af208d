"""Exhaustive enumeration of small closed recursion-free terms.

The enumeration feeds the cross-checks between the rewriter, the operational
semantics and the event-structure semantics: every term up to a size bound,
built from two actions and deadlock with the sequential, choice and parallel
operators. The two actions communicate into a third.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterator

from .dsl import parse_model
from .model import Model
from .terms import DELTA, Alt, Comm, Merge, Par, Seq, Term, atom

ENUMERATION_MODEL_TEXT = """\
model enumeration;
act a, b, c;
comm a | b = c;
"""

DEFAULT_OPERATORS: tuple[type, ...] = (Seq, Alt, Par, Comm, Merge)


def enumeration_model() -> Model:
    return parse_model(ENUMERATION_MODEL_TEXT)


def default_leaves(actions: tuple[str, ...] = ("a", "b")) -> tuple[Term, ...]:
    return tuple(atom(a) for a in actions) + (DELTA,)


def enumerate_terms(max_size: int = 6, leaves: tuple[Term, ...] | None = None,
                    operators: tuple[type, ...] = DEFAULT_OPERATORS) -> list[Term]:
    """Every term of size at most max_size, smallest first, in a fixed order."""
    leaves = default_leaves() if leaves is None else leaves

    @lru_cache(maxsize=None)
    def exact(n: int) -> tuple[Term, ...]:
        if n == 1:
            return leaves
        out = []
        for cls in operators:
            for left_size in range(1, n - 1):
                for left in exact(left_size):
                    for right in exact(n - 1 - left_size):
                        out.append(cls(left, right))
        return tuple(out)

    return [t for n in range(1, max_size + 1) for t in exact(n)]


def term_pairs(terms: list[Term]) -> Iterator[tuple[Term, Term]]:
    """Unordered pairs of distinct terms."""
    for i, left in enumerate(terms):
        for right in terms[i + 1:]:
            yield left, right

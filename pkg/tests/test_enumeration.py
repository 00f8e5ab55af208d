from aptc.enumeration import DEFAULT_OPERATORS, default_leaves, enumerate_terms, term_pairs
from aptc.terms import size


def count_terms(max_size, leaves, ops):
    """Closed-form count of binary trees by size, computed independently."""
    exact = {1: leaves}
    for n in range(2, max_size + 1):
        exact[n] = ops * sum(exact.get(k, 0) * exact.get(n - 1 - k, 0) for k in range(1, n - 1))
    return sum(exact.values())


def test_counts():
    leaves, ops = len(default_leaves()), len(DEFAULT_OPERATORS)
    for bound in range(1, 7):
        assert len(enumerate_terms(bound)) == count_terms(bound, leaves, ops)


def test_size_six_enumeration():
    terms = enumerate_terms(6)
    assert len(terms) == 1398
    assert len(set(terms)) == len(terms)
    assert max(size(t) for t in terms) == 5


def test_smallest_first():
    sizes = [size(t) for t in enumerate_terms(6)]
    assert sizes == sorted(sizes)


def test_stable_order():
    assert enumerate_terms(5) == enumerate_terms(5)


def test_pairs():
    terms = enumerate_terms(1)
    assert list(term_pairs(terms)) == [(terms[0], terms[1]), (terms[0], terms[2]), (terms[1], terms[2])]

import pytest

from aptc.terms import (
    DELTA, Abstract, Alt, EmptyDomain, Encapsulate, Par, RecVar, Seq, Shadow, alphabet, atom,
    expand_finite_sum, flatten, is_basic_term, label, size, substitute,
)

A, B, C = atom("a"), atom("b"), atom("c")


class TestSubstitute:
    def test_replaces_free_variable(self):
        assert substitute(Seq(A, RecVar("X")), "X", B) == Seq(A, B)

    def test_leaves_term_without_variable(self):
        assert substitute(A, "X", B) == A

    def test_replaces_every_occurrence(self):
        t = Alt(RecVar("X"), Par(RecVar("X"), RecVar("Y")))
        assert substitute(t, "X", C) == Alt(C, Par(C, RecVar("Y")))


class TestFiniteSum:
    def test_two_values(self):
        assert expand_finite_sum("d", ("d1", "d2"), atom("r_A", "d")) == Alt(atom("r_A", "d1"), atom("r_A", "d2"))

    def test_singleton(self):
        assert expand_finite_sum("d", ("d1",), atom("r_A", "d")) == atom("r_A", "d1")

    def test_empty_domain(self):
        with pytest.raises(EmptyDomain):
            expand_finite_sum("d", (), atom("r_A", "d"))

    def test_summand_count(self):
        values = tuple(f"v{i}" for i in range(5))
        t = expand_finite_sum("d", values, Seq(atom("a", "d"), B))
        assert len(flatten(t, Alt)) == 5


class TestBasicTerms:
    def test_prefix_choice(self):
        assert is_basic_term(Alt(Seq(A, B), C))

    def test_encapsulation_is_not_basic(self):
        assert not is_basic_term(Encapsulate(frozenset({"a"}), A))

    def test_parallel_is_basic(self):
        assert is_basic_term(Par(A, B))

    def test_abstraction_is_not_basic(self):
        assert not is_basic_term(Abstract(frozenset({"a"}), A))


def test_alphabet_ignores_deadlock():
    assert alphabet(Seq(A, Alt(B, DELTA))) == {"a", "b"}


def test_alphabet_flags_shadows():
    assert alphabet(Seq(Shadow(label("a"), 1), B)) == {"a(shadow)", "b"}


def test_size_counts_nodes():
    assert size(A) == 1
    assert size(Seq(A, Alt(B, C))) == 5


def test_labels_render_with_arguments():
    assert str(label("s_B", "d1", "0")) == "s_B(d1,0)"
    assert str(label("a")) == "a"

import pytest

from aptc.dsl import parse_term
from aptc.pes import (
    PES, UnsupportedConstruct, build_pes, hhp_bisimilar, hp_bisimilar, initial_steps,
    pes_step_bisimilar, pomset_bisimilar, pomset_canon,
)
from aptc.terms import label

A, B, C = label("a"), label("b"), label("c")


def concurrent(n):
    """n pairwise concurrent events with distinct labels."""
    p = PES()
    for i in range(n):
        p.add_event((label(f"a{i}"),))
    p.terminating.add(frozenset(range(n)))
    return p


def interleaving():
    """a.b + b.a as an explicit event structure."""
    p = PES()
    a1 = p.add_event((A,))
    b1 = p.add_event((B,), [a1])
    b2 = p.add_event((B,))
    a2 = p.add_event((A,), [b2])
    p.add_conflict(a1, b2)
    p.terminating |= {frozenset({a1, b1}), frozenset({b2, a2})}
    return p


@pytest.fixture
def pes(basic_model):
    return lambda text: build_pes(parse_term(text, basic_model), basic_model)


class TestBuild:
    def test_sequence_is_causality(self, pes):
        p = pes("a . b")
        assert p.labels == [(A,), (B,)]
        assert p.causes == [frozenset(), frozenset({0})]
        assert not p.conflict

    def test_choice_is_conflict(self, pes):
        p = pes("a + b")
        assert p.labels == [(A,), (B,)]
        assert p.in_conflict(0, 1) and p.in_conflict(1, 0)

    def test_par_is_one_joint_event(self, pes):
        p = pes("a ||| b")
        assert p.labels == [(A, B)]

    def test_communication_event(self, pes):
        p = pes("a | b")
        assert p.labels == [(C,)]

    def test_unsupported_operator(self, basic_model):
        with pytest.raises(UnsupportedConstruct):
            build_pes(parse_term("encap({a}, a)", basic_model), basic_model)

    def test_conflict_is_inherited(self, pes):
        p = pes("a . b + c")
        b_event = next(e for e, lab in enumerate(p.labels) if lab == (B,))
        c_event = next(e for e, lab in enumerate(p.labels) if lab == (C,))
        assert p.in_conflict(b_event, c_event)

    def test_termination(self, pes):
        p = pes("a . b")
        assert p.is_terminating(frozenset({0, 1}))
        assert not p.is_terminating(frozenset({0}))

    def test_dot_export(self, pes):
        dot = pes("a . b + c").to_dot()
        assert "e0 -> e2;" in dot
        assert 'style=dashed' in dot


class TestConfigurations:
    def test_sequence(self, pes):
        assert pes("a . b").configurations() == [frozenset(), frozenset({0}), frozenset({0, 1})]

    def test_choice(self, pes):
        assert pes("a + b").configurations() == [frozenset(), frozenset({0}), frozenset({1})]

    @pytest.mark.parametrize("n", range(1, 7))
    def test_concurrent_events_give_powerset(self, n):
        assert len(concurrent(n).configurations()) == 2 ** n

    def test_configurations_are_causally_closed_and_conflict_free(self, pes):
        p = pes("(a + b) . c + a . (b + c)")
        for cfg in p.configurations():
            for e in cfg:
                assert p.causes[e] <= cfg
            for x in cfg:
                for y in cfg:
                    assert not p.in_conflict(x, y)

    def test_initial_steps(self, pes):
        assert initial_steps(pes("a . b + a ||| b")) == {(A,), (A, B)}


class TestPomsets:
    def test_chain_and_antichain_differ(self):
        chain = PES()
        chain.add_event((A,))
        chain.add_event((B,), [0])
        assert pomset_canon(chain, {0, 1}) != pomset_canon(concurrent(2), {0, 1})

    def test_canon_ignores_event_numbering(self):
        left, right = PES(), PES()
        left.add_event((A,))
        left.add_event((B,), [0])
        right.add_event((B,))
        right.add_event((A,))
        right.causes[0] = frozenset({1})
        assert pomset_canon(left, {0, 1}) == pomset_canon(right, {0, 1})


CHECKERS = [pes_step_bisimilar, pomset_bisimilar, hp_bisimilar, hhp_bisimilar]


class TestRelations:
    @pytest.mark.parametrize("check", CHECKERS)
    def test_choice_commutes(self, pes, check):
        assert check(pes("a + b"), pes("b + a"))

    @pytest.mark.parametrize("check", CHECKERS)
    def test_choice_idempotent(self, pes, check):
        assert check(pes("a + a"), pes("a"))

    @pytest.mark.parametrize("check", [pomset_bisimilar, hp_bisimilar, hhp_bisimilar])
    def test_par_against_sequence(self, pes, check):
        assert not check(pes("a ||| b"), pes("a . b"))

    @pytest.mark.parametrize("check", CHECKERS)
    def test_par_against_interleaving(self, pes, check):
        assert not check(pes("a ||| b"), pes("a . b + b . a"))

    @pytest.mark.parametrize("check", CHECKERS)
    def test_label_mismatch(self, pes, check):
        assert not check(pes("a . b"), pes("a . c"))

    @pytest.mark.parametrize("check", CHECKERS)
    def test_reflexive(self, pes, check):
        assert check(pes("a . (b + c) ||| a"), pes("a . (b + c) ||| a"))

    def test_concurrency_against_interleaving(self):
        conc, inter = PES(), interleaving()
        conc.add_event((A,))
        conc.add_event((B,))
        conc.terminating.add(frozenset({0, 1}))
        assert not pes_step_bisimilar(conc, inter)
        assert not pomset_bisimilar(conc, inter)
        assert not hp_bisimilar(conc, inter)
        assert hhp_bisimilar(conc, conc)

import json

import pytest
from hypothesis import given, settings, strategies as st

from aptc.dsl import parse_model, parse_term
from aptc.equivalence import (
    RBS, STEP, compare, compare_terms, naive_compare, rooted_branching_bisimilar, step_bisimilar,
    validate_verdict,
)
from aptc.sos import generate_lts
from aptc.terms import DELTA, TAU, Alt, Merge, Par, Seq, atom

MODEL = parse_model("model eq; act a, b, c; comm a | b = c;")


def lts(text, weak=False):
    return generate_lts(MODEL, parse_term(text, MODEL), guard_steps=weak)


def verdict(left, right, relation):
    return compare_terms(MODEL, parse_term(left, MODEL), parse_term(right, MODEL), relation)


class TestStep:
    def test_choice_idempotent(self):
        assert verdict("a + a", "a", STEP).related

    def test_par_against_interleaving(self):
        v = verdict("a ||| b", "a . b + b . a", STEP)
        assert not v.related
        assert v.witness == {"kind": "trace", "side": "left", "trace": ["{a,b}"]}

    def test_reflexive(self):
        assert verdict("a . (b || c) + c", "a . (b || c) + c", STEP).related

    def test_choice_does_not_distribute_over_prefix(self):
        assert not verdict("a . (b + c)", "a . b + a . c", STEP).related

    def test_distinguishing_trace_is_shortest(self):
        v = verdict("a . b", "a . c", STEP)
        assert v.witness["trace"] == ["{a}", "{b}"]

    def test_termination_counts(self):
        assert not verdict("a", "a . delta", STEP).related

    def test_helper(self):
        assert step_bisimilar(MODEL, parse_term("a + b", MODEL), parse_term("b + a", MODEL))


class TestRootedBranching:
    def test_silent_step_after_action(self):
        assert verdict("a . tau . b", "a . b", RBS).related

    def test_silent_choice_absorbed(self):
        assert verdict("a . (tau . (b + c) + b)", "a . (b + c)", RBS).related

    def test_root_condition(self):
        v = verdict("tau . a", "a", RBS)
        assert not v.related
        assert v.witness["kind"] == "unmatched-step" and v.witness["rooted"]

    def test_silent_step_changing_options_is_visible(self):
        assert not verdict("a . (tau . b + c)", "a . (b + c)", RBS).related

    def test_helper(self):
        assert rooted_branching_bisimilar(MODEL, parse_term("a . tau", MODEL), parse_term("a", MODEL))


class TestVerdictJson:
    def test_serialization_omits_timing(self):
        data = json.loads(verdict("a", "a", STEP).to_json())
        assert set(data) == {"related", "relation", "stats", "witness"}
        assert "millis" not in data["stats"]

    def test_timing_on_request(self):
        assert "millis" in verdict("a", "a", STEP).to_dict(timing=True)["stats"]

    def test_partition_covers_both_systems(self):
        v = verdict("a . b + a . b", "a . b", STEP)
        left = sorted(i for block in v.witness["blocks"] for i in block["left"])
        right = sorted(i for block in v.witness["blocks"] for i in block["right"])
        assert left == list(range(lts("a . b + a . b").n_states))
        assert right == list(range(lts("a . b").n_states))


# ---------------------------------------------------------------- dual route


def terms(with_tau=False, max_leaves=5):
    pool = [atom("a"), atom("b"), atom("c"), DELTA] + ([TAU] if with_tau else [])
    leaves = st.sampled_from(pool)
    return st.recursive(leaves, lambda inner: st.one_of(
        st.tuples(inner, inner).map(lambda p: Seq(*p)),
        st.tuples(inner, inner).map(lambda p: Alt(*p)),
        st.tuples(inner, inner).map(lambda p: Par(*p)),
        st.tuples(inner, inner).map(lambda p: Merge(*p)),
    ), max_leaves=max_leaves)


@settings(max_examples=200, deadline=None)
@given(terms(), terms())
def test_step_refinement_agrees_with_naive_fixpoint(left, right):
    l, r = generate_lts(MODEL, left), generate_lts(MODEL, right)
    v = compare(l, r, STEP)
    assert v.related == naive_compare(l, r, STEP)
    assert validate_verdict(l, r, v)


@settings(max_examples=200, deadline=None)
@given(terms(with_tau=True), terms(with_tau=True))
def test_branching_refinement_agrees_with_naive_fixpoint(left, right):
    l, r = generate_lts(MODEL, left, guard_steps=True), generate_lts(MODEL, right, guard_steps=True)
    v = compare(l, r, RBS)
    assert v.related == naive_compare(l, r, RBS)
    assert validate_verdict(l, r, v)


@settings(max_examples=100, deadline=None)
@given(terms(with_tau=True), terms(with_tau=True), st.sampled_from([STEP, RBS]))
def test_symmetric(left, right, relation):
    weak = relation == RBS
    l, r = generate_lts(MODEL, left, guard_steps=weak), generate_lts(MODEL, right, guard_steps=weak)
    assert compare(l, r, relation).related == compare(r, l, relation).related


@settings(max_examples=100, deadline=None)
@given(terms(with_tau=True), st.sampled_from([STEP, RBS]))
def test_reflexive(t, relation):
    ts = generate_lts(MODEL, t, guard_steps=relation == RBS)
    assert compare(ts, ts, relation).related


@settings(max_examples=100, deadline=None)
@given(terms())
def test_step_implies_branching(t):
    other = Alt(t, t)
    assert compare_terms(MODEL, t, other, STEP).related
    assert compare_terms(MODEL, t, other, RBS).related


def test_forged_witness_is_rejected():
    l, r = lts("a"), lts("b")
    v = compare(l, r, STEP)
    forged = type(v)(True, STEP, {"kind": "partition", "blocks": [{"left": [0, 1], "right": [0, 1]}]})
    assert not validate_verdict(l, r, forged)


@pytest.mark.parametrize("left,right", [("a . b", "a . c"), ("a ||| b", "a . b"), ("tau . a", "a")])
def test_failure_witnesses_replay(left, right):
    weak = left.startswith("tau")
    relation = RBS if weak else STEP
    l, r = lts(left, weak), lts(right, weak)
    v = compare(l, r, relation)
    assert not v.related and validate_verdict(l, r, v)

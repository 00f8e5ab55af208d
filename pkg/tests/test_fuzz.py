import json

from aptc.dsl import parse_term
from aptc.equivalence import RBS, STEP
from aptc.fuzz import (
    FuzzReport, binding_size, check_instance, fuzz_model, fuzz_tables, relation_for, soundness_fuzz,
)
from aptc.rewriter import CATALOG, axiom
from aptc.terms import atom


def test_tables_cover_catalog():
    assert set(fuzz_tables()) == {ax.id.table for ax in CATALOG}


class TestRelations:
    def test_strong_tables(self):
        assert relation_for(axiom("A3")) == STEP
        assert relation_for(axiom("P1")) == STEP

    def test_weak_tables(self):
        assert relation_for(axiom("B1")) == RBS
        assert relation_for(axiom("TI1")) == RBS
        assert relation_for(axiom("G26")) == RBS
        assert relation_for(axiom("G27")) == RBS


class TestInstances:
    def test_idempotent_choice(self):
        m = fuzz_model()
        assert check_instance(axiom("A3"), parse_term("a + a", m), parse_term("a", m), m) is None

    def test_silent_step(self):
        m = fuzz_model()
        assert check_instance(axiom("B1"), parse_term("a . tau", m), parse_term("a", m), m) is None

    def test_bad_instance_is_reported(self):
        m = fuzz_model()
        violation = check_instance(axiom("A3"), parse_term("a + a", m), parse_term("b", m), m)
        assert violation is not None and violation.reason == "sides differ"

    def test_binding_size(self):
        assert binding_size({"x": atom("a"), "y": atom("b"), "__H": (frozenset(), None)}) == 2


class TestRun:
    def test_small_run_is_clean_outside_unless(self):
        report = soundness_fuzz(seed=1, count=100, size_bound=7)
        assert {v.axiom for v in report.violations} <= {"U.U33"}
        for name, table in report.tables.items():
            assert table.instances + table.skipped == 100, name

    def test_deterministic(self):
        first = soundness_fuzz(seed=3, count=30, tables=["BATC", "APTC"]).to_json()
        second = soundness_fuzz(seed=3, count=30, tables=["BATC", "APTC"]).to_json()
        assert first == second

    def test_seed_changes_instances(self):
        first = soundness_fuzz(seed=1, count=30, tables=["BATC"])
        second = soundness_fuzz(seed=2, count=30, tables=["BATC"])
        assert isinstance(first, FuzzReport)
        assert first.tables["BATC"].instances == second.tables["BATC"].instances == 30

    def test_json_shape(self):
        data = json.loads(soundness_fuzz(seed=1, count=10, tables=["TAU"]).to_json())
        assert set(data) == {"seed", "count", "size", "tables", "violations"}
        assert data["tables"]["TAU"]["violations"] == 0

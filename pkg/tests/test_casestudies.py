import pytest

from aptc.casestudies import (
    CASE_STUDY_IDS, Mutation, UnknownCaseStudy, build_case_study, case_study_text,
    list_case_studies, parse_case_id, run_mutation, verify_case_study,
)
from aptc.dsl import load_model, parse_model
from aptc.sos import check_guardedness, generate_lts

from conftest import MODELS


class TestCatalog:
    def test_seven_entries(self):
        assert len(list_case_studies()) == 7
        assert [info.id for info in list_case_studies()] == list(CASE_STUDY_IDS)

    def test_all_expected_related(self):
        assert {info.expected for info in list_case_studies()} == {"related"}

    def test_default_parameters(self):
        params = {info.id: info.params for info in list_case_studies()}
        assert params["mapreduce"] == {"m": 2, "n": 1}
        assert params["gfs"] == {"n": 2}
        assert params["cloud-rm"] == {"n": 2}

    @pytest.mark.parametrize("info", list_case_studies(), ids=lambda i: i.id)
    def test_golden_state_counts(self, info):
        m, _ = build_case_study(info.id)
        assert generate_lts(m, m.system, guard_steps=True).n_states == info.system_states
        assert generate_lts(m, m.spec_term, guard_steps=True).n_states == info.spec_states


class TestIds:
    def test_defaults(self):
        assert parse_case_id("mapreduce") == ("mapreduce", {"m": 2, "n": 1})

    def test_explicit(self):
        assert parse_case_id("mapreduce(3,1)") == ("mapreduce", {"m": 3, "n": 1})
        assert parse_case_id("gfs(4)") == ("gfs", {"n": 4})

    @pytest.mark.parametrize("text", ["nope", "gfs(0)", "gfs(1,2)", "abp(1)"])
    def test_rejected(self, text):
        with pytest.raises(UnknownCaseStudy):
            parse_case_id(text)


class TestBundledFiles:
    @pytest.mark.parametrize("case_id", CASE_STUDY_IDS)
    def test_file_matches_builder(self, case_id):
        assert (MODELS / f"{case_id}.aptc").read_text() == case_study_text(case_id)

    @pytest.mark.parametrize("case_id", CASE_STUDY_IDS)
    def test_file_is_guarded(self, case_id):
        m = load_model(MODELS / f"{case_id}.aptc")
        assert check_guardedness(m.spec).guarded


class TestVerification:
    @pytest.mark.parametrize("case_id", CASE_STUDY_IDS)
    def test_default_parameters_verify(self, case_id):
        assert verify_case_study(case_id).related

    @pytest.mark.parametrize("case_id", ["mapreduce(3,2)", "gfs(3)", "cloud-rm(3)"])
    def test_larger_parameters_verify(self, case_id):
        assert verify_case_study(case_id).related

    def test_abp_data_values(self):
        m, _ = build_case_study("abp")
        assert m.domains["D"] == ("d1", "d2")


class TestMutations:
    @pytest.mark.parametrize("case_id", CASE_STUDY_IDS)
    def test_mutation_breaks_verdict(self, case_id):
        result = run_mutation(case_id)
        assert not result.verdict.related
        assert result.replayed

    def test_mutation_site_must_be_unique(self):
        with pytest.raises(ValueError):
            Mutation("x", "a", "b").apply("a a")

    @pytest.mark.parametrize("info", list_case_studies(), ids=lambda i: i.id)
    def test_mutation_is_a_single_edit(self, info):
        text = case_study_text(info.id)
        mutated = info.mutation.apply(text)
        assert mutated != text
        parse_model(mutated)

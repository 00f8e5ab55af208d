import pytest

from aptc.casestudies import CASE_STUDY_IDS
from aptc.dsl import (
    DslSyntaxError, load_model, parse_model, parse_term, pretty, render_model, render_term, tokenize,
)
from aptc.model import ArityMismatch, AsymmetricGamma, ModelError, UndeclaredName
from aptc.terms import Encapsulate, Merge, Par, atom

from conftest import MODELS, read_golden

GOLDEN_MODEL = """\
model golden;
domain D = {d1, d2};
act a, b, c, r(D);
comm a | b = c;
conflict a # b;
var v : D = d1;
pred p = v == d1;
pred q = v == d2;
"""


@pytest.fixture(scope="module")
def golden_model():
    return parse_model(GOLDEN_MODEL)


def golden_terms():
    rows = read_golden("terms.tsv").splitlines()
    return [tuple(row.split("\t")) for row in rows]


class TestTermGrammar:
    @pytest.mark.parametrize("source,rendered", golden_terms())
    def test_render_matches_golden(self, golden_model, source, rendered):
        assert render_term(parse_term(source, golden_model)) == rendered

    @pytest.mark.parametrize("source,rendered", golden_terms())
    def test_render_parses_back(self, golden_model, source, rendered):
        t = parse_term(source, golden_model)
        assert parse_term(render_term(t), golden_model) == t

    def test_merge_keyword(self):
        assert render_term(Merge(atom("a"), atom("b"))) == "(a || b)"

    def test_par_keyword(self):
        assert render_term(Par(atom("a"), atom("b"))) == "(a ||| b)"

    def test_encapsulation(self):
        t = Encapsulate(frozenset({"sB", "rB"}), Merge(atom("R"), atom("S")))
        assert render_term(t) == "encap({rB,sB}, (R || S))"

    def test_precedence(self, golden_model):
        assert parse_term("a . b + c", golden_model) == parse_term("(a . b) + c", golden_model)
        assert parse_term("a ||| b . c", golden_model) == parse_term("a ||| (b . c)", golden_model)

    def test_pretty_uses_chosen_dot(self, golden_model):
        assert pretty(parse_term("(a + b) . c", golden_model), "·") == "(a+b)·c"

    def test_comments_are_skipped(self):
        kinds = [tok.kind for tok in tokenize("a // trailing comment\n")]
        assert "id" in kinds
        assert all("comment" not in k for k in kinds)


class TestModelErrors:
    def test_dangling_dot(self):
        with pytest.raises(DslSyntaxError) as info:
            parse_model("model x; act a; proc P = a .;")
        assert (info.value.line, info.value.col) == (1, 29)

    def test_undeclared_name(self):
        with pytest.raises(UndeclaredName):
            parse_model("model x; act a; proc P = b;")

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatch):
            parse_model("model x; domain D = {d}; act a(D); proc P = a;")

    def test_asymmetric_gamma(self):
        with pytest.raises(AsymmetricGamma):
            parse_model("model x; act a, b, c, d; comm a | b = c; comm b | a = d;")

    def test_hidden_and_encapsulated_overlap(self):
        with pytest.raises(ModelError):
            parse_model("model x; act a; set H = {a}; set I = {a};")

    def test_syntax_error_is_a_model_error(self):
        assert issubclass(DslSyntaxError, ModelError)


class TestBundledModels:
    @pytest.mark.parametrize("case_id", CASE_STUDY_IDS)
    def test_round_trip(self, case_id):
        m = load_model(MODELS / f"{case_id}.aptc")
        assert parse_model(render_model(m)) == m

    @pytest.mark.parametrize("case_id", CASE_STUDY_IDS)
    def test_parse_is_deterministic(self, case_id):
        text = (MODELS / f"{case_id}.aptc").read_text()
        assert render_model(parse_model(text)) == render_model(parse_model(text))

    def test_abp_render_golden(self):
        assert render_model(load_model(MODELS / "abp.aptc")) == read_golden("abp.rendered.aptc")

    def test_abp_communication_rules(self):
        m = load_model(MODELS / "abp.aptc")
        schemas = {(left.name, right.name) for left, right, _ in m.gamma_rules()}
        assert schemas == {("r_B", "s_B"), ("r_Berr", "s_Berr"), ("r_D", "s_D"), ("r_Derr", "s_Derr")}

    def test_abp_gamma_is_symmetric(self):
        m = load_model(MODELS / "abp.aptc")
        for (left, right), result in m.gamma.items():
            assert m.gamma_of(right, left) == result

    def test_abp_top_term(self):
        m = load_model(MODELS / "abp.aptc")
        assert render_term(m.system) == "hide(I, encap(H, (R(0) || S(0))))"

    def test_finite_sums_are_expanded(self, golden_model):
        assert render_term(parse_term("sum d:D . r(d)", golden_model)) == "(r(d1) + r(d2))"

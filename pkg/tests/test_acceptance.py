import os
import subprocess
import sys
import time

from aptc.casestudies import CASE_STUDY_IDS, run_mutation, verify_case_study
from aptc.dsl import parse_model, parse_term, pretty
from aptc.enumeration import enumerate_terms, enumeration_model, term_pairs
from aptc.equivalence import RBS, STEP, compare, compare_terms
from aptc.fuzz import soundness_fuzz
from aptc.pes import (
    build_pes, hhp_bisimilar, hp_bisimilar, initial_steps, pes_step_bisimilar, pomset_bisimilar,
    single_event_lts,
)
from aptc.rewriter import normalize_to_basic
from aptc.sos import Configuration, Engine, generate_lts
from aptc.terms import is_basic_term

from conftest import MODELS

MILLION = 10 ** 6
STRICT_TABLES = ("BATC", "APTC", "G", "SC", "PC")
RBS_ROWS = {"TAU.B1", "TAU.B2", "TAU.B3", *(f"TI.TI{i}" for i in range(1, 7)), "G.G26", "G.G27"}


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start


def test_abp_verifies(acceptance_report):
    results = {}
    for name in ("abp", "abp-shadow"):
        m = parse_model((MODELS / f"{name}.aptc").read_text())
        verdict, elapsed = timed(compare_terms, m, m.system, m.spec_term, RBS, bound=MILLION)
        results[name] = (verdict.related, elapsed)
    ok = all(related and elapsed < 10 for related, elapsed in results.values())
    acceptance_report(1, ok, ", ".join(f"{n} related={r} {t:.2f}s" for n, (r, t) in results.items()))
    assert ok, results


def test_case_studies_verify(acceptance_report):
    results = {}
    for case_id in ("mapreduce(2,1)", "gfs(2)", "cloud-rm(2)", "buyingbooks", "qos-wsoe"):
        verdict, elapsed = timed(verify_case_study, case_id, bound=MILLION)
        results[case_id] = (verdict.related, elapsed)
    ok = all(related and elapsed < 60 for related, elapsed in results.values())
    acceptance_report(2, ok, ", ".join(f"{n} related={r} {t:.2f}s" for n, (r, t) in results.items()))
    assert ok, results


def test_soundness_fuzz(acceptance_report):
    report, elapsed = timed(soundness_fuzz, seed=1, count=1000, size_bound=7)
    strict = [v for v in report.violations if v.axiom.split(".")[0] in STRICT_TABLES]
    weak = [v for v in report.violations if v.axiom in RBS_ROWS]
    ok = not strict and not weak and elapsed < 300
    acceptance_report(3, ok, f"{len(report.tables)} tables x 1000, strict violations={len(strict)}, "
                             f"rbs-row violations={len(weak)}, {elapsed:.1f}s")
    assert ok, [v.to_dict() for v in strict + weak]


def test_elimination(acceptance_report):
    m = enumeration_model()
    terms = enumerate_terms(6)
    start = time.perf_counter()
    failures = []
    for t in terms:
        normal, _ = normalize_to_basic(t, m)
        if not is_basic_term(normal) or not compare_terms(m, t, normal, STEP).related:
            failures.append(pretty(t, "."))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    acceptance_report(4, ok, f"{len(terms) - len(failures)}/{len(terms)} terms eliminated, {elapsed:.1f}s")
    assert ok, failures[:10]


def test_hierarchy(acceptance_report):
    m = enumeration_model()
    terms = enumerate_terms(6)
    lts = {t: generate_lts(m, t) for t in terms}
    pes = {t: build_pes(t, m) for t in terms}
    broken = []
    pairs = 0
    for left, right in term_pairs(terms):
        pairs += 1
        p, q = pes[left], pes[right]
        hhp, hp, pomset = hhp_bisimilar(p, q), hp_bisimilar(p, q), pomset_bisimilar(p, q)
        step = compare(lts[left], lts[right], STEP).related
        if (hhp and not hp) or (hp and not pomset) or (pomset and not step):
            broken.append((pretty(left, "."), pretty(right, "."), hhp, hp, pomset, step))

    def par(text):
        return build_pes(parse_term(text, m), m)

    separators = [
        not compare_terms(m, parse_term("a ||| b", m), parse_term("a.b + b.a", m), STEP).related,
        not pomset_bisimilar(par("a ||| b"), par("a.b")),
        not hp_bisimilar(par("a ||| b"), par("a.b")),
    ]
    ok = not broken and all(separators)
    acceptance_report(5, ok, f"{pairs} pairs, implication failures={len(broken)}, "
                             f"separators={sum(separators)}/{len(separators)}")
    assert ok, (broken[:10], separators)


def test_sos_matches_event_structure(acceptance_report):
    m = enumeration_model()
    engine = Engine(m)
    terms = enumerate_terms(6)
    mismatches = []
    for t in terms:
        pes = build_pes(t, m)
        steps, _ = engine.enabled_steps(Configuration(t, m.initial_state()))
        if {lab for lab, _ in steps} != initial_steps(pes):
            mismatches.append(("initial", pretty(t, ".")))
        if not compare(generate_lts(m, t), single_event_lts(pes), STEP).related:
            mismatches.append(("transitions", pretty(t, ".")))
    acceptance_report(6, not mismatches, f"{len(terms)} terms, mismatches={len(mismatches)}")
    assert not mismatches, mismatches[:10]


def test_mutations_flip(acceptance_report):
    results = {case_id: run_mutation(case_id) for case_id in CASE_STUDY_IDS}
    ok = all(not r.verdict.related and r.replayed for r in results.values())
    acceptance_report(7, ok, ", ".join(f"{n} related={r.verdict.related} replayed={r.replayed}"
                                       for n, r in results.items()))
    assert ok


def _cli(args, hash_seed):
    env = dict(os.environ, PYTHONHASHSEED=hash_seed)
    proc = subprocess.run([sys.executable, "-m", "aptc.cli", *args], capture_output=True, env=env, check=False)
    return proc.returncode, proc.stdout


def test_cli_determinism(acceptance_report):
    abp = str(MODELS / "abp.aptc")
    commands = [
        ["lts", abp],
        ["check", abp, "--left", "system", "--right", "spec", "--rel", "rbs", "--json"],
        ["verify", abp, "--json"],
        ["verify", str(MODELS / "abp-shadow.aptc"), "--json"],
    ]
    differing = []
    for args in commands:
        outputs = {_cli(args, "0"), _cli(args, "1"), _cli([*args, "--jobs", "4"], "2"),
                   _cli([*args, "--jobs", "4"], "3")}
        if len(outputs) != 1:
            differing.append(" ".join(args[:1]))
    acceptance_report(8, not differing, f"{len(commands)} commands x 4 runs, differing={differing}")
    assert not differing

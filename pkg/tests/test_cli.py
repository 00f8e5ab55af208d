import json
import os
import subprocess
import sys

import jsonschema
import pytest

from aptc.cli import EXIT_ANALYSIS, EXIT_OK, EXIT_UNRELATED, EXIT_USAGE, load_schema, main

from conftest import GOLDEN, MODELS, read_golden

ABP = str(MODELS / "abp.aptc")
F = str(GOLDEN / "f.aptc")


def run(*args, hash_seed="0", env=None):
    """Run the command line in a fresh interpreter."""
    environ = dict(os.environ, PYTHONHASHSEED=hash_seed, **(env or {}))
    proc = subprocess.run([sys.executable, "-m", "aptc.cli", *args], capture_output=True,
                          text=True, env=environ, check=False)
    return proc.returncode, proc.stdout, proc.stderr


@pytest.fixture
def tmp_model(tmp_path):
    def write(text, name="m.aptc"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


class TestExitCodes:
    def test_verify_related(self, capsys):
        assert main(["verify", ABP]) == EXIT_OK
        assert "related (rbs)" in capsys.readouterr().out

    def test_check_not_related(self):
        assert main(["check", F, "--left", "a|||b", "--right", "a.b+b.a", "--rel", "step"]) == EXIT_UNRELATED

    def test_unknown_command(self):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_unknown_flag(self):
        assert main(["verify", ABP, "--frobnicate"]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert main(["parse", str(tmp_path / "absent.aptc")]) == EXIT_USAGE

    def test_syntax_error(self, tmp_model):
        assert main(["parse", tmp_model("model x; act a; proc P = a .;")]) == EXIT_USAGE

    def test_undeclared_term(self):
        assert main(["check", F, "--left", "a", "--right", "zz"]) == EXIT_USAGE

    def test_state_bound(self):
        assert main(["verify", ABP, "--bound", "3"]) == EXIT_ANALYSIS

    def test_unguarded_recursion(self, tmp_model):
        path = tmp_model("model u; act a; proc X = X . a; system = X; spec = X;")
        assert main(["lts", path]) == EXIT_ANALYSIS

    def test_unsupported_event_structure(self):
        assert main(["pes", F, "--term", "encap({a}, a)"]) == EXIT_ANALYSIS

    def test_model_without_spec(self, tmp_model):
        assert main(["verify", tmp_model("model x; act a; system = a;")]) == EXIT_USAGE

    def test_unknown_fuzz_table(self):
        assert main(["fuzz", "--table", "NOPE", "--count", "1"]) == EXIT_USAGE

    def test_unknown_case_study(self):
        assert main(["examples", "nope"]) == EXIT_USAGE


class TestCommands:
    def test_parse_echoes_canonical_form(self, capsys):
        assert main(["parse", ABP]) == EXIT_OK
        assert capsys.readouterr().out == read_golden("abp.rendered.aptc")

    def test_normalize(self, capsys):
        assert main(["normalize", F, "--term", "(a+b).c"]) == EXIT_OK
        assert capsys.readouterr().out == "a.c+b.c\n"

    def test_normalize_trace(self, capsys):
        assert main(["normalize", F, "--term", "(a+b).c", "--trace"]) == EXIT_OK
        assert capsys.readouterr().out == "A4 @ root : (a+b)·c ⇒ a·c+b·c\na.c+b.c\n"

    def test_lts_to_file(self, tmp_path):
        out = tmp_path / "abp.aut"
        assert main(["lts", ABP, "--out", str(out)]) == EXIT_OK
        assert out.read_text() == read_golden("abp.aut")

    def test_lts_dot(self, capsys):
        assert main(["lts", F, "--term", "a.b", "--dot"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("digraph")

    def test_pes_dot(self, capsys):
        assert main(["pes", F, "--term", "a.b+c", "--dot"]) == EXIT_OK
        assert "style=dashed" in capsys.readouterr().out

    def test_pes_summary(self, capsys):
        assert main(["pes", F, "--term", "a.b"]) == EXIT_OK
        assert capsys.readouterr().out == "2 events, 3 configurations\n"

    @pytest.mark.parametrize("rel,code", [("step", 0), ("pomset", 1), ("hp", 1), ("hhp", 1)])
    def test_check_relations(self, rel, code):
        assert main(["check", F, "--left", "a|||b", "--right", "b|||a", "--rel", rel]) == EXIT_OK
        assert main(["check", F, "--left", "a|||b", "--right", "a.b", "--rel", rel]) == EXIT_UNRELATED

    def test_examples_listing(self, capsys):
        assert main(["examples"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 7 and lines[0].startswith("abp ")

    def test_examples_run_one(self, capsys):
        assert main(["examples", "gfs(3)", "--run", "--mutations"]) == EXIT_OK


class TestJson:
    def test_verdict_schema(self, capsys):
        main(["verify", ABP, "--json"])
        jsonschema.validate(json.loads(capsys.readouterr().out), load_schema("verdict"))

    @pytest.mark.parametrize("rel", ["step", "rbs", "pomset", "hp", "hhp"])
    def test_failure_witness_schema(self, capsys, rel):
        main(["check", F, "--left", "a.b", "--right", "a.c", "--rel", rel, "--json"])
        jsonschema.validate(json.loads(capsys.readouterr().out), load_schema("verdict"))

    def test_unmatched_step_schema(self, capsys):
        main(["check", F, "--left", "tau.a", "--right", "a", "--rel", "rbs", "--json"])
        data = json.loads(capsys.readouterr().out)
        assert data["witness"]["kind"] == "unmatched-step"
        jsonschema.validate(data, load_schema("verdict"))

    def test_fuzz_schema(self, capsys):
        main(["fuzz", "--count", "5", "--json"])
        jsonschema.validate(json.loads(capsys.readouterr().out), load_schema("fuzz"))

    def test_examples_schema(self, capsys):
        main(["examples", "abp", "--run", "--mutations", "--json"])
        jsonschema.validate(json.loads(capsys.readouterr().out), load_schema("examples"))

    def test_verify_golden(self, capsys):
        main(["verify", ABP, "--json"])
        assert capsys.readouterr().out == read_golden("abp.verify.json")

    def test_check_golden(self, capsys):
        main(["check", F, "--left", "a|||b", "--right", "a.b+b.a", "--rel", "step", "--json"])
        assert capsys.readouterr().out == read_golden("check_par_vs_interleave.json")


class TestProcesses:
    def test_color_disabled(self):
        code, out, _ = run("examples", env={"APTC_COLOR": "0"})
        assert code == 0 and "\x1b[" not in out

    @pytest.mark.parametrize("args", [
        ("lts", ABP),
        ("verify", ABP, "--json"),
        ("check", ABP, "--left", "system", "--right", "spec", "--rel", "rbs", "--json"),
    ])
    def test_byte_identical_across_processes(self, args):
        outputs = {run(*args, hash_seed=seed)[1] for seed in ("0", "1", "12345")}
        outputs.add(run(*args, "--jobs", "4", hash_seed="7")[1])
        assert len(outputs) == 1

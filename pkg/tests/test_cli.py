"""Command-line interface: exit codes, report formats, determinism."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

SALE = (
    "seller -> buyer : descr ;\n"
    "seller -> buyer : price ;\n"
    "(buyer -> seller : accept | buyer -> seller : quit)\n"
)
UNORDERED = "p -> q : a ; r -> s : b\n"
NEVER_ENDS = "p : rec X . q!a.X\nq : rec Y . p?a.Y\n"
LOOP_UNTIL_DONE = "p : rec X . (q!a.X (+) q!b.end)\nq : rec Y . (p?a.Y + p?b.end)\n"


def run(*args: str):
    return subprocess.run(
        [sys.executable, "-m", "mpst.cli", *args],
        capture_output=True,
        text=True,
    )


@pytest.fixture()
def sale(tmp_path):
    path = tmp_path / "sale.gt"
    path.write_text(SALE)
    return str(path)


def test_check_passes_on_well_formed_input(sale):
    result = run("check", sale)
    assert result.returncode == 0
    assert result.stdout.strip() == "WellFormed"


def test_check_reports_witness_on_hidden_ordering(tmp_path):
    path = tmp_path / "g.gt"
    path.write_text(UNORDERED)
    result = run("check", str(path))
    assert result.returncode == 1
    assert "NotWellFormed" in result.stdout
    assert "p -> q : a ; r -> s : b" in result.stdout
    assert "position: 0" in result.stdout


def test_parse_errors_exit_with_usage_code(tmp_path):
    path = tmp_path / "broken.gt"
    path.write_text("p -> q :\n")
    result = run("check", str(path))
    assert result.returncode == 2
    assert "error:" in result.stderr


def test_missing_file_exits_with_usage_code(tmp_path):
    result = run("check", str(tmp_path / "absent.gt"))
    assert result.returncode == 2


def test_project_prints_the_environment(sale):
    result = run("project", sale)
    assert result.returncode == 0
    assert "seller : buyer!descr.buyer!price.(buyer?accept.end + buyer?quit.end)" in result.stdout


def test_project_reports_failures(tmp_path):
    path = tmp_path / "g.gt"
    path.write_text("{p,q} -> r : a | {p,q} -> r : b\n")
    result = run("project", str(path))
    assert result.returncode == 1
    assert "NoDecisionMaker" in result.stdout


def test_simulate_flags_non_live_sessions(tmp_path):
    path = tmp_path / "env.mps"
    path.write_text(NEVER_ENDS)
    result = run("simulate", str(path))
    assert result.returncode == 1
    assert "NotLive" in result.stdout


def test_simulate_accepts_live_sessions(tmp_path):
    path = tmp_path / "env.mps"
    path.write_text(LOOP_UNTIL_DONE)
    result = run("simulate", str(path), "--max-len", "4")
    assert result.returncode == 0
    assert result.stdout.splitlines()[0] == "Live"


def test_verify_projects_when_no_environment_is_given(sale):
    result = run("verify", sale)
    assert result.returncode == 0
    assert "sound: yes" in result.stdout
    assert "complete: yes" in result.stdout


def test_verify_rejects_an_incomplete_environment(sale, tmp_path):
    env = tmp_path / "env.mps"
    env.write_text(
        "seller : buyer!descr.buyer!price.buyer?accept.end\n"
        "buyer : seller?descr.seller?price.seller!accept.end\n"
    )
    result = run("verify", sale, str(env))
    assert result.returncode == 1
    assert "complete: no" in result.stdout


def test_classify_prints_the_category(tmp_path):
    path = tmp_path / "g.gt"
    path.write_text("p -> q : a | q -> p : a\n")
    result = run("classify", str(path))
    assert result.returncode == 1
    assert result.stdout.splitlines()[0] == "NoKnowledgeNoChoice"


def test_classify_passes_projectable_protocols(sale):
    result = run("classify", sale)
    assert result.returncode == 0
    assert result.stdout.splitlines()[0] == "Projectable"


def test_trace_enumerates_the_bounded_language(sale):
    result = run("trace", sale, "--max-len", "3")
    assert result.returncode == 0
    lines = result.stdout.splitlines()
    assert lines[0] == "2 trace(s) up to length 3"
    assert any("buyer -> seller : accept" in line for line in lines)


def test_trace_writes_dot_dumps(sale, tmp_path):
    dot = tmp_path / "auto.dot"
    result = run("trace", sale, "--dot", str(dot))
    assert result.returncode == 0
    text = dot.read_text()
    assert text.startswith("digraph") and "->" in text


def test_json_reports_are_byte_identical_across_runs(sale):
    first = run("verify", sale, "--json")
    second = run("verify", sale, "--json")
    assert first.returncode == second.returncode == 0
    assert first.stdout == second.stdout
    payload = json.loads(first.stdout)
    assert payload["schema"] == 1
    assert payload["sound"] and payload["complete"]


def test_json_check_reports_carry_the_witness(tmp_path):
    path = tmp_path / "g.gt"
    path.write_text(UNORDERED)
    result = run("check", str(path), "--json")
    assert result.returncode == 1
    payload = json.loads(result.stdout)
    assert payload["schema"] == 1
    assert payload["well_formed"] is False
    assert payload["witness"] == ["p -> q : a", "r -> s : b"]
    assert payload["position"] == 0


def test_crosscheck_runs_a_seeded_batch():
    first = run("crosscheck", "--samples", "15", "--seed", "3", "--json")
    second = run("crosscheck", "--samples", "15", "--seed", "3", "--json")
    assert first.returncode == 0
    assert first.stdout == second.stdout
    payload = json.loads(first.stdout)
    assert payload["violations"] == []


def test_rejected_bounds_exit_with_usage_code(sale):
    result = run("trace", sale, "--max-len", "0")
    assert result.returncode == 2


def test_dash_reads_the_protocol_from_stdin():
    result = subprocess.run(
        [sys.executable, "-m", "mpst.cli", "trace", "-", "--max-len", "2"],
        input="p -> q : a\n",
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "1 trace(s) up to length 2" in result.stdout


def test_simulate_announces_truncated_trace_listings(tmp_path):
    path = tmp_path / "loop.mps"
    path.write_text(LOOP_UNTIL_DONE)
    result = run("simulate", str(path), "--traces", "2")
    assert result.returncode == 0
    assert "(10 more; raise --traces to list them)" in result.stdout

import csv
import io
import os
import subprocess
import sys
from xml.etree import ElementTree

import pytest

from mrrefine import cli


def _run(*args, env=None):
    e = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "mrrefine.cli", *args], capture_output=True, text=True, env=e)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "sol.json"
    assert cli.run(["solve", "one_slot", "one_slot", "--seed", "2", "--out", str(out)]) == cli.EXIT_OK
    return out


def test_solve_then_validate(solved, capsys):
    assert cli.run(["validate", "one_slot", "one_slot", str(solved)]) == cli.EXIT_OK
    assert capsys.readouterr().out.strip().endswith("ok")


def test_solve_is_reproducible(solved, tmp_path):
    again = tmp_path / "again.json"
    assert cli.run(["solve", "one_slot", "one_slot", "--seed", "2", "--out", str(again)]) == 0
    assert again.read_bytes() == solved.read_bytes()


def test_bad_inputs_exit_1(tmp_path):
    assert cli.run(["solve", "nope.scn", "one_slot"]) == cli.EXIT_INPUT
    bad = tmp_path / "bad.scn"
    bad.write_text("{not json")
    assert cli.run(["solve", str(bad), "one_slot"]) == cli.EXIT_INPUT
    assert cli.run(["solve", "one_slot", "one_slot", "--n-place", "0"]) == cli.EXIT_INPUT
    assert cli.run(["frobnicate"]) == cli.EXIT_INPUT


def test_invalid_solution_exits_1(solved, tmp_path):
    text = solved.read_text().replace('"f1"', '"f9"', 1)
    broken = tmp_path / "broken.json"
    broken.write_text(text)
    assert cli.run(["validate", "one_slot", "one_slot", str(broken)]) == cli.EXIT_INPUT


def test_planner_timeout_exits_2(tmp_path):
    assert cli.run(["solve", "shelf3", "shelf3", "--time-limit-s", "0.001", "--out", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()


def test_internal_error_exits_3(monkeypatch):
    def boom(ns):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli._COMMANDS, "solve", boom)
    assert cli.run(["solve", "one_slot", "one_slot"]) == cli.EXIT_INTERNAL


def test_bench_rows_and_order(tmp_path):
    out = tmp_path / "bench.csv"
    assert cli.run(["bench", "one_slot", "one_slot", "--seeds", "25", "--jobs", "4", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 100
    assert list(rows[0]) == list(cli.CSV_COLUMNS)
    order = [(int(r["seed"]), cli.MODES.index(r["mode"])) for r in rows]
    assert order == sorted(order)
    assert all(r["outcome"] in ("Solution", "Infeasible", "Timeout") for r in rows)


def test_render_writes_svg(solved, tmp_path):
    out = tmp_path / "a.svg"
    assert cli.run(["render", "one_slot", "one_slot", str(solved), "--out", str(out)]) == 0
    root = ElementTree.fromstring(out.read_bytes())
    assert root.tag.endswith("svg") and root.get("version") == "1.1"


def test_log_levels_control_stderr():
    quiet = _run("solve", "one_slot", "one_slot", "--out", os.devnull, env={"MRREFINE_LOG": "off"})
    loud = _run("solve", "one_slot", "one_slot", "--out", os.devnull, env={"MRREFINE_LOG": "debug"})
    assert quiet.returncode == loud.returncode == 0
    assert quiet.stderr == ""
    assert "mrrefine" in loud.stderr

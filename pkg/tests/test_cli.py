import json
import subprocess
import sys

import pytest

from test_construction import flip_breaking_window
from zdshift.cli import dispatch
from zdshift.construction import dumps_stage, read_stage, with_patterns, write_stage
from zdshift.reference import SEED


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    s1, s2 = d / "stage1.json", d / "stage2.json"
    assert dispatch(["init", "--d", "1", "--out", str(s1)]) == 0
    argv = ["build", str(s1), "--l", "8", "--m", "2", "--dk", "1/2", "--target", "40", "--seed", str(SEED),
            "--out", str(s2)]
    assert dispatch(argv) == 0
    return d, s1, s2


def run_json(argv, capsys):
    code = dispatch(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_verify_reference_pair(built, capsys):
    _, s1, s2 = built
    code, rep = run_json(["verify", str(s1), str(s2)], capsys)
    assert code == 0 and rep["pass"] and rep["format"] == 1
    assert all(rep["conditions"].values())


def test_verify_tampered_file(built, capsys, tmp_path):
    _, s1, s2 = built
    stage = read_stage(s2)
    j, i = flip_breaking_window(stage)
    arr = stage.array().copy()
    arr[j, i] ^= 1
    bad = tmp_path / "bad.json"
    write_stage(with_patterns(stage, arr), bad)
    code, rep = run_json(["verify", str(s1), str(bad)], capsys)
    assert code == 1 and not rep["pass"]
    assert rep["counterexamples"][0]["condition"] == "vi"


def test_unknown_flag(built, capsys):
    _, s1, s2 = built
    assert dispatch(["verify", str(s1), str(s2), "--bogus"]) == 2
    assert dispatch(["frobnicate"]) == 2


def test_bad_inputs_exit_2(built, capsys, tmp_path):
    _, s1, s2 = built
    assert dispatch(["verify", str(s2), str(s2)]) == 2
    assert dispatch(["verify", str(tmp_path / "missing.json"), str(s2)]) == 2
    junk = tmp_path / "junk.json"
    junk.write_text('{"format": 7}')
    assert dispatch(["verify", str(s1), str(junk)]) == 2
    assert dispatch(["entropy", str(s2)]) == 2  # chain must start at stage 1


def test_build_round_trip(built, tmp_path):
    _, s1, s2 = built
    again = tmp_path / "again.json"
    write_stage(read_stage(s2), again)
    assert again.read_bytes() == s2.read_bytes()
    assert dumps_stage(read_stage(again)) == s2.read_text()


def test_build_unsatisfiable_exits_1(built, tmp_path, capsys):
    _, _, s2 = built
    out = tmp_path / "s3.json"
    code, rep = run_json(["build", str(s2), "--l", "6", "--m", "6", "--dk", "3/10", "--target", "60",
                          "--seed", str(SEED), "--out", str(out)], capsys)
    assert code == 1 and rep["built"] is False and not out.exists()


def test_entropy_and_alphabeta(built, capsys):
    _, s1, s2 = built
    code, led = run_json(["entropy", str(s1), str(s2)], capsys)
    assert code == 0 and led["entries"][1]["count"] == 40
    assert led["schedule"][0]["vii"] is True
    code, gaps = run_json(["alphabeta", str(s1), str(s2), "--pattern", "1"], capsys)
    assert code == 0 and len(gaps["entries"]) == 2


def test_lln(capsys):
    code, obj = run_json(["lln", "--n", "20", "--eps", "1/10"], capsys)
    assert code == 0 and obj["fraction"] == "130169/262144"
    code, obj = run_json(["lln", "--n", "20", "--eps", "1/10", "--mode", "montecarlo", "--trials", "500"], capsys)
    assert code == 0 and obj["trials"] == 500


def test_density(tmp_path, capsys):
    pts = tmp_path / "pts.txt"
    pts.write_text("".join(f"{x}\n" for x in range(0, 100, 2)))
    code, obj = run_json(["density", "--points", str(pts), "--window", "100", "--min-side", "2"], capsys)
    assert code == 0 and obj["estimate"] == "1/2"


def test_embed(built, tmp_path, capsys):
    _, s1, s2 = built
    asg = tmp_path / "a.txt"
    asg.write_text("0 1\n1 1\n4 0\n9 1\n16 1\n")
    code = dispatch(["embed", str(s1), str(s2), "--assignment", str(asg), "--g0", "0"])
    text = capsys.readouterr().out
    assert code == 0
    body = "".join(text.splitlines()[1:])
    assert [body[i] for i in (0, 1, 4, 9, 16)] == ["1", "1", "0", "1", "1"]
    asg.write_text("1 1\n")
    assert dispatch(["embed", str(s1), str(s2), "--assignment", str(asg), "--g0", "0"]) == 2


@pytest.fixture(scope="module")
def wide_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("wide")
    assert dispatch(["preset", "reference-1d-wide", "--out", str(d)]) == 0
    return d


def test_preset_literal_schedule_fails(tmp_path):
    assert dispatch(["preset", "reference-1d", "--out", str(tmp_path)]) == 1
    assert (tmp_path / "stage2.json").exists() and not (tmp_path / "stage3.json").exists()


def test_demo_commands(wide_dir, capsys):
    files = [str(wide_dir / f"stage{k}.json") for k in (1, 2, 3)]
    code, rep = run_json(["demo-averages", *files, "--radius", "8"], capsys)
    assert code == 0 and rep["verified"] and rep["preserved_radius"] == 8
    code, rep = run_json(["demo-escape", *files, "--window", "2001", "--flip", "2"], capsys)
    assert code == 0 and rep["verified"] and rep["distinct_witness"] == [[2]]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "zdshift.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "demo-escape" in out.stdout

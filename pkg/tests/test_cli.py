import json
import shutil
import subprocess

import pytest

from ispace.cli import main
from ispace.io import bundled_model_path, parse_model_file, read_trajectory

ODE = str(bundled_model_path("ode_decay"))
LIFE = str(bundled_model_path("life_blinker"))


def test_validate(capsys):
    assert main(["validate", ODE]) == 0
    assert capsys.readouterr().out.startswith("ok: 1 entities, 1 interactions")


def test_missing_file_exits_one(capsys, tmp_path):
    missing = tmp_path / "nope.json"
    assert main(["validate", str(missing)]) == 1
    err = capsys.readouterr().err
    assert "error[missing-file]" in err and str(missing) in err


def test_invalid_model_exits_one(capsys, tmp_path):
    doc = json.loads(bundled_model_path("ode_decay").read_text())
    doc["model"]["initial_states"]["p"]["activation"]["i"] = 1.5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc, indent=2))
    assert main(["run", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "error[activation-out-of-range]" in err and "initial_states.p.activation.i" in err


def test_run_to_stdout_and_file(capsys, tmp_path):
    assert main(["run", ODE, "--horizon", "0.01"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert json.loads(lines[-1])["time"] == pytest.approx(0.01)
    out = tmp_path / "traj.csv"
    assert main(["run", LIFE, "--format", "csv", "--out", str(out)]) == 0
    assert len(read_trajectory(out, "csv")) == 100 * 21


def test_run_is_repeatable(tmp_path):
    for k in range(2):
        assert main(["run", LIFE, "--seed", "9", "--out", str(tmp_path / f"{k}.jsonl"),
                     "--trace", str(tmp_path / f"{k}.dot")]) == 0
    assert (tmp_path / "0.jsonl").read_bytes() == (tmp_path / "1.jsonl").read_bytes()
    assert (tmp_path / "0.dot").read_bytes() == (tmp_path / "1.dot").read_bytes()


def test_seed_fan_out_names_files(tmp_path):
    assert main(["run", ODE, "--seeds", "1..3", "--out", str(tmp_path / "t.jsonl")]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["t.seed1.jsonl", "t.seed2.jsonl", "t.seed3.jsonl"]
    assert main(["run", ODE, "--seeds", "1..2"]) == 1


def test_trace_command(capsys, tmp_path):
    assert main(["trace", ODE]) == 0
    row = json.loads(capsys.readouterr().out.splitlines()[0])
    assert row["interaction"] == "i" and row["patients"] == ["p"]
    assert main(["trace", ODE, "--dot", str(tmp_path / "g.dot"), "--jsonl", str(tmp_path / "g.jsonl")]) == 0
    assert (tmp_path / "g.dot").read_text().startswith("digraph")


@pytest.mark.parametrize("args", [
    ["ode", "--matrix", "[[0, 1], [-1, 0]]", "--x0", "[1, 0]", "--span", "0", "2", "--h", "0.01"],
    ["map", "--logistic", "3.7", "--steps", "20"],
    ["map", "--matrix", "[[2]]", "--x0", "[1]", "--steps", "3"],
    ["ca", "--rows", "8", "--cols", "8", "--pattern", "glider", "--generations", "8"],
    ["ca", "--grid", "[[0, 1, 0], [0, 1, 0], [0, 1, 0]]", "--rule", "B36/S23", "--no-torus"],
    ["network", "--nodes", "6", "--graph", "ring", "--steps", "5", "--remove-edge", "0", "1", "2"],
    ["network", "--nodes", "4", "--graph", "complete", "--async-rate", "2"],
])
def test_embed_then_run(args, tmp_path):
    model_file = tmp_path / "m.json"
    assert main(["embed", *args, "--emit", str(model_file)]) == 0
    parse_model_file(model_file)
    assert main(["run", str(model_file), "--out", str(tmp_path / "t.jsonl")]) == 0
    assert (tmp_path / "t.jsonl").stat().st_size > 0


def test_embedded_map_reaches_the_orbit(tmp_path):
    model_file = tmp_path / "m.json"
    main(["embed", "map", "--matrix", "[[2]]", "--x0", "[1]", "--steps", "3", "--emit", str(model_file)])
    main(["run", str(model_file), "--out", str(tmp_path / "t.jsonl")])
    assert read_trajectory(tmp_path / "t.jsonl")[-1].proper == [8.0]


def test_bad_json_argument():
    with pytest.raises(SystemExit):
        main(["embed", "ode", "--matrix", "[[1,", "--emit", "x.json"])


def test_console_script_is_installed():
    exe = shutil.which("ispace")
    if exe is None:
        pytest.skip("console script not on PATH")
    r = subprocess.run([exe, "validate", ODE], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("ok")

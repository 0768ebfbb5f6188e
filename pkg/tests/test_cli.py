import csv
import io
import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from fatbots.cli import main
from fatbots.render import frame_svg
from fatbots.sim import read_trace
from fatbots.stats import COLUMNS, sweep, trial_seed

GOLDEN = Path(__file__).resolve().parent.parent / "scenarios" / "golden_5r3p.json"


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])


def test_golden_run_and_audit(tmp_path, capsys):
    trace = tmp_path / "golden.jsonl"
    assert main(["run", str(GOLDEN), "--trace", str(trace)]) == 0
    assert last_json(capsys.readouterr().out)["status"] == "PatternFormed"
    assert json.loads(trace.read_text().splitlines()[-1])["status"] == "PatternFormed"
    assert main(["audit", str(trace)]) == 0
    assert "offending_round=none" in capsys.readouterr().out


def test_golden_is_stable(capsys):
    main(["run", str(GOLDEN)])
    out = last_json(capsys.readouterr().out)
    assert (out["total_rounds"], out["leader"], out["placed"]) == (65, 3, [0, 4, 2])


def test_gen_collinear_piped_to_run():
    gen = subprocess.run(
        [sys.executable, "-m", "fatbots.cli", "gen", "--kind", "collinear", "--n", "6", "--seed", "2"],
        capture_output=True, text=True, check=True,
    )
    res = subprocess.run([sys.executable, "-m", "fatbots.cli", "run", "-"], input=gen.stdout,
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert last_json(res.stdout)["status"] == "PatternFormed"


def test_run_and_audit_agree_on_planted_collision(tmp_path, capsys):
    trace = tmp_path / "bad.jsonl"
    lines = [
        {"kind": "header", "trace_version": 1, "n": 2},
        {"kind": "round", "round": 0, "before": [[0, 0], [3, 0]], "after": [[3, 0], [0, 0]],
         "phases": [0, 0], "events": [], "min_motion_distance": 0.0},
    ]
    trace.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    assert main(["audit", str(trace)]) == 4
    assert "offending_round=0" in capsys.readouterr().out


def test_infeasible_exit(tmp_path, capsys):
    doc = {"robots": [{"x": 0, "y": 0}, {"x": 3, "y": 0}], "pattern": [[0, 0], [2, 0], [4, 0]], "seed": 1}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    assert main(["run", str(path)]) == 2


def test_round_limit_exit(tmp_path):
    doc = {"robots": [{"x": 0, "y": 0}, {"x": 3, "y": 0}, {"x": 1, "y": 3}],
           "pattern": [[0, 0]], "seed": 1, "params": {"round_limit": 3}}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    assert main(["run", str(path)]) == 3


def test_validate(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"robots": [{"x": 0, "y": 0}], "pattern": [[0, 0]]}))
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"robots": [{"x": 0, "y": 0}, {"x": 0.9, "y": 0}], "pattern": [[0, 0], [0, 0]]}))
    assert main(["validate", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "overlap" in out and "pattern duplicate" in out


@pytest.mark.parametrize(
    "argv",
    [["run"], ["frobnicate"], ["run", "/nonexistent/s.json"], ["stats", "--n", "x", "--csv", "o.csv"],
     ["render", "t.jsonl"], ["gen", "--n", "0"]],
)
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as e:
        sys.exit(main(argv))
    assert e.value.code == 64


def test_malformed_json(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{not json")
    assert main(["run", str(path)]) == 65
    assert main(["validate", str(path)]) == 65
    trace = tmp_path / "t.jsonl"
    trace.write_text("{broken\n")
    assert main(["audit", str(trace)]) == 65


def test_render(tmp_path, capsys):
    trace = tmp_path / "g.jsonl"
    main(["run", str(GOLDEN), "--trace", str(trace)])
    out = tmp_path / "frames"
    assert main(["render", str(trace), "--out", str(out), "--every", "10"]) == 0
    files = sorted(out.glob("*.svg"))
    rounds = len(read_trace(trace).rounds)
    assert len(files) == len(range(0, rounds, 10)) + 1
    root = ET.parse(files[-1]).getroot()
    circles = root.findall(".//{http://www.w3.org/2000/svg}circle")
    assert len(circles) == 5
    assert sum(c.get("stroke") == "#d62728" for c in circles) == 1


def test_frame_svg_is_xml():
    svg = frame_svg([(0, 0), (3, 0), (1, 2)], [0, 1, 2], 1, "round 4")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")


def test_stats_csv(tmp_path):
    path = tmp_path / "s.csv"
    assert main(["stats", "--n", "3,4", "--trials", "2", "--seed", "1", "--csv", str(path)]) == 0
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert tuple(rows[0].keys()) == COLUMNS
    assert [int(r["n"]) for r in rows] == [3, 3, 4, 4]
    assert all(r["outcome"] == "PatternFormed" for r in rows)


def test_sweep_seeds_are_independent_of_order():
    rows = sweep([3], 2, 9)
    assert [r.seed for r in rows] == [trial_seed(9, 3, 0), trial_seed(9, 3, 1)]
    assert rows[0].seed != rows[1].seed


def test_gen_writes_file(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gen", "--n", "5", "--kind", "convex", "--seed", "3", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["robots"]) == 5 and len(doc["pattern"]) == 5
    assert main(["validate", str(out)]) == 0

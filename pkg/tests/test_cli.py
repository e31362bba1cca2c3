import json
import subprocess
import sys

import pytest

from faultsync.cli import main
from faultsync.scenario import fixture_names

from .conftest import brute_force_bicomponents

CHAIN = {
    "id": "chain",
    "graph": {"nodes": 3, "edges": [[1, 2, 1.0], [2, 3, 1.0]]},
    "agent": {"A": [[0]], "B": [[1]], "C": [[1]]},
    "protocol": {"Gc": [[-1]]},
    "sim": {"T": 20, "h": 0.01, "seed": 3},
}


def write(tmp_path, obj, name="sc.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_analyze_chain(tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", write(tmp_path, CHAIN), "--out", str(out), "--format", "csv"]) == 0
    res = json.loads((out / "chain" / "analysis.json").read_text())
    assert res["k"] == 1 and res["has_spanning_tree"]
    assert res["beta"]["beta"][0] == pytest.approx([1.0]) and res["beta"]["beta"][1] == pytest.approx([1.0])
    assert (out / "chain" / "condensation.dot").read_text().startswith("digraph")
    assert (out / "chain" / "beta.csv").read_text().splitlines()[0] == "node,B1"


def test_fault_oscillator_gives_three_bicomponents(tmp_path):
    out = tmp_path / "out"
    assert main(["fault", "fixture:oscillator12", "--out", str(out)]) == 0
    rep = json.loads((out / "oscillator12" / "report.json").read_text())
    assert rep["k"] == 3 and rep["passed"]
    # cross-check the written graph against the reachability oracle
    from faultsync.graph import graph_from_dict

    g = graph_from_dict(json.loads((out / "oscillator12" / "graph.json").read_text()))
    assert sum(basic for _, basic in brute_force_bicomponents(g)) == 3


def test_fault_extra_edge(tmp_path):
    out = tmp_path / "out"
    assert main(["fault", "fixture:chain3", "--remove", "1:2", "--no-certify", "--out", str(out)]) == 0
    rep = json.loads((out / "chain3" / "report.json").read_text())
    assert rep["k"] == 2
    assert main(["fault", "fixture:chain3", "--remove", "3:1", "--out", str(out)]) == 1


def test_verify_three_node(tmp_path):
    out = tmp_path / "out"
    assert main(["verify", "fixture:three_node_fault", "--out", str(out)]) == 0
    rep = json.loads((out / "three_node_fault" / "report.json").read_text())
    assert rep["max_beta_deviation"] < 1e-3
    assert rep["predicted_beta"]["beta"][0] == pytest.approx([0.25, 0.75])


def test_verify_tolerance_controls_exit(tmp_path):
    assert main(["verify", "fixture:three_node_fault", "--tolerance", "1e-30", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("name", fixture_names())
def test_every_fixture_certifies(name, tmp_path):
    assert main(["certify", f"fixture:{name}", "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / json.loads(_fixture_text(name))["id"] / "certification.json").read_text())
    assert cert["passed"] and cert["grid"]["passed"]


def _fixture_text(name):
    from importlib.resources import files

    return (files("faultsync.fixtures") / f"{name}.json").read_text()


def test_uncertified_exits_two(tmp_path):
    bad = dict(CHAIN, protocol={"Gc": [[1]]})
    assert main(["certify", write(tmp_path, bad), "--out", str(tmp_path)]) == 2
    assert main(["verify", write(tmp_path, bad), "--out", str(tmp_path)]) == 2


def test_simulate_formats(tmp_path):
    assert main(["simulate", write(tmp_path, CHAIN), "--out", str(tmp_path), "--every", "100"]) == 0
    lines = (tmp_path / "chain" / "timeseries.csv").read_text().splitlines()
    assert lines[0] == "t,node,component,value"
    assert len(lines) == 1 + 21 * 3
    assert main(["simulate", write(tmp_path, CHAIN), "--out", str(tmp_path), "--format", "json"]) == 0
    data = json.loads((tmp_path / "chain" / "timeseries.json").read_text())
    assert len(data["times"]) == 2001


def test_byte_identical_outputs(tmp_path):
    for run in ("a", "b"):
        assert main(["verify", "fixture:discrete8", "--seed", "9", "--format", "csv", "--out", str(tmp_path / run)]) == 0
    for f in ("report.json", "timeseries.csv"):
        assert (tmp_path / "a" / "discrete8" / f).read_bytes() == (tmp_path / "b" / "discrete8" / f).read_bytes()


@pytest.mark.parametrize(
    "text",
    ["{not json", "[]", json.dumps(dict(CHAIN, agent={"A": [[0]]})), json.dumps(dict(CHAIN, graph={"nodes": 2, "edges": [[1, 1, 1]]}))],
)
def test_malformed_input_exits_one(text, tmp_path, capsys):
    assert main(["analyze", write(tmp_path, text), "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_file_and_fixture(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1
    assert main(["analyze", "fixture:nope", "--out", str(tmp_path)]) == 1


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["--list-fixtures"]) == 0
    assert "oscillator12" in capsys.readouterr().out


def test_console_script_entry(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "faultsync.cli", "analyze", "fixture:chain3", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "k=1" in proc.stdout

import json

import pytest

from mfcube.cli import main


@pytest.fixture(scope="module")
def fx(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    with pytest.raises(SystemExit) as info:
        main(["fixture", "--all", "--out", str(out)])
    assert info.value.code == 0
    return out


def run(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main([str(a) for a in argv])
    captured = capsys.readouterr()
    return info.value.code, captured.out, captured.err


def run_json(argv, capsys):
    code, out, err = run(argv, capsys)
    return code, json.loads(out) if out.strip() else None


def test_fixture_files_written(fx):
    names = {p.name for p in fx.iterdir()}
    assert {"grid22.json", "torus.json", "klein.json", "tori_gog.json", "wise_gog.json"} <= names


def test_validate(fx, capsys):
    code, rep = run_json(["validate", fx / "grid22.json"], capsys)
    assert code == 0
    assert rep["command"][0] == "validate"
    assert set(rep) == {"command", "inputs", "config", "results", "caveats"}
    assert len(rep["inputs"]["grid22.json"]) == 64


def test_distance_and_hull(fx, capsys):
    code, rep = run_json(["distance", fx / "grid22.json", "--from", "[0,0]", "--to", "[2,2]"], capsys)
    assert code == 0 and rep["results"]["distance"] == 4
    code, rep = run_json(["hull", fx / "grid22.json", "-s", "[0,0]", "-s", "[1,1]"], capsys)
    assert code == 0 and len(rep["results"]["hull"]) == 4


def test_special_exit_codes(fx, capsys):
    assert run(["special", fx / "torus.json"], capsys)[0] == 0
    code, rep = run_json(["special", fx / "klein.json"], capsys)
    assert code == 2 and rep["results"]["violations"]


def test_gate_and_bridge(fx, capsys):
    code, rep = run_json(["gate", fx / "grid22.json", "-x", "[2,2]", "-s", "[0,0]", "-s", "[0,1]"], capsys)
    assert code == 0
    code, rep = run_json(["bridge", fx / "grid22.json", "-a", "[0,0]", "-b", "[2,2]"], capsys)
    assert code == 0 and rep["results"]["gap"] == 4


def test_quasiline_commands(fx, capsys):
    code, rep = run_json(["ql", "classify", fx / "line.json", "--word", "a"], capsys)
    assert code == 0 and rep["results"]["counts"]["essential"] > 0
    code, rep = run_json(["ql", "constants", fx / "line.json", "--word", "a"], capsys)
    assert code == 0 and rep["results"]["B0"] == 120


def test_cyclonormal_exit_codes(fx, capsys):
    assert run(["gog", "cyclonormal", fx / "tori_gog.json"], capsys)[0] == 0
    code, rep = run_json(["gog", "cyclonormal", fx / "index2_gog.json"], capsys)
    assert code == 2 and rep["results"]["verdict"] == "fail"


def test_gog_directory_input(fx, capsys):
    code, rep = run_json(["gog", "validate", fx / "tori_gog"], capsys)
    assert code == 0
    assert "tori_gog.vertex.v1.json" in rep["inputs"]


def test_reports_are_byte_identical(fx, capsys):
    argv = ["gog", "stature", fx / "tori_gog.json", "--Lmax", "2"]
    a = run(argv, capsys)
    b = run(argv, capsys)
    assert a == b and a[1].endswith("\n") and "\r" not in a[1]


def test_text_format_and_trace(fx, capsys):
    code, out, _ = run(["bs", "stab", fx / "tori_gog.json", "--path", "0", "--format", "text", "--trace"], capsys)
    assert code == 0
    assert out.startswith("command: bs stab")
    assert any(line.startswith("trace: bass_serre: path") for line in out.splitlines())


@pytest.mark.parametrize("argv", [["validate", "missing.json"], ["distance"], ["nonsense"],
                                  ["gog", "cyclonormal", "tori_gog.json", "--mode", "loops"]])
def test_input_errors_exit_one(fx, capsys, argv, monkeypatch):
    monkeypatch.chdir(fx)
    assert run(argv, capsys)[0] == 1


def test_unknown_vertex_label(fx, capsys):
    code, _, err = run(["distance", fx / "grid22.json", "--from", "[9,9]", "--to", "[0,0]"], capsys)
    assert code == 1 and err.startswith("error:")

import json

import pytest

from narybell import cli, polytope
from narybell.quantum import QuantumModel


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


def test_certify_text(capsys):
    code, out, _ = run(capsys, "certify-nary", "--n", "3")
    assert code == 0
    assert out.splitlines()[0] == "max_zeta = 1, bound = 1, PASS"


def test_quantum_text(capsys):
    code, out, _ = run(capsys, "quantum", "--model", "paper-ia")
    assert code == 0
    assert out.splitlines()[0] == "I_a = 1.088662"


@pytest.mark.slow
def test_facets_468_text(capsys, tmp_path):
    code, out, _ = run(capsys, "facets", "--base", "[2,2|2,2]", "--target", "[3,3|3,3]", "--cache", str(tmp_path))
    assert code == 0
    assert out.splitlines()[0] == "facets: 468"


def test_report_schema_and_determinism(capsys):
    code, a = run_json(capsys, "seesaw", "--functional", "ib", "--restarts", "2", "--seed", "3")
    _, b = run_json(capsys, "seesaw", "--functional", "ib", "--restarts", "2", "--seed", "3")
    assert code == 0
    assert a["schema"] == cli.SCHEMA and a["command"] == "seesaw"
    assert a["result"] == b["result"] and a["result_sha256"] == b["result_sha256"]
    assert a["inputs"] == b["inputs"]
    assert "total_seconds" in a["timings"]


def test_cache_hit_gives_identical_result(capsys, tmp_path):
    argv = ("facets", "--base", "[2,2|2,2]", "--target", "[2,3|2,2]", "--cache", str(tmp_path))
    _, first = run_json(capsys, *argv)
    _, second = run_json(capsys, *argv)
    assert any(e.startswith("store") for e in first["cache"])
    assert all(e.startswith("hit") for e in second["cache"]) and second["cache"]
    assert first["result_sha256"] == second["result_sha256"]
    _, nocache = run_json(capsys, *argv[:-2])
    assert nocache["result_sha256"] == first["result_sha256"]
    # cache files use the plain-text polytope format
    files = sorted(tmp_path.iterdir())
    assert {polytope.read_polytope(f).__class__.__name__ for f in files} == {"VRep", "HRep"}


def test_threads_do_not_change_result(capsys):
    _, a = run_json(capsys, "seesaw", "--functional", "ia", "--restarts", "2", "--threads", "1")
    _, b = run_json(capsys, "seesaw", "--functional", "ia", "--restarts", "2", "--threads", "2")
    assert a["result_sha256"] == b["result_sha256"]


def test_classify_chsh_like(capsys):
    code, rep = run_json(capsys, "classify", "--base", "[2,2|2,2,2]", "--target", "[2,3|2,2,2]")
    assert code == 0
    r = rep["result"]
    assert r["facets"] == 126
    assert r["with_party_swap"]["non_face_orbits"] == 1
    assert r["without_party_swap"]["non_face_orbits"] == 1


def test_lp_bound(capsys):
    code, rep = run_json(capsys, "lp-bound", "--functional", "ic")
    assert code == 0 and rep["result"]["max"] == "1/2" and rep["result"]["violates_bound"]
    code, rep = run_json(capsys, "lp-bound", "--functional", "ib", "--n", "3", "--nary", "2")
    assert code == 0 and rep["result"]["max"] == "1"


def test_dry_run(capsys):
    code, rep = run_json(capsys, "facets", "--base", "[2,2|2,2]", "--target", "[3,3|3,3]", "--dry-run", "--limit", "2")
    assert code == 0
    assert rep["result"]["wirings_alice"] == 324 and len(rep["result"]["sample"]) == 2


def test_visibility(capsys):
    code, rep = run_json(capsys, "visibility", "--model", "paper-ia")
    assert code == 0 and rep["result"]["visibility"] == pytest.approx(0.918559, abs=1e-6)
    code, rep = run_json(capsys, "visibility", "--model", "reference-ic", "--noise", "uniform_outcomes")
    assert code == 0 and rep["result"]["visibility"] == pytest.approx(0.979, abs=2e-3)


def test_seesaw_save_model(capsys, tmp_path):
    path = tmp_path / "m.json"
    code, _ = run_json(capsys, "seesaw", "--functional", "ia", "--restarts", "1", "--save-model", str(path))
    assert code == 0
    m = QuantumModel.load(path)
    code, rep = run_json(capsys, "quantum", "--model", str(path), "--functional", "ia")
    assert code == 0 and rep["result"]["value"] > 1
    assert "model" in rep["inputs"] and m.dA == 3


@pytest.mark.parametrize(
    "argv",
    [
        ("facets",),
        ("facets", "--target", "[1|2]"),
        ("facets", "--target", "[2,2|2,2]", "--base", "[2,2|2,2]", "--nary", "2"),
        ("facets", "--target", "[3|3]", "--nary", "1"),
        ("certify-nary", "--n", "2"),
        ("quantum", "--model", "nonexistent"),
        ("quantum", "--model", "paper-ia", "--functional", "ic"),
        ("lp-bound", "--functional", "nope"),
        ("visibility", "--model", "paper-ia", "--bound", "5"),
        ("bogus-command",),
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == cli.EXIT_USAGE


def test_geometry_error_exit_3(capsys, monkeypatch):
    def boom(v):
        raise polytope.EmptyPolytopeError("no points")

    monkeypatch.setattr(polytope, "facets_from_vrep", boom)
    code, _, err = run(capsys, "facets", "--target", "[2,2|2,2]")
    assert code == cli.EXIT_GEOMETRY and "geometry error" in err


def test_nonconvergence_exit_4(capsys):
    code, out, _ = run(capsys, "seesaw", "--functional", "ia", "--restarts", "1", "--max-sweeps", "1", "--format", "json")
    assert code == cli.EXIT_NONCONVERGENCE
    assert json.loads(out)["result"]["converged"] is False


def test_help_exits_ok(capsys):
    assert cli.main(["--help"]) == cli.EXIT_OK

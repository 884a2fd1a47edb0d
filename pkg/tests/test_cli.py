"""CLI exit codes, determinism, and output formats."""

import json

import pytest

from torusorbits.cli import main

FAST_CONFIG = {"measure_grid": 8, "birkhoff_n": 64, "burn_in": 4, "grid_n": 16}

GHAT_GROUP = {
    "generators": [
        {"label": "tx", "map": {"matrix": [[1, 0], [0, 1]], "translation": [0.5, 0.0]}},
        {"label": "ty", "map": {"matrix": [[1, 0], [0, 1]], "translation": [0.0, 0.5]}},
        {"label": "flip", "map": {"matrix": [[-1, 0], [0, -1]], "translation": [0.0, 0.0]}},
    ]
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "config.json").write_text(json.dumps(FAST_CONFIG))
    (tmp_path / "ghat.json").write_text(json.dumps(GHAT_GROUP))
    return tmp_path


def run(args):
    return main([str(a) for a in args])


def test_lefschetz_examples_and_output(workdir, capsys):
    m = workdir / "m.json"
    m.write_text(json.dumps([[-1, 5], [0, -1]]))
    assert run(["lefschetz", m]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["result"]["lefschetz"] == 4


def test_exit_2_on_missing_or_malformed_input(workdir, capsys):
    assert run(["classify", workdir / "nope.json"]) == 2
    bad = workdir / "bad.json"
    bad.write_text("{not json")
    assert run(["classify", bad]) == 2
    notmat = workdir / "notmat.json"
    notmat.write_text(json.dumps({"matrices": [[[1, 0], [0, 2]]]}))
    assert run(["classify", notmat]) == 2


def test_exit_3_on_inconclusive_classification(workdir, capsys):
    mats = workdir / "mats.json"
    # generators N^2, N^3 need closure words the tiny cap cannot reach
    mats.write_text(json.dumps({"matrices": [[[5, 3], [3, 2]], [[13, 8], [8, 5]]]}))
    cfg = workdir / "tiny.json"
    cfg.write_text(json.dumps({"word_cap": 1, "element_cap": 5}))
    assert run(["classify", mats, "--config", cfg]) == 3


def test_exit_4_on_domain_error(workdir, capsys):
    parabolic = workdir / "para.json"
    parabolic.write_text(json.dumps({"matrix": [[1, 1], [0, 1]]}))
    assert run(["fixed-points", parabolic, "--config", workdir / "config.json"]) == 4


def test_classify_round_trip_matches_library(workdir, capsys):
    mats = workdir / "h.json"
    mats.write_text(json.dumps([[[0, -1], [1, 0]], [[1, 0], [0, -1]]]))
    assert run(["classify", mats]) == 0
    payload = json.loads(capsys.readouterr().out)
    from torusorbits.mcg import IntMatrix2, classify_nilpotent_subgroup
    cls = classify_nilpotent_subgroup([
        IntMatrix2.from_rows([[0, -1], [1, 0]]),
        IntMatrix2.from_rows([[1, 0], [0, -1]]),
    ])
    assert payload["result"]["classification"]["kind"] == cls.kind == "dihedral"
    assert payload["result"]["classification"]["conjugator"] == cls.conjugator.to_json()


def test_finite_orbit_exit_codes(workdir):
    out = workdir / "report.json"
    assert run(["finite-orbit", workdir / "ghat.json",
                "--config", workdir / "config.json", "--out", out]) == 0
    report = json.loads(out.read_text())
    assert report["result"]["status"] == "orbit"
    assert len(report["result"]["orbit"]) == 4

    stray = workdir / "stray.json"
    stray.write_text(json.dumps({"generators": [
        {"label": "t", "map": {"matrix": [[1, 0], [0, 1]],
                               "translation": [2 ** 0.5, 0.0]}}]}))
    assert run(["finite-orbit", stray, "--config", workdir / "config.json"]) == 11

    tangled = workdir / "tangled.json"
    tangled.write_text(json.dumps({"generators": [
        {"label": "a", "map": {"matrix": [[2, 1], [1, 1]]}},
        {"label": "b", "map": {"matrix": [[1, 1], [0, 1]]}}]}))
    assert run(["verify", tangled, "--config", workdir / "config.json"]) == 10


def test_reports_are_byte_identical_across_runs(workdir):
    out1, out2 = workdir / "r1.json", workdir / "r2.json"
    for out in (out1, out2):
        assert run(["verify", workdir / "ghat.json",
                    "--config", workdir / "config.json", "--out", out]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_seed_override_lands_in_report(workdir, capsys):
    m = workdir / "m.json"
    m.write_text(json.dumps([[-1, 0], [0, -1]]))
    assert run(["lefschetz", m, "--seed", 777]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["config"]["seed"] == 777


def test_rotation_set_csv_output(workdir, capsys):
    mp = workdir / "map.json"
    mp.write_text(json.dumps({"matrix": [[1, 0], [0, 1]], "translation": [0.25, 0.5]}))
    cfg = workdir / "rot.json"
    cfg.write_text(json.dumps({"grid_n": 3, "birkhoff_n": 16}))
    assert run(["rotation-set", mp, "--config", cfg, "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "x0x,x0y,n,rx,ry"
    assert len(lines) == 1 + 3 * 3 + 3
    first = lines[1].split(",")
    assert float(first[3]) == pytest.approx(0.25)


def test_csv_rejected_for_other_commands(workdir, capsys):
    m = workdir / "m.json"
    m.write_text(json.dumps([[-1, 0], [0, -1]]))
    assert run(["lefschetz", m, "--format", "csv"]) == 2


def test_circle_subcommand(workdir, capsys):
    lift = workdir / "lift.json"
    lift.write_text(json.dumps({"surface": "circle", "degree": 1,
                                "translation": 0.3, "terms": []}))
    assert run(["circle", lift, "--op", "rotation-number", "--n", 40]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["result"]["rotation_number"] == pytest.approx(0.3, abs=1e-12)

    flip = workdir / "flip.json"
    flip.write_text(json.dumps({"surface": "circle", "degree": -1,
                                "translation": 0.0, "terms": []}))
    assert run(["circle", flip, "--op", "fixed-points"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["result"]["fixed_points"] == [0.0, 0.5]


def test_server_dispatch_path(workdir, capsys, monkeypatch):
    # route the CLI's remote calls into the ASGI app so the --server code
    # path (request serialization, status-code mapping) runs hermetically
    from fastapi.testclient import TestClient
    from torusorbits.service.app import app
    import httpx

    client = TestClient(app)

    def fake_post(url, json=None, timeout=None):
        path = url.replace("http://fake", "")
        return client.post(path, json=json)

    monkeypatch.setattr(httpx, "post", fake_post)

    m = workdir / "m.json"
    m.write_text(json.dumps([[-1, 0], [0, -1]]))
    assert run(["lefschetz", m, "--server", "http://fake"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["result"]["lefschetz"] == 4

    bad = workdir / "badmat.json"
    bad.write_text(json.dumps({"matrices": [[[1, 0], [0, 2]]]}))
    assert run(["classify", bad, "--server", "http://fake"]) == 2

    para = workdir / "para.json"
    para.write_text(json.dumps({"matrix": [[1, 1], [0, 1]]}))
    assert run(["fixed-points", para, "--server", "http://fake",
                "--config", workdir / "config.json"]) == 4


def test_double_annulus_and_klein_subcommands(workdir, capsys):
    ann = workdir / "ann.json"
    ann.write_text(json.dumps({
        "surface": "annulus",
        "matrix": [[-1, 0.0], [0.0, -1.0]],
        "translation": [0.0, 1.0],
        "fourier": [],
        "boundary": "swaps-components"}))
    assert run(["double-annulus", ann]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["result"]["class"] == [[-1, 0], [0, -1]]
    assert payload["result"]["lefschetz"] == 4

    km = workdir / "klein.json"
    km.write_text(json.dumps({"matrix": [[-1, 0], [0, -1]]}))
    assert run(["klein", km, "--declared-lefschetz", 2]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert sorted(payload["result"]["lefschetz_pair"]) == [0, 4]
    # declared value that contradicts the pair is a domain error
    assert run(["klein", km, "--declared-lefschetz", 3]) == 4

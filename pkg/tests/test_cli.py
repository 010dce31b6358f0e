import json

import numpy as np
import pytest

from vstate import cli
from vstate.errors import GeometryError

SMALL = ["--nodes-per-fold", "100", "--N", "8"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def manifest(directory):
    found = list(directory.glob("manifest*.json"))
    assert len(found) == 1
    return json.loads(found[0].read_text())


def test_dispersion_examples(tmp_path):
    out = tmp_path / "d" / "disp.csv"
    assert run("dispersion", "--eps", 0, "--m-max", 5, "--out", out) == 0
    rows = [line.split(",") for line in out.read_text().splitlines()]
    assert rows[0] == ["m", "omega_m"]
    np.testing.assert_allclose([float(r[1]) for r in rows[1:]], [0, 0.25, 1 / 3, 0.375, 0.4], atol=1e-15)
    m = manifest(out.parent)
    assert m["command"] == "dispersion" and m["config"]["m_max"] == 5
    assert m["outputs"] == [str(out)]


def test_dispersion_sign_of_eps_and_single_row(tmp_path):
    run("dispersion", "--eps", -1, "--m-max", 6, "--out", tmp_path / "a.csv")
    run("dispersion", "--eps", 1, "--m-max", 6, "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    run("dispersion", "--m-max", 1, "--out", tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text() == "m,omega_m\n1,0\n"


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nm_max = 4\neps=0.5\n")
    out = tmp_path / "o" / "d.csv"
    run("dispersion", "--config", cfg, "--out", out)
    assert len(out.read_text().splitlines()) == 5
    assert manifest(out.parent)["config"]["eps"] == 0.5
    run("dispersion", "--config", cfg, "--m-max", 2, "--out", out)
    assert len(out.read_text().splitlines()) == 3
    assert manifest(out.parent)["config"]["m_max"] == 2
    cfg.write_text("bogus = 1\n")
    assert run("dispersion", "--config", cfg, "--out", out) == 1


def test_predict_split(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert run("predict-split", "--eps", 0, "--out", out) == 4
    assert "Euler case: branches connected" in capsys.readouterr().err
    assert not out.exists()
    assert run("predict-split", "--eps", 0.1, "--q-range", "0.6,0.7,11", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# a=") and "c=-4.0" in lines[0]
    assert lines[1] == "Q,x_plus,x_minus,s_plus,s_minus"
    assert len(lines) == 13


def test_love_table(capsys):
    assert run("love", "--m-max", 5) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "m,Q_m" and lines[1] == "3,0.5"
    assert float(lines[2].split(",")[1]) == pytest.approx(np.sqrt(np.sqrt(2) - 1), abs=1e-15)
    assert run("love", "--m-max", 2) == 4


def test_solve_seed_then_restart(tmp_path, capsys):
    s1 = tmp_path / "a" / "s.json"
    assert run("solve", "--eps", 0, "--fold", 3, "--seed-bifurcation", *SMALL, "--out", s1) == 0
    summary = capsys.readouterr().out.strip().split()
    assert [t.split("=")[0] for t in summary] == ["omega", "pi_over_2J", "energy_16_over_pi", "omega_p"]
    assert float(summary[0].split("=")[1]) == pytest.approx(1 / 3, abs=1e-3)
    assert len(summary[0].split("=")[1].split(".")[1]) == 6
    payload = json.loads(s1.read_text())
    cli.validate_state(payload)
    s2 = tmp_path / "b" / "s.json"
    assert run("solve", "--from", s1, *SMALL, "--out", s2) == 0
    assert json.loads(s2.read_text())["iterations"] <= 2
    assert manifest(s2.parent)["inputs"] == [str(s1)]


def test_solve_is_deterministic(tmp_path):
    for d in ("x", "y"):
        run("solve", "--ellipse", 0.3, "--eps", 0.3, *SMALL, "--out", tmp_path / d / "s.json")
    assert (tmp_path / "x" / "s.json").read_bytes() == (tmp_path / "y" / "s.json").read_bytes()


def test_solve_nonconvergence_exit(tmp_path, capsys):
    code = run("solve", "--ellipse", 0.5, "--eps", 1.0, *SMALL, "--max-iters", 1, "--tol", 1e-14, "--out", tmp_path / "s.json")
    assert code == 2
    assert "residual" in capsys.readouterr().err


def test_geometry_exit(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise GeometryError("self-intersection")

    monkeypatch.setattr(cli, "solve_state", boom)
    assert run("solve", "--omega", 0.1, *SMALL, "--out", tmp_path / "s.json") == 3


def test_invalid_regime_exit(tmp_path):
    assert run("solve", "--fold", 1, "--seed-bifurcation", *SMALL, "--out", tmp_path / "s.json") == 4


def test_bad_state_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"eps": 0, "omega": 0.1}))
    assert run("render", "--state", bad, "--out", tmp_path / "r") == 1
    assert run("render", "--state", tmp_path / "missing.json", "--out", tmp_path / "r") == 1


@pytest.fixture
def circle_state(tmp_path):
    path = tmp_path / "c" / "circle.json"
    assert run("solve", "--fold", 2, "--omega", 0.1, *SMALL, "--out", path) == 0
    return path


def test_render_circle(tmp_path, circle_state):
    out = tmp_path / "r"
    assert run("render", "--state", circle_state, "--nx", 15, "--ny", 15, "--out", out) == 0
    pts = np.loadtxt(out / "boundary.csv", delimiter=",", skiprows=1)
    assert pts.shape == (200, 2)
    np.testing.assert_allclose(np.hypot(pts[:, 0], pts[:, 1]), 1.0, atol=1e-10)
    grid = np.loadtxt(out / "grid.csv", delimiter=",", skiprows=1)
    assert (out / "grid.csv").read_text().startswith("x,y,psi_rot\n")
    psi = grid[:, 2].reshape(15, 15)
    np.testing.assert_allclose(psi, psi.T, atol=1e-9)   # 2-fold and reflection symmetric
    np.testing.assert_allclose(psi, psi[::-1, ::-1], atol=1e-9)
    assert manifest(out)["command"] == "render"


def test_trace_circle_seed(tmp_path, circle_state, capsys):
    out = tmp_path / "t"
    code = run("trace", "--seed", circle_state, "--control", "omega", "--step-omega", 0.01, "--max-steps", 3, *SMALL, "--out", out)
    assert code == 0
    assert "termination: MaxSteps" in capsys.readouterr().out
    rows = (out / "branch.csv").read_text().splitlines()
    assert len(rows) == 5
    assert len(list((out / "states").glob("*.json"))) == 4
    for p in (out / "states").glob("*.json"):
        cli.validate_state(json.loads(p.read_text()))
    assert manifest(out)["config"]["max_steps"] == 3


def test_jump_noop_and_step(tmp_path):
    seed = tmp_path / "seed.json"
    assert run("solve", "--eps", 0, "--fold", 2, "--seed-bifurcation", "--amplitude", 0.05, *SMALL, "--out", seed) == 0
    out = tmp_path / "j" / "s.json"
    assert run("jump", "--state", seed, "--eps-target", 0, *SMALL, "--out", out) == 0
    log = (tmp_path / "j" / "s.path.csv").read_text().splitlines()
    assert log[0] == "eps,omega,omega_p" and len(log) == 2
    assert json.loads(out.read_text())["nodes"] == json.loads(seed.read_text())["nodes"]
    assert run("jump", "--state", seed, "--eps-target", 0.5, "--steps", 2, *SMALL, "--out", out) == 0
    assert len((tmp_path / "j" / "s.path.csv").read_text().splitlines()) == 4
    moved = json.loads(out.read_text())
    assert moved["eps"] == 0.5
    assert moved["diagnostics"]["J"] == pytest.approx(json.loads(seed.read_text())["diagnostics"]["J"], abs=1e-6)


def test_jump_partial_exit(tmp_path, circle_state):
    # fixed impulse does not determine the rotation rate of a circle
    out = tmp_path / "p" / "s.json"
    assert run("jump", "--state", circle_state, "--eps-target", 0.5, "--steps", 2, *SMALL, "--out", out) == 2
    assert json.loads(out.read_text())["eps"] == 0.0


def test_thread_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("VSTATE_THREADS", "1")
    assert run("love", "--m-max", 3) == 0
    monkeypatch.setenv("VSTATE_THREADS", "0")
    assert run("love", "--m-max", 3) == 1


def test_parser_lists_all_commands():
    sub = next(a for a in cli.build_parser()._actions if hasattr(a, "choices") and a.choices)
    assert set(sub.choices) == {"dispersion", "solve", "trace", "jump", "render", "predict-split", "love"}

import json
import subprocess
import sys

import pytest

from abelianizer.cli import main
from abelianizer.cocycle import IntervalCocycle
from abelianizer.iet import rotation
from abelianizer.plane import Mat2


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


@pytest.fixture
def torus_cfg(tmp_path):
    return write(tmp_path, "torus.json", {"format": 1, "m": 0.02, "mu": 2, "nu": 1, "lambda": 0.5, "lean": "left"})


@pytest.fixture
def cat_cfg(tmp_path):
    coc = IntervalCocycle.constant(rotation(0.6180339887498949), Mat2(2, 1, 1, 1))
    return write(tmp_path, "cat.json", coc.to_dict())


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_torus_command(capsys, torus_cfg):
    rc, out, _ = run(capsys, "torus", "--config", torus_cfg, "--lyapunov-n", "512", "--samples", "6")
    assert rc == 0
    d = json.loads(out)
    assert d["spectral_coordinates"]["a_plus"] == pytest.approx(2.0, abs=1e-12)
    assert d["spectral_coordinates"]["b_plus"] == pytest.approx(0.5, abs=1e-12)
    assert d["deltas"]["B_ab_max_entry"] < 1e-12
    assert d["grade"] == 40 and d["saddle_connection_steps"] == 49


def test_torus_command_deterministic(capsys, torus_cfg, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        assert main(["torus", "--config", torus_cfg, "--lyapunov-n", "256", "--samples", "4", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_missing_config_is_invalid(capsys, tmp_path):
    rc, _, err = run(capsys, "torus", "--config", str(tmp_path / "nope.json"))
    assert rc == 2
    assert json.loads(err)["stage"] == "config"


def test_bad_params_are_invalid(capsys, tmp_path):
    cfg = write(tmp_path, "bad.json", {"m": 0.02, "mu": 1, "nu": 1, "lambda": 0.5})
    assert run(capsys, "torus", "--config", cfg)[0] == 2
    assert run(capsys, "torus", "--config", cfg, "--grade", "500")[0] == 2


def test_saddle_connection_is_invalid_unless_capped(capsys, tmp_path):
    cfg = write(tmp_path, "m01.json", {"m": 0.1, "mu": 2, "nu": 1, "lambda": 0.5})
    rc, _, err = run(capsys, "abelianize", "--torus", cfg)
    assert rc == 2 and json.loads(err)["quantity"]["steps"] == 9
    rc, out, _ = run(capsys, "abelianize", "--torus", cfg, "--cap-grade")
    assert rc == 0 and json.loads(out)["grade"] == 8


def test_uncertified_exit_code(capsys, torus_cfg):
    rc, _, err = run(capsys, "abelianize", "--torus", torus_cfg, "--grade", "0")
    assert rc == 3
    e = json.loads(err)
    assert e["error"] == "NotSplitError" and e["stage"] == "spectral"
    assert e["quantity"]["residual"] == pytest.approx(0.25)


def test_threads_env(capsys, torus_cfg, monkeypatch):
    monkeypatch.setenv("ABELIANIZER_THREADS", "zero")
    assert run(capsys, "decay", "--torus", torus_cfg)[0] == 2
    monkeypatch.setenv("ABELIANIZER_THREADS", "4")
    assert run(capsys, "decay", "--torus", torus_cfg)[0] == 0


def test_lyapunov_command(capsys, cat_cfg):
    rc, out, _ = run(capsys, "lyapunov", "--cocycle", cat_cfg, "--n", "2048", "--samples", "4")
    assert rc == 0
    assert json.loads(out)["lambda_hat"] == pytest.approx(0.9624236501, rel=1e-3)


def test_lyapunov_csv(capsys, torus_cfg, tmp_path):
    path = tmp_path / "ly.csv"
    assert main(["lyapunov", "--torus", torus_cfg, "--n", "256", "--samples", "5", "--out", str(path)]) == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "x,exponent" and len(lines) == 6


def test_stable_lines_command(capsys, torus_cfg):
    rc, out, _ = run(capsys, "stable-lines", "--torus", torus_cfg, "--points=-0.5,-0.3137", "--format", "csv")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "x,direction,line_x,line_y,residual" and len(lines) == 5
    assert run(capsys, "stable-lines", "--torus", torus_cfg, "--points", "a,b")[0] == 2
    # -0.25 + 12 m is the forward break
    rc, _, err = run(capsys, "stable-lines", "--torus", torus_cfg, "--points=-0.25")
    assert rc == 3 and json.loads(err)["quantity"]["step"] == 12


def test_fatgap_command(capsys, tmp_path):
    cfg = write(tmp_path, "irr.json", {"m": 0.024721359549995794, "mu": 2, "nu": 1, "lambda": 0.5})
    rc, out, _ = run(capsys, "fatgap", "--torus", cfg, "--lambda", "0.1", "--nmax", "25", "--format", "csv")
    assert rc == 0
    lines = out.splitlines()
    assert len(lines) == 26 and lines[0] == "n,gap,value,running_min"
    assert float(lines[-1].split(",")[3]) == pytest.approx(0.026495697123503623, rel=1e-9)


def test_fatgap_needs_source(capsys):
    assert run(capsys, "fatgap")[0] == 2


def test_decay_command(capsys, torus_cfg):
    rc, out, _ = run(capsys, "decay", "--torus", torus_cfg, "--nmax", "30")
    assert rc == 0
    d = json.loads(out)
    assert d["slope"] == pytest.approx(-1.386294, rel=1e-4) and d["slope_defined"]
    assert len(d["rows"]) == 31


def test_decay_all_zero(capsys, cat_cfg):
    rc, out, _ = run(capsys, "decay", "--cocycle", cat_cfg, "--nmax", "8")
    assert rc == 0
    d = json.loads(out)
    assert d["slope"] is None and not d["slope_defined"]


def test_abelianize_with_loops_file(capsys, tmp_path, torus_cfg):
    from abelianizer.torus import TorusParams, build

    coc = build(TorusParams(0.02, 2, 1, 0.5)).cocycle
    ccfg = write(tmp_path, "coc.json", coc.to_dict())
    loops = {
        "base": -0.5,
        "loops": [
            {"label": "h", "legs": [
                {"kind": "deviation", "start": -0.5, "end": -1.0},
                {"kind": "transport", "start": -1.0, "end": 0.0, "matrix": [[2, 1], [1, 1]]},
                {"kind": "deviation", "start": 0.0, "end": -0.5},
            ]},
            {"label": "v", "legs": [
                {"kind": "transport", "start": -0.5, "end": -0.48, "matrix": [[0.5, 0], [0, 2]]},
                {"kind": "deviation", "start": -0.48, "end": -0.5},
            ]},
        ],
    }
    lcfg = write(tmp_path, "loops.json", loops)
    rc, out, _ = run(capsys, "abelianize", "--cocycle", ccfg, "--loops", lcfg, "--grade", "40")
    assert rc == 0
    d = json.loads(out)
    assert d["spectral_coordinates"]["a_plus"] == pytest.approx(2.0, abs=1e-12)
    lcfg2 = write(tmp_path, "bad_loops.json", {"base": -0.5, "loops": [{"label": "x", "legs": [{"kind": "warp"}]}]})
    assert run(capsys, "abelianize", "--cocycle", ccfg, "--loops", lcfg2)[0] == 2
    assert run(capsys, "abelianize", "--cocycle", ccfg)[0] == 2


def test_module_entry_point(torus_cfg):
    r = subprocess.run(
        [sys.executable, "-m", "abelianizer", "decay", "--torus", torus_cfg, "--nmax", "10"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0 and json.loads(r.stdout)["command"] == "decay"

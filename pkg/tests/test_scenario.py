import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from llcontrol.cli import main
from llcontrol.errors import ConfigError
from llcontrol.scenario import config as cfgmod
from llcontrol.scenario.config import InitialCondition, load_config, parse_config
from llcontrol.scenario.runner import config_text, run_scenario

PRESETS = resources.files("llcontrol.scenario") / "presets"

SIMULATE = """\
[scenario]
kind = simulate

[physics]
nu = 0.02
L = 1.0

[mesh]
n_elements = 8

[initial]
ic = sine_cosine

[integrator]
dt = 0.002
t_final = 0.2
"""

STEER = SIMULATE.replace("kind = simulate", "kind = steer") + """
[control]
k = 0.5
r = 0, 0, 1
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_presets_parse():
    names = sorted(p.name for p in PRESETS.iterdir() if p.name.endswith(".ini"))
    assert len(names) == 10
    for name in names:
        cfg = parse_config((PRESETS / name).read_text(), name)
        assert cfg.kind in cfgmod.KINDS


def test_defaults_fill_in():
    cfg = parse_config("[scenario]\nkind = simulate\n")
    assert cfg.params.nu == 0.02 and cfg.params.length == 1.0
    assert cfg.n_elements == 12
    assert cfg.initial == InitialCondition("sine_cosine")
    assert cfg.control_spec() is None


@pytest.mark.parametrize("text, line, pattern", [
    ("[scenario]\nkind = simulate\n[physics]\nnu = -1\n", 4, "physics.nu"),
    ("[scenario]\nkind = simulate\n\n[mesh]\nn_elements = 1\n", 5, "mesh too coarse"),
    ("[scenario]\nkind = simulate\n[physics]\nmu = 0.1\n", 4, "unknown key 'mu'"),
    ("[scenario]\nkind = simulate\n[physic]\nnu = 0.1\n", 3, r"unknown section \[physic\]"),
    ("[scenario]\nkind = simulate\n[integrator]\ndt = fast\n", 4, "integrator.dt"),
    ("[scenario]\nkind = simulate\n[control]\nr = 0, 0.6, 0\n", 4, "control.r"),
    ("[scenario]\nkind = nonsense\n", 2, "scenario.kind"),
    ("kind = simulate\n", 1, "outside any section"),
    ("[scenario]\nkind = simulate\nthis line has no equals\n", 3, "cannot parse"),
    ("[scenario]\nkind = simulate\n[initial]\nic = uniform:0.5,0,0\n", 4, "unit norm"),
    ("[scenario]\nkind = steer\n", 2, "positive gain"),
    ("[scenario]\nkind = simulate\n[integrator]\ndt = 2\nt_final = 1\n", 4, "exceed t_final"),
])
def test_config_errors_carry_line_numbers(text, line, pattern):
    with pytest.raises(ConfigError, match=pattern) as info:
        parse_config(text)
    assert info.value.lineno == line
    assert str(info.value).startswith(f"line {line}: ")


def test_overrides():
    cfg = parse_config(SIMULATE, overrides=["mesh.n_elements=16", "physics.nu = 0.05"])
    assert cfg.n_elements == 16 and cfg.params.nu == 0.05
    assert cfg.raw["mesh"]["n_elements"] == "16"
    with pytest.raises(ConfigError, match="section.key=value"):
        parse_config(SIMULATE, overrides=["n_elements=16"])
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(SIMULATE, overrides=["mesh.cells=16"])


def test_subcommand_kind_mismatch():
    with pytest.raises(ConfigError, match="does not match"):
        parse_config(SIMULATE, expected_kinds=("spectrum",))
    assert parse_config("[physics]\nnu = 0.01\n", expected_kinds=("spectrum",)).kind == "spectrum"


def test_gain_below_threshold_warns():
    with pytest.warns(UserWarning, match="theorem bound not satisfied") as rec:
        cfg = parse_config(STEER.replace("k = 0.5", "k = 0.1"))
    assert "0.16" in str(rec[0].message)
    assert cfg.warnings


def test_initial_conditions():
    from llcontrol.discretization import build_mesh

    mesh = build_mesh(4)
    np.testing.assert_allclose(InitialCondition.parse("uniform:0,1,0").values(mesh), np.tile([0, 1, 0], (5, 1)))
    v = InitialCondition.parse("cosine_mode:2,3").values(mesh)
    np.testing.assert_allclose(v[:, 2], np.cos(2 * np.pi * mesh.nodes), atol=1e-15)
    for bad in ("uniform:1,1", "cosine_mode:1", "cosine_mode:-1,1", "sine_cosine:3", "spiral"):
        with pytest.raises(ValueError):
            InitialCondition.parse(bad)


def test_simulate_outputs(tmp_path):
    cfg = parse_config(SIMULATE)
    res = run_scenario(cfg, tmp_path / "out")
    assert res.exit_code == 0
    traj = _rows(tmp_path / "out" / "trajectory.csv")
    assert traj[0] == ["t", "node_index", "x", "m1", "m2", "m3"]
    assert len(traj) == 1 + 101 * 9
    diag = _rows(tmp_path / "out" / "diagnostics.csv")
    assert diag[0] == ["t", "l2_dist", "h1_dist", "lyapunov", "norm_drift", "energy"]
    assert len(diag) == 102
    text = (tmp_path / "out" / "trajectory.csv").read_text()
    assert text.endswith("\n") and "\r" not in text
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["outputs"] == ["trajectory.csv", "diagnostics.csv"]
    assert manifest["resolved"]["mesh"]["n_elements"] == 8
    assert manifest["results"]["renormalize"] is True


def test_runs_are_bit_identical(tmp_path):
    for d in ("a", "b"):
        run_scenario(parse_config(STEER), tmp_path / d)
    for name in ("trajectory.csv", "diagnostics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_numerical_failure_keeps_partial_outputs(tmp_path):
    text = STEER.replace("dt = 0.002", "dt = 0.05").replace("t_final = 0.2", "t_final = 50")
    res = run_scenario(parse_config(text), tmp_path / "out", allow_large_dt=True)
    assert res.exit_code == 2
    assert res.manifest["partial_outputs"] is True
    assert "blow-up" in res.manifest["failure"]
    assert (tmp_path / "out" / "trajectory.csv").exists()


def test_step_guard_is_a_validation_error(tmp_path):
    text = STEER.replace("dt = 0.002", "dt = 0.05")
    res = run_scenario(parse_config(text), tmp_path / "out")
    assert res.exit_code == 1
    assert "dt too large for mesh" in res.manifest["failure"]


def test_config_text_roundtrip():
    cfg = parse_config(STEER)
    again = parse_config(config_text(cfg.raw))
    assert again.raw == cfg.raw and again.kind == cfg.kind


def test_cli_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, STEER)
    assert main(["steer", "--config", str(good), "--out", str(tmp_path / "ok")]) == 0
    bad = _write(tmp_path, STEER.replace("k = 0.5", "k = -1"), "bad.ini")
    assert main(["steer", "--config", str(bad), "--out", str(tmp_path / "bad")]) == 1
    err = capsys.readouterr().err
    assert "line" in err and "control.k" in err
    assert main(["simulate", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "m")]) == 1
    big = _write(tmp_path, STEER.replace("dt = 0.002", "dt = 0.05").replace("t_final = 0.2", "t_final = 50"),
                 "big.ini")
    assert main(["steer", "--config", str(big), "--out", str(tmp_path / "big")]) == 1
    assert main(["steer", "--config", str(big), "--out", str(tmp_path / "big2"), "--allow-large-dt"]) == 2


def test_cli_override_and_warning(tmp_path, capsys):
    good = _write(tmp_path, STEER)
    code = main(["steer", "--config", str(good), "--out", str(tmp_path / "o"),
                 "--override", "control.k=0.1", "--override", "mesh.n_elements=6"])
    assert code == 0
    assert "theorem bound not satisfied" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["resolved"]["control"]["k"] == 0.1
    assert manifest["resolved"]["mesh"]["n_elements"] == 6


def test_replay_manifest_reproduces_outputs(tmp_path):
    good = _write(tmp_path, STEER)
    assert main(["steer", "--config", str(good), "--out", str(tmp_path / "first")]) == 0
    assert main(["replay-manifest", "--manifest", str(tmp_path / "first" / "manifest.json"),
                 "--out", str(tmp_path / "second")]) == 0
    for name in ("trajectory.csv", "diagnostics.csv"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_steer_sequence(tmp_path):
    text = (PRESETS / "steer_sequence.ini").read_text()
    cfg = parse_config(text, overrides=["sequence.settle_time=1", "sequence.phase_time=2"])
    res = run_scenario(cfg, tmp_path)
    assert res.exit_code == 0
    phases = res.results["phases"]
    assert [p["phase"] for p in phases] == ["settle", "target_1", "target_2"]
    assert phases[-1]["t_end"] == pytest.approx(5.0)
    t = np.array([float(r[0]) for r in _rows(tmp_path / "diagnostics.csv")[1:]])
    assert np.all(np.diff(t) > 0)


def test_spectrum_scenario(tmp_path):
    res = run_scenario(load_config(PRESETS / "spectrum.ini"), tmp_path)
    assert res.exit_code == 0
    rows = _rows(tmp_path / "eigenvalues.csv")
    assert rows[0][:4] == ["n_elements", "index", "real", "imag"]
    assert len(rows) == 1 + 3 * (17 + 33 + 65)
    assert res.results["meshes"]["64"]["zero_modes"] == 3
    assert all(1.7 < o < 2.3 for o in res.results["observed_orders"][-1])
    assert _rows(tmp_path / "analytic.csv")[1] == ["zero", "0", "0.0", "0.0"]


def test_hysteresis_scenario_fast_omegas(tmp_path):
    cfg = load_config(PRESETS / "loop_free_m1.ini", overrides=["hysteresis.omegas=1, 0.5"])
    res = run_scenario(cfg, tmp_path)
    assert res.exit_code == 0
    summary = _rows(tmp_path / "loop_summary.csv")
    assert summary[0] == ["omega", "area", "verdict"]
    assert [r[0] for r in summary[1:]] == ["1.0", "0.5"]
    assert len(_rows(tmp_path / "loops.csv")) == 1 + 2 * 257
    assert res.results["verdict"] == "persistent"


@pytest.mark.parametrize("preset", ["loop_linear_m1.ini", "loop_controlled_m1.ini", "loop_free_m2.ini", "loop_free_m3.ini"])
def test_other_hysteresis_presets_fast(tmp_path, preset):
    cfg = load_config(PRESETS / preset, overrides=["hysteresis.omegas=2, 1"])
    assert run_scenario(cfg, tmp_path).exit_code == 0


def test_verify_scenario_small(tmp_path):
    cfg = load_config(PRESETS / "verify.ini", overrides=["verify.n_fields=20", "verify.n_elements=64"])
    res = run_scenario(cfg, tmp_path)
    assert res.exit_code == 0, res.manifest
    rows = _rows(tmp_path / "verify_summary.csv")
    assert all(r[3] == "pass" for r in rows[1:])


def test_relax_and_steer_presets_short(tmp_path):
    for name in ("relax_free.ini", "steer_single.ini"):
        cfg = load_config(PRESETS / name, overrides=["integrator.t_final=0.5"])
        assert run_scenario(cfg, tmp_path / name).exit_code == 0


def test_plot_command(tmp_path):
    pytest.importorskip("matplotlib")
    good = _write(tmp_path, STEER)
    main(["steer", "--config", str(good), "--out", str(tmp_path / "run")])
    assert main(["plot", "--run", str(tmp_path / "run")]) == 0
    assert list((tmp_path / "run").glob("*.png"))

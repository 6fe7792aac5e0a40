import json
import subprocess
import sys

import numpy as np
import pytest

from rlab.config import ConfigError, config_hash, validate
from rlab.flow import FlowParams, FlowState, Schedule
from rlab.instances import random_instance, verification_initial_data
from rlab.mesh import build_grid
from rlab.snapshots import (read_checkpoint, read_snapshot, write_checkpoint,
                            write_snapshot)

BASE_CFG = {
    "grid": {"kind": "torus", "n": 2, "resolutions": [16, 16],
             "extents": [2 * np.pi, 2 * np.pi]},
    "initial_data": {
        "metric": {"family": "perturbed",
                   "components": {"0,0": [{"amp": 0.10, "wave": [1, 0]}],
                                  "1,1": [{"amp": 0.08, "wave": [0, 1],
                                           "kind": "cos"}],
                                  "0,1": [{"amp": 0.04, "wave": [0, 1]}]}},
        "u_terms": [{"amp": 0.2, "wave": [1, 0]}],
    },
    "flow": {"alpha1": 2.0},
    "schedule": {"t_end": 0.008, "dt": 0.002},
    "seed": 7,
}


def write_cfg(tmp_path, extra=None, name="cfg.json"):
    cfg = json.loads(json.dumps(BASE_CFG))
    if extra:
        cfg.update(extra)
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_snapshot_roundtrip_bit_exact(tmp_path):
    grid, m, u = random_instance(2, 16, seed=501)
    path = tmp_path / "snap.rlab"
    write_snapshot(path, grid, {"g": m, "u": u}, extra={"note": "x"})
    g2, fields, extra = read_snapshot(path)
    assert g2 == grid
    assert np.array_equal(fields["g"][0], m.values)
    assert fields["g"][1:] == (0, 2, "sym2")
    assert np.array_equal(fields["u"][0], u)
    assert extra == {"note": "x"}
    # writing again is byte-identical
    path2 = tmp_path / "snap2.rlab"
    write_snapshot(path2, grid, {"g": m, "u": u}, extra={"note": "x"})
    assert path.read_bytes() == path2.read_bytes()


def test_snapshot_bad_magic(tmp_path):
    p = tmp_path / "bad.rlab"
    p.write_bytes(b"NOPE!")
    with pytest.raises(ValueError):
        read_snapshot(p)


def test_checkpoint_roundtrip(tmp_path):
    g = build_grid("torus", 2, [16, 16], [2 * np.pi] * 2)
    m, u0 = verification_initial_data(g)
    st = FlowState(g, m, u0, t=0.25, step_count=5)
    p = FlowParams(1.0, 0.0, 0.5, -0.3, reduced=True)
    s = Schedule(t_end=0.5, dt=1e-3, safety=0.4, cadence=2, method="euler")
    path = tmp_path / "chk.rlab"
    write_checkpoint(path, st, p, s)
    st2, p2, s2 = read_checkpoint(path)
    assert np.array_equal(st2.metric.values, st.metric.values)
    assert np.array_equal(st2.u, st.u)
    assert st2.t == 0.25 and st2.step_count == 5
    assert p2 == p
    assert s2.t_end == 0.5 and s2.method == "euler" and s2.cadence == 2


def test_config_validation():
    validate(json.loads(json.dumps(BASE_CFG)))
    with pytest.raises(ConfigError, match="grid"):
        validate({"flow": {"alpha1": 2.0}})
    with pytest.raises(ConfigError, match="grdi"):
        validate({"grid": BASE_CFG["grid"], "grdi": 1})
    with pytest.raises(ConfigError, match="schedule.t_end"):
        validate({"grid": BASE_CFG["grid"], "schedule": {"t_end": "soon"}})
    with pytest.raises(ConfigError, match="unknown key"):
        validate({"grid": dict(BASE_CFG["grid"], shape=3)})


def test_config_hash_canonical():
    a = {"grid": {"kind": "torus", "n": 2, "resolutions": [16, 16],
                  "extents": [1.0, 1.0]}, "seed": 7}
    b = {"seed": 7, "grid": {"extents": [1.0, 1.0], "n": 2,
                             "resolutions": [16, 16], "kind": "torus"}}
    assert config_hash(a) == config_hash(b)
    c = dict(a, seed=8)
    assert config_hash(c) != config_hash(a)


def run_cli(args):
    return subprocess.run([sys.executable, "-m", "rlab.cli", *args],
                          capture_output=True, text=True)


def test_cli_run_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, {"verify": {"identities": ["A.8"],
                                          "resolutions": [12, 16, 24]},
                               "uniqueness": {"delta": 1e-3, "beta": 0.5}})
    r1 = run_cli(["run", "--config", str(cfg), "--out", str(tmp_path / "o1")])
    assert r1.returncode == 0, r1.stderr
    r2 = run_cli(["run", "--config", str(cfg), "--out", str(tmp_path / "o2")])
    assert r2.returncode == 0
    m1 = (tmp_path / "o1" / "manifest.json").read_bytes()
    m2 = (tmp_path / "o2" / "manifest.json").read_bytes()
    assert m1 == m2
    for fn in ("diagnostics.csv", "energy.csv", "checkpoint.rlab"):
        assert ((tmp_path / "o1" / fn).read_bytes()
                == (tmp_path / "o2" / fn).read_bytes()), fn
    manifest = json.loads(m1)
    assert manifest["passed"] is True
    assert manifest["tool_version"]
    assert "residuals.json" in manifest["outputs"]


def test_cli_negative_control_fails_named(tmp_path):
    cfg = write_cfg(tmp_path, {"verify": {"identities": ["A.8", "A.8:negctl"],
                                          "resolutions": [12, 16, 24]}})
    r = run_cli(["verify", "--config", str(cfg), "--out", str(tmp_path / "neg")])
    assert r.returncode == 1
    assert "A.8:negctl" in r.stderr
    manifest = json.loads((tmp_path / "neg" / "manifest.json").read_text())
    assert manifest["failed_checks"] == ["verify.A.8:negctl"]
    assert manifest["checks"]["verify.A.8"] is True


def test_cli_minimal_flat_config_passes(tmp_path):
    cfg = tmp_path / "flat.json"
    cfg.write_text(json.dumps({
        "grid": {"kind": "torus", "n": 2, "resolutions": [16, 16],
                 "extents": [2 * np.pi, 2 * np.pi]},
        "schedule": {"t_end": 0.01, "dt": 0.002},
    }))
    r = run_cli(["run", "--config", str(cfg), "--out", str(tmp_path / "flat")])
    assert r.returncode == 0, r.stderr
    manifest = json.loads((tmp_path / "flat" / "manifest.json").read_text())
    assert manifest["passed"] is True


def test_cli_metric_families(tmp_path):
    for family, mspec in (
        ("conformal", {"family": "conformal",
                       "phi_terms": [{"amp": 0.05, "wave": [1, 0]}]}),
        ("product", {"family": "product",
                     "diag": [1.3, [{"amp": 0.2, "wave": [1, 0], "kind": "cos"}]]}),
    ):
        cfg = tmp_path / f"{family}.json"
        cfg.write_text(json.dumps({
            "grid": {"kind": "torus", "n": 2, "resolutions": [16, 16],
                     "extents": [2 * np.pi, 2 * np.pi]},
            "initial_data": {"metric": mspec,
                             "u_terms": [{"amp": 0.1, "wave": [0, 1]}]},
            "flow": {"alpha1": 2.0},
            "schedule": {"t_end": 0.004, "dt": 0.001},
        }))
        r = run_cli(["run", "--config", str(cfg), "--out", str(tmp_path / family)])
        assert r.returncode == 0, (family, r.stderr)
    bad = tmp_path / "badfam.json"
    bad.write_text(json.dumps({
        "grid": {"kind": "torus", "n": 2, "resolutions": [16, 16],
                 "extents": [2 * np.pi, 2 * np.pi]},
        "initial_data": {"metric": {"family": "hyperbolic"}},
    }))
    r = run_cli(["run", "--config", str(bad), "--out", str(tmp_path / "bf")])
    assert r.returncode == 2
    assert "family" in r.stderr


def test_cli_verify_two_level_family(tmp_path):
    # two resolutions: gated on the decrease ratio, no order in the report
    cfg = write_cfg(tmp_path, {"verify": {"identities": ["A.8"],
                                          "resolutions": [16, 32]}})
    r = run_cli(["verify", "--config", str(cfg), "--out", str(tmp_path / "v2")])
    assert r.returncode == 0, r.stderr
    reports = json.loads((tmp_path / "v2" / "residuals.json").read_text())
    assert "order" not in reports[0]


def test_cli_config_errors_exit_2(tmp_path):
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"flow": {"alpha1": 2.0}}))
    r = run_cli(["run", "--config", str(missing), "--out", str(tmp_path / "x")])
    assert r.returncode == 2
    assert "grid" in r.stderr
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    r2 = run_cli(["run", "--config", str(bad), "--out", str(tmp_path / "y")])
    assert r2.returncode == 2


def test_cli_resolution_override_changes_hash(tmp_path):
    cfg = write_cfg(tmp_path)
    run_cli(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    run_cli(["run", "--config", str(cfg), "--out", str(tmp_path / "b"),
             "--resolution-override", "24"])
    ha = json.loads((tmp_path / "a" / "manifest.json").read_text())["config_hash"]
    hb = json.loads((tmp_path / "b" / "manifest.json").read_text())["config_hash"]
    assert ha != hb


def test_emit_plots(tmp_path):
    from rlab.cli import emit_plots
    cfg = write_cfg(tmp_path, {"entropy": {"tau0": 0.5, "samples": 3},
                               "verify": {"identities": ["A.8"],
                                          "resolutions": [12, 16, 24]}})
    r = run_cli(["run", "--config", str(cfg), "--out", str(tmp_path / "p")])
    assert r.returncode == 0, r.stderr
    written = emit_plots(tmp_path / "p" / "manifest.json")
    assert "mu_vs_t.dat" in written and "residual_vs_h.gp" in written
    gp = (tmp_path / "p" / "residual_vs_h.gp").read_text()
    assert "logscale" in gp and "slopes" in gp
    # missing series: warning, not an error
    lone = tmp_path / "lone"
    lone.mkdir()
    (lone / "manifest.json").write_text(json.dumps({"outputs": []}))
    assert emit_plots(lone / "manifest.json") == []


def test_rlab_threads_env(tmp_path):
    cfg = write_cfg(tmp_path)
    r = subprocess.run([sys.executable, "-m", "rlab.cli", "run", "--config",
                        str(cfg), "--out", str(tmp_path / "thr")],
                       capture_output=True, text=True,
                       env={"PATH": "/usr/bin:/bin", "RLAB_THREADS": "1"})
    assert r.returncode == 0, r.stderr

import hashlib
import json
from math import sqrt

import numpy as np
import pytest

from schoutenlab import cli
from schoutenlab.cones import property_suite
from schoutenlab.geometry import read_csv


def run(tmp_path, command, config="", name="out", extra=()):
    cfg = tmp_path / f"{name}.ini"
    cfg.write_text(config)
    out = tmp_path / name
    code = cli.main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


EIG_CFG = """
[eigenvalue]
taus = 0.3, 0.5, 0.7, 0.9
"""


def test_eigenvalue_closed_form_and_manifest(tmp_path):
    code, out = run(tmp_path, "eigenvalue", EIG_CFG)
    assert code == 0
    cols, meta = read_csv((out / "eigenvalues.csv").read_text())
    expect = [sqrt(3 * (2 - t) * (1 - t)) for t in cols["tau"]]
    np.testing.assert_allclose(cols["mu"], expect, atol=1e-6)
    np.testing.assert_allclose(cols["predicted"], expect, atol=1e-12)
    assert np.all(cols["stabilized"] == 1.0)
    man = manifest(out)
    assert man["exit_code"] == 0 and man["config_text"] == EIG_CFG
    for fname, digest in man["outputs"].items():
        assert hashlib.sha256((out / fname).read_bytes()).hexdigest() == digest
    assert set(man["outputs"]) == {"eigenvalues.csv", "eigenpairs.json"}


def test_eigenvalue_csv_format(tmp_path):
    _, out = run(tmp_path, "eigenvalue", "[eigenvalue]\ntaus = 0.5\n")
    raw = (out / "eigenvalues.csv").read_bytes()
    assert b"\r" not in raw
    data = [ln for ln in raw.decode().splitlines() if not ln.startswith("#")]
    assert data[0] == "tau,mu,predicted,residual,margin,stabilized"
    assert float(data[1].split(",")[1]) == pytest.approx(1.5, abs=1e-6)


def test_determinism(tmp_path):
    _, a = run(tmp_path, "eigenvalue", "[eigenvalue]\ntaus = 0.5, 0.9\n", name="a")
    _, b = run(tmp_path, "eigenvalue", "[eigenvalue]\ntaus = 0.5, 0.9\n", name="b")
    assert (a / "eigenvalues.csv").read_bytes() == (b / "eigenvalues.csv").read_bytes()
    assert (a / "eigenpairs.json").read_bytes() == (b / "eigenpairs.json").read_bytes()
    assert manifest(a)["outputs"] == manifest(b)["outputs"]


def test_flat_background_exit_3(tmp_path):
    code, out = run(tmp_path, "eigenvalue", "[model]\nkappa = 0\n[eigenvalue]\ntaus = 0.5\n")
    assert code == cli.EXIT_ADMISSIBILITY
    assert manifest(out)["status"].startswith("admissibility")


def test_not_stabilized_exit_5(tmp_path):
    code, _ = run(tmp_path, "eigenvalue", "[eigenvalue]\ntaus = 0.5\nbetas = 1, 0.5\n")
    assert code == cli.EXIT_NOT_STABILIZED
    code, out = run(tmp_path, "eigenvalue", "[eigenvalue]\ntaus = 0.5\nbetas = 1, 0.5\nrequire_stable = false\n", name="lax")
    assert code == 0 and (out / "eigenvalues.csv").exists()


def test_solver_stall_exit_4(tmp_path):
    code, out = run(tmp_path, "solve", "[solve]\nu0_amplitude = 0.3\nh_amplitude = 0.5\nmax_iter = 1\n")
    assert code == cli.EXIT_STALL
    assert "MaxIterations" in manifest(out)["status"]


def test_config_errors_exit_2(tmp_path):
    assert run(tmp_path, "solve", "[model\nn = 4\n", name="broken")[0] == cli.EXIT_CONFIG
    assert run(tmp_path, "solve", "[model]\nn = four\n", name="badint")[0] == cli.EXIT_CONFIG
    assert run(tmp_path, "viscosity", "[viscosity]\nside = both\n", name="side")[0] == cli.EXIT_CONFIG
    assert run(tmp_path, "viscosity", "[viscosity]\nfield = spiral\n", name="field")[0] == cli.EXIT_CONFIG
    code = cli.main(["solve", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "m")])
    assert code == cli.EXIT_CONFIG


def test_check_cones_axiom_failure_exit_2(tmp_path):
    code, out = run(tmp_path, "check-cones", "[check-cones]\ndims = 4\ntau_primes = 1.1\nsamples = 20\n")
    assert code == cli.EXIT_CONFIG
    assert "ConeAxiomError" in manifest(out)["status"]


def test_check_cones_sweep(tmp_path):
    code, out = run(tmp_path, "check-cones", "[check-cones]\ndims = 3, 4, 5\nsamples = 60\n")
    assert code == 0
    rep = json.loads((out / "cones_report.json").read_text())
    assert rep["violations"] == 0
    assert len(rep["cones"]) == 3 * (3 + 4 + 5)
    assert all(p["checked"] > 0 for c in rep["cones"] for p in c["properties"].values())


def test_check_cones_violation_exit_1(tmp_path, monkeypatch):
    def broken(cone, rng, samples):
        res = property_suite(cone, rng, samples)
        res["convexity"] = {"checked": samples, "failed": 1}
        return res

    monkeypatch.setattr(cli.C, "property_suite", broken)
    code, out = run(tmp_path, "check-cones", "[check-cones]\ndims = 3\nsamples = 10\n")
    assert code == cli.EXIT_VIOLATION
    assert manifest(out)["status"] == "violation"


def test_solve_and_continuation(tmp_path):
    code, out = run(tmp_path, "solve", "[solve]\ntau = 0.5\nbeta = 1.0\nh_amplitude = 0.2\n")
    assert code == 0
    st = json.loads((out / "state.json").read_text())["state"]
    assert st["converged"] and st["residual_norm"] <= 1e-10
    cols, _ = read_csv((out / "solution.csv").read_text())
    assert len(cols["u"]) == 128

    code, out = run(tmp_path, "continuation", "[continuation]\nT = 0.8\nh_amplitude = 0.2\n", name="cont")
    assert code == 0
    doc = json.loads((out / "run.json").read_text())
    taus = [s["tau"] for s in doc["states"]]
    assert taus[-1] == pytest.approx(0.8) and taus == sorted(taus)


def test_viscosity_boundary_verdict(tmp_path):
    code, out = run(tmp_path, "viscosity", "[viscosity]\ntau = 1.0\nfield = zero\n")
    assert code == 0
    rep = json.loads((out / "viscosity.json").read_text())
    assert rep["verdict"] and rep["margin"] == pytest.approx(0.0, abs=1e-14)


def test_deformation_report(tmp_path):
    code, out = run(tmp_path, "deformation", "[deformation]\nper_axis = 7\n")
    assert code == 0
    rep = json.loads((out / "deformation.json").read_text())
    assert rep["bounded"] and all(s["all_delta_positive"] for s in rep["sweeps"])


def test_diagnostics_solved_state(tmp_path):
    code, out = run(tmp_path, "diagnostics", "[diagnostics]\nfield = solve\ntau = 0.7\nh_amplitude = 0.2\n")
    assert code == 0
    rep = json.loads((out / "diagnostics.json").read_text())
    assert rep["pinching"]["passes"] and rep["pinching"]["min_slack"] > 0
    assert "value" in rep["y2t_quotient"]
    cols, _ = read_csv((out / "integrands.csv").read_text())
    assert {"t", "u", "pinching_slack", "y2t_quotient"} <= set(cols)


def test_diagnostics_reports_precondition(tmp_path):
    code, out = run(tmp_path, "diagnostics", "[model]\nn = 3\n[diagnostics]\nfield = zero\nt = 1.0\n")
    assert code == 0
    rep = json.loads((out / "diagnostics.json").read_text())
    assert "error" in rep["pinching"]
    assert rep["f21_functional"]["value"] < 0

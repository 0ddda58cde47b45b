import csv
import json

import numpy as np
import pytest

from ccl.acceptance import U_STAR_3_WARPED, warped_torus3
from ccl.cli import main, probe_configs, reproducibility_probe, with_seed
from ccl.cones import ConeSpec
from ccl.fields import TrigField
from ccl.grids import read_grid_field
from ccl.io import SCHEMA
from ccl.symmetric import SymmetricFunctionSpec


def _cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _run(tmp_path, command, cfg, *extra, out=None):
    out = out or tmp_path / f"out_{command}"
    code = main([command, "--config", cfg, "--out", str(out), *extra])
    return code, out


def test_builtin_cone_report_has_n_over_k_rows(tmp_path):
    code, out = _run(tmp_path, "cone-report", _cfg(tmp_path, {"battery": "builtin", "theta_budget": 200}))
    assert code == 0
    rows = list(csv.DictReader((out / "cones.csv").open()))
    garding = [r for r in rows if r["cone_id"].startswith("garding_")]
    assert max(int(r["n"]) for r in garding) == 8
    for r in garding:
        n, k = int(r["n"]), int(r["cone_id"].split("_k")[1])
        assert float(r["varrho"]) == pytest.approx(n / k, abs=1e-8)
        assert r["seed"] == "0"


def test_empty_battery_file_exits_2_without_artifacts(tmp_path):
    (tmp_path / "battery.json").write_text("[]")
    cfg = _cfg(tmp_path, {"battery": "battery.json"})
    code, out = _run(tmp_path, "cone-report", cfg)
    assert code == 2
    assert not out.exists()


@pytest.mark.parametrize(
    "content",
    ["{not json", json.dumps({"schema": "ccl/999"}), json.dumps([1, 2])],
)
def test_malformed_configs_exit_2(tmp_path, content):
    p = tmp_path / "bad.json"
    p.write_text(content)
    code, out = _run(tmp_path, "construct", str(p))
    assert code == 2 and not out.exists()


def test_missing_config_file_exits_2(tmp_path):
    code, out = _run(tmp_path, "solve", str(tmp_path / "nope.json"))
    assert code == 2 and not out.exists()


def test_verify_identities_on_conformal_torus(tmp_path):
    cfg = _cfg(tmp_path, {
        "manifold": {"kind": "conformal_torus", "n": 4, "grid": [12],
                     "phi": TrigField.monomial(0.2, (0, "cos"), (1, "cos")).to_dict()},
        "frames": 200, "fields": 1,
    })
    code, out = _run(tmp_path, "verify-identities", cfg)
    assert code == 0
    res = json.loads((out / "identities.json").read_text())
    assert res["schema"] == SCHEMA and res["seed"] == 0
    assert res["check1_max_rel"] <= 1e-12 and max(res["additivity_rel"]) <= 1e-12


def test_impossible_tolerance_exits_4(tmp_path):
    cfg = _cfg(tmp_path, probe_configs()["verify-identities"])
    code, out = _run(tmp_path, "verify-identities", cfg, "--tol", "1e-30")
    assert code == 4
    assert json.loads((out / "identities.json").read_text())["passed"] is False


def test_solve_manufactured_problem(tmp_path):
    code, out = _run(tmp_path, "solve", _cfg(tmp_path, probe_configs()["solve"]))
    assert code == 0
    rep = json.loads((out / "solve_report.json").read_text())
    assert rep["converged"] and rep["recovery_error"] <= 1e-8
    dims, _, _, u = read_grid_field(out / "u.ccl")
    assert dims == (8, 8, 8) and np.all(np.isfinite(u))
    hist = list(csv.DictReader((out / "history.csv").open()))
    assert len(hist) == len(rep["residual_history"])


def test_solve_from_non_admissible_guess_exits_3(tmp_path):
    cfg = dict(probe_configs()["solve"])
    cfg["u0"] = {"kind": "field", "field": TrigField.monomial(0.3, (1, "cos", 2.0)).to_dict()}
    code, out = _run(tmp_path, "solve", _cfg(tmp_path, cfg))
    assert code == 3
    assert "error" in json.loads((out / "solve_report.json").read_text())


def test_solve_rejects_sharp_condition_failure(tmp_path):
    cfg = {
        "manifold": {"kind": "flat_torus", "n": 4, "grid": [8]},
        "function": SymmetricFunctionSpec.sigma_k_root(4, 2).to_dict(),
        "tau": 1.5, "alpha": 1, "psi": 1.0,
    }
    code, out = _run(tmp_path, "solve", _cfg(tmp_path, cfg))
    assert code == 2 and not out.exists()


def test_construct_success_and_hypothesis_failure(tmp_path):
    code, out = _run(tmp_path, "construct", _cfg(tmp_path, probe_configs()["construct"]))
    assert code == 0
    assert json.loads((out / "construction.json").read_text())["verified"]
    assert read_grid_field(out / "u_bar.ccl")[0] == (8, 8, 8, 8)
    flat = {
        "manifold": {"kind": "flat_torus", "n": 4, "grid": [8]},
        "cone": ConeSpec.garding(4, 1).to_dict(), "tau": 3.0, "alpha": 1,
        "v": (TrigField.constant(-2.0) + TrigField.monomial(0.1, (0, "cos"))).to_dict(), "N_max": 64,
    }
    code, out2 = _run(tmp_path, "construct", _cfg(tmp_path, flat, "flat.json"), out=tmp_path / "flat")
    assert code == 3
    assert not (out2 / "u_bar.ccl").exists()
    # rerunning into a used directory: stale files stay out of the manifest
    code, out = _run(tmp_path, "construct", _cfg(tmp_path, flat, "flat.json"), out=out)
    assert code == 3
    assert "u_bar.ccl" not in json.loads((out / "manifest.json").read_text())["artifacts"]


def test_ellipticity_command(tmp_path):
    code, out = _run(tmp_path, "ellipticity", _cfg(tmp_path, probe_configs()["ellipticity"]))
    assert code == 0
    res = json.loads((out / "ellipticity.json").read_text())
    assert res["full"][0]["passed"] and res["partial"][0]["passed"]
    with pytest.raises(SystemExit):
        main(["ellipticity"])


def test_manifest_and_timing_are_separate(tmp_path):
    code, out = _run(tmp_path, "solve", _cfg(tmp_path, probe_configs()["solve"]))
    man = json.loads((out / "manifest.json").read_text())
    assert "wall_time_s" in json.loads((out / "timing.json").read_text())
    assert "timing.json" not in man["artifacts"] and set(man["artifacts"]) >= {"solve_report.json", "u.ccl"}
    assert man["seed"] == 0 and man["schema"] == SCHEMA


def test_thread_cap_does_not_change_artifacts(tmp_path, monkeypatch):
    cfg = _cfg(tmp_path, probe_configs()["cone-report"])
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("CCL_THREADS", threads)
        out = tmp_path / f"t{threads}"
        assert main(["cone-report", "--config", cfg, "--out", str(out), "--seed", "5"]) == 0
        outs.append((out / "manifest.json").read_bytes())
    assert outs[0] == outs[1]


def test_seed_changes_sampled_artifacts(tmp_path):
    cfg = _cfg(tmp_path, probe_configs()["cone-report"])
    a, b = tmp_path / "a", tmp_path / "b"
    main(["cone-report", "--config", cfg, "--out", str(a), "--seed", "1"])
    main(["cone-report", "--config", cfg, "--out", str(b), "--seed", "2"])
    assert (a / "cone_report.json").read_bytes() != (b / "cone_report.json").read_bytes()


def test_reproducibility_probe(tmp_path):
    same, details = reproducibility_probe(tmp_path, seed=3)
    assert same and not details["mismatches"]
    assert set(details["commands"]) == {"cone-report", "ellipticity", "verify-identities", "construct", "solve", "suite"}
    assert all(code == 0 for code in details["exit_codes"].values())


def test_suite_rejects_unknown_criterion(tmp_path):
    code, out = _run(tmp_path, "suite", _cfg(tmp_path, {"criteria": ["99"]}))
    assert code == 2 and not out.exists()


def test_with_seed_appends_column():
    assert with_seed("a,b\n1,2\n", 7) == "a,b,seed\n1,2,7\n"


def test_probe_solve_config_matches_acceptance_fixture():
    cfg = probe_configs()["solve"]
    assert cfg["manifold"] == warped_torus3(8).to_dict()
    assert cfg["psi"]["u_star"] == U_STAR_3_WARPED

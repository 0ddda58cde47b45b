"""Batch command-line front end.

    ccl <command> --config <path> --out <dir> [--seed N] [--tol X]

Exit status: 0 when every requested check passes, 2 for configuration
errors (nothing is written), 3 when a hypothesis is unmet (e.g. the
construction fails), 4 for numerical-invariant violations.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import conformal as cf
from .cones import ConeError, ConeSpec, builtin_battery, compute_theta, invariant_report
from .fields import ConformalFactor, TrigField
from .grids import GridError, csv_slice, encode_grid_field
from .io import ConfigError, csv_text, dumps, load_problem, manifest, read_json, write_json
from .solver import DomainExit, ProblemError, solve_closed
from .symmetric import (
    DomainError,
    SymmetricFunctionSpec,
    TransformedOperator,
    certify_full_ellipticity,
    certify_partial_ellipticity,
)

OK, CONFIG, HYPOTHESIS, INVARIANT = 0, 2, 3, 4
COMMANDS = ("cone-report", "ellipticity", "verify-identities", "construct", "solve", "suite")


def fan_out(fn, items):
    """Map ``fn`` over items with at most CCL_THREADS workers, preserving order."""
    workers = max(1, int(os.environ.get("CCL_THREADS", "1")))
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def with_seed(text: str, seed: int) -> str:
    """Append a constant seed column to CSV text."""
    lines = text.rstrip("\n").split("\n")
    return "\n".join([lines[0] + ",seed"] + [f"{ln},{seed}" for ln in lines[1:]]) + "\n"


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"config is missing {missing}")


# -- commands: each returns (exit code, {relative path: str | bytes}) ------------------


def cmd_cone_report(cfg, seed, tol, base):
    battery = cfg.get("battery", "builtin")
    if battery == "builtin":
        items = [(cid, spec) for cid, spec, _ in builtin_battery(int(cfg.get("max_n", 8)))]
    else:
        if isinstance(battery, str):
            battery = read_json(Path(base) / battery)
            if isinstance(battery, dict):
                battery = battery.get("cones", [])
        if not isinstance(battery, list):
            raise ConfigError("battery must be 'builtin', a file name, or a list of cones")
        items = [(b.get("id", f"cone{i}"), ConeSpec.from_dict(b["cone"])) for i, b in enumerate(battery)]
    if not items:
        raise ConfigError("empty cone battery")
    budget = int(cfg.get("theta_budget", 2000))
    reports = fan_out(lambda it: invariant_report(it[1], theta_budget=budget, seed=seed), items)
    rows = [r.row(cid) for (cid, _), r in zip(items, reports)]
    detail = [
        {**r.row(cid), "checks": r.checks, "tolerances": r.tolerances, "theta_estimate": r.theta_estimate}
        for (cid, _), r in zip(items, reports)
    ]
    code = OK if all(r.checks_passed for r in reports) else INVARIANT
    return code, {"cones.csv": with_seed(csv_text(rows), seed), "cone_report.json": dumps({"seed": seed, "cones": detail})}


def cmd_ellipticity(cfg, seed, tol, base):
    full = cfg.get("full", [])
    partial = cfg.get("partial", [])
    if not full and not partial:
        raise ConfigError("nothing to certify: give 'full' and/or 'partial' entries")
    samples = int(cfg.get("samples", 10_000))
    full_ops = [TransformedOperator(SymmetricFunctionSpec.from_dict(e["function"]), float(e["rho"])) for e in full]
    part_specs = [(SymmetricFunctionSpec.from_dict(e["function"]), e.get("theta")) for e in partial]

    def do_full(op):
        return {"operator": op.label, "n": op.n, **certify_full_ellipticity(op, samples, seed).to_dict()}

    def do_partial(item):
        spec, theta = item
        if theta is None:
            theta = compute_theta(spec.domain, budget=2000, seed=seed).lower
        return {"function": spec.label, "n": spec.n, **certify_partial_ellipticity(spec, theta, samples, seed).to_dict()}

    fres = fan_out(do_full, full_ops)
    pres = fan_out(do_partial, part_specs)
    passed = all(r["passed"] for r in fres + pres)
    return (OK if passed else INVARIANT), {"ellipticity.json": dumps({"seed": seed, "full": fres, "partial": pres})}


def cmd_verify_identities(cfg, seed, tol, base):
    _require(cfg, "manifold")
    man = cf.ModelManifold.from_dict(cfg["manifold"])
    tau, alpha = float(cfg.get("tau", 2.5)), int(cfg.get("alpha", 1))
    tol = tol if tol is not None else float(cfg.get("tol", 1e-12))
    consts = cf.ReductionConstants(tau, alpha, man.n)
    rng = np.random.default_rng(seed)
    from .acceptance import random_field

    frames = int(cfg.get("frames", 1000))
    worst1 = 0.0
    for _ in range(frames):
        S = rng.standard_normal((man.n, man.n))
        S = S + S.T
        o = cf.schouten_algebra(S, tau, alpha)
        worst1 = max(worst1, float(np.max(np.abs(o["check1_lhs"] - o["check1_rhs"])) / np.max(np.abs(o["check1_rhs"]))))
    curv = cf.curvature(man)
    add, key3 = [], []
    for _ in range(int(cfg.get("fields", 2))):
        ub = ConformalFactor.from_field(man.grid, random_field(rng, man.n))
        w = ConformalFactor.from_field(man.grid, random_field(rng, man.n))
        lhs = cf.V_operator(man, ub + w, consts, curv)
        rhs = cf.V_additivity_rhs(man, ub, w, consts, curv)
        add.append(float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs))))
        v = ConformalFactor.from_field(man.grid, TrigField.constant(-1.5) + random_field(rng, man.n))
        for N in (1.0, 4.0):
            ubar = ConformalFactor.exp_of(v, N)
            lhs = cf.V_operator(man, ubar, consts, curv) - consts.scale * curv.modified_schouten(tau, alpha)
            rhs = cf.key3_rhs(man, v, N, consts, curv)
            # lhs subtracts two O(|A|) terms, so measure against |A| as well
            ref = max(np.max(np.abs(lhs)), np.max(np.abs(consts.scale * curv.modified_schouten(tau, alpha))))
            key3.append(float(np.max(np.abs(lhs - rhs)) / ref))
    res = {
        "seed": seed,
        "manifold": man.to_dict(),
        "tau": tau,
        "alpha": alpha,
        "tolerance": tol,
        "check1_max_rel": worst1,
        "additivity_rel": add,
        "key3_rel": key3,
    }
    res["passed"] = bool(max([worst1] + add + key3) <= tol)
    return (OK if res["passed"] else INVARIANT), {"identities.json": dumps(res)}


def cmd_construct(cfg, seed, tol, base):
    _require(cfg, "manifold", "cone", "tau", "alpha", "v")
    man = cf.ModelManifold.from_dict(cfg["manifold"])
    cone = ConeSpec.from_dict(cfg["cone"])
    v = ConformalFactor.from_field(man.grid, TrigField.parse(cfg["v"]))
    res = cf.construct_admissible(
        man, cone, float(cfg["tau"]), int(cfg["alpha"]), v, N_max=float(cfg.get("N_max", 4096)),
        tol=tol if tol is not None else 1e-9,
    )
    arts = {"construction.json": dumps({"seed": seed, "manifold": man.to_dict(), **res.to_dict()})}
    if res.success:
        arts["u_bar.ccl"] = encode_grid_field(man.grid, res.u_bar.u)
        return (OK if res.verified else INVARIANT), arts
    return HYPOTHESIS, arts


def cmd_solve(cfg, seed, tol, base):
    problem, u0, u_star, opts = load_problem(cfg, base)
    if tol is not None:
        opts["tol"] = tol
    try:
        rep = solve_closed(problem, u0, **opts)
    except DomainExit as e:
        return HYPOTHESIS, {"solve_report.json": dumps({"seed": seed, "error": str(e), "node": list(e.node)})}
    body = {"seed": seed, "problem": problem.to_dict(), **rep.to_dict()}
    passed = rep.converged and rep.all_interior and rep.coefficient_bounds_ok
    if u_star is not None:
        body["recovery_error"] = float(np.max(np.abs(rep.u - u_star)))
        if "recovery_tol" in cfg:
            passed &= body["recovery_error"] <= float(cfg["recovery_tol"])
    hist = [
        {
            "iter": i,
            "residual": r,
            "step_norm": rep.step_norms[i] if i < len(rep.step_norms) else "",
            "theta_floor": rep.theta_floor[i][0] if i < len(rep.theta_floor) else "",
            "damping": rep.damping[i] if i < len(rep.damping) else "",
        }
        for i, r in enumerate(rep.residual_history)
    ]
    grid = problem.grid
    arts = {
        "solve_report.json": dumps(body),
        "history.csv": with_seed(csv_text(hist, ["iter", "residual", "step_norm", "theta_floor", "damping"]), seed),
        "u.ccl": encode_grid_field(grid, rep.u),
        "u_slice.csv": with_seed(csv_slice(grid, rep.u), seed),
    }
    return (OK if passed else INVARIANT), arts


def cmd_suite(cfg, seed, tol, base):
    from .acceptance import CRITERIA, run_criteria

    known = [c.cid for c in CRITERIA]
    ids = cfg.get("criteria")
    if ids is not None:
        unknown = [i for i in ids if i not in known]
        if unknown or not ids:
            raise ConfigError(f"unknown or empty criteria selection {unknown or ids}")
    results = run_criteria(ids, seed)
    rows = [{"id": r.cid, "passed": r.passed, "title": r.title} for r in results]
    arts = {
        "summary.json": dumps({"seed": seed, "criteria": [r.to_dict() for r in results]}),
        "summary.csv": with_seed(csv_text(rows, ["id", "passed", "title"]), seed),
    }
    for r in results:
        print(r.line())
    return (OK if all(r.passed for r in results) else INVARIANT), arts


HANDLERS = {
    "cone-report": cmd_cone_report,
    "ellipticity": cmd_ellipticity,
    "verify-identities": cmd_verify_identities,
    "construct": cmd_construct,
    "solve": cmd_solve,
    "suite": cmd_suite,
}


def _parser():
    p = argparse.ArgumentParser(prog="ccl", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config (optional for suite)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None, help="override the command's main tolerance")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    t0 = time.perf_counter()
    inputs = []
    try:
        if args.config:
            cfg = read_json(args.config)
            inputs.append(args.config)
            base = Path(args.config).parent
        elif args.command == "suite":
            cfg, base = {}, Path(".")
        else:
            raise ConfigError(f"{args.command} needs --config")
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        code, artifacts = HANDLERS[args.command](cfg, args.seed, args.tol, base)
    except (ConfigError, ProblemError, cf.GeometryError, ConeError, GridError, DomainError, KeyError, TypeError) as e:
        print(f"ccl: configuration error: {e}", file=sys.stderr)
        return CONFIG
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"ccl: cannot create output directory: {e}", file=sys.stderr)
        return CONFIG
    # single writer, fixed order
    for name in sorted(artifacts):
        data = artifacts[name]
        target = out / name
        if isinstance(data, bytes):
            target.write_bytes(data)
        else:
            target.write_text(data)
    manifest(out, inputs, args.seed, args.command, wall_time=time.perf_counter() - t0, artifacts=artifacts)
    return code


# -- reproducibility ---------------------------------------------------------------------


def probe_configs():
    """Small configs covering every command; suite runs a cheap subset."""
    from .acceptance import U_STAR_3_WARPED, warped_torus3

    warped = warped_torus3(8).to_dict()
    return {
        "cone-report": {"battery": [{"id": "g42", "cone": ConeSpec.garding(4, 2).to_dict()},
                                    {"id": "p53", "cone": ConeSpec.pk(5, 3).to_dict()}], "theta_budget": 500},
        "ellipticity": {"samples": 500,
                        "full": [{"function": SymmetricFunctionSpec.sigma_k_root(4, 2).to_dict(), "rho": 1.0}],
                        "partial": [{"function": SymmetricFunctionSpec.sigma_k_root(4, 2).to_dict()}]},
        "verify-identities": {"manifold": {"kind": "conformal_torus", "n": 4, "grid": [8],
                                           "phi": TrigField.monomial(0.2, (0, "cos")).to_dict()},
                              "frames": 50, "fields": 1},
        "construct": {"manifold": {"kind": "slab", "n": 4, "grid": [8], "bounds": [[1.0], [2.0]]},
                      "cone": ConeSpec.garding(4, 1).to_dict(), "tau": 3.0, "alpha": 1,
                      "v": TrigField.monomial(1.0, (0, "id", 1.0, -2.0)).to_dict()},
        "solve": {"manifold": warped, "function": SymmetricFunctionSpec.sigma1(3).to_dict(), "tau": 0.0, "alpha": -1,
                  "psi": {"kind": "manufactured", "u_star": U_STAR_3_WARPED}, "tol": 1e-12, "recovery_tol": 1e-8},
        "suite": {"criteria": ["1", "2"]},
    }


def reproducibility_probe(workdir, seed=0):
    """Run every command twice with the same seed and compare manifests byte for byte."""
    work = Path(workdir)
    (work / "configs").mkdir(parents=True, exist_ok=True)
    mismatches, codes = [], {}
    for name, cfg in probe_configs().items():
        path = work / "configs" / f"{name}.json"
        write_json(path, cfg)
        runs = []
        for rep in ("a", "b"):
            out = work / rep / name
            codes[f"{name}/{rep}"] = main([name, "--config", str(path), "--out", str(out), "--seed", str(seed)])
            runs.append((out / "manifest.json").read_bytes())
        if runs[0] != runs[1]:
            mismatches.append(name)
    return not mismatches, {"commands": sorted(probe_configs()), "mismatches": mismatches, "exit_codes": codes}


if __name__ == "__main__":
    sys.exit(main())

"""Invariant table (kappa, varrho, theta, type, rigidity) for the built-in cone battery."""

from __future__ import annotations

import argparse
from dataclasses import asdict, dataclass
from pathlib import Path

from ccl.cli import fan_out
from ccl.cones import builtin_battery, invariant_report
from ccl.io import write_csv, write_json


@dataclass(frozen=True)
class BatteryConfig:
    max_n: int = 8
    theta_budget: int = 2000
    seed: int = 0
    out: str = "runs/cone_battery"


def run(cfg: BatteryConfig):
    items = builtin_battery(cfg.max_n)
    reports = fan_out(lambda it: invariant_report(it[1], theta_budget=cfg.theta_budget, seed=cfg.seed), items)
    rows = [r.row(cid) for (cid, _, _), r in zip(items, reports)]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "cones.csv", rows)
    write_json(out / "config.json", asdict(cfg))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__)
    for name, default in asdict(BatteryConfig()).items():
        p.add_argument(f"--{name.replace('_', '-')}", type=type(default), default=default)
    rows = run(BatteryConfig(**vars(p.parse_args())))
    bad = [r["cone_id"] for r in rows if not r["checks_passed"]]
    print(f"{len(rows)} cones, {len(bad)} with failed checks {bad if bad else ''}".rstrip())


if __name__ == "__main__":
    main()

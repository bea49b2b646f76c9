"""Experiment driver producing the MILP table and the heuristic table as CSV."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from .model import (
    count_deterministic_policies,
    generate_random_decomposable,
    generate_random_instance,
)
from .pomdp_milp import solve_pomdp_milp
from .simulate import BoundCache, SolveOptions, monte_carlo

MILP_PROGRAMS = {"milp": False, "milp+cuts": True}
HEURISTIC_PROGRAMS = ("alg1", "greedy")
KNOWN_PROGRAMS = set(MILP_PROGRAMS) | set(HEURISTIC_PROGRAMS)


@dataclass
class Family:
    states: int
    observations: int
    actions: int
    horizons: list
    components: list = field(default_factory=lambda: [1])


@dataclass
class ExperimentSpec:
    families: list
    seeds: list
    programs: list
    time_limit: float
    scenarios: int = 100
    gap_tolerance: float = 1e-6

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("experiment needs at least one seed")
        if not self.programs:
            raise ValueError("experiment needs at least one program")
        unknown = set(self.programs) - KNOWN_PROGRAMS
        if unknown:
            raise ValueError(f"unknown programs {sorted(unknown)}")
        if not (isinstance(self.time_limit, (int, float)) and self.time_limit > 0):
            raise ValueError("time_limit must be a positive number of seconds")
        if int(self.scenarios) < 1:
            raise ValueError("scenarios must be >= 1")
        self.families = [f if isinstance(f, Family) else Family(**f) for f in self.families]
        if not self.families:
            raise ValueError("experiment needs at least one instance family")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        doc = json.loads(text)
        if "time_limit" not in doc:
            raise ValueError("experiment spec must set time_limit")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _num(v):
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return v


TABLE1_COLUMNS = ["seed", "states", "observations", "actions", "horizon", "policies", "program",
                  "status", "int_gap_pct", "final_gap_pct", "time_s"]
TABLE2_COLUMNS = ["seed", "components", "states", "observations", "actions", "horizon",
                  "heuristic", "mean_step_seconds", "avg_gap_pct", "nonpositive_bounds"]


def run_table1(spec: ExperimentSpec, timing: bool = False) -> list:
    """One row per (family, horizon, seed, MILP program); errors stay in their row."""
    rows = []
    tol_pct = 100.0 * spec.gap_tolerance
    for fam in spec.families:
        for T in fam.horizons:
            _, exp10 = count_deterministic_policies(fam.observations, fam.actions, T)
            for seed in spec.seeds:
                for prog in spec.programs:
                    if prog not in MILP_PROGRAMS:
                        continue
                    row = {"seed": seed, "states": fam.states, "observations": fam.observations,
                           "actions": fam.actions, "horizon": T, "policies": f"10^{exp10}",
                           "program": prog}
                    try:
                        inst = generate_random_instance(seed, fam.states, fam.observations,
                                                        fam.actions, T)
                        res = solve_pomdp_milp(inst, MILP_PROGRAMS[prog], spec.time_limit,
                                               spec.gap_tolerance).result
                        final = res.final_gap_percent
                        row.update(status=res.status, int_gap_pct=res.integrality_gap_percent,
                                   final_gap_pct="Opt" if final <= tol_pct else final,
                                   time_s=res.wall_time if timing else "")
                    except Exception as exc:  # noqa: BLE001 - isolate row failures
                        row.update(status=f"error: {type(exc).__name__}: {exc}", int_gap_pct="",
                                   final_gap_pct="", time_s="")
                    rows.append(row)
    return rows


def run_table2(spec: ExperimentSpec, timing: bool = False, options: SolveOptions | None = None) -> list:
    """One row per (family, M, horizon, seed, heuristic)."""
    rows = []
    for fam in spec.families:
        for M in fam.components:
            for T in fam.horizons:
                for seed in spec.seeds:
                    bounds = None
                    for prog in spec.programs:
                        if prog not in HEURISTIC_PROGRAMS:
                            continue
                        row = {"seed": seed, "components": M, "states": fam.states,
                               "observations": fam.observations, "actions": fam.actions,
                               "horizon": T, "heuristic": prog}
                        try:
                            dec = generate_random_decomposable(seed, M, fam.states, fam.observations,
                                                               fam.actions, T)
                            if bounds is None:
                                bounds = BoundCache(dec)
                            rep = monte_carlo(dec, prog, spec.scenarios, seed, options, bounds=bounds)
                            row.update(mean_step_seconds=rep.mean_step_seconds if timing else "",
                                       avg_gap_pct=rep.average_gap_percent,
                                       nonpositive_bounds=rep.nonpositive_bounds)
                        except Exception as exc:  # noqa: BLE001
                            row.update(mean_step_seconds="", avg_gap_pct=f"error: {exc}",
                                       nonpositive_bounds="")
                        rows.append(row)
    return rows


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_num(r.get(c, "")) for c in columns])
    return buf.getvalue()

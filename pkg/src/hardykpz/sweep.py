"""Parameter-space exploration: existence-region maps and exponent tables.

A sweep runs the solver over a 1D or 2D lattice of (p, lambda, mu,
alpha_damp) values, records the per-cell classification, and writes a CSV
(one row per cell, in index order regardless of completion order) plus a
JSON sidecar carrying the analytic overlay curves (p_plus, p_minus, p_star,
2s along the swept axis) and the configuration hash.  Classification is
data: solver errors inside a cell mark it Inconclusive and never abort the
sweep.  Cells that land exactly on the critical exponent are Inconclusive
by policy (nothing is proven at p = p_plus).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import ConfigError, HardyKPZError
from .specfun import ProblemParams, exponents_for, hardy_constant
from .util import config_hash, fmt17
from . import radialop, solver

__all__ = [
    "SweepAxis",
    "SweepPlan",
    "CellResult",
    "RegionMap",
    "run_sweep",
    "exponent_table",
    "write_exponent_table",
]

_AXIS_NAMES = ("p", "lambda", "mu", "alpha_damp")


@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.name not in _AXIS_NAMES:
            raise ConfigError(f"axis must be one of {_AXIS_NAMES}, got {self.name!r}")
        if self.count < 0:
            raise ConfigError("axis point count must be nonnegative")
        if self.count > 1 and not (self.stop > self.start):
            raise ConfigError("axis range must be increasing")

    def points(self) -> np.ndarray:
        if self.count == 0:
            return np.asarray([])  # empty range: a legal no-op sweep
        if self.count == 1:
            return np.asarray([self.start])
        return np.linspace(self.start, self.stop, self.count)


@dataclass
class SweepPlan:
    """Declarative description of one sweep.

    ``problem`` holds the fixed parameters (N, s, lambda, p, mu); swept
    parameters are overridden cell by cell.  ``kind`` selects the plain
    gradient solver or the damped variant (which reads ``alpha_damp`` and
    uses the mu axis as the source scale c).
    """

    problem: dict
    grid: dict
    axes: list
    source: dict
    kind: str = "kpz"
    alpha_damp: float = 0.0
    n_levels: int = 17
    controls: dict = field(default_factory=dict)
    budget: int = 4096

    def __post_init__(self):
        if self.kind not in ("kpz", "damped"):
            raise ConfigError(f"solver kind must be kpz or damped, got {self.kind!r}")
        if not (1 <= len(self.axes) <= 2):
            raise ConfigError("sweeps support one or two axes")
        self.axes = [a if isinstance(a, SweepAxis) else SweepAxis(**a) for a in self.axes]
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError("axes must be distinct")
        total = 1
        for a in self.axes:
            total *= a.count
        if total > self.budget:
            raise ConfigError(f"{total} cells exceed the budget {self.budget}")
        N = int(self.problem["N"])
        s = float(self.problem["s"])
        lam_max = hardy_constant(N, s)
        for a in self.axes:
            if a.count == 0:
                continue
            if a.name == "lambda" and not (0.0 < a.start and a.stop < lam_max):
                raise ConfigError(
                    f"lambda axis must stay inside (0, {lam_max}) for N={N}, s={s}"
                )
            if a.name == "p" and not (a.start > 1.0):
                raise ConfigError("p axis must stay above 1")
            if a.name in ("mu",) and a.start < 0.0:
                raise ConfigError("mu axis must be nonnegative")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["axes"] = [asdict(a) if not isinstance(a, dict) else a for a in self.axes]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        d = dict(d)
        d["axes"] = [SweepAxis(**a) for a in d.get("axes", [])]
        return cls(**d)

    def cells(self):
        """(index, {axis: value}) pairs in deterministic index order."""
        grids = [a.points() for a in self.axes]
        names = [a.name for a in self.axes]
        for idx, combo in enumerate(product(*grids)):
            yield idx, dict(zip(names, (float(v) for v in combo)))


@dataclass
class CellResult:
    index: int
    values: dict
    status: str
    sup_norm: float
    inner_iters: int
    note: str = ""


@dataclass
class RegionMap:
    plan: SweepPlan
    cells: list
    overlay: dict
    plan_hash: str

    def counts(self) -> dict:
        out: dict = {}
        for c in self.cells:
            out[c.status] = out.get(c.status, 0) + 1
        return out


@lru_cache(maxsize=4)
def _cached_operator(N: int, s: float, R: float, M: int, g: float):
    grid = radialop.build_grid(R, M, g, N)
    return grid, radialop.assemble_operator(grid, N, s)


def _run_cell(plan_dict: dict, index: int, values: dict) -> CellResult:
    plan = SweepPlan.from_dict(plan_dict)
    prob = dict(plan.problem)
    lam = float(values.get("lambda", prob["lambda"]))
    p = float(values.get("p", prob["p"]))
    mu = float(values.get("mu", prob.get("mu", 0.0)))
    alpha = float(values.get("alpha_damp", plan.alpha_damp))
    N = int(prob["N"])
    s = float(prob["s"])
    gd = plan.grid
    try:
        rep = exponents_for(N, s, lam)
        if abs(p - rep.p_plus) < 1e-12:
            return CellResult(index, values, "Inconclusive", math.nan, 0,
                              "p equals p_plus: undecided by policy")
        grid, op = _cached_operator(N, s, float(gd["R"]), int(gd["M"]), float(gd["g"]))
        params = ProblemParams(N=N, s=s, lam=lam, p=p, mu=mu)
        controls = solver.SolverControls(
            n_schedule=tuple(2.0**j for j in range(plan.n_levels)),
            **plan.controls,
        )
        f = solver.PowerSource(float(plan.source["coefficient"]),
                               float(plan.source["exponent"]))
        if plan.kind == "damped":
            report = solver.solve_damped(params, alpha, mu, f, grid,
                                         controls=controls, operator=op)
        else:
            report = solver.solve_kpz(params, f, grid, controls=controls,
                                      operator=op)
        iters = int(sum(row.inner_iters for row in report.trace))
        return CellResult(index, values, report.status,
                          report.field.sup_norm(), iters)
    except HardyKPZError as exc:
        return CellResult(index, values, "Inconclusive", math.nan, 0,
                          f"{type(exc).__name__}: {exc}")


def _overlay_for(plan: SweepPlan) -> dict:
    """Analytic exponent curves along the swept axis, recomputed fresh."""
    N = int(plan.problem["N"])
    s = float(plan.problem["s"])
    lam_axis = next((a for a in plan.axes if a.name == "lambda"), None)
    lams = lam_axis.points() if lam_axis is not None and lam_axis.count > 0 else \
        np.asarray([float(plan.problem["lambda"])])
    rows = [exponents_for(N, s, float(lam)) for lam in lams]
    return {
        "lambda": [float(x) for x in lams],
        "p_plus": [r.p_plus for r in rows],
        "p_minus": [r.p_minus for r in rows],
        "p_star": rows[0].p_star,
        "two_s": 2.0 * s,
        "hardy_constant": hardy_constant(N, s),
    }


_CELLS_FILE = "cells.csv"
_SIDECAR_FILE = "overlay.json"


def _cells_path(out_dir: str) -> str:
    return os.path.join(out_dir, _CELLS_FILE)


def _write_cells(path: str, plan: SweepPlan, cells: list) -> None:
    names = [a.name for a in plan.axes]
    with open(path, "w") as fh:
        fh.write("index," + ",".join(names) + ",status,sup_norm,inner_iters,note\n")
        for c in sorted(cells, key=lambda c: c.index):
            vals = ",".join(fmt17(c.values[n]) for n in names)
            fh.write(f"{c.index},{vals},{c.status},{fmt17(c.sup_norm)},"
                     f"{c.inner_iters},{c.note}\n")


def _load_done(path: str, plan: SweepPlan) -> dict:
    done: dict = {}
    if not os.path.exists(path):
        return done
    names = [a.name for a in plan.axes]
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("index,"):
            return {}
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) < 4 + len(names):
                continue
            idx = int(parts[0])
            vals = {n: float(v) for n, v in zip(names, parts[1:1 + len(names)])}
            status = parts[1 + len(names)]
            sup = float(parts[2 + len(names)])
            iters = int(parts[3 + len(names)])
            note = ",".join(parts[4 + len(names):])
            done[idx] = CellResult(idx, vals, status, sup, iters, note)
    return done


def run_sweep(plan: SweepPlan, out_dir: str | None = None, workers: int = 1,
              resume: bool = True) -> RegionMap:
    """Execute every cell of the plan; optionally checkpoint to out_dir.

    With ``resume`` (default) cells already present in an existing cells.csv
    under the same output directory are not recomputed.  Cell results are
    always written in index order, so output bytes do not depend on worker
    scheduling.
    """
    plan_dict = plan.as_dict()
    done: dict = {}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        if resume:
            done = _load_done(_cells_path(out_dir), plan)
    todo = [(idx, vals) for idx, vals in plan.cells() if idx not in done]
    results = list(done.values())
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, plan_dict, idx, vals)
                       for idx, vals in todo]
            results.extend(fut.result() for fut in futures)
    else:
        results.extend(_run_cell(plan_dict, idx, vals) for idx, vals in todo)
    results.sort(key=lambda c: c.index)
    overlay = _overlay_for(plan)
    region = RegionMap(plan=plan, cells=results, overlay=overlay,
                       plan_hash=config_hash(plan_dict))
    if out_dir is not None:
        _write_cells(_cells_path(out_dir), plan, results)
        sidecar = {
            "plan": plan_dict,
            "plan_hash": region.plan_hash,
            "overlay": overlay,
            "counts": region.counts(),
        }
        with open(os.path.join(out_dir, _SIDECAR_FILE), "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=1)
            fh.write("\n")
    return region


def exponent_table(N: int, s: float, lambda_grid) -> list:
    """Rows (lambda, alpha, mu, mu_bar, p_minus, p_plus, valid, chain_ok).

    Out-of-range lambdas are marked invalid, never dropped, so emitted
    tables keep one row per requested value.
    """
    lam_max = hardy_constant(N, s)
    p_star = N / (N - 2.0 * s + 1.0)
    mid = (N + 2.0 * s) / (N - 2.0 * s + 2.0)
    rows = []
    for lam in lambda_grid:
        lam = float(lam)
        if not (0.0 < lam <= lam_max):
            rows.append({"lambda": lam, "valid": False})
            continue
        rep = exponents_for(N, s, lam)
        chain_ok = (p_star < rep.p_minus <= mid <= rep.p_plus < 2.0 * s) if lam == lam_max \
            else (p_star < rep.p_minus < mid < rep.p_plus < 2.0 * s)
        rows.append({
            "lambda": lam,
            "alpha": rep.alpha,
            "mu": rep.mu_exp,
            "mu_bar": rep.mubar_exp,
            "p_minus": rep.p_minus,
            "p_plus": rep.p_plus,
            "valid": True,
            "chain_ok": bool(chain_ok),
        })
    return rows


def write_exponent_table(path: str, N: int, s: float, lambda_grid) -> None:
    rows = exponent_table(N, s, lambda_grid)
    with open(path, "w") as fh:
        fh.write("lambda,alpha,mu,mu_bar,p_minus,p_plus,valid,chain_ok\n")
        for row in rows:
            if not row["valid"]:
                fh.write(f"{fmt17(row['lambda'])},,,,,,invalid,\n")
                continue
            fh.write(
                f"{fmt17(row['lambda'])},{fmt17(row['alpha'])},{fmt17(row['mu'])},"
                f"{fmt17(row['mu_bar'])},{fmt17(row['p_minus'])},{fmt17(row['p_plus'])},"
                f"valid,{row['chain_ok']}\n"
            )

"""Command-line front end.

Subcommands: constants, exponents, oracle, solve, damped, sweep, probe.
Every run that writes artifacts also writes its fully-resolved configuration
and that configuration's hash next to them, and reruns from the written
configuration reproduce the outputs byte for byte (no timestamps, sorted
keys, 17-significant-digit floats).

Exit codes: 0 on success (solver BlowUp is a classification, not a
failure), 1 on tolerance failures and internal errors, 2 on domain or
configuration errors (the message names the violated constraint).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError, DomainError, GridMismatchError, HardyKPZError
from .specfun import (
    ProblemParams,
    exponents_for,
    hardy_constant,
    normalizing_constant,
)
from .util import config_hash, fmt17
from . import construct, radialop, solver, sweep

_ENV_OUTDIR = "HARDYKPZ_OUTPUT_DIR"
_ENV_WORKERS = "HARDYKPZ_WORKERS"


def _emit(obj, path: str | None):
    text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _out_dir(args) -> str:
    out = args.output_dir or os.environ.get(_ENV_OUTDIR) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    # a written resolved config can be replayed directly: its embedded hash
    # is not part of the configuration
    cfg.pop("config_hash", None)
    return cfg


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"missing key {key!r} in {where}")
    return cfg[key]


def _problem_from(cfg: dict) -> ProblemParams:
    block = _require(cfg, "problem", "config")
    return ProblemParams(
        N=int(_require(block, "N", "problem")),
        s=float(_require(block, "s", "problem")),
        lam=float(_require(block, "lambda", "problem")),
        p=float(_require(block, "p", "problem")),
        mu=float(block.get("mu", 0.0)),
    )


def _grid_from(cfg: dict) -> radialop.RadialGrid:
    block = _require(cfg, "grid", "config")
    return radialop.build_grid(
        R=float(block.get("R", 1.0)),
        M=int(_require(block, "M", "grid")),
        g=float(block.get("g", 2.0)),
        N=int(_require(cfg["problem"], "N", "problem")),
    )


def _controls_from(cfg: dict) -> solver.SolverControls:
    block = dict(cfg.get("controls", {}))
    n_levels = int(block.pop("n_levels", 13))
    schedule = block.pop("n_schedule", None)
    if schedule is None:
        schedule = tuple(2.0**j for j in range(n_levels))
    else:
        schedule = tuple(float(x) for x in schedule)
    return solver.SolverControls(n_schedule=schedule, **block)


def _source_from(cfg: dict) -> solver.PowerSource:
    block = _require(cfg, "source", "config")
    return solver.PowerSource(
        coefficient=float(_require(block, "coefficient", "source")),
        exponent=float(_require(block, "exponent", "source")),
    )


def _resolved(cfg: dict) -> dict:
    resolved = json.loads(json.dumps(cfg, sort_keys=True))
    resolved["config_hash"] = config_hash(cfg)
    return resolved


def _write_resolved(cfg: dict, out: str) -> str:
    resolved = _resolved(cfg)
    with open(os.path.join(out, "resolved_config.json"), "w") as fh:
        json.dump(resolved, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return resolved["config_hash"]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_constants(args) -> int:
    lam = hardy_constant(args.N, args.s)
    a_ns = normalizing_constant(args.N, args.s)
    _emit({"N": args.N, "s": args.s,
           "hardy_constant": float(fmt17(lam)),
           "normalizing_constant": float(fmt17(a_ns))}, args.out)
    return 0


def cmd_exponents(args) -> int:
    if args.table:
        if args.lambda_min is None or args.lambda_max is None:
            raise ConfigError("--table needs --lambda-min and --lambda-max")
        lams = np.linspace(args.lambda_min, args.lambda_max, args.count)
        path = args.out or "exponents.csv"
        sweep.write_exponent_table(path, args.N, args.s, lams)
        sys.stdout.write(f"wrote {path}\n")
        return 0
    if args.lam is None:
        raise ConfigError("provide --lambda or --table")
    rep = exponents_for(args.N, args.s, args.lam)
    _emit(rep.as_dict(), args.out)
    return 0


def cmd_oracle(args) -> int:
    grid = radialop.build_grid(args.R, args.M, args.g, args.N)
    op = radialop.assemble_operator(grid, args.N, args.s,
                                    profile_exponent=args.profile_exponent)
    r_max = args.r_max if args.r_max is not None else 0.1 * args.R
    err = radialop.oracle_power_test(op, args.theta, r_max)
    result = {"theta": args.theta, "max_rel_error": float(fmt17(err)),
              "tolerance": args.tolerance, "passed": bool(err <= args.tolerance),
              "checked_r_min": float(fmt17(op.oracle_r_min)),
              "checked_r_max": float(fmt17(r_max))}
    if args.refine:
        grid2 = radialop.build_grid(args.R, 2 * args.M, args.g, args.N)
        op2 = radialop.assemble_operator(grid2, args.N, args.s,
                                         profile_exponent=args.profile_exponent)
        # compare over the window the coarse grid resolves
        r_lo = op.oracle_r_min
        _, rel2, _ = radialop.power_test_profile(op2, args.theta, r_max)
        radii2, rel2, _ = radialop.power_test_profile(op2, args.theta, r_max)
        err2 = float(rel2[radii2 >= r_lo].max())
        result["refined_error"] = float(fmt17(err2))
        result["refinement_ratio"] = float(fmt17(err / err2))
    _emit(result, args.out)
    return 0 if result["passed"] else 1


def _write_solver_outputs(report: solver.SolverReport, spec, out: str,
                          cfg_hash: str) -> None:
    radialop.save_field(report.field, os.path.join(out, "field.csv"))
    solver.save_trace(report, os.path.join(out, "trace.csv"))
    summary = {
        "config_hash": cfg_hash,
        "status": report.status,
        "monotonicity_violations": report.monotonicity_violations,
        "fixed_point_residual": float(fmt17(report.fixed_point_residual)),
        "gradient_lp_integral": float(fmt17(report.gradient_lp_integral)),
        "hardy_l1_integral": float(fmt17(report.hardy_l1_integral)),
        "sup_norm": float(fmt17(report.field.sup_norm())),
        "sup_bound": float(fmt17(report.sup_bound)),
        "supersolution": json.loads(spec.to_json()) if spec is not None else None,
    }
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _supersolution_from(cfg: dict, params: ProblemParams):
    block = cfg.get("supersolution", "none")
    if block in (None, "none"):
        return None
    if block == "auto":
        src = _require(cfg, "source", "config")
        return construct.dirichlet_supersolution(
            params, float(src["exponent"]), float(src["coefficient"]))
    return construct.dirichlet_supersolution(
        params,
        float(_require(block, "f_bound_exponent", "supersolution")),
        float(block.get("f_bound_coef", 1.0)),
    )


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    params = _problem_from(cfg)
    grid = _grid_from(cfg)
    controls = _controls_from(cfg)
    f = _source_from(cfg)
    spec = _supersolution_from(cfg, params)
    report = solver.solve_kpz(params, f, grid, controls=controls,
                              supersolution=spec)
    cfg_hash = _write_resolved(cfg, out)
    _write_solver_outputs(report, spec, out, cfg_hash)
    sys.stdout.write(f"status: {report.status}\n")
    return 0


def cmd_damped(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    params = _problem_from(cfg)
    grid = _grid_from(cfg)
    controls = _controls_from(cfg)
    f = _source_from(cfg)
    alpha = float(_require(cfg, "alpha_damp", "config"))
    c = float(cfg.get("c", params.mu))
    spec = None
    if cfg.get("supersolution", "none") == "auto":
        spec = construct.damped_supersolution(params.N, params.s, params.lam,
                                              params.p, alpha)
    report = solver.solve_damped(params, alpha, c, f, grid, controls=controls,
                                 supersolution=spec)
    cfg_hash = _write_resolved(cfg, out)
    _write_solver_outputs(report, spec, out, cfg_hash)
    sys.stdout.write(f"status: {report.status}\n")
    return 0


def cmd_probe(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    params = _problem_from(cfg)
    grid = _grid_from(cfg)
    controls = _controls_from(cfg)
    f = _source_from(cfg)
    probe_cfg = cfg.get("probe", {})
    result = solver.mu_threshold_probe(
        params, f, grid, controls=controls,
        mu_floor=float(probe_cfg.get("mu_floor", 1e-8)),
        mu_cap=float(probe_cfg.get("mu_cap", 1e8)),
        rel_width=float(probe_cfg.get("rel_width", 0.05)),
    )
    cfg_hash = _write_resolved(cfg, out)
    summary = {
        "config_hash": cfg_hash,
        "status": result.status,
        "mu_lo": float(fmt17(result.mu_lo)),
        "mu_hi": float(fmt17(result.mu_hi)),
        "midpoint": float(fmt17(result.midpoint)) if result.status == "bracketed" else None,
        "note": result.note,
        "evaluations": [[float(fmt17(m)), st] for m, st in result.evaluations],
    }
    with open(os.path.join(out, "probe.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    sys.stdout.write(f"probe: {result.status}\n")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    plan = sweep.SweepPlan.from_dict(_require(cfg, "plan", "config"))
    workers = args.workers or int(os.environ.get(_ENV_WORKERS, "1"))
    region = sweep.run_sweep(plan, out_dir=out, workers=workers,
                             resume=not args.no_resume)
    _write_resolved(cfg, out)
    counts = region.counts()
    sys.stdout.write("cells: " + json.dumps(counts, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hardykpz",
        description=(
            "Radial fractional-Laplacian toolkit: Hardy/Gamma-ratio constants, "
            "critical exponents, discrete operator oracles, and the monotone "
            "truncation solver for the gradient problem."
        ),
    )
    sub = ap.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("constants", help="sharp Hardy constant and the kernel normalizer")
    pc.add_argument("--N", type=int, required=True, help="dimension (integer >= 2, N > 2s)")
    pc.add_argument("--s", type=float, required=True, help="fractional order in (0, 1)")
    pc.add_argument("--out", help="also write the JSON here")
    pc.set_defaults(fn=cmd_constants)

    pe = sub.add_parser("exponents", help="critical exponents for (N, s, lambda)")
    pe.add_argument("--N", type=int, required=True)
    pe.add_argument("--s", type=float, required=True)
    pe.add_argument("--lambda", dest="lam", type=float,
                    help="Hardy coefficient in (0, Lambda]")
    pe.add_argument("--table", action="store_true",
                    help="emit a CSV over a lambda range instead of one point")
    pe.add_argument("--lambda-min", type=float)
    pe.add_argument("--lambda-max", type=float)
    pe.add_argument("--count", type=int, default=20)
    pe.add_argument("--out")
    pe.set_defaults(fn=cmd_exponents)

    po = sub.add_parser("oracle", help="power-function oracle of the discrete operator")
    po.add_argument("--N", type=int, required=True)
    po.add_argument("--s", type=float, required=True)
    po.add_argument("--theta", type=float, required=True,
                    help="power exponent in (0, N-2s)")
    po.add_argument("--R", type=float, default=1.0)
    po.add_argument("--M", type=int, default=200)
    po.add_argument("--g", type=float, default=2.0)
    po.add_argument("--profile-exponent", type=float, default=None)
    po.add_argument("--tolerance", type=float, default=0.02)
    po.add_argument("--r-max", type=float, default=None,
                    help="check window upper radius (default R/10)")
    po.add_argument("--refine", action="store_true",
                    help="re-run at 2M and report the error ratio")
    po.add_argument("--out")
    po.set_defaults(fn=cmd_oracle)

    for name, fn, hlp in (
        ("solve", cmd_solve, "run the truncation scheme from a JSON config"),
        ("damped", cmd_damped, "run the damped-gradient scheme from a JSON config"),
        ("probe", cmd_probe, "bracket the source-scale threshold"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--output-dir", help=f"artifact directory (or ${_ENV_OUTDIR})")
        p.set_defaults(fn=fn)

    psw = sub.add_parser("sweep", help="parameter sweep with checkpoint/resume")
    psw.add_argument("--config", required=True)
    psw.add_argument("--output-dir", help=f"artifact directory (or ${_ENV_OUTDIR})")
    psw.add_argument("--workers", type=int, default=None,
                     help=f"worker processes (or ${_ENV_WORKERS})")
    psw.add_argument("--no-resume", action="store_true",
                     help="recompute every cell even if a checkpoint exists")
    psw.set_defaults(fn=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (DomainError, ConfigError, GridMismatchError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except HardyKPZError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

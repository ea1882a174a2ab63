"""Monotone approximation scheme for the gradient problem with Hardy term.

The truncated problems saturate the gradient power and the Hardy term at
level n; for each level a damped Picard iteration solves the fixed point
u = L^-1 RHS_n(u), warm-started from the previous level, starting from zero.
Increasing truncation levels produce an increasing iterate sequence bounded
by any valid supersolution; divergence across levels is classified as
blow-up by a configurable heuristic (threshold against the supersolution
bound plus sustained growth), never proved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

from .errors import (
    DomainError,
    GridMismatchError,
    NumericalDivergenceError,
    SolveError,
)
from .specfun import ProblemParams, exponents_for, gamma_multiplier
from .construct import SupersolutionSpec
from . import radialop

__all__ = [
    "PowerSource",
    "SolverControls",
    "TraceRow",
    "SolverReport",
    "ProbeResult",
    "solve_kpz",
    "solve_damped",
    "mu_threshold_probe",
    "operator_for_problem",
    "save_trace",
]


@dataclass(frozen=True)
class PowerSource:
    """Analytic source bound f(r) = coefficient * r^-exponent.

    Using the descriptor instead of nodal data keeps admissibility checks
    (f <= |x|^-(2s+theta)) exact rather than sampled.
    """

    coefficient: float
    exponent: float

    def __post_init__(self):
        if self.coefficient < 0.0:
            raise DomainError("source coefficient must be nonnegative")

    def values(self, grid: radialop.RadialGrid) -> np.ndarray:
        return self.coefficient * grid.r ** (-self.exponent)

    def is_zero(self) -> bool:
        return self.coefficient == 0.0

    def scaled(self, factor: float) -> "PowerSource":
        return PowerSource(self.coefficient * factor, self.exponent)

    def admissible_for(self, spec: SupersolutionSpec, R: float) -> bool:
        """Exact check of f <= |x|^-(2s+theta) on (0, R]."""
        e_max = 2.0 * spec.s + spec.theta
        if self.exponent > e_max:
            return False
        return self.coefficient * R ** (e_max - self.exponent) <= 1.0 + 1e-12


@dataclass(frozen=True)
class SolverControls:
    """Knobs of the outer truncation schedule and the inner Picard loop."""

    n_schedule: tuple = tuple(2.0**j for j in range(13))
    picard_tol: float = 1e-8
    picard_max: int = 500
    blowup_factor: float = 10.0
    damping: float = 0.7
    growth_window: int = 5
    sup_cap: float = 1e12

    def __post_init__(self):
        if len(self.n_schedule) == 0 or min(self.n_schedule) <= 0:
            raise DomainError("truncation schedule must be positive")
        if list(self.n_schedule) != sorted(self.n_schedule):
            raise DomainError("truncation schedule must be increasing")
        if not (0.0 < self.damping <= 1.0):
            raise DomainError("Picard damping must lie in (0, 1]")
        if self.blowup_factor <= 1.0:
            raise DomainError("blow-up factor must exceed 1")
        if self.picard_tol <= 0.0 or self.picard_max <= 0:
            raise DomainError("Picard tolerance and iteration cap must be positive")


@dataclass
class TraceRow:
    outer_n: float
    inner_iters: int
    residual: float
    sup_norm: float
    margin: float  # min(w - u) against the supersolution; nan without one


@dataclass
class SolverReport:
    """Outcome of one scheme run.

    ``status`` is one of Converged / BlowUp / MaxIterations; blow-up is a
    classification, not an error.  On convergence the report carries the
    fixed-point residual of the last truncated problem and the finiteness
    diagnostics (ball integrals of |grad u|^p and u |x|^-2s).
    """

    status: str
    field: radialop.RadialField
    trace: list = field(default_factory=list)
    monotonicity_violations: int = 0
    fixed_point_residual: float = math.nan
    gradient_lp_integral: float = math.nan
    hardy_l1_integral: float = math.nan
    sup_bound: float = math.nan
    notes: str = ""


def operator_for_problem(params: ProblemParams, grid: radialop.RadialGrid,
                         **assembly_kwargs) -> radialop.OperatorMatrix:
    """Assemble the operator for a solver run (midrange calibration profile).

    The midrange profile keeps the discrete Hardy quotient at the singular
    nodes pinned to the sharp constant, so the Picard map contracts at rate
    about lambda/Lambda; a profile matched to mu(lambda) would drive that
    quotient down to lambda itself and stall the iteration.
    """
    return radialop.assemble_operator(grid, params.N, params.s, **assembly_kwargs)


def admissible_bound_sup(params: ProblemParams, grid: radialop.RadialGrid) -> float:
    """Supremum of sup-norms over the source-free barrier family.

    Every admissible supersolution w = A r^-theta (theta in the window,
    amplitude up to the balance root) bounds the monotone iterates of the
    source-free problem; the family supremum is the blow-up reference when
    no explicit barrier is supplied.  It collapses to zero exactly when the
    window empties at p = p_plus: iterates of a supercritical run exceed
    every admissible bound by definition.
    """
    if params.lam <= 0.0:
        return math.inf
    N, s, lam, p = params.N, params.s, params.lam, params.p
    rep = exponents_for(N, s, lam)
    theta_line = (2.0 * s - p) / (p - 1.0)
    top = min(rep.mubar_exp, theta_line)
    if top <= rep.mu_exp:
        return 0.0
    R = grid.R
    r1 = grid.r[0]
    best = 0.0
    for theta in np.linspace(rep.mu_exp * (1 + 1e-6), top * (1 - 1e-6), 128):
        gam = gamma_multiplier((N - 2.0 * s) / 2.0 - theta, N, s)
        if gam <= lam:
            continue
        grad_pow = theta + 2.0 * s - (theta + 1.0) * p
        a_max = ((gam - lam) / (theta**p * R**grad_pow)) ** (1.0 / (p - 1.0))
        best = max(best, a_max * r1 ** (-theta))
    return best


def _source_values(f, grid: radialop.RadialGrid) -> np.ndarray:
    if f is None:
        return np.zeros(grid.M)
    if isinstance(f, PowerSource):
        return f.values(grid)
    if isinstance(f, radialop.RadialField):
        if not f.grid.same_as(grid):
            raise GridMismatchError("source field lives on a different grid")
        if np.min(f.values) < 0.0:
            raise DomainError("source must be nonnegative")
        return f.values
    raise DomainError(f"unsupported source type {type(f)!r}")


def _run_scheme(params: ProblemParams, alpha_damp: float, source_scale: float,
                f, grid: radialop.RadialGrid, controls: SolverControls,
                supersolution: SupersolutionSpec | None,
                operator: radialop.OperatorMatrix | None) -> SolverReport:
    """Shared engine behind solve_kpz (alpha_damp = 0) and solve_damped."""
    op = operator if operator is not None else operator_for_problem(params, grid)
    if not op.grid.same_as(grid):
        raise GridMismatchError("operator grid does not match the solve grid")
    r = grid.r
    hardy_weight = r ** (-2.0 * params.s)
    try:
        lu = lu_factor(op.matrix)
    except LinAlgError as exc:
        raise SolveError(f"linear operator factorization failed: {exc}") from exc
    f_vals = _source_values(f, grid)
    source = source_scale * f_vals

    w_vals = None
    if supersolution is not None:
        w_vals = supersolution.evaluate(r)
        sup_bound = float(np.max(w_vals))
    else:
        sup_bound = admissible_bound_sup(params, grid)

    u = np.zeros(grid.M)
    trace: list[TraceRow] = []
    mono_violations = 0
    sup_history: list[float] = []
    status = "MaxIterations"
    lam = params.lam
    p = params.p
    omega = controls.damping

    def rhs_of(v: np.ndarray, level: float) -> np.ndarray:
        grad_p = radialop.gradient_values(grid, v) ** p
        grad_term = grad_p / (1.0 + grad_p / level)
        if alpha_damp != 0.0:
            grad_term = grad_term / (1.0 + v) ** alpha_damp
        hardy_term = lam * (v / (1.0 + v / level)) * hardy_weight
        return grad_term + hardy_term + source

    finished = False
    for level in controls.n_schedule:
        u_prev_outer = u.copy()
        inner_resid = math.inf
        iters = 0
        for iters in range(1, controls.picard_max + 1):
            rhs = rhs_of(u, level)
            u_new = (1.0 - omega) * u + omega * lu_solve(lu, rhs)
            if not np.all(np.isfinite(u_new)):
                raise NumericalDivergenceError(
                    f"non-finite iterate at truncation level {level}"
                )
            scale = max(float(np.max(np.abs(u_new))), 1e-300)
            inner_resid = float(np.max(np.abs(u_new - u))) / scale
            u = u_new
            if inner_resid <= controls.picard_tol:
                break
        sup = float(np.max(np.abs(u)))
        sup_history.append(sup)
        drop = u_prev_outer - u
        tol_abs = 10.0 * controls.picard_tol * max(sup, 1.0)
        mono_violations += int(np.sum(drop > tol_abs))
        margin = math.nan
        if w_vals is not None:
            margin = float(np.min(w_vals - u))
        trace.append(TraceRow(level, iters, inner_resid, sup, margin))

        # classification: iterates exceeding the barrier (or, with no
        # admissible barrier at all, any sustained growth) mean blow-up
        if math.isfinite(sup_bound) and sup_bound > 0.0 \
                and sup > controls.blowup_factor * sup_bound:
            status = "BlowUp"
            finished = True
            break
        if sup_bound == 0.0 and sup > 0.0:
            win = controls.growth_window
            if len(sup_history) > win:
                recent = sup_history[-(win + 1):]
                tol_inc = 10.0 * controls.picard_tol * max(sup, 1.0)
                if all(b > a + tol_inc for a, b in zip(recent, recent[1:])):
                    status = "BlowUp"
                    finished = True
                    break
        if sup > controls.sup_cap:
            status = "BlowUp"
            finished = True
            break
        if level == controls.n_schedule[-1]:
            if inner_resid > controls.picard_tol:
                status = "MaxIterations"
            elif w_vals is not None and bool(
                    np.any(u > w_vals + 1e-6 * sup_bound + 1e-12)):
                status = "MaxIterations"  # barrier violated without threshold
            else:
                status = "Converged"
            finished = True

    if not finished:
        status = "MaxIterations"

    report = SolverReport(
        status=status,
        field=radialop.RadialField(grid, u),
        trace=trace,
        monotonicity_violations=mono_violations,
        sup_bound=sup_bound,
    )
    if status == "Converged":
        rhs_full = rhs_of(u, controls.n_schedule[-1])
        denom = max(float(np.max(np.abs(rhs_full))), 1e-300)
        report.fixed_point_residual = float(np.max(np.abs(op.matrix @ u - rhs_full))) / denom
        grad_p = radialop.gradient_values(grid, u) ** p
        report.gradient_lp_integral = grid.integrate(grad_p)
        report.hardy_l1_integral = grid.integrate(np.abs(u) * hardy_weight)
    return report


def solve_kpz(params: ProblemParams, f, grid: radialop.RadialGrid,
              controls: SolverControls | None = None,
              supersolution: SupersolutionSpec | None = None,
              operator: radialop.OperatorMatrix | None = None) -> SolverReport:
    """Run the truncation scheme for the gradient problem.

    ``f`` is a PowerSource, a RadialField on the same grid, or None (no
    source).  ``supersolution`` - when provided - supplies the barrier used
    both for the blow-up threshold and the nodewise margin in the trace;
    without one, classification relies on the sustained-growth heuristic
    alone (used by the threshold probe and by sweep cells beyond p_plus,
    where no barrier exists).
    """
    controls = controls or SolverControls()
    return _run_scheme(params, 0.0, params.mu, f, grid, controls,
                       supersolution, operator)


def solve_damped(params: ProblemParams, alpha_damp: float, c: float, f,
                 grid: radialop.RadialGrid,
                 controls: SolverControls | None = None,
                 supersolution: SupersolutionSpec | None = None,
                 operator: radialop.OperatorMatrix | None = None) -> SolverReport:
    """Truncation scheme with the gradient term damped by (1+u)^-alpha.

    With alpha_damp = 0 this reduces bitwise to solve_kpz at source scale c.
    """
    if alpha_damp < 0.0:
        raise DomainError("damping exponent must be nonnegative")
    if c < 0.0:
        raise DomainError("source scale must be nonnegative")
    controls = controls or SolverControls()
    return _run_scheme(params, alpha_damp, c, f, grid, controls,
                       supersolution, operator)


@dataclass
class ProbeResult:
    """Bracketing outcome of the source-scale threshold probe."""

    status: str        # "bracketed" | "inconclusive"
    mu_lo: float = math.nan
    mu_hi: float = math.nan
    evaluations: list = field(default_factory=list)
    note: str = ""

    @property
    def midpoint(self) -> float:
        return math.sqrt(self.mu_lo * self.mu_hi)


def mu_threshold_probe(params: ProblemParams, f, grid: radialop.RadialGrid,
                       controls: SolverControls | None = None,
                       mu_floor: float = 1e-8, mu_cap: float = 1e8,
                       rel_width: float = 0.05) -> ProbeResult:
    """Bisect the source scale between a Converged and a BlowUp run.

    The operator is assembled once and reused.  Returns bracket endpoints
    with relative width <= rel_width, or an inconclusive result (reported,
    not raised) when no bracket exists inside [mu_floor, mu_cap] - e.g. for
    a vanishing source, where the scale is irrelevant by design.
    """
    controls = controls or SolverControls()
    if f is None or (isinstance(f, PowerSource) and f.is_zero()) or (
            isinstance(f, radialop.RadialField) and float(np.max(np.abs(f.values))) == 0.0):
        return ProbeResult(status="inconclusive",
                           note="vanishing source: scale is irrelevant by design")
    op = operator_for_problem(params, grid)
    evaluations = []

    def classify(mu_val: float) -> str:
        run_params = ProblemParams(params.N, params.s, params.lam, params.p, mu_val)
        rep = solve_kpz(run_params, f, grid, controls, supersolution=None, operator=op)
        evaluations.append((mu_val, rep.status))
        return rep.status

    mu0 = params.mu if params.mu > 0.0 else 1.0
    status0 = classify(mu0)
    if status0 == "Converged":
        lo = mu0
        hi = mu0
        while True:
            hi *= 4.0
            if hi > mu_cap:
                return ProbeResult(status="inconclusive", evaluations=evaluations,
                                   note=f"no blow-up below mu={mu_cap}")
            st = classify(hi)
            if st != "Converged":
                break
            lo = hi
    else:
        hi = mu0
        lo = mu0
        while True:
            lo /= 4.0
            if lo < mu_floor:
                return ProbeResult(status="inconclusive", evaluations=evaluations,
                                   note=f"no convergence above mu={mu_floor}")
            st = classify(lo)
            if st == "Converged":
                break
            hi = lo
    while hi / lo > 1.0 + rel_width:
        mid = math.sqrt(lo * hi)
        if classify(mid) == "Converged":
            lo = mid
        else:
            hi = mid
    return ProbeResult(status="bracketed", mu_lo=lo, mu_hi=hi,
                       evaluations=evaluations)


def save_trace(report: SolverReport, path: str) -> None:
    """CSV trace: outer_n, inner_iters, residual, sup_norm, margin."""
    with open(path, "w") as fh:
        fh.write("outer_n,inner_iters,residual,sup_norm,margin\n")
        for row in report.trace:
            fh.write(
                f"{format(row.outer_n, '.17g')},{row.inner_iters},"
                f"{format(row.residual, '.17g')},{format(row.sup_norm, '.17g')},"
                f"{format(row.margin, '.17g')}\n"
            )

"""Closed-form radial solutions and supersolutions.

All constructions here are power profiles w = A |x|^-theta whose response
under the fractional Laplacian is available through the Gamma-ratio
multiplier, so admissibility and margins reduce to scalar inequalities.
The numerical re-check against the discrete operator lives in
``supersolution_margin``.

Margins are recorded as coefficients of r^-(theta+2s): the supersolution
inequality, multiplied through by r^(theta+2s), becomes a scalar inequality
whose worst case over the ball sits at r = R because every correction term
carries a positive power of r.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConstructionError, DomainError
from .specfun import ProblemParams, critical_exponents, gamma_multiplier
from . import radialop

__all__ = [
    "SupersolutionSpec",
    "exact_radial_solution",
    "dirichlet_supersolution",
    "damped_supersolution",
    "rescale_supersolution",
    "supersolution_margin",
    "truncate",
]

_AMPLITUDE_SWEEP = [2.0**k for k in range(-8, 9)]


@dataclass(frozen=True)
class SupersolutionSpec:
    """Power-profile supersolution w = amplitude * |x|^-theta.

    ``window`` is the admissible exponent interval the construction checked
    against; ``margin`` is the verified slack of the defining inequality in
    units of the r^-(theta+2s) coefficient (0 for the exact homogeneous
    solution, which satisfies its equation with equality).  ``c_star`` is
    the empirically determined source-scale threshold for the damped kind.
    """

    kind: str
    theta: float
    amplitude: float
    window: tuple[float, float]
    margin: float
    N: int
    s: float
    lam: float
    p: float
    f_bound_exponent: float | None = None
    c_star: float | None = None

    def evaluate(self, r):
        return self.amplitude * np.asarray(r, dtype=float) ** (-self.theta)

    def gradient_magnitude(self, r):
        return self.amplitude * self.theta * np.asarray(r, dtype=float) ** (-self.theta - 1.0)

    def sup_on_grid(self, grid: radialop.RadialGrid) -> float:
        return float(np.max(self.evaluate(grid.r)))

    def to_json(self) -> str:
        d = asdict(self)
        d["window"] = list(d["window"])
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SupersolutionSpec":
        d = json.loads(text)
        d["window"] = tuple(d["window"])
        return cls(**d)


def truncate(sigma, k: float):
    """Two-sided truncation max(-k, min(k, sigma)); scalar or array."""
    if k <= 0.0:
        raise DomainError(f"truncation level must be positive, got {k}")
    return np.clip(sigma, -k, k)


def _window(params: ProblemParams) -> tuple[float, float, float]:
    """(mu, mubar, theta_line) with theta_line = (2s-p)/(p-1)."""
    rep = critical_exponents(params)
    theta_line = (2.0 * params.s - params.p) / (params.p - 1.0)
    return rep.mu_exp, rep.mubar_exp, theta_line


def exact_radial_solution(params: ProblemParams) -> SupersolutionSpec:
    """Whole-space homogeneous solution w = A |x|^-theta0 of the gradient problem.

    theta0 = (2s-p)/(p-1); the amplitude solves
    gamma_beta - lambda = A^(p-1) theta0^p with beta = (N-2s)/2 - theta0,
    positive exactly when p lies strictly between the critical exponents.
    """
    N, s, lam, p = params.N, params.s, params.lam, params.p
    if lam <= 0.0:
        raise DomainError("the exact radial solution needs lambda > 0")
    mu, mubar, theta0 = _window(params)
    if not (mu < theta0 < mubar):
        gam_gap = None
        half = (N - 2.0 * s) / 2.0
        if abs(half - theta0) < half:
            gam_gap = gamma_multiplier(half - theta0, N, s) - lam
        raise DomainError(
            f"gradient exponent p={p} lies outside the admissible window: "
            f"gamma_beta - lambda = {gam_gap}"
        )
    beta = (N - 2.0 * s) / 2.0 - theta0
    gam = gamma_multiplier(beta, N, s)
    amplitude = ((gam - lam) / theta0**p) ** (1.0 / (p - 1.0))
    return SupersolutionSpec(
        kind="exact-homogeneous",
        theta=theta0,
        amplitude=amplitude,
        window=(mu, theta0),
        margin=0.0,
        N=N, s=s, lam=lam, p=p,
    )


def _theta_ladder(mu: float, top: float):
    """Exponents above mu, nearest first: tenth-of-window with floor, then
    deeper into the window when the margin needs more room."""
    width = top - mu
    for frac in (0.1, 0.2, 0.35, 0.5, 0.7, 0.9):
        eps = max(frac * width, 1e-4)
        if eps < width:
            yield mu + eps


def dirichlet_supersolution(params: ProblemParams, f_bound_exponent: float,
                            f_bound_coef: float = 1.0) -> SupersolutionSpec:
    """Radial supersolution of the Dirichlet problem for sources f <= C |x|^-e.

    Walks theta up from just above mu(lambda) (a tenth of the window first,
    deeper only if needed) and sweeps the amplitude geometrically around the
    balance point, keeping the largest margin of
        A (gamma - lambda) >= A^p theta^p R^(theta+2s-(theta+1)p)
                              + mu C R^(theta+2s-e).
    Fails with DomainError when the window is empty (p >= p_plus) and with
    ConstructionError when no (theta, amplitude) yields a positive margin
    (mu too large for this construction).
    """
    N, s, lam, p, mu_src = params.N, params.s, params.lam, params.p, params.mu
    if lam <= 0.0:
        raise DomainError("the supersolution construction needs lambda > 0")
    mu, mubar, theta_line = _window(params)
    top = min(mubar, theta_line)
    if top <= mu:
        raise DomainError(
            f"empty supersolution window: p={p} is not below "
            f"p_plus={critical_exponents(params).p_plus}"
        )
    e = float(f_bound_exponent)
    cf = float(f_bound_coef)
    if cf < 0.0:
        raise DomainError("source bound coefficient must be nonnegative")
    R = 1.0  # constructions are stated on the unit ball; rescale explicitly
    best = None
    for theta in _theta_ladder(mu, top):
        if e > 2.0 * s + theta:
            continue  # source too singular for this theta; move up the ladder
        gam = gamma_multiplier((N - 2.0 * s) / 2.0 - theta, N, s)
        grad_pow = theta + 2.0 * s - (theta + 1.0) * p
        src_pow = theta + 2.0 * s - e
        a_balance = ((gam - lam) / (p * theta**p * R**grad_pow)) ** (1.0 / (p - 1.0))
        best_amp, best_margin = None, -math.inf
        for fac in _AMPLITUDE_SWEEP:
            amp = a_balance * fac
            m = (amp * (gam - lam)
                 - amp**p * theta**p * R**grad_pow
                 - mu_src * cf * R**src_pow)
            if m > best_margin:
                best_amp, best_margin = amp, m
        if best is None or best_margin > best[2]:
            best = (theta, best_amp, best_margin)
        if best_margin > 0.0:
            return SupersolutionSpec(
                kind="dirichlet-supersolution",
                theta=theta,
                amplitude=best_amp,
                window=(mu, top),
                margin=best_margin,
                N=N, s=s, lam=lam, p=p,
                f_bound_exponent=e,
            )
    raise ConstructionError(
        "no (theta, amplitude) gives a positive supersolution margin "
        f"(mu={mu_src} too large for this construction)",
        {"window": (mu, top), "best": best},
    )


def damped_supersolution(N: int, s: float, lam: float, p: float,
                         alpha_damp: float) -> SupersolutionSpec:
    """Supersolution for the gradient term damped by (1+u)^-alpha.

    Requires alpha_damp > 2s - 1 strictly and p < 2s.  Returns the profile
    exponent beta close to mu(lambda), the amplitude, and the empirically
    determined source threshold c_star valid for sources f <= |x|^-(beta+2s)
    (the bound actually used by the construction).
    """
    if not (p < 2.0 * s):
        raise DomainError(f"damped construction needs p < 2s, got p={p}, s={s}")
    if not (alpha_damp > 2.0 * s - 1.0):
        raise DomainError(
            f"damping exponent must exceed 2s-1 = {2 * s - 1}, got {alpha_damp}"
        )
    params = ProblemParams(N=N, s=s, lam=lam, p=p, mu=0.0)
    rep = critical_exponents(params)
    mu, mubar = rep.mu_exp, rep.mubar_exp
    beta = next(_theta_ladder(mu, mubar))
    # damped admissibility: (beta(alpha+1)+2s)/(beta+1) > 2s > p holds for
    # every beta > 0 once alpha > 2s-1; keep the explicit guard anyway.
    if (beta * (alpha_damp + 1.0) + 2.0 * s) / (beta + 1.0) <= p:
        raise ConstructionError(
            "damped window degenerate: gradient term not dominated",
            {"beta": beta, "alpha": alpha_damp},
        )
    R = 1.0
    gam = gamma_multiplier((N - 2.0 * s) / 2.0 - beta, N, s)
    grad_pow = beta + 2.0 * s - ((beta + 1.0) * p - beta * alpha_damp)
    if grad_pow <= 0.0:
        raise ConstructionError(
            "damped gradient term is not subordinate on the ball",
            {"beta": beta, "alpha": alpha_damp, "grad_pow": grad_pow},
        )
    a_exp = p - alpha_damp

    def c_of(amp: float) -> float:
        return amp * (gam - lam) - amp**a_exp * beta**p * R**grad_pow

    best_amp, best_c = None, -math.inf
    if a_exp > 1.0:
        anchor = ((gam - lam) / (a_exp * beta**p * R**grad_pow)) ** (1.0 / (a_exp - 1.0))
    else:
        anchor = 1.0
    for fac in _AMPLITUDE_SWEEP:
        amp = anchor * fac
        c = c_of(amp)
        if c > best_c:
            best_amp, best_c = amp, c
    if best_c <= 0.0:
        raise ConstructionError(
            "no amplitude gives a positive damped margin",
            {"beta": beta, "best_c": best_c},
        )
    return SupersolutionSpec(
        kind="damped-supersolution",
        theta=beta,
        amplitude=best_amp,
        window=(mu, mubar),
        margin=best_c,
        N=N, s=s, lam=lam, p=p,
        f_bound_exponent=beta + 2.0 * s,
        c_star=best_c,
    )


def rescale_supersolution(spec: SupersolutionSpec, r_from: float, r_to: float) -> SupersolutionSpec:
    """Carry a power supersolution from the ball of radius r_from to r_to.

    For w(x) = A |x|^-theta the pullback u(r_to x / r_from) stays in the
    power family; the amplitude is multiplied by the scaling constant
    C(r_to, r_from, p) that restores the margin inequality on the larger
    ball.  The worst-case inequality is re-evaluated at the new radius.
    """
    if r_from <= 0.0 or r_to <= 0.0:
        raise DomainError("ball radii must be positive")
    theta, p, lam = spec.theta, spec.p, spec.lam
    N, s = spec.N, spec.s
    gam = gamma_multiplier((N - 2.0 * s) / 2.0 - theta, N, s)
    grad_pow = theta + 2.0 * s - (theta + 1.0) * p
    # scaled amplitude keeps the dilation of the profile, then the extra
    # factor restores gradient domination on the target ball; the leftover
    # margin is the room available for a rescaled source term.
    base_amp = spec.amplitude * (r_from / r_to) ** (-theta)

    def margin_of(amp: float) -> float:
        return amp * (gam - lam) - amp**p * theta**p * r_to**grad_pow

    best_c, best_margin = None, -math.inf
    for fac in _AMPLITUDE_SWEEP:
        amp = base_amp * fac
        m = margin_of(amp)
        if m > best_margin:
            best_c, best_margin = fac, m
    if best_margin <= 0.0:
        raise ConstructionError(
            "rescaling produced no admissible amplitude",
            {"r_from": r_from, "r_to": r_to},
        )
    return SupersolutionSpec(
        kind=spec.kind,
        theta=theta,
        amplitude=base_amp * best_c,
        window=spec.window,
        margin=best_margin,
        N=N, s=s, lam=lam, p=p,
        f_bound_exponent=spec.f_bound_exponent,
        c_star=spec.c_star,
    )


def supersolution_margin(op: radialop.OperatorMatrix, spec: SupersolutionSpec,
                         params: ProblemParams, f_values: np.ndarray | None = None,
                         interior_fraction: float = 0.95) -> float:
    """Discrete re-check of the supersolution inequality on the grid.

    Evaluates L w - lambda w / r^2s - |grad w|^p - mu f at the nodes (with
    the analytic gradient of the power profile) and returns the minimum over
    the checked window: origin-closure node and the outer 1-interior_fraction
    tail excluded.  Positive means the discrete operator confirms the
    closed-form margin within its own tolerance.
    """
    grid = op.grid
    r = grid.r
    w = spec.evaluate(r)
    lhs = op.matrix @ w
    rhs = params.lam * w * r ** (-2.0 * params.s) \
        + spec.gradient_magnitude(r) ** params.p
    if f_values is not None:
        rhs = rhs + params.mu * np.asarray(f_values, dtype=float)
    slack = lhs - rhs
    mask = (r >= op.oracle_r_min) & (r <= interior_fraction * grid.R)
    return float(np.min(slack[mask]))

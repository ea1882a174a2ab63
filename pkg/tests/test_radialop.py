"""Discrete radial operator: grids, kernel identities, oracles, structure."""

import math
import os

import numpy as np
import pytest
from scipy.special import roots_legendre

from hardykpz import radialop as ro
from hardykpz import specfun as sf
from hardykpz.errors import AssemblyError, ConfigError, DomainError, GridMismatchError

N, S = 3, 0.75
LAM_MAX = sf.hardy_constant(N, S)
REP = sf.exponents_for(N, S, LAM_MAX / 2)


@pytest.fixture(scope="module")
def desk_op():
    grid = ro.build_grid(1.0, 200, 2.0, N)
    return ro.assemble_operator(grid, N, S)


# ------------------------------------------------------------------ grids

def test_uniform_grid_nodes():
    grid = ro.build_grid(1.0, 100, 1.0, N)
    assert np.allclose(grid.r, np.arange(1, 101) / 100.0, rtol=0, atol=1e-15)


def test_graded_grid_first_node():
    grid = ro.build_grid(1.0, 100, 2.0, N)
    assert grid.r[0] == pytest.approx(1e-4, rel=1e-12)


def test_grid_volume_closed_form():
    # |B_2| in dimension 3 = 32 pi / 3
    grid = ro.build_grid(2.0, 64, 2.0, 3)
    vol = grid.integrate(np.ones(64))
    assert vol == pytest.approx(32.0 * math.pi / 3.0, rel=1e-6)
    assert np.all(grid.weights > 0)


def test_grid_validation():
    with pytest.raises(ConfigError):
        ro.build_grid(1.0, 8, 2.0, N)
    with pytest.raises(ConfigError):
        ro.build_grid(-1.0, 64, 2.0, N)
    with pytest.raises(ConfigError):
        ro.build_grid(1.0, 64, 0.5, N)


# ------------------------------------------------------------ kernel oracle

def test_closed_angular_form_matches_quadrature():
    # independent check of the hypergeometric closed form
    for n_dim, s in ((2, 0.7), (3, 0.75), (4, 0.8), (5, 0.6)):
        kern = ro._Kernel(n_dim, s)
        base = 2.0 * sf.normalizing_constant(n_dim, s)
        for z in (0.0, 0.25, 0.6, 0.9):
            direct = base * ro.angular_kernel_average(n_dim, s, z, order=200)
            closed = base * kern.closed_angular(z)
            assert direct == pytest.approx(closed, rel=1e-9)


def _power_pv_quadrature(n_dim, s, theta, r=1.0):
    """Independent principal-value quadrature of the whole-space power identity.

    Stable paired evaluation (log-difference form for the odd kernel part)
    entirely separate from the assembly code path.
    """
    kern = ro._Kernel(n_dim, s)
    C = kern.C

    def g2(x):
        return kern.g2(x)

    xg, wg = roots_legendre(80)
    xi = 0.5 * (xg + 1)
    wxi = 0.5 * wg
    m = 3.0
    t = r * xi**m
    dt = r * m * xi ** (m - 1) * wxi
    tau = t / r
    rp = r + t
    omz_p = t * (2 * r + t) / rp**2
    omz_m = t * (2 * r - t) / r**2
    kp = C * rp ** (-(n_dim + 2 * s)) * omz_p ** (-(2 * s + 1.0)) * g2(1 - omz_p) * rp ** (n_dim - 1)
    dlog = ((n_dim - 1) * (np.log1p(tau) - np.log1p(-tau))
            - (n_dim + 2 * s) * np.log1p(tau)
            - (2 * s + 1.0) * (np.log(omz_p) - np.log(omz_m))
            + np.log(g2(1 - omz_p) / g2(1 - omz_m)))
    km = kp * np.exp(-dlog)
    ge = 0.5 * (kp + km)
    go = 0.5 * km * np.expm1(dlog)
    ep = np.expm1(-theta * np.log1p(tau))
    em = np.expm1(-theta * np.log1p(-tau))
    D = (ep + em) * r**-theta
    Sodd = (ep - em) * r**-theta
    val = -np.sum((D * ge + Sodd * go) * dt)
    edges = np.geomspace(2 * r, 1e8 * r, 200)
    xg2, wg2 = roots_legendre(16)
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        hw = 0.5 * (b - a)
        rho = mid + hw * xg2
        w = hw * wg2
        mx = np.maximum(rho, r)
        omz = (mx - np.minimum(rho, r)) * (mx + np.minimum(rho, r)) / mx**2
        k2 = C * mx ** (-(n_dim + 2 * s)) * omz ** (-(2 * s + 1.0)) * g2(1 - omz) * rho ** (n_dim - 1)
        val += np.sum((r**-theta - rho**-theta) * k2 * w)
    val += C * r**-theta * (1e8 * r) ** (-2 * s) / (2 * s)
    return val


def test_power_identity_independent_quadrature():
    # the Gamma-ratio multiplier reproduced by brute quadrature of the kernel
    for n_dim, s in ((3, 0.75), (4, 0.8)):
        for frac in (0.2, 0.5, 0.8):
            theta = frac * (n_dim - 2 * s)
            got = _power_pv_quadrature(n_dim, s, theta)
            want = sf.gamma_multiplier((n_dim - 2 * s) / 2 - theta, n_dim, s)
            assert got == pytest.approx(want, rel=5e-6)


# ----------------------------------------------------------------- oracle

def test_oracle_power_profiles(desk_op):
    mu, mubar = REP.mu_exp, REP.mubar_exp
    p_mid = 0.5 * (REP.p_minus + REP.p_plus)
    theta0 = (2 * S - p_mid) / (p_mid - 1.0)
    assert ro.oracle_power_test(desk_op, mu) <= 0.02
    assert ro.oracle_power_test(desk_op, 0.5 * (mu + mubar)) <= 0.02
    assert ro.oracle_power_test(desk_op, theta0) <= 0.02
    assert ro.oracle_power_test(desk_op, mubar) <= 0.05


def test_oracle_small_exponent_absolute(desk_op):
    # multiplier vanishes as theta -> 0: absolute criterion in coefficient
    # units (normalized by r^-(theta+2s))
    theta = 0.02
    radii, _, abs_err = ro.power_test_profile(desk_op, theta)
    normalized = abs_err * radii ** (theta + 2 * S)
    assert normalized.max() <= 1e-3


def test_oracle_domain(desk_op):
    with pytest.raises(DomainError):
        ro.oracle_power_test(desk_op, 0.0)
    with pytest.raises(DomainError):
        ro.oracle_power_test(desk_op, N - 2 * S)


def test_refinement_common_window():
    grid1 = ro.build_grid(1.0, 100, 2.0, N)
    op1 = ro.assemble_operator(grid1, N, S)
    grid2 = ro.build_grid(1.0, 200, 2.0, N)
    op2 = ro.assemble_operator(grid2, N, S)
    r_lo = op1.oracle_r_min
    mu = REP.mu_exp
    _, rel1, _ = ro.power_test_profile(op1, mu)
    radii2, rel2, _ = ro.power_test_profile(op2, mu)
    e1 = rel1.max()
    e2 = rel2[radii2 >= r_lo].max()
    assert e1 / e2 >= 1.5


# ------------------------------------------------------------- application

def test_apply_linear_and_columns(desk_op):
    grid = desk_op.grid
    zero = ro.RadialField(grid, np.zeros(grid.M))
    assert ro.apply_operator(desk_op, zero).sup_norm() == 0.0
    rng = np.random.default_rng(3)
    u = ro.RadialField(grid, rng.normal(size=grid.M))
    v = ro.RadialField(grid, rng.normal(size=grid.M))
    a, b = 1.7, -0.3
    lhs = ro.apply_operator(desk_op, ro.RadialField(grid, a * u.values + b * v.values))
    rhs = a * ro.apply_operator(desk_op, u).values + b * ro.apply_operator(desk_op, v).values
    scale = np.abs(rhs).max()
    assert np.max(np.abs(lhs.values - rhs)) <= 1e-12 * scale
    e7 = np.zeros(grid.M)
    e7[7] = 1.0
    col = ro.apply_operator(desk_op, ro.RadialField(grid, e7))
    assert np.array_equal(col.values, desk_op.matrix[:, 7])


def test_apply_grid_mismatch(desk_op):
    other = ro.build_grid(1.0, 128, 2.0, N)
    with pytest.raises(GridMismatchError):
        ro.apply_operator(desk_op, ro.RadialField(other, np.zeros(128)))


def test_discrete_maximum_principle(desk_op):
    rng = np.random.default_rng(11)
    mat = desk_op.matrix
    scale = np.abs(mat).max()
    for _ in range(100):
        u = rng.random(desk_op.grid.M)
        j = int(np.argmax(u))
        assert (mat @ u)[j] >= -1e-10 * scale


def test_constant_field_row_sums_positive(desk_op):
    row_sums = desk_op.matrix @ np.ones(desk_op.grid.M)
    assert row_sums.min() > 0.0


def test_nonlocal_leakage_sign(desk_op):
    # a positive bump near the boundary pushes the operator negative near 0
    grid = desk_op.grid
    bump = np.exp(-((grid.r - 0.9) / 0.05) ** 2)
    out = desk_op.matrix @ bump
    inner = out[grid.r < 0.05]
    assert inner.min() < 0.0


# ------------------------------------------------------------ Rayleigh

def test_rayleigh_scale_invariance(desk_op):
    grid = desk_op.grid
    u = ro.RadialField(grid, (1 - grid.r**2) ** 2)
    q1 = ro.rayleigh_quotient(desk_op, u)
    q2 = ro.rayleigh_quotient(desk_op, ro.RadialField(grid, 17.0 * u.values))
    assert q1 == pytest.approx(q2, rel=1e-13)


def test_rayleigh_lower_bound_random_family(desk_op):
    grid = desk_op.grid
    rng = np.random.default_rng(7)
    for _ in range(20):
        coef = rng.random(4)
        u = sum(c * (1 - grid.r**2) ** (k + 1) for k, c in enumerate(coef))
        u = u + rng.random() * np.exp(-((grid.r - 0.5) / 0.2) ** 2)
        q = ro.rayleigh_quotient(desk_op, ro.RadialField(grid, u))
        assert q >= 0.95 * LAM_MAX


def test_rayleigh_near_optimizer_family(desk_op):
    # linearly cut-off powers approaching the critical exponent: quotients
    # stay above the sharp constant and get within 10% of it
    grid = desk_op.grid
    qs = []
    for fac in (0.95, 0.99, 1.0):
        theta = (N - 2 * S) / 2 * fac
        u = grid.r ** (-theta) * (1.0 - grid.r)
        qs.append(ro.rayleigh_quotient(desk_op, ro.RadialField(grid, u)))
    assert min(qs) >= 0.999 * LAM_MAX  # approaches from above
    assert min(qs) <= 1.10 * LAM_MAX   # and gets within 10%


def test_rayleigh_zero_field(desk_op):
    with pytest.raises(DomainError):
        ro.rayleigh_quotient(desk_op, ro.RadialField(desk_op.grid, np.zeros(200)))


# ------------------------------------------------------------- gradient

def test_gradient_constant_field():
    grid = ro.build_grid(1.0, 100, 2.0, N)
    g = ro.gradient(ro.RadialField(grid, np.full(100, 3.0)))
    assert np.max(g.values[:-1]) <= 1e-12
    assert g.values[-1] > 0.0  # jump to the exterior zero


def test_gradient_linear_field():
    grid = ro.build_grid(1.0, 100, 2.0, N)
    g = ro.gradient(ro.RadialField(grid, grid.r.copy()))
    assert np.max(np.abs(g.values[1:-1] - 1.0)) <= 1e-10


def test_gradient_power_field():
    grid = ro.build_grid(1.0, 200, 2.0, N)
    theta = 0.5
    g = ro.gradient(ro.RadialField(grid, grid.r**-theta))
    expect = theta * grid.r ** (-theta - 1.0)
    rel = np.abs(g.values - expect) / expect
    # away from endpoints: innermost and outermost 5% of nodes excluded
    assert rel[10:190].max() <= 0.05


# --------------------------------------------------------- serialization

def test_field_round_trip(tmp_path, desk_op):
    grid = desk_op.grid
    fld = ro.RadialField(grid, np.sin(grid.r * 5))
    path = os.path.join(tmp_path, "f.csv")
    ro.save_field(fld, path)
    again = ro.load_field(path)
    assert np.array_equal(again.values, fld.values)
    assert again.grid.same_as(grid)


def test_matrix_round_trip(tmp_path):
    grid = ro.build_grid(1.0, 32, 2.0, N)
    op = ro.assemble_operator(grid, N, S)
    path = os.path.join(tmp_path, "m.csv")
    ro.save_matrix(op, path)
    again = ro.load_matrix(path)
    assert np.array_equal(again.matrix, op.matrix)
    assert again.profile_exponent == op.profile_exponent
    assert again.s == op.s


# ------------------------------------------------------------- assembly

def test_assembly_kernel_check_fires():
    grid = ro.build_grid(1.0, 32, 2.0, N)
    with pytest.raises(AssemblyError):
        ro.assemble_operator(grid, N, S, angular_order=2)


def test_assembly_domain_checks():
    grid = ro.build_grid(1.0, 32, 2.0, N)
    with pytest.raises(DomainError):
        ro.assemble_operator(grid, N, S, profile_exponent=2.0)
    with pytest.raises(GridMismatchError):
        ro.assemble_operator(ro.build_grid(1.0, 32, 2.0, 4), N, S)

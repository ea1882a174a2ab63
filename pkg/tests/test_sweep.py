"""Sweeps and exponent tables: classification maps, overlays, checkpointing."""

import os

import numpy as np
import pytest

from hardykpz import specfun as sf
from hardykpz import sweep as sw
from hardykpz.errors import ConfigError

N, S = 3, 0.75
LAM_MAX = sf.hardy_constant(N, S)
LAM = LAM_MAX / 2
REP = sf.exponents_for(N, S, LAM)


def _plan(**over):
    base = dict(
        problem={"N": N, "s": S, "lambda": LAM, "p": 1.3, "mu": 1e-3},
        grid={"R": 1.0, "M": 64, "g": 2.0},
        axes=[{"name": "p", "start": 1.2, "stop": 1.6, "count": 9}],
        source={"coefficient": 0.3, "exponent": 2 * S},
        kind="kpz",
        n_levels=15,
    )
    base.update(over)
    return sw.SweepPlan(**base)


# ------------------------------------------------------------------ tables

def test_exponent_table_boundary_rows():
    rows = sw.exponent_table(N, S, [LAM_MAX, 1e-9, 2.0])
    top = rows[0]
    common = (N + 2 * S) / (N - 2 * S + 2)
    assert top["valid"] and top["p_minus"] == pytest.approx(common, rel=1e-12)
    assert top["p_plus"] == pytest.approx(common, rel=1e-12)
    small = rows[1]
    assert small["p_plus"] == pytest.approx(2 * S, abs=1e-3)
    assert small["p_minus"] == pytest.approx(N / (N - 2 * S + 1), abs=1e-3)
    assert rows[2] == {"lambda": 2.0, "valid": False}


def test_exponent_table_monotone_columns():
    lams = np.linspace(0.05, 0.95, 16) * LAM_MAX
    rows = sw.exponent_table(N, S, lams)
    p_plus = [r["p_plus"] for r in rows]
    p_minus = [r["p_minus"] for r in rows]
    assert all(b < a for a, b in zip(p_plus, p_plus[1:]))
    assert all(b > a for a, b in zip(p_minus, p_minus[1:]))
    assert all(r["chain_ok"] for r in rows)


def test_exponent_table_csv(tmp_path):
    path = os.path.join(tmp_path, "tab.csv")
    sw.write_exponent_table(path, N, S, [0.1, 2.0])
    lines = open(path).read().strip().splitlines()
    assert lines[0].startswith("lambda,")
    assert len(lines) == 3
    assert "invalid" in lines[2]


# ------------------------------------------------------------------ sweeps

def test_sweep_band_contains_critical_exponent(tmp_path):
    region = sw.run_sweep(_plan(), out_dir=str(tmp_path))
    by_status = {}
    for cell in region.cells:
        by_status.setdefault(cell.status, []).append(cell.values["p"])
    last_conv = max(by_status["Converged"])
    first_blow = min(by_status["BlowUp"])
    assert last_conv < first_blow
    assert last_conv < REP.p_plus <= first_blow
    assert first_blow - last_conv <= 0.1


def test_sweep_policy_inconclusive_at_p_plus(tmp_path):
    plan = _plan(axes=[{"name": "p", "start": REP.p_plus, "stop": REP.p_plus,
                        "count": 1}])
    region = sw.run_sweep(plan, out_dir=str(tmp_path))
    assert region.cells[0].status == "Inconclusive"
    assert "policy" in region.cells[0].note


def test_sweep_deterministic_and_resumable(tmp_path):
    d1 = os.path.join(tmp_path, "a")
    d2 = os.path.join(tmp_path, "b")
    sw.run_sweep(_plan(), out_dir=d1)
    sw.run_sweep(_plan(), out_dir=d2)
    cells1 = open(os.path.join(d1, "cells.csv"), "rb").read()
    assert cells1 == open(os.path.join(d2, "cells.csv"), "rb").read()
    over1 = open(os.path.join(d1, "overlay.json"), "rb").read()
    assert over1 == open(os.path.join(d2, "overlay.json"), "rb").read()
    # resume must not change the bytes
    sw.run_sweep(_plan(), out_dir=d1)
    assert cells1 == open(os.path.join(d1, "cells.csv"), "rb").read()


def test_sweep_empty_range():
    plan = _plan(axes=[{"name": "p", "start": 1.2, "stop": 1.2, "count": 0}])
    region = sw.run_sweep(plan)
    assert region.cells == []


def test_sweep_overlay_matches_specfun(tmp_path):
    plan = _plan(axes=[{"name": "lambda", "start": 0.1, "stop": 0.4, "count": 4}])
    region = sw.run_sweep(plan, out_dir=str(tmp_path))
    for lam, pp in zip(region.overlay["lambda"], region.overlay["p_plus"]):
        assert pp == sf.exponents_for(N, S, lam).p_plus
    assert region.overlay["two_s"] == 2 * S
    assert region.overlay["p_star"] == N / (N - 2 * S + 1)


def test_sweep_two_axes_and_mu():
    plan = _plan(axes=[{"name": "p", "start": 1.25, "stop": 1.35, "count": 2},
                       {"name": "mu", "start": 1e-4, "stop": 1e-3, "count": 2}])
    region = sw.run_sweep(plan)
    assert len(region.cells) == 4
    assert {c.status for c in region.cells} <= {"Converged", "BlowUp",
                                                "MaxIterations", "Inconclusive"}


def test_sweep_plan_validation():
    with pytest.raises(ConfigError):
        _plan(axes=[])
    with pytest.raises(ConfigError):
        _plan(axes=[{"name": "p", "start": 1.2, "stop": 1.6, "count": 9}], budget=4)
    with pytest.raises(ConfigError):
        _plan(axes=[{"name": "q", "start": 0.0, "stop": 1.0, "count": 3}])
    with pytest.raises(ConfigError):
        _plan(axes=[{"name": "lambda", "start": 0.1, "stop": 0.9, "count": 3}])
    with pytest.raises(ConfigError):
        _plan(kind="other")


def test_sweep_worker_pool_matches_serial(tmp_path):
    plan = _plan(axes=[{"name": "p", "start": 1.25, "stop": 1.55, "count": 4}],
                 grid={"R": 1.0, "M": 32, "g": 2.0}, n_levels=12)
    d1 = os.path.join(tmp_path, "serial")
    d2 = os.path.join(tmp_path, "pool")
    sw.run_sweep(plan, out_dir=d1, workers=1)
    sw.run_sweep(plan, out_dir=d2, workers=2)
    assert open(os.path.join(d1, "cells.csv"), "rb").read() == \
        open(os.path.join(d2, "cells.csv"), "rb").read()

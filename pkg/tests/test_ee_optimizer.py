import math

import numpy as np
import pytest

from helpers import grid_scan_ee, make_channel
from nlpa_mimo.ee_optimizer import (
    ROW_FIELDS,
    SweepGrid,
    aggregate_rows,
    golden_section_max,
    power_upper_bound,
    single_rf_ee,
    solve_p2,
    sweep,
)
from nlpa_mimo.errors import DomainError, InfeasibleProblemError
from nlpa_mimo.link_metrics import LinkBudget, consumed_power_single_rf
from nlpa_mimo.pa_model import LINEAR_REFERENCE_PA, REFERENCE_PA
from nlpa_mimo.scenario import LinkSetup
from nlpa_mimo.units import dbm_to_mw

NT_VALUES = (4, 8, 16, 32, 64)


def test_golden_section_on_parabola():
    x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, -2.0, 5.0, tol=1e-12)
    assert x == pytest.approx(0.3, abs=1e-6) and fx == pytest.approx(0.0, abs=1e-12)


def test_solver_matches_dense_grid(budget):
    for i in range(100):
        ch = make_channel(i, Nt=NT_VALUES[i % 5])
        sol = solve_p2(ch, REFERENCE_PA, budget)
        _, ee = grid_scan_ee(ch, REFERENCE_PA, budget)
        assert abs(sol.ee_star - ee.max()) <= 1e-6 * ee.max()
        assert sol.ee_star >= ee.max() * (1 - 1e-12)
        assert not sol.on_constraint_boundary and sol.p_upper == np.inf


def test_solution_invariants_and_stationarity(budget):
    h = 1e-4
    for i in range(20):
        ch = make_channel(i, Nt=NT_VALUES[i % 5])
        sol = solve_p2(ch, REFERENCE_PA, budget)
        assert sol.ee_star == pytest.approx(budget.bandwidth_hz * sol.se_at_star / (sol.pcons_at_star * 1e-3),
                                            rel=1e-12)
        x = math.log10(sol.p_star)
        f = lambda t: single_rf_ee(10.0**t, ch, REFERENCE_PA, budget)  # noqa: E731
        deriv = (f(x + h) - f(x - h)) / (2 * h)
        assert abs(deriv) / sol.ee_star < 1e-6
        assert sol.p_star_dbm == pytest.approx(10 * x)


def test_constraint_boundary():
    base = LinkBudget.from_dbm()
    ch = make_channel(3, Nt=16)
    free = solve_p2(ch, REFERENCE_PA, base)
    floor = consumed_power_single_rf(dbm_to_mw(-40.0), 16, REFERENCE_PA, base)
    for frac in (0.5, 0.1, 0.02):
        cap = max(frac * free.pcons_at_star, 1.5 * floor)
        budget = LinkBudget(base.noise_power, consumed_power_cap=cap)
        sol = solve_p2(ch, REFERENCE_PA, budget)
        assert sol.on_constraint_boundary
        assert sol.p_star == sol.p_upper
        assert sol.pcons_at_star == pytest.approx(cap, rel=1e-9)
        assert sol.pcons_at_star <= cap * (1 + 1e-9)
    # a cap above the unconstrained optimum leaves it interior
    loose = solve_p2(ch, REFERENCE_PA, LinkBudget(base.noise_power, consumed_power_cap=2 * free.pcons_at_star))
    assert not loose.on_constraint_boundary
    assert loose.ee_star == pytest.approx(free.ee_star, rel=1e-9)


def test_infeasible_and_bad_bounds(budget):
    ch = make_channel(0)
    tiny = LinkBudget(budget.noise_power, consumed_power_cap=1e-6)
    with pytest.raises(InfeasibleProblemError):
        solve_p2(ch, REFERENCE_PA, tiny)
    with pytest.raises(DomainError):
        solve_p2(ch, REFERENCE_PA, budget, (10.0, -10.0))
    with pytest.raises(DomainError):
        solve_p2(ch, REFERENCE_PA, budget, (-np.inf, 0.0))


def test_power_upper_bound_root():
    ch = make_channel(1, Nt=8)
    cap = 50.0
    budget = LinkBudget(float(dbm_to_mw(-105.0)), consumed_power_cap=cap)
    p_ub = power_upper_bound(ch, REFERENCE_PA, budget, 1e-4, 100.0)
    assert consumed_power_single_rf(p_ub, 8, REFERENCE_PA, budget) == pytest.approx(cap, rel=1e-9)


def test_linear_pa_optimum_is_interior(budget):
    sol = solve_p2(make_channel(2), LINEAR_REFERENCE_PA, budget)
    assert -40.0 < sol.p_star_dbm < 20.0


@pytest.mark.parametrize("nt", [4, 8, 16])
def test_ee_collapses_at_high_power(nt, budget):
    # channel-averaged EE: the 15 dBm point sits at least 10x below the peak
    P = dbm_to_mw(np.arange(-40.0, 15.01, 0.5))
    chans = [make_channel(s, Nt=nt) for s in range(100)]
    ee = np.array([[single_rf_ee(p, ch, REFERENCE_PA, budget) for p in P] for ch in chans]).mean(axis=0)
    ratio = ee.max() / ee[-1]
    assert ratio >= 10.0, f"peak / EE(15 dBm) = {ratio:.3f}"


def _grid(n_p=1, nt=(4,), seeds=(7,), schemes=("analog",), pas=("nonlinear",)):
    return SweepGrid(list(np.arange(n_p) * 0.5 - 20.0), list(nt), schemes, list(seeds), pas)


def test_sweep_row_counts(budget):
    pas = {"nonlinear": REFERENCE_PA}
    assert len(sweep(_grid(), LinkSetup(), pas, budget)) == 1
    rows = sweep(_grid(71, NT_VALUES), LinkSetup(), pas, budget)
    assert len(rows) == 355
    assert all(set(r) == set(ROW_FIELDS) for r in rows)
    order = [(r["Nt"], r["P_dBm"]) for r in rows]
    assert order == sorted(order)


def test_sweep_thread_independent(budget):
    pas = {"nonlinear": REFERENCE_PA, "linear": LINEAR_REFERENCE_PA}
    grid = _grid(8, (4, 16), (1, 2, 3), ("analog", "digital"), ("nonlinear", "linear"))
    a = sweep(grid, LinkSetup(), pas, budget, threads=1)
    b = sweep(grid, LinkSetup(), pas, budget, threads=4)
    assert a == b


def test_sweep_linear_column_monotone(budget):
    grid = _grid(71, (8,), (0, 1, 2), pas=("linear",))
    rows = sweep(grid, LinkSetup(), {"linear": LINEAR_REFERENCE_PA}, budget)
    for seed in (0, 1, 2):
        se = [r["SE"] for r in rows if r["seed"] == seed]
        assert np.all(np.diff(se) >= 0)


def test_sweep_records_errors_and_continues(budget):
    setup = LinkSetup(L=2, n_rf=3, n_s=1)  # analog needs N_RF <= L
    grid = _grid(3, (4,), (0,), ("analog", "digital"))
    rows = sweep(grid, setup, {"nonlinear": REFERENCE_PA}, budget)
    assert len(rows) == 6
    bad = [r for r in rows if r["scheme"] == "analog"]
    good = [r for r in rows if r["scheme"] == "digital"]
    assert all(r["error"] and math.isnan(r["SE"]) for r in bad)
    assert all(not r["error"] and r["SE"] > 0 for r in good)
    with pytest.raises(ValueError):
        sweep(SweepGrid([], [4], ("analog",), [0]), setup, {"nonlinear": REFERENCE_PA}, budget)


def test_aggregate_rows():
    rows = [dict(P_dBm=0.0, Nt=4, Ns=1, Nrf=1, scheme="analog", pa="nonlinear", SE=s, Pcons_mW=1.0,
                 EE_bits_per_J=2.0, error=e) for s, e in ((1.0, ""), (3.0, ""), (math.nan, "boom"))]
    (agg,) = aggregate_rows(rows)
    assert agg["SE"] == 2.0 and agg["n_channels"] == 2 and agg["n_failed"] == 1

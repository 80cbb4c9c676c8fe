"""Single-RF-chain energy-efficiency optimization and SE/EE parameter sweeps.

With one RF chain every PA sees the same input power P/Nt, so the
beamforming problem collapses to a scalar search over the total input
power P:

    maximize  SE(P) / Pcons(P)   subject to  Pcons(P) <= P_0

``Pcons`` is strictly increasing in P, so the constraint is an upper
bound ``P_ub`` on P found by root bracketing. The objective is searched
on log10(P): a coarse scan picks the bracket, golden-section search
refines it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from nlpa_mimo.channel import ChannelRealization
from nlpa_mimo.errors import DomainError, InfeasibleProblemError
from nlpa_mimo.link_metrics import (
    LinkBudget,
    consumed_power_single_rf,
    energy_efficiency,
    link_report,
    se_single_rf,
)
from nlpa_mimo.pa_model import PACoefficients
from nlpa_mimo.scenario import LinkSetup
from nlpa_mimo.units import dbm_to_mw

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class P2Solution:
    p_star: float  # mW
    ee_star: float  # bits/J
    se_at_star: float
    pcons_at_star: float  # mW
    on_constraint_boundary: bool
    p_upper: float = np.inf  # P_ub in mW (inf when unconstrained)

    @property
    def p_star_dbm(self) -> float:
        return float(10.0 * np.log10(self.p_star))


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                       max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def single_rf_ee(P: float, ch: ChannelRealization, pa: PACoefficients, budget: LinkBudget) -> float:
    """EE (bits/J) of the single-RF-chain link at total input power ``P`` (mW)."""
    se = se_single_rf(P, ch, pa, budget.noise_power)
    return energy_efficiency(se, consumed_power_single_rf(P, ch.Nt, pa, budget), budget)


def power_upper_bound(ch: ChannelRealization, pa: PACoefficients, budget: LinkBudget,
                      lo_mw: float, hi_mw: float) -> float:
    """Largest P in [lo, hi] with Pcons(P) <= P_0 (``hi`` when the cap never binds)."""
    cap = budget.consumed_power_cap
    pcons = lambda x: consumed_power_single_rf(10.0**x, ch.Nt, pa, budget) - cap  # noqa: E731
    xlo, xhi = math.log10(lo_mw), math.log10(hi_mw)
    if pcons(xlo) > 0:
        raise InfeasibleProblemError(
            f"consumed power {pcons(xlo) + cap:.6g} mW at the lower search bound exceeds the cap {cap:.6g} mW"
        )
    if not np.isfinite(cap) or pcons(xhi) <= 0:
        return hi_mw
    return 10.0 ** brentq(pcons, xlo, xhi, xtol=1e-13, rtol=4 * np.finfo(float).eps)


def solve_p2(
    ch: ChannelRealization,
    pa: PACoefficients,
    budget: LinkBudget,
    p_bounds_dbm: tuple[float, float] = (-40.0, 20.0),
    n_prescan: int = 64,
    tol: float = 1e-10,
) -> P2Solution:
    """Maximize the single-RF-chain EE over the total input power."""
    lo_dbm, hi_dbm = p_bounds_dbm
    if not (np.isfinite(lo_dbm) and np.isfinite(hi_dbm) and lo_dbm < hi_dbm):
        raise DomainError("p_bounds_dbm must be finite with lower < upper")
    lo, hi = float(dbm_to_mw(lo_dbm)), float(dbm_to_mw(hi_dbm))
    p_ub = power_upper_bound(ch, pa, budget, lo, hi)
    constrained = p_ub < hi

    obj = lambda x: single_rf_ee(10.0**x, ch, pa, budget)  # noqa: E731
    xlo, xub = math.log10(lo), math.log10(p_ub)
    grid = np.linspace(xlo, xub, n_prescan)
    vals = np.array([obj(x) for x in grid])
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_prescan - 1)]
    x_star, ee_star = golden_section_max(obj, a, b, tol=tol)
    # endpoints are feasible candidates too
    for x_end, v_end in ((grid[0], vals[0]), (grid[-1], vals[-1])):
        if v_end > ee_star:
            x_star, ee_star = x_end, v_end
    if constrained and xub - x_star <= tol:
        x_star, ee_star = xub, obj(xub)
    p_star = 10.0**x_star if x_star != xub else p_ub
    se = se_single_rf(p_star, ch, pa, budget.noise_power)
    pc = consumed_power_single_rf(p_star, ch.Nt, pa, budget)
    return P2Solution(
        p_star=p_star,
        ee_star=energy_efficiency(se, pc, budget),
        se_at_star=se,
        pcons_at_star=pc,
        on_constraint_boundary=bool(constrained and p_star == p_ub),
        p_upper=p_ub if constrained else np.inf,
    )


# --- sweeps ---

@dataclass(frozen=True)
class SweepGrid:
    p_dbm: Sequence[float]
    nt: Sequence[int]
    schemes: Sequence[str]
    seeds: Sequence[int]
    pa_labels: Sequence[str] = ("nonlinear",)


ROW_FIELDS = ("P_dBm", "Nt", "Ns", "Nrf", "scheme", "SE", "Pcons_mW", "EE_bits_per_J", "seed", "pa", "error")


def _evaluate_block(setup: LinkSetup, pas: dict, budget: LinkBudget, nt: int, scheme: str,
                    pa_label: str, seed: int, p_dbm: Sequence[float]) -> list[dict]:
    """All power points of one (Nt, scheme, PA, channel) combination."""
    base = {"Nt": nt, "Ns": setup.n_s, "Nrf": nt if scheme == "digital" else setup.n_rf,
            "scheme": scheme, "seed": seed, "pa": pa_label}
    rows = []
    try:
        ch = setup.channel(seed, nt)
        pa = pas[pa_label]
        unit_bf = None
        if not (scheme == "digital" and setup.allocation == "waterfilling"):
            unit_bf = setup.beamformer(scheme, ch, 1.0)
    except Exception as exc:  # whole block fails, one row per point records it
        return [dict(base, P_dBm=float(p), SE=math.nan, Pcons_mW=math.nan, EE_bits_per_J=math.nan,
                     error=f"{type(exc).__name__}: {exc}") for p in p_dbm]
    for p in p_dbm:
        row = dict(base, P_dBm=float(p), SE=math.nan, Pcons_mW=math.nan, EE_bits_per_J=math.nan, error="")
        try:
            P = float(dbm_to_mw(p))
            if unit_bf is not None:
                C_u = P * unit_bf.input_covariance
            else:
                C_u = setup.beamformer(scheme, ch, P, noise=budget.noise_power).input_covariance
            C_u = setup.coupled_input(C_u, seed)
            rep = link_report(ch.H, C_u, pa, budget)
            row.update(SE=rep.se_bits_per_s_hz, Pcons_mW=rep.consumed_total, EE_bits_per_J=rep.ee_bits_per_joule)
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def sweep(grid: SweepGrid, setup: LinkSetup, pas: dict[str, PACoefficients], budget: LinkBudget,
          threads: int = 1) -> list[dict]:
    """Evaluate SE / consumed power / EE on a grid.

    Rows are ordered by (Nt, scheme, pa, seed, P) regardless of how many
    worker threads evaluate them. A failing point records its error in
    the row and the sweep continues.
    """
    if not (grid.p_dbm and grid.nt and grid.schemes and grid.seeds and grid.pa_labels):
        raise ValueError("sweep grid is empty")
    tasks = [(nt, scheme, lab, seed)
             for nt in grid.nt for scheme in grid.schemes for lab in grid.pa_labels for seed in grid.seeds]
    run = lambda t: _evaluate_block(setup, pas, budget, t[0], t[1], t[2], t[3], grid.p_dbm)  # noqa: E731
    if threads <= 1:
        blocks = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            blocks = list(ex.map(run, tasks))
    return [row for block in blocks for row in block]


def aggregate_rows(rows: Iterable[dict]) -> list[dict]:
    """Average SE, Pcons and EE over channel seeds, keeping first-seen group order."""
    keys = ("P_dBm", "Nt", "Ns", "Nrf", "scheme", "pa")
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key, rs in groups.items():
        ok = [r for r in rs if not r["error"]]
        rec = dict(zip(keys, key))
        for col in ("SE", "Pcons_mW", "EE_bits_per_J"):
            rec[col] = math.fsum(r[col] for r in ok) / len(ok) if ok else math.nan
        rec["n_channels"] = len(ok)
        rec["n_failed"] = len(rs) - len(ok)
        out.append(rec)
    return out

"""Experiment drivers behind the CLI subcommands.

Each driver takes an ``ExperimentConfig`` and returns a list of ``Table``s
(name, column order, rows). Nothing here touches the filesystem; the CLI
serializes the tables.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from nlpa_mimo.beamformers import _scale_to_power
from nlpa_mimo.channel import ArrayGeometry, array_response_matrix
from nlpa_mimo.config import ExperimentConfig
from nlpa_mimo.ee_optimizer import ROW_FIELDS, SweepGrid, aggregate_rows, solve_p2, sweep
from nlpa_mimo.errors import InfeasibleProblemError
from nlpa_mimo.link_metrics import beampattern, default_angle_grid, transmit_statistics
from nlpa_mimo.oracle import ValidationConfig, ValidationReport, validate_all
from nlpa_mimo.seeding import derive_seed
from nlpa_mimo.units import dbm_to_mw

BEAMPATTERN_STREAM = 5
MEAN_FIELDS = ("P_dBm", "Nt", "Ns", "Nrf", "scheme", "pa", "SE", "Pcons_mW", "EE_bits_per_J",
               "n_channels", "n_failed")


@dataclass
class Table:
    name: str
    fields: tuple[str, ...]
    rows: list[dict]
    # grid points whose evaluation raised (not infeasibility)
    failures: list[dict] = field(default_factory=list)


def _sweep_tables(name: str, cfg: ExperimentConfig, grid: SweepGrid, n_rf=None, n_s=None,
                  threads: int = 1) -> list[Table]:
    pas = cfg.pas()
    grid = SweepGrid(grid.p_dbm, grid.nt, grid.schemes, grid.seeds, tuple(pas))
    rows = sweep(grid, cfg.setup(n_rf, n_s), pas, cfg.budget(), threads=threads)
    failures = [r for r in rows if r["error"]]
    return [Table(name, ROW_FIELDS, rows, failures), Table(name + "_mean", MEAN_FIELDS, aggregate_rows(rows))]


def run_sweep_power(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    """SE, consumed power and EE versus total PA input power for each Nt."""
    grid = SweepGrid(cfg.grid("p_dbm"), cfg.doc["sweep"]["nt"], (cfg.doc["beamforming"]["scheme"],),
                     cfg.setup().channel_seeds(cfg.n_channels))
    return _sweep_tables("sweep_power", cfg, grid, threads=threads)


def run_ee_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    """Same quantities on the wider power grid used for the EE curves."""
    grid = SweepGrid(cfg.grid("ee_p_dbm"), cfg.doc["sweep"]["nt"], (cfg.doc["beamforming"]["scheme"],),
                     cfg.setup().channel_seeds(cfg.n_channels))
    return _sweep_tables("ee_sweep", cfg, grid, threads=threads)


def run_sweep_antennas(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    """SE versus Nt at a fixed total input power."""
    sw = cfg.doc["sweep"]
    grid = SweepGrid([float(sw["antennas_p_dbm"])], sw["antennas_nt"], (cfg.doc["beamforming"]["scheme"],),
                     cfg.setup().channel_seeds(cfg.n_channels))
    return _sweep_tables("sweep_antennas", cfg, grid, threads=threads)


def run_compare_schemes(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    """All beamforming schemes at the multi-RF-chain operating point."""
    c = cfg.doc["compare"]
    grid = SweepGrid(cfg.grid("p_dbm"), [c["Nt"]], tuple(c["schemes"]), cfg.setup().channel_seeds(cfg.n_channels))
    return _sweep_tables("compare_schemes", cfg, grid, n_rf=c["Nrf"], n_s=c["Ns"], threads=threads)


BEAMPATTERN_FIELDS = ("case", "Nrf", "Ns", "angle_rad", "desired", "distortion")


def beampattern_cases(cfg: ExperimentConfig):
    """Yield (case, Nrf, Ns, F_RF, F_BB) for the steering-only and random-baseband examples."""
    bp = cfg.doc["beampattern"]
    geom = ArrayGeometry(bp["Nt"], cfg.doc["system"]["tx_spacing"])
    aods = np.asarray(bp["aods"], dtype=float)
    for ns in bp["ns_list"]:
        f_rf = array_response_matrix(aods[:ns], geom)
        yield "steered", ns, ns, f_rf, np.eye(ns, dtype=complex) / np.sqrt(ns)
    nrf = bp["hybrid_nrf"]
    f_rf = array_response_matrix(aods[:nrf], geom)
    for ns in bp["hybrid_ns_list"]:
        rng = np.random.default_rng(derive_seed(cfg.base_seed, BEAMPATTERN_STREAM, ns))
        f_bb = (rng.standard_normal((nrf, ns)) + 1j * rng.standard_normal((nrf, ns))) / np.sqrt(2)
        yield "gaussian_baseband", nrf, ns, f_rf, f_bb


def run_beampattern(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    """Normalized radiated patterns of the desired signal and of the PA distortion."""
    bp = cfg.doc["beampattern"]
    geom = ArrayGeometry(bp["Nt"], cfg.doc["system"]["tx_spacing"])
    angles = default_angle_grid(bp["n_angles"])
    P = float(dbm_to_mw(bp["p_dbm"]))
    pa = cfg.pa()
    rows = []
    for case, nrf, ns, f_rf, f_bb in beampattern_cases(cfg):
        if ns > len(bp["aods"]) or nrf > len(bp["aods"]):
            raise ValueError(f"beampattern case needs {max(ns, nrf)} AoDs, only {len(bp['aods'])} given")
        F = f_rf @ _scale_to_power(f_rf, f_bb, P)
        st = transmit_statistics(F @ F.conj().T, pa)
        des = beampattern(st.desired_cov, geom, angles).values
        dis = beampattern(st.distortion_cov, geom, angles).values
        for a, x, y in zip(angles, des, dis):
            rows.append({"case": case, "Nrf": nrf, "Ns": ns, "angle_rad": float(a),
                         "desired": float(x), "distortion": float(y)})
    return [Table("beampattern", BEAMPATTERN_FIELDS, rows)]


OPTIMIZE_FIELDS = ("Nt", "seed", "P_star_dBm", "P_star_mW", "EE_bits_per_J", "SE", "Pcons_mW",
                   "on_constraint_boundary", "P_upper_mW", "status", "error")


def _solve_one(cfg: ExperimentConfig, setup, pa, budget, nt: int, seed: int) -> dict:
    row = {"Nt": nt, "seed": seed, "P_star_dBm": math.nan, "P_star_mW": math.nan, "EE_bits_per_J": math.nan,
           "SE": math.nan, "Pcons_mW": math.nan, "on_constraint_boundary": False, "P_upper_mW": math.nan,
           "status": "ok", "error": ""}
    opt = cfg.doc["optimizer"]
    try:
        sol = solve_p2(setup.channel(seed, nt), pa, budget, tuple(opt["p_bounds_dbm"]), opt["n_prescan"], opt["tol"])
    except InfeasibleProblemError as exc:
        row.update(status="infeasible", error=str(exc))
        return row
    except Exception as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return row
    row.update(P_star_dBm=sol.p_star_dbm, P_star_mW=sol.p_star, EE_bits_per_J=sol.ee_star, SE=sol.se_at_star,
               Pcons_mW=sol.pcons_at_star, on_constraint_boundary=sol.on_constraint_boundary,
               P_upper_mW=sol.p_upper)
    return row


def run_optimize_ee(cfg: ExperimentConfig, threads: int = 1) -> list[Table]:
    """Energy-efficiency-optimal input power of the single-RF-chain link, per channel."""
    setup, pa, budget = cfg.setup(1, 1), cfg.pa(), cfg.budget()
    tasks = [(nt, seed) for nt in cfg.doc["sweep"]["nt"] for seed in setup.channel_seeds(cfg.n_channels)]
    run = lambda t: _solve_one(cfg, setup, pa, budget, *t)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    return [Table("optimize_ee", OPTIMIZE_FIELDS, rows, [r for r in rows if r["status"] == "failed"])]


VALIDATE_FIELDS = ("name", "measured", "tolerance", "passed", "detail")


def validation_config(cfg: ExperimentConfig, threads: int = 1) -> ValidationConfig:
    v, s = cfg.doc["validation"], cfg.doc["system"]
    return ValidationConfig(
        pa=cfg.pa(), seed=cfg.base_seed, mc_samples=v["mc_samples"], moment_draws=v["moment_draws"],
        n_channels=v["n_channels"], Nt=s["Nt"], Nr=s["Nr"], L=s["L"], noise_dbm=cfg.doc["budget"]["noise_dbm"],
        threads=threads,
    )


def run_validate(cfg: ExperimentConfig, threads: int = 1) -> tuple[list[Table], ValidationReport]:
    report = validate_all(validation_config(cfg, threads))
    rows = [{"name": c.name, "measured": c.measured, "tolerance": c.tolerance, "passed": c.passed,
             "detail": c.detail} for c in report.checks]
    return [Table("validate", VALIDATE_FIELDS, rows)], report

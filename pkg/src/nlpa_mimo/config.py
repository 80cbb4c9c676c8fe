"""Experiment configuration: built-in defaults, JSON loading and schema validation.

A config document is plain JSON. Every section is optional; the user's
document is deep-merged over ``DEFAULTS`` and the merged result is checked
against the shipped JSON schema before anything is computed. Power levels
are given in dBm here and converted to mW once, in the accessors below.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from nlpa_mimo.channel import AngleDistribution, PathLossModel
from nlpa_mimo.errors import ConfigurationError
from nlpa_mimo.link_metrics import LinkBudget
from nlpa_mimo.pa_model import PACoefficients
from nlpa_mimo.scenario import CrosstalkSpec, LinkSetup

# Fixed evaluation parameters of the reference mmWave link.
DEFAULTS: dict[str, Any] = {
    "system": {
        "Nt": 16, "Nr": 16, "Nrf": 1, "Ns": 1, "L": 5,
        "distance_m": 15.0, "tx_spacing": 0.5, "rx_spacing": 0.5, "carrier_ghz": 73.0,
    },
    "pa": {
        "name": "reference",
        "unit_convention": "milliwatt",
        "coeffs": [
            {"mag": 2.96, "phase": 0.0},
            {"mag": 0.1418, "phase": -2.816},
            {"mag": 0.003, "phase": 0.39},
        ],
    },
    "budget": {
        "noise_dbm": -105.0, "bandwidth_hz": 1e9, "pa_max_output_dbm": 6.0,
        "pa_max_efficiency": 0.3, "consumed_power_cap_dbm": None,
    },
    "channel": {
        "path_loss_fixed_db": 86.6, "path_loss_slope_db": 24.5, "shadowing_std_db": 8.0,
        "shadowing_mode": "per_realization",
        "angles": {"kind": "uniform", "low": -math.pi / 2, "high": math.pi / 2},
    },
    "beamforming": {"scheme": "analog", "quantization_bits": 4, "dictionary_size": 256, "allocation": "equal"},
    "crosstalk": None,
    "sweep": {
        "p_dbm": {"start": -20.0, "stop": 15.0, "step": 0.5},
        "ee_p_dbm": {"start": -40.0, "stop": 15.0, "step": 0.5},
        "nt": [4, 8, 16, 32, 64],
        "antennas_nt": [2, 4, 8, 16, 24, 32, 48, 64, 96, 128],
        "antennas_p_dbm": 10.0,
        "include_linear": True,
    },
    "compare": {"Nt": 16, "Nrf": 5, "Ns": 5, "schemes": ["digital", "analog", "hybrid", "quantized_analog"]},
    "beampattern": {
        "Nt": 8,
        "aods": [0.0, -math.pi / 4, math.pi / 6, math.pi / 3, -math.pi / 12],
        "ns_list": [1, 3, 5],
        "hybrid_nrf": 5,
        "hybrid_ns_list": [1, 2, 4],
        "p_dbm": 10.0,
        "n_angles": 1024,
    },
    "optimizer": {"p_bounds_dbm": [-40.0, 20.0], "n_prescan": 64, "tol": 1e-10},
    "seeds": {"base_seed": 0, "n_channels": 100},
    "validation": {"mc_samples": 1_000_000, "n_channels": 200, "moment_draws": 50},
}


class SchemaError(ConfigurationError):
    """Config document violates the schema; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def load_schema() -> dict:
    text = resources.files("nlpa_mimo").joinpath("data/experiment.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _format_path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


def validate_document(doc: dict) -> None:
    """Raise ``SchemaError`` for the first (deepest-path) schema violation."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (-len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = jsonschema.exceptions.best_match(errors) or errors[0]
        raise SchemaError(_format_path(e.absolute_path), e.message)


def expand_grid(spec) -> list[float]:
    """``{"start","stop","step"}`` (inclusive stop) or an explicit list of values."""
    if isinstance(spec, list):
        return [float(x) for x in spec]
    start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
    if stop < start:
        raise ConfigurationError("grid stop must be >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    # integer multiples of step keep grid points free of accumulated drift
    return [float(np.round(start + k * step, 12)) for k in range(n)]


@dataclass(frozen=True)
class ExperimentConfig:
    doc: dict

    # --- construction ---

    @classmethod
    def from_dict(cls, user: Optional[dict] = None, seed: Optional[int] = None) -> "ExperimentConfig":
        user = user or {}
        if not isinstance(user, dict):
            raise SchemaError("<root>", "config document must be a JSON object")
        validate_document(user)
        doc = deep_merge(DEFAULTS, user)
        if seed is not None:
            doc["seeds"]["base_seed"] = int(seed)
        validate_document(doc)
        cfg = cls(doc)
        cfg._check_consistency()
        return cfg

    @classmethod
    def load(cls, path: Optional[str | Path] = None, seed: Optional[int] = None) -> "ExperimentConfig":
        if path is None:
            return cls.from_dict({}, seed)
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError("<root>", f"invalid JSON: {exc}") from exc
        return cls.from_dict(user, seed)

    def _check_consistency(self):
        s = self.doc["system"]
        if s["Ns"] > s["Nrf"]:
            raise SchemaError("system.Ns", f"Ns={s['Ns']} exceeds Nrf={s['Nrf']}")
        lo, hi = self.doc["optimizer"]["p_bounds_dbm"]
        if not lo < hi:
            raise SchemaError("optimizer.p_bounds_dbm", "lower bound must be below upper bound")
        self.pa()  # coefficient sanity (beta_1 != 0, finite)

    # --- identity ---

    def to_json(self) -> str:
        return json.dumps(self.doc, sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    # --- typed accessors ---

    def section(self, name: str) -> dict:
        return self.doc[name]

    def pa(self) -> PACoefficients:
        try:
            return PACoefficients.from_spec(self.doc["pa"])
        except ValueError as exc:
            raise SchemaError("pa.coeffs", str(exc)) from exc

    def linear_pa(self) -> PACoefficients:
        return self.pa().linear_part()

    def pas(self, include_linear: Optional[bool] = None) -> dict[str, PACoefficients]:
        if include_linear is None:
            include_linear = self.doc["sweep"]["include_linear"]
        out = {"nonlinear": self.pa()}
        if include_linear:
            out["linear"] = self.linear_pa()
        return out

    def budget(self) -> LinkBudget:
        b = self.doc["budget"]
        return LinkBudget.from_dbm(
            noise_dbm=b["noise_dbm"],
            bandwidth_hz=b["bandwidth_hz"],
            pa_max_output_dbm=b["pa_max_output_dbm"],
            pa_max_efficiency=b["pa_max_efficiency"],
            consumed_power_cap_dbm=b["consumed_power_cap_dbm"],
        )

    def path_loss(self) -> PathLossModel:
        c = self.doc["channel"]
        return PathLossModel(c["path_loss_fixed_db"], c["path_loss_slope_db"], c["shadowing_std_db"],
                             self.doc["system"]["distance_m"])

    def crosstalk(self) -> Optional[CrosstalkSpec]:
        ct = self.doc["crosstalk"]
        if ct is None:
            return None
        return CrosstalkSpec(ct.get("model", "identity_plus_offdiag"), ct["sigma_ct_db"],
                             ct.get("normalize_power", True))

    def setup(self, n_rf: Optional[int] = None, n_s: Optional[int] = None) -> LinkSetup:
        s, c, bf = self.doc["system"], self.doc["channel"], self.doc["beamforming"]
        a = c["angles"]
        return LinkSetup(
            Nr=s["Nr"],
            L=s["L"],
            n_rf=s["Nrf"] if n_rf is None else n_rf,
            n_s=s["Ns"] if n_s is None else n_s,
            tx_spacing=s["tx_spacing"],
            rx_spacing=s["rx_spacing"],
            path_loss=self.path_loss(),
            angles=AngleDistribution(a.get("kind", "uniform"), a.get("low", -math.pi / 2), a.get("high", math.pi / 2)),
            shadowing_mode=c["shadowing_mode"],
            base_seed=self.base_seed,
            quantization_bits=bf["quantization_bits"],
            dictionary_size=bf["dictionary_size"],
            allocation=bf["allocation"],
            crosstalk=self.crosstalk(),
        )

    @property
    def base_seed(self) -> int:
        return int(self.doc["seeds"]["base_seed"])

    @property
    def n_channels(self) -> int:
        return int(self.doc["seeds"]["n_channels"])

    def grid(self, key: str) -> list[float]:
        return expand_grid(self.doc["sweep"][key])

"""Experiment-level link setup: array sizes, path loss, seeding and crosstalk."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from nlpa_mimo.beamformers import Beamformer, build_beamformer, default_dictionary
from nlpa_mimo.channel import (
    AngleDistribution,
    ArrayGeometry,
    ChannelRealization,
    PathLossModel,
    generate_channel,
)
from nlpa_mimo.distortion import apply_crosstalk, sample_crosstalk
from nlpa_mimo.errors import ConfigurationError
from nlpa_mimo.seeding import CHANNEL_STREAM, CROSSTALK_STREAM, SHADOWING_STREAM, derive_seed
from nlpa_mimo.units import db_to_linear

SHADOWING_MODES = ("per_realization", "fixed", "off")


@dataclass(frozen=True)
class CrosstalkSpec:
    model: str = "identity_plus_offdiag"
    sigma_ct_db: float = -20.0
    # rescale B C_u B^H so the total PA input power stays P
    normalize_power: bool = True

    @property
    def sigma_ct_sq(self) -> float:
        return float(db_to_linear(self.sigma_ct_db))


@dataclass(frozen=True)
class LinkSetup:
    Nr: int = 16
    L: int = 5
    n_rf: int = 1
    n_s: int = 1
    tx_spacing: float = 0.5
    rx_spacing: float = 0.5
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    angles: AngleDistribution = field(default_factory=AngleDistribution)
    shadowing_mode: str = "per_realization"
    base_seed: int = 0
    quantization_bits: int = 4
    dictionary_size: int = 256
    allocation: str = "equal"
    crosstalk: Optional[CrosstalkSpec] = None

    def __post_init__(self):
        if self.shadowing_mode not in SHADOWING_MODES:
            raise ConfigurationError(f"shadowing_mode must be one of {SHADOWING_MODES}")

    def channel_seed(self, index: int) -> int:
        return derive_seed(self.base_seed, CHANNEL_STREAM, index)

    def channel_seeds(self, n: int) -> list[int]:
        return [self.channel_seed(i) for i in range(n)]

    def _shadowing_override(self) -> Optional[float]:
        if self.shadowing_mode == "off":
            return 0.0
        if self.shadowing_mode == "fixed":
            rng = np.random.default_rng(derive_seed(self.base_seed, SHADOWING_STREAM))
            return float(self.path_loss.shadowing_std_db * rng.standard_normal())
        return None

    def channel(self, seed: int, Nt: int) -> ChannelRealization:
        return generate_channel(
            seed,
            self.L,
            ArrayGeometry(Nt, self.tx_spacing),
            ArrayGeometry(self.Nr, self.rx_spacing),
            self.path_loss,
            self.angles,
            shadowing_db=self._shadowing_override(),
        )

    def beamformer(self, scheme: str, ch: ChannelRealization, P: float, noise: float | None = None) -> Beamformer:
        return build_beamformer(
            scheme,
            ch,
            self.n_rf,
            self.n_s,
            P,
            bits=self.quantization_bits,
            dictionary=default_dictionary(self.dictionary_size),
            allocation=self.allocation,
            noise=noise,
        )

    def coupled_input(self, C_u: np.ndarray, seed: int) -> np.ndarray:
        """Apply pre-PA crosstalk drawn for channel ``seed`` (identity when disabled)."""
        if self.crosstalk is None:
            return C_u
        B = sample_crosstalk(
            derive_seed(seed, CROSSTALK_STREAM), C_u.shape[0], self.crosstalk.sigma_ct_sq, self.crosstalk.model
        )
        C = apply_crosstalk(C_u, B)
        if self.crosstalk.normalize_power:
            tr = np.trace(C).real
            if tr > 0:
                C = C * (np.trace(C_u).real / tr)
        return C

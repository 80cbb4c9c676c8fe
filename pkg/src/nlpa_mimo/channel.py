"""Geometric cluster channel with ULA responses at both ends.

    H = sqrt(Nt Nr / L) sum_l psi_l a_r(theta_l) a_t(phi_l)^H

The path gains ``psi_l`` are i.i.d. CN(0, 10^{-PL/10}) where the path
loss includes a log-normal shadowing draw. Every random quantity of a
realization comes from one ``numpy.random.Generator`` seeded by the
integer ``seed``; the draw order is fixed (shadowing, gains, AoDs,
AoAs) so the same seed yields the same physical channel for any array
size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from nlpa_mimo.errors import ConfigurationError


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array; ``spacing`` is in carrier wavelengths."""

    num_elements: int
    spacing: float = 0.5

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ConfigurationError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.spacing > 0:
            raise ConfigurationError(f"spacing must be positive, got {self.spacing}")


@dataclass(frozen=True)
class PathLossModel:
    """PL(d) = fixed_db + slope_db_per_decade * log10(d) + zeta, zeta ~ N(0, shadowing_std_db^2)."""

    fixed_db: float = 86.6
    slope_db_per_decade: float = 24.5
    shadowing_std_db: float = 8.0
    distance_m: float = 15.0

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ConfigurationError("distance_m must be positive")
        if self.shadowing_std_db < 0:
            raise ConfigurationError("shadowing_std_db must be nonnegative")

    def mean_db(self) -> float:
        return self.fixed_db + self.slope_db_per_decade * np.log10(self.distance_m)

    def path_loss_db(self, shadowing_db: float = 0.0) -> float:
        return self.mean_db() + shadowing_db


@dataclass(frozen=True)
class AngleDistribution:
    """Distribution of AoDs/AoAs. Only ``uniform`` on [low, high) is supported."""

    kind: str = "uniform"
    low: float = -np.pi / 2
    high: float = np.pi / 2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind != "uniform":
            raise ConfigurationError(f"unknown angle distribution {self.kind!r}")
        if not self.low < self.high:
            raise ConfigurationError("angle distribution needs low < high")
        return rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray
    path_gains: np.ndarray
    aod: np.ndarray
    aoa: np.ndarray
    tx_geometry: ArrayGeometry
    rx_geometry: ArrayGeometry
    shadowing_db: float = 0.0
    seed: Optional[int] = None

    @property
    def L(self) -> int:
        return len(self.path_gains)

    @property
    def Nt(self) -> int:
        return self.tx_geometry.num_elements

    @property
    def Nr(self) -> int:
        return self.rx_geometry.num_elements

    def to_json(self) -> str:
        return json.dumps(channel_to_dict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        return channel_from_dict(json.loads(text))


def array_response(angle: float, geometry: ArrayGeometry) -> np.ndarray:
    """Unit-norm ULA response; element k is exp(-j 2 pi k D sin(angle)) / sqrt(N)."""
    k = np.arange(geometry.num_elements)
    return np.exp(-2j * np.pi * k * geometry.spacing * np.sin(angle)) / np.sqrt(geometry.num_elements)


def array_response_matrix(angles, geometry: ArrayGeometry) -> np.ndarray:
    """Columns are ``array_response`` at each angle (N x len(angles))."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    k = np.arange(geometry.num_elements)[:, None]
    return np.exp(-2j * np.pi * k * geometry.spacing * np.sin(angles)[None, :]) / np.sqrt(
        geometry.num_elements
    )


def assemble_channel(path_gains, aod, aoa, tx: ArrayGeometry, rx: ArrayGeometry) -> np.ndarray:
    path_gains = np.asarray(path_gains, dtype=complex)
    L = len(path_gains)
    At = array_response_matrix(aod, tx)
    Ar = array_response_matrix(aoa, rx)
    return np.sqrt(tx.num_elements * rx.num_elements / L) * (Ar * path_gains[None, :]) @ At.conj().T


def generate_channel(
    seed: int,
    L: int,
    tx: ArrayGeometry,
    rx: ArrayGeometry,
    pl: PathLossModel,
    angle_sampler: AngleDistribution = AngleDistribution(),
    shadowing_db: Optional[float] = None,
) -> ChannelRealization:
    """Draw one channel realization.

    ``shadowing_db`` overrides the log-normal draw (pass a shared value
    to hold large-scale fading fixed across realizations). The rng draw
    is still consumed so the small-scale stream does not shift.
    """
    if int(L) != L or L < 1:
        raise ConfigurationError(f"L must be a positive integer, got {L}")
    if not isinstance(angle_sampler, AngleDistribution) or angle_sampler.kind != "uniform":
        raise ConfigurationError(f"unsupported angle distribution {angle_sampler!r}")
    rng = np.random.default_rng(seed)
    zeta = pl.shadowing_std_db * rng.standard_normal()
    if shadowing_db is not None:
        zeta = float(shadowing_db)
    variance = 10.0 ** (-0.1 * pl.path_loss_db(zeta))
    psi = np.sqrt(variance / 2.0) * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
    aod = angle_sampler.sample(rng, L)
    aoa = angle_sampler.sample(rng, L)
    H = assemble_channel(psi, aod, aoa, tx, rx)
    return ChannelRealization(H, psi, aod, aoa, tx, rx, shadowing_db=float(zeta), seed=seed)


def with_tx_array(ch: ChannelRealization, tx: ArrayGeometry) -> ChannelRealization:
    """Same paths seen through a different transmit array."""
    H = assemble_channel(ch.path_gains, ch.aod, ch.aoa, tx, ch.rx_geometry)
    return ChannelRealization(H, ch.path_gains, ch.aod, ch.aoa, tx, ch.rx_geometry, ch.shadowing_db, ch.seed)


def dominant_path(ch: ChannelRealization) -> tuple[float, float, int]:
    """(AoD, AoA, index) of the path with the largest |psi|; lowest index wins ties."""
    mags = np.abs(ch.path_gains)
    idx = int(np.flatnonzero(mags == mags.max())[0])
    return float(ch.aod[idx]), float(ch.aoa[idx]), idx


def effective_channel(ch: ChannelRealization) -> np.ndarray:
    """H a_t(phi_max), length Nr."""
    phi, _, _ = dominant_path(ch)
    return ch.H @ array_response(phi, ch.tx_geometry)


def effective_channel_gain(ch: ChannelRealization) -> float:
    """|a_r(theta_max)^H H a_t(phi_max)|^2."""
    phi, theta, _ = dominant_path(ch)
    v = np.vdot(array_response(theta, ch.rx_geometry), ch.H @ array_response(phi, ch.tx_geometry))
    return float(abs(v) ** 2)


# --- JSON round trip: complex numbers as [re, im] pairs ---

def complex_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [complex_to_json(x) for x in a]


def complex_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def channel_to_dict(ch: ChannelRealization) -> dict:
    return {
        "H": complex_to_json(ch.H),
        "path_gains": complex_to_json(ch.path_gains),
        "aod": [float(x) for x in ch.aod],
        "aoa": [float(x) for x in ch.aoa],
        "tx": {"num_elements": ch.Nt, "spacing": ch.tx_geometry.spacing},
        "rx": {"num_elements": ch.Nr, "spacing": ch.rx_geometry.spacing},
        "shadowing_db": ch.shadowing_db,
        "seed": ch.seed,
    }


def channel_from_dict(d: dict) -> ChannelRealization:
    H = complex_from_json(d["H"]).reshape(d["rx"]["num_elements"], d["tx"]["num_elements"])
    return ChannelRealization(
        H=H,
        path_gains=np.atleast_1d(complex_from_json(d["path_gains"])),
        aod=np.asarray(d["aod"], dtype=float),
        aoa=np.asarray(d["aoa"], dtype=float),
        tx_geometry=ArrayGeometry(**d["tx"]),
        rx_geometry=ArrayGeometry(**d["rx"]),
        shadowing_db=d.get("shadowing_db", 0.0),
        seed=d.get("seed"),
    )

"""Transmit filters for the digital, analog, quantized-analog and hybrid schemes.

Every constructor returns a ``Beamformer`` whose input covariance
``C_u = F_RF F_BB F_BB^H F_RF^H`` has trace equal to the requested total
input power ``P`` (mW).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from nlpa_mimo.channel import ChannelRealization, array_response_matrix, complex_from_json, complex_to_json
from nlpa_mimo.errors import ConfigurationError

SCHEMES = ("digital", "analog", "hybrid", "quantized_analog")


@dataclass(frozen=True)
class Beamformer:
    f_rf: np.ndarray  # Nt x N_RF
    f_bb: np.ndarray  # N_RF x Ns
    total_input_power: float
    constant_modulus: bool = True  # False for the fully digital scheme

    @property
    def precoder(self) -> np.ndarray:
        return self.f_rf @ self.f_bb

    @property
    def input_covariance(self) -> np.ndarray:
        F = self.precoder
        C = F @ F.conj().T
        return (C + C.conj().T) / 2

    @property
    def Nt(self) -> int:
        return self.f_rf.shape[0]

    @property
    def n_rf(self) -> int:
        return self.f_rf.shape[1]

    @property
    def n_streams(self) -> int:
        return self.f_bb.shape[1]

    def to_dict(self) -> dict:
        return {
            "f_rf": complex_to_json(self.f_rf),
            "f_bb": complex_to_json(self.f_bb),
            "total_input_power": self.total_input_power,
            "constant_modulus": self.constant_modulus,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Beamformer":
        f_rf = np.atleast_2d(complex_from_json(d["f_rf"]))
        f_bb = np.atleast_2d(complex_from_json(d["f_bb"]))
        return cls(f_rf, f_bb, d["total_input_power"], d.get("constant_modulus", True))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _scale_to_power(f_rf: np.ndarray, f_bb: np.ndarray, P: float) -> np.ndarray:
    norm2 = np.linalg.norm(f_rf @ f_bb) ** 2
    if norm2 == 0:
        raise ConfigurationError("beamformer has zero gain")
    return f_bb * np.sqrt(P / norm2)


def _strongest_paths(ch: ChannelRealization, k: int) -> np.ndarray:
    # stable sort: equal magnitudes keep index order
    return np.argsort(-np.abs(ch.path_gains), kind="stable")[:k]


def analog_aod(ch: ChannelRealization, n_rf: int, n_s: int, P: float) -> Beamformer:
    """F_RF = steering vectors of the ``n_rf`` strongest AoDs, F_BB a scaled identity block."""
    if not 1 <= n_s <= n_rf:
        raise ConfigurationError(f"need 1 <= Ns <= N_RF, got Ns={n_s}, N_RF={n_rf}")
    if n_rf > ch.L:
        raise ConfigurationError(f"N_RF={n_rf} exceeds the number of paths L={ch.L}")
    idx = _strongest_paths(ch, n_rf)
    f_rf = array_response_matrix(ch.aod[idx], ch.tx_geometry)
    f_bb = np.eye(n_rf, n_s, dtype=complex)
    return Beamformer(f_rf, _scale_to_power(f_rf, f_bb, P), float(P))


def waterfilling(gains: np.ndarray, total: float) -> np.ndarray:
    """Power split maximizing sum log(1 + g_i p_i) subject to sum p_i = total."""
    gains = np.asarray(gains, dtype=float)
    order = np.argsort(-gains)
    g = gains[order]
    p = np.zeros_like(g)
    for k in range(len(g), 0, -1):
        level = (total + np.sum(1.0 / g[:k])) / k
        alloc = level - 1.0 / g[:k]
        if alloc[-1] > 0:
            p[:k] = alloc
            break
    out = np.empty_like(p)
    out[order] = p
    return out


def digital_eigen(
    ch: ChannelRealization,
    n_s: int,
    P: float,
    allocation: str = "equal",
    noise: float | None = None,
) -> Beamformer:
    """Fully digital precoder on the top ``n_s`` right singular vectors of H.

    ``allocation="waterfilling"`` needs ``noise`` and splits power over the
    stream SNRs of the linear channel; the default is an equal split.
    """
    _, sv, Vh = np.linalg.svd(ch.H)
    tol = sv.max() * max(ch.H.shape) * np.finfo(float).eps if sv.size else 0.0
    rank = int(np.sum(sv > tol))
    if not 1 <= n_s <= rank:
        raise ConfigurationError(f"Ns={n_s} exceeds the channel rank {rank}")
    V = Vh.conj().T[:, :n_s]
    if allocation == "equal":
        powers = np.full(n_s, P / n_s)
    elif allocation == "waterfilling":
        if noise is None:
            raise ConfigurationError("waterfilling needs the noise power")
        powers = waterfilling(sv[:n_s] ** 2 / noise, P)
    else:
        raise ConfigurationError(f"unknown power allocation {allocation!r}")
    f_rf = np.eye(ch.Nt, dtype=complex)
    f_bb = V * np.sqrt(powers)[None, :]
    return Beamformer(f_rf, f_bb, float(P), constant_modulus=False)


def quantize_phases(bf: Beamformer, bits: int) -> Beamformer:
    """Round every F_RF phase to the nearest multiple of 2 pi / 2^bits, then restore trace(C_u)."""
    if bits < 1:
        raise ConfigurationError("bits must be >= 1")
    step = 2 * np.pi / 2**bits
    mag = np.abs(bf.f_rf)
    phase = np.round(np.angle(bf.f_rf) / step) * step
    f_rf = mag * np.exp(1j * phase)
    return Beamformer(f_rf, _scale_to_power(f_rf, bf.f_bb, bf.total_input_power), bf.total_input_power,
                      bf.constant_modulus)


def default_dictionary(n: int = 256) -> np.ndarray:
    """AoD grid uniformly spaced in sin(angle) over [-1, 1)."""
    return np.arcsin(-1.0 + 2.0 * np.arange(n) / n)


def hybrid_omp(
    ch: ChannelRealization,
    n_rf: int,
    n_s: int,
    P: float,
    dictionary=None,
) -> Beamformer:
    """Spatially sparse precoding by orthogonal matching pursuit.

    Greedily picks ``n_rf`` steering vectors from ``dictionary`` (AoDs in
    radians) that best correlate with the residual of the optimal
    unconstrained precoder (top ``n_s`` right singular vectors), refits
    F_BB by least squares after each pick, then scales to power ``P``.
    """
    dictionary = default_dictionary() if dictionary is None else np.asarray(dictionary, dtype=float)
    if not 1 <= n_s <= n_rf:
        raise ConfigurationError(f"need 1 <= Ns <= N_RF, got Ns={n_s}, N_RF={n_rf}")
    if dictionary.size < n_rf:
        raise ConfigurationError(f"dictionary of {dictionary.size} atoms is smaller than N_RF={n_rf}")
    A = array_response_matrix(dictionary, ch.tx_geometry)
    _, _, Vh = np.linalg.svd(ch.H)
    F_opt = Vh.conj().T[:, :n_s]
    F_res = F_opt.copy()
    chosen: list[int] = []
    f_bb = np.zeros((0, n_s), dtype=complex)
    for _ in range(n_rf):
        corr = np.sum(np.abs(A.conj().T @ F_res) ** 2, axis=1)
        k = int(np.argmax(corr))
        chosen.append(k)
        f_rf = A[:, chosen]
        f_bb = np.linalg.lstsq(f_rf, F_opt, rcond=None)[0]
        R = F_opt - f_rf @ f_bb
        nrm = np.linalg.norm(R)
        F_res = R / nrm if nrm > 0 else R
    f_rf = A[:, chosen]
    return Beamformer(f_rf, _scale_to_power(f_rf, f_bb, P), float(P))


def build_beamformer(
    scheme: str,
    ch: ChannelRealization,
    n_rf: int,
    n_s: int,
    P: float,
    *,
    bits: int = 4,
    dictionary=None,
    allocation: str = "equal",
    noise: float | None = None,
) -> Beamformer:
    if scheme == "analog":
        return analog_aod(ch, n_rf, n_s, P)
    if scheme == "quantized_analog":
        return quantize_phases(analog_aod(ch, n_rf, n_s, P), bits)
    if scheme == "digital":
        return digital_eigen(ch, n_s, P, allocation=allocation, noise=noise)
    if scheme == "hybrid":
        return hybrid_omp(ch, n_rf, n_s, P, dictionary)
    raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")

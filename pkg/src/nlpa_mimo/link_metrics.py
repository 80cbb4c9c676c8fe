"""Spectral efficiency, beampatterns, PA power consumption and energy efficiency.

Powers are in milliwatts throughout (noise included). Covariances are
converted into the PA unit convention only where the polynomial kernels
are evaluated. Energy efficiency is reported in bits/J.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from nlpa_mimo.channel import (
    ArrayGeometry,
    ChannelRealization,
    array_response_matrix,
    effective_channel,
    effective_channel_gain,
)
from nlpa_mimo.distortion import check_hermitian_cov, distortion_covariance
from nlpa_mimo.errors import DomainError, ValidationError
from nlpa_mimo.pa_model import PACoefficients, avg_linear_gain, gbar_d, gbar_s
from nlpa_mimo.units import dbm_to_mw, mw_to_w

LN2 = np.log(2.0)


@dataclass(frozen=True)
class LinkBudget:
    """Noise, bandwidth and PA power model. All powers in mW."""

    noise_power: float
    bandwidth_hz: float = 1e9
    pa_max_output: float = float(dbm_to_mw(6.0))
    pa_max_efficiency: float = 0.3
    consumed_power_cap: float = np.inf

    def __post_init__(self):
        for name in ("noise_power", "bandwidth_hz", "pa_max_output", "pa_max_efficiency", "consumed_power_cap"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.pa_max_efficiency > 1:
            raise DomainError("pa_max_efficiency must be <= 1")

    @classmethod
    def from_dbm(
        cls,
        noise_dbm: float = -105.0,
        bandwidth_hz: float = 1e9,
        pa_max_output_dbm: float = 6.0,
        pa_max_efficiency: float = 0.3,
        consumed_power_cap_dbm: float | None = None,
    ) -> "LinkBudget":
        cap = np.inf if consumed_power_cap_dbm is None else float(dbm_to_mw(consumed_power_cap_dbm))
        return cls(
            noise_power=float(dbm_to_mw(noise_dbm)),
            bandwidth_hz=bandwidth_hz,
            pa_max_output=float(dbm_to_mw(pa_max_output_dbm)),
            pa_max_efficiency=pa_max_efficiency,
            consumed_power_cap=cap,
        )

    @property
    def consumption_factor(self) -> float:
        """sqrt(P_max) / eta_max, in sqrt(mW)."""
        return np.sqrt(self.pa_max_output) / self.pa_max_efficiency


@dataclass
class LinkMetricsReport:
    se_bits_per_s_hz: float
    radiated_per_branch: np.ndarray
    consumed_per_branch: np.ndarray
    consumed_total: float
    ee_bits_per_joule: float
    pa_efficiency_per_branch: np.ndarray = field(repr=False)


class TransmitStatistics(NamedTuple):
    gain: np.ndarray  # Bussgang gain per branch
    desired_cov: np.ndarray  # Gbar C_u Gbar^H, mW
    distortion_cov: np.ndarray  # C_d, mW


class Beampattern(NamedTuple):
    values: np.ndarray
    peak: float
    degenerate: bool  # all-zero covariance; values left unnormalized


def transmit_statistics(C_u, pa: PACoefficients) -> TransmitStatistics:
    """Bussgang gain, desired-signal covariance and distortion covariance for input ``C_u`` (mW)."""
    C_u = check_hermitian_cov(C_u, "C_u")
    s = pa.power_scale
    powers = np.clip(np.diag(C_u).real, 0.0, None)
    g = np.atleast_1d(avg_linear_gain(s * powers, pa))
    desired = np.outer(g, g.conj()) * C_u
    C_d = distortion_covariance(s * C_u, pa) / s
    return TransmitStatistics(g, (desired + desired.conj().T) / 2, C_d)


def _whitened_logdet(signal: np.ndarray, interference: np.ndarray) -> float:
    """log2 det(I + interference^{-1} signal) through a Cholesky whitening."""
    Lc = cholesky(interference, lower=True)
    X = solve_triangular(Lc, signal, lower=True)
    M = solve_triangular(Lc, X.conj().T, lower=True).conj().T
    M = (M + M.conj().T) / 2
    lam = np.clip(np.linalg.eigvalsh(M), 0.0, None)
    return float(np.sum(np.log1p(lam)) / LN2)


def spectral_efficiency(H, C_u, pa: PACoefficients, noise: float) -> float:
    """Worst-case SE (b/s/Hz) treating the received distortion as Gaussian noise."""
    if not noise > 0:
        raise DomainError("noise power must be positive")
    H = np.asarray(H, dtype=complex)
    C_u = np.asarray(C_u, dtype=complex)
    if H.ndim != 2 or H.shape[1] != C_u.shape[0]:
        raise ValidationError(f"H {H.shape} does not match C_u {C_u.shape}")
    st = transmit_statistics(C_u, pa)
    Nr = H.shape[0]
    interference = H @ st.distortion_cov @ H.conj().T + noise * np.eye(Nr)
    signal = H @ st.desired_cov @ H.conj().T
    return _whitened_logdet((signal + signal.conj().T) / 2, (interference + interference.conj().T) / 2)


def se_functional(Z, alpha1: float, alpha2: float) -> float:
    """f(Z) = log2 det(I + (alpha2 Z + I)^{-1} alpha1 Z) for PSD Z."""
    lam = np.clip(np.linalg.eigvalsh(check_hermitian_cov(Z, "Z", psd=False)), 0.0, None)
    return float(np.sum(np.log1p(alpha1 * lam / (alpha2 * lam + 1.0))) / LN2)


def rank_one_bound(Z, r, alpha1: float, alpha2: float) -> float:
    """h(Z, r) = log2(1 + alpha1 r^H Z r / (alpha2 r^H Z r + 1)) for unit-norm r."""
    r = np.asarray(r, dtype=complex)
    q = max(float(np.vdot(r, np.asarray(Z) @ r).real), 0.0)
    return float(np.log1p(alpha1 * q / (alpha2 * q + 1.0)) / LN2)


def _per_branch_kernels(P: float, Nt: int, pa: PACoefficients) -> tuple[float, float]:
    p = pa.power_scale * P / Nt
    return float(gbar_s(p, pa)), float(gbar_d(p, pa))


def se_single_rf(P: float, ch: ChannelRealization, pa: PACoefficients, noise: float) -> float:
    """Single-RF-chain SE with F_RF = a_t(phi_max), from the effective channel.

    log2 det(I + (h h^H gd + (noise/P) I)^{-1} h h^H gs),  h = H a_t(phi_max),
    gs, gd evaluated at the per-branch power P/Nt.
    """
    if P < 0:
        raise DomainError("P must be nonnegative")
    if P == 0:
        return 0.0
    gs, gd = _per_branch_kernels(P, ch.Nt, pa)
    h = effective_channel(ch)
    return se_functional(P * np.outer(h, h.conj()), gs / noise, gd / noise)


def se_lower_bound(P: float, ch: ChannelRealization, pa: PACoefficients, noise: float) -> float:
    """log2(1 + gs / (gd + noise / (delta P))) with delta the effective channel gain."""
    if not P > 0:
        raise DomainError("P must be positive")
    gs, gd = _per_branch_kernels(P, ch.Nt, pa)
    delta = effective_channel_gain(ch)
    if delta == 0.0:
        return 0.0
    return float(np.log1p(gs / (gd + noise / (delta * P))) / LN2)


def default_angle_grid(n: int = 1024) -> np.ndarray:
    return np.linspace(-np.pi / 2, np.pi / 2, n, endpoint=False)


def beampattern(C, geometry: ArrayGeometry, angles=None) -> Beampattern:
    """Radiated power a_t(phi)^H C a_t(phi) over ``angles``, max-normalized."""
    angles = default_angle_grid() if angles is None else np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise ValueError("angle grid is empty")
    A = array_response_matrix(angles, geometry)
    vals = np.einsum("ij,ik,kj->j", A.conj(), np.asarray(C, dtype=complex), A).real
    peak = float(vals.max())
    if peak <= 0.0:
        return Beampattern(np.zeros_like(vals), 0.0, True)
    return Beampattern(vals / peak, peak, False)


def radiated_power_per_branch(desired_cov, distortion_cov) -> np.ndarray:
    desired_cov = np.asarray(desired_cov)
    distortion_cov = np.asarray(distortion_cov)
    if desired_cov.shape != distortion_cov.shape:
        raise ValidationError("covariance shapes differ")
    return np.clip(np.diag(desired_cov).real + np.diag(distortion_cov).real, 0.0, None)


def consumed_power(P_rad, budget: LinkBudget):
    """PA supply power for radiated power ``P_rad`` (mW): sqrt(P_max) / eta_max * sqrt(P_rad)."""
    P_rad = np.asarray(P_rad, dtype=float)
    if np.any(P_rad < 0):
        raise DomainError("radiated power must be nonnegative")
    out = budget.consumption_factor * np.sqrt(P_rad)
    return out[()] if out.ndim == 0 else out


def energy_efficiency(se: float, consumed_total: float, budget: LinkBudget) -> float:
    """BW * SE / P_cons in bits/J; ``consumed_total`` in mW."""
    if not consumed_total > 0:
        raise DomainError("consumed power must be positive for energy efficiency")
    return float(budget.bandwidth_hz * se / mw_to_w(consumed_total))


def consumed_power_single_rf(P: float, Nt: int, pa: PACoefficients, budget: LinkBudget) -> float:
    """Total PA consumption of a single-RF-chain transmitter with input power ``P`` (mW)."""
    if P < 0:
        raise DomainError("P must be nonnegative")
    gs, gd = _per_branch_kernels(P, Nt, pa)
    return float(budget.consumption_factor * np.sqrt((gs + gd) * P * Nt))


def link_report(H, C_u, pa: PACoefficients, budget: LinkBudget) -> LinkMetricsReport:
    st = transmit_statistics(C_u, pa)
    H = np.asarray(H, dtype=complex)
    interference = H @ st.distortion_cov @ H.conj().T + budget.noise_power * np.eye(H.shape[0])
    signal = H @ st.desired_cov @ H.conj().T
    se = _whitened_logdet((signal + signal.conj().T) / 2, (interference + interference.conj().T) / 2)
    p_rad = radiated_power_per_branch(st.desired_cov, st.distortion_cov)
    p_cons = np.atleast_1d(consumed_power(p_rad, budget))
    total = float(np.sum(p_cons))
    with np.errstate(invalid="ignore", divide="ignore"):
        eta = np.where(p_cons > 0, p_rad / p_cons, 0.0)
    ee = energy_efficiency(se, total, budget) if total > 0 else 0.0
    return LinkMetricsReport(se, p_rad, p_cons, total, ee, eta)

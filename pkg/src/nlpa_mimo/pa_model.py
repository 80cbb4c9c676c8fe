"""Memoryless odd-order polynomial power amplifier.

The PA maps a complex baseband sample ``u`` to

    x = sum_{m=0}^{M} beta_{2m+1} |u|^{2m} u

and, for circular Gaussian input of power ``P``, admits a Bussgang
decomposition ``x = gbar(P) u + d`` with ``d`` uncorrelated with ``u``.
The scalar kernels here (average linear gain, ``gamma_m``, ``gbar_s``,
``gbar_d``) are the building blocks of the distortion covariance and
of the single-RF-chain spectral efficiency.

All powers passed to this module are in the PA's own unit convention
(``PACoefficients.unit_convention``); the link-level code converts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from nlpa_mimo.errors import ConfigurationError, DomainError

UNIT_SCALE = {"milliwatt": 1.0, "watt": 1e-3}


@dataclass(frozen=True)
class PACoefficients:
    """Odd-order polynomial coefficients ``beta_1, beta_3, ..., beta_{2M+1}``.

    ``unit_convention`` names the unit in which ``|u|^2`` enters the
    polynomial. ``power_scale`` converts a power in milliwatts into that unit.
    """

    coeffs: tuple[complex, ...]
    unit_convention: str = "milliwatt"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if len(coeffs) == 0:
            raise ConfigurationError("PA needs at least the linear coefficient beta_1")
        if coeffs[0] == 0:
            raise ConfigurationError("beta_1 must be nonzero")
        if not all(np.isfinite(c.real) and np.isfinite(c.imag) for c in coeffs):
            raise ConfigurationError("PA coefficients must be finite")
        if self.unit_convention not in UNIT_SCALE:
            raise ConfigurationError(
                f"unit_convention must be one of {sorted(UNIT_SCALE)}, got {self.unit_convention!r}"
            )

    @property
    def order(self) -> int:
        """M, where the polynomial order is 2M+1."""
        return len(self.coeffs) - 1

    @property
    def beta(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=complex)

    @property
    def power_scale(self) -> float:
        return UNIT_SCALE[self.unit_convention]

    def linear_part(self) -> "PACoefficients":
        """The ideal linear PA with the same small-signal gain."""
        return PACoefficients((self.coeffs[0],), self.unit_convention, name=f"{self.name} (linear)")

    def truncated(self, order: int) -> "PACoefficients":
        return PACoefficients(self.coeffs[: order + 1], self.unit_convention, name=self.name)

    @classmethod
    def from_spec(cls, spec: dict) -> "PACoefficients":
        """Build from a config mapping.

        ``spec["coeffs"]`` is a list of ``{"mag": .., "phase": ..}`` or
        ``{"re": .., "im": ..}`` entries (or bare ``[re, im]`` pairs).
        """
        out = []
        for i, c in enumerate(spec["coeffs"]):
            if isinstance(c, dict) and "mag" in c:
                out.append(c["mag"] * np.exp(1j * c.get("phase", 0.0)))
            elif isinstance(c, dict) and "re" in c:
                out.append(complex(c["re"], c.get("im", 0.0)))
            elif isinstance(c, (list, tuple)) and len(c) == 2:
                out.append(complex(c[0], c[1]))
            else:
                raise ConfigurationError(f"pa.coeffs[{i}]: expected mag/phase or re/im pair")
        return cls(tuple(out), spec.get("unit_convention", "milliwatt"), name=spec.get("name", ""))

    def to_spec(self) -> dict:
        return {
            "coeffs": [{"re": c.real, "im": c.imag} for c in self.coeffs],
            "unit_convention": self.unit_convention,
        }


# Faulkner-type coefficients; |u|^2 in mW.
REFERENCE_PA = PACoefficients(
    (2.96, 0.1418 * np.exp(-2.816j), 0.003 * np.exp(0.39j)),
    unit_convention="milliwatt",
    name="reference",
)
LINEAR_REFERENCE_PA = REFERENCE_PA.linear_part()


def _check_power(P):
    P = np.asarray(P, dtype=float)
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise DomainError("power must be finite and nonnegative")
    return P


def pa_transfer(u, pa: PACoefficients):
    """Apply the PA polynomial sample-wise."""
    return instantaneous_gain(u, pa) * u


def instantaneous_gain(u, pa: PACoefficients):
    """Amplitude-dependent complex gain ``sum beta_{2m+1} |u|^{2m}``; equals beta_1 at u=0."""
    r2 = np.abs(u) ** 2
    # Horner in |u|^2
    g = np.zeros_like(r2, dtype=complex) + pa.coeffs[-1]
    for c in reversed(pa.coeffs[:-1]):
        g = g * r2 + c
    return g


def avg_linear_gain(P, pa: PACoefficients):
    """Bussgang gain of one branch with Gaussian input power ``P``.

    gbar(P) = sum_m beta_{2m+1} (m+1)! P^m
    """
    P = _check_power(P)
    g = np.zeros_like(P, dtype=complex)
    for m, b in enumerate(pa.coeffs):
        g = g + b * math.factorial(m + 1) * P**m
    return g[()] if g.ndim == 0 else g


def gamma_m(P, m: int, pa: PACoefficients):
    """Distortion kernel of order ``m`` (1 <= m <= M).

    gamma_m(P) = sqrt(1/(m+1)) sum_{q=m}^{M} beta_{2q+1} C(q, m) (q+1)! P^{q-m}
    """
    if not 1 <= m <= pa.order:
        raise DomainError(f"m must lie in [1, {pa.order}], got {m}")
    P = _check_power(P)
    acc = np.zeros_like(P, dtype=complex)
    for q in range(m, pa.order + 1):
        acc = acc + pa.coeffs[q] * math.comb(q, m) * math.factorial(q + 1) * P ** (q - m)
    acc = acc * math.sqrt(1.0 / (m + 1))
    return acc[()] if acc.ndim == 0 else acc


def gbar_s(P, pa: PACoefficients):
    """Desired-signal power gain ``|gbar(P)|^2``."""
    return np.abs(avg_linear_gain(P, pa)) ** 2


def gbar_d(P, pa: PACoefficients):
    """Distortion-to-input power ratio of one branch, ``sum_m |gamma_m(P)|^2 P^{2m}``."""
    P = _check_power(P)
    acc = np.zeros_like(P, dtype=float)
    for m in range(1, pa.order + 1):
        acc = acc + np.abs(gamma_m(P, m, pa)) ** 2 * P ** (2 * m)
    return acc[()] if acc.ndim == 0 else acc


@dataclass(frozen=True)
class BussgangGain:
    """Diagonal of the average linear gain matrix, one entry per branch."""

    per_branch_gain: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.per_branch_gain)


def bussgang_gains(branch_powers: Sequence[float], pa: PACoefficients) -> BussgangGain:
    return BussgangGain(np.atleast_1d(avg_linear_gain(np.asarray(branch_powers, dtype=float), pa)))

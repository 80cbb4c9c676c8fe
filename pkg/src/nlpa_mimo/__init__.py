"""Nonlinear-PA MIMO link analysis.

Closed-form Bussgang statistics, spectral and energy efficiency of
hybrid/analog/digital transmit beamforming when every transmit branch
is driven through a memoryless odd-order polynomial power amplifier,
plus brute-force oracles that check the closed forms.
"""

from nlpa_mimo.errors import (
    ConfigurationError,
    DomainError,
    InfeasibleProblemError,
    ValidationError,
)
from nlpa_mimo.pa_model import PACoefficients, REFERENCE_PA, LINEAR_REFERENCE_PA

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DomainError",
    "InfeasibleProblemError",
    "ValidationError",
    "PACoefficients",
    "REFERENCE_PA",
    "LINEAR_REFERENCE_PA",
    "__version__",
]

"""Second-order statistics of the PA distortion for Gaussian beamformed input.

For ``u ~ CN(0, C_u)`` and identical PAs on every branch,

    C_d = sum_{m=1}^{M} Gamma_m (|C_u|^{2m} (.) C_u) Gamma_m^H,

with ``Gamma_m = diag(gamma_m(P_1), ..., gamma_m(P_N))`` and
``P_n = [C_u]_nn``. ``(.)`` is the entrywise product; the Hadamard power
term equals ``C_u^{(.)(m+1)} (.) (C_u^T)^{(.)m}`` entrywise.
"""

from __future__ import annotations

import numpy as np

from nlpa_mimo.errors import ValidationError
from nlpa_mimo.pa_model import PACoefficients, gamma_m

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10

CROSSTALK_MODELS = ("identity_plus_offdiag", "literal_iid")


def check_hermitian_cov(C, name: str = "C", psd: bool = True) -> np.ndarray:
    """Validate a covariance and return its exactly-Hermitian part ``(C + C^H)/2``."""
    C = np.asarray(C, dtype=complex)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {C.shape}")
    scale = max(np.max(np.abs(C)) if C.size else 0.0, np.finfo(float).tiny)
    if np.max(np.abs(C - C.conj().T)) > HERMITIAN_TOL * scale:
        raise ValidationError(f"{name} is not Hermitian")
    C = (C + C.conj().T) / 2
    if psd:
        tr = np.trace(C).real
        if np.linalg.eigvalsh(C).min() < -PSD_TOL * max(tr, 0.0) - np.finfo(float).tiny:
            raise ValidationError(f"{name} is not positive semidefinite")
    return C


def hadamard_power_term(C_u, m: int) -> np.ndarray:
    """Entrywise ``C^{m+1} conj(C)^m = |C|^{2m} C``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    C_u = np.asarray(C_u, dtype=complex)
    return np.abs(C_u) ** (2 * m) * C_u


def distortion_covariance(C_u, pa: PACoefficients) -> np.ndarray:
    """Distortion covariance for input covariance ``C_u`` (powers in the PA unit)."""
    C_u = check_hermitian_cov(C_u, "C_u")
    powers = np.clip(np.diag(C_u).real, 0.0, None)
    C_d = np.zeros_like(C_u)
    for m in range(1, pa.order + 1):
        g = np.atleast_1d(gamma_m(powers, m, pa))
        C_d += np.outer(g, g.conj()) * hadamard_power_term(C_u, m)
    return (C_d + C_d.conj().T) / 2


def apply_crosstalk(C_u, B) -> np.ndarray:
    """Covariance after pre-PA linear coupling, ``B C_u B^H``."""
    C_u = np.asarray(C_u, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if B.ndim != 2 or B.shape[1] != C_u.shape[0] or C_u.shape[0] != C_u.shape[1]:
        raise ValidationError(f"crosstalk matrix {B.shape} does not match C_u {C_u.shape}")
    if not np.all(np.isfinite(B)):
        raise ValidationError("crosstalk matrix has non-finite entries")
    out = B @ C_u @ B.conj().T
    return (out + out.conj().T) / 2


def sample_crosstalk(seed: int, Nt: int, sigma_ct_sq: float, model: str = "identity_plus_offdiag") -> np.ndarray:
    """Random coupling matrix.

    ``identity_plus_offdiag``: unit diagonal, off-diagonal entries CN(0, sigma_ct_sq).
    ``literal_iid``: every entry CN(0, sigma_ct_sq).
    """
    if sigma_ct_sq < 0:
        raise ValueError("sigma_ct_sq must be nonnegative")
    if model not in CROSSTALK_MODELS:
        raise ValueError(f"unknown crosstalk model {model!r}; expected one of {CROSSTALK_MODELS}")
    rng = np.random.default_rng(seed)
    W = np.sqrt(sigma_ct_sq / 2) * (rng.standard_normal((Nt, Nt)) + 1j * rng.standard_normal((Nt, Nt)))
    if model == "literal_iid":
        return W
    np.fill_diagonal(W, 1.0)
    return W

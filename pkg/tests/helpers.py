"""Shared builders for the test modules."""

import numpy as np

from nlpa_mimo.channel import ArrayGeometry, PathLossModel, effective_channel, generate_channel
from nlpa_mimo.pa_model import gbar_d, gbar_s


def make_channel(seed, Nt=16, Nr=16, L=5, **kw):
    return generate_channel(seed, L, ArrayGeometry(Nt), ArrayGeometry(Nr), PathLossModel(), **kw)


def random_psd(rng, N, rank=None, trace=1.0):
    rank = N if rank is None else rank
    X = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    C = X @ X.conj().T
    return trace * C / np.trace(C).real


def grid_scan_ee(ch, pa, budget, lo_dbm=-40.0, hi_dbm=20.0, n=10_000):
    """Dense-grid EE from the scalar rank-one closed form, vectorized over P."""
    P = 10.0 ** (np.linspace(lo_dbm, hi_dbm, n) / 10.0)
    p = P / ch.Nt
    gs, gd = gbar_s(p, pa), gbar_d(p, pa)
    h = effective_channel(ch)
    g = np.vdot(h, h).real
    se = np.log2(1.0 + g * gs / (g * gd + budget.noise_power / P))
    pc = budget.consumption_factor * np.sqrt((gs + gd) * P * ch.Nt)
    return P, budget.bandwidth_hz * se / (pc * 1e-3)

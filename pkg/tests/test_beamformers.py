import json

import numpy as np
import pytest

from helpers import make_channel
from nlpa_mimo.beamformers import (
    Beamformer,
    analog_aod,
    build_beamformer,
    default_dictionary,
    digital_eigen,
    hybrid_omp,
    quantize_phases,
    waterfilling,
)
from nlpa_mimo.channel import ArrayGeometry, ChannelRealization, array_response, assemble_channel
from nlpa_mimo.errors import ConfigurationError
from nlpa_mimo.link_metrics import spectral_efficiency
from nlpa_mimo.pa_model import LINEAR_REFERENCE_PA, REFERENCE_PA
from nlpa_mimo.units import dbm_to_mw

NOISE = float(dbm_to_mw(-105.0))


def _sparse_channel(aod, Nt=16, Nr=16, seed=0, gains=None):
    rng = np.random.default_rng(seed)
    L = len(aod)
    g = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) * 1e-5 if gains is None else np.asarray(gains)
    aoa = rng.uniform(-np.pi / 2, np.pi / 2, L)
    tx, rx = ArrayGeometry(Nt), ArrayGeometry(Nr)
    return ChannelRealization(assemble_channel(g, np.asarray(aod), aoa, tx, rx), g, np.asarray(aod), aoa, tx, rx)


@pytest.mark.parametrize("n_rf,n_s", [(1, 1), (3, 2), (5, 5)])
def test_analog_constant_modulus_and_power(n_rf, n_s):
    for seed in range(10):
        ch = make_channel(seed)
        P = 7.3
        bf = analog_aod(ch, n_rf, n_s, P)
        mod = np.abs(bf.f_rf)
        assert np.max(np.abs(mod - mod[0, 0])) < 1e-12
        assert np.trace(bf.input_covariance).real == pytest.approx(P, rel=1e-9)
        np.testing.assert_allclose(np.linalg.norm(bf.f_bb, axis=0), np.linalg.norm(bf.f_bb[:, 0]), rtol=1e-12)


def test_analog_picks_strongest_paths():
    ch = make_channel(8)
    bf = analog_aod(ch, 1, 1, 1.0)
    k = int(np.argmax(np.abs(ch.path_gains)))
    a = array_response(ch.aod[k], ch.tx_geometry)
    assert abs(abs(np.vdot(a, bf.f_rf[:, 0])) - 1.0) < 1e-12


def test_single_rf_input_covariance_equal_split():
    ch = make_channel(1, Nt=32)
    C = analog_aod(ch, 1, 1, 4.0).input_covariance
    np.testing.assert_allclose(np.diag(C).real, 4.0 / 32, rtol=1e-12)


def test_digital_principal_vector_for_single_path():
    ch = make_channel(5, L=1)
    bf = digital_eigen(ch, 1, 2.0)
    a = array_response(ch.aod[0], ch.tx_geometry)
    v = bf.precoder[:, 0] / np.linalg.norm(bf.precoder)
    assert abs(np.vdot(a, v)) == pytest.approx(1.0, abs=1e-10)
    assert not bf.constant_modulus
    assert np.trace(bf.input_covariance).real == pytest.approx(2.0, rel=1e-12)


def test_digital_beats_analog_with_linear_pa():
    for seed in range(30):
        ch = make_channel(seed)
        for P in (0.01, 1.0, 30.0):
            d = spectral_efficiency(ch.H, digital_eigen(ch, 1, P).input_covariance, LINEAR_REFERENCE_PA, NOISE)
            a = spectral_efficiency(ch.H, analog_aod(ch, 1, 1, P).input_covariance, LINEAR_REFERENCE_PA, NOISE)
            assert d >= a - 1e-9


def test_digital_rank_and_allocation_errors():
    ch = make_channel(0, L=1)
    with pytest.raises(ConfigurationError):
        digital_eigen(ch, 2, 1.0)
    with pytest.raises(ConfigurationError):
        digital_eigen(make_channel(0), 2, 1.0, allocation="waterfilling")
    with pytest.raises(ConfigurationError):
        digital_eigen(make_channel(0), 2, 1.0, allocation="greedy")


def test_waterfilling():
    p = waterfilling(np.array([10.0, 1.0, 0.01]), 1.0)
    assert p.sum() == pytest.approx(1.0)
    assert p[2] == 0 and p[0] > p[1] > 0
    # equal gains split evenly
    np.testing.assert_allclose(waterfilling(np.ones(4), 2.0), 0.5)
    bf = digital_eigen(make_channel(0), 3, 5.0, allocation="waterfilling", noise=NOISE)
    assert np.trace(bf.input_covariance).real == pytest.approx(5.0, rel=1e-12)


def test_quantization_fine_resolution_nearly_lossless():
    for seed in range(20):
        ch = make_channel(seed)
        bf = analog_aod(ch, 1, 1, 3.0)
        se = spectral_efficiency(ch.H, bf.input_covariance, REFERENCE_PA, NOISE)
        q = quantize_phases(bf, 16)
        assert abs(spectral_efficiency(ch.H, q.input_covariance, REFERENCE_PA, NOISE) - se) < 1e-3
        assert np.trace(q.input_covariance).real == pytest.approx(3.0, rel=1e-9)


def test_one_bit_broadside_unchanged():
    # broadside steering has all-zero phases, already on the 1-bit grid
    ch = _sparse_channel([0.0, 0.7], gains=[1e-5, 1e-6])
    bf = analog_aod(ch, 1, 1, 1.0)
    q = quantize_phases(bf, 1)
    np.testing.assert_allclose(q.input_covariance, bf.input_covariance, atol=1e-15)


def test_coarse_quantization_loses_on_average():
    loss = []
    for seed in range(50):
        ch = make_channel(seed)
        bf = analog_aod(ch, 1, 1, 1.0)
        se = spectral_efficiency(ch.H, bf.input_covariance, REFERENCE_PA, NOISE)
        sq = spectral_efficiency(ch.H, quantize_phases(bf, 4).input_covariance, REFERENCE_PA, NOISE)
        loss.append(se - sq)
    assert np.mean(loss) > 0
    with pytest.raises(ConfigurationError):
        quantize_phases(analog_aod(make_channel(0), 1, 1, 1.0), 0)


def test_omp_recovers_on_grid_paths():
    grid = default_dictionary(64)
    aod = grid[[5, 20, 41]]
    ch = _sparse_channel(aod, seed=3)
    bf = hybrid_omp(ch, 3, 3, 1.0, dictionary=grid)
    # column space of F_RF contains the optimal precoder
    _, _, Vh = np.linalg.svd(ch.H)
    V = Vh.conj().T[:, :3]
    Q, _ = np.linalg.qr(bf.f_rf)
    s = np.linalg.svd(Q.conj().T @ V, compute_uv=False)
    chordal = np.sqrt(max(0.0, 3 - np.sum(s**2)))
    assert chordal < 1e-6
    mod = np.abs(bf.f_rf)
    assert np.max(np.abs(mod - mod[0, 0])) < 1e-12


def test_omp_close_to_digital_with_full_rf_chains():
    Nt = 8
    for seed in range(10):
        ch = make_channel(seed, Nt=Nt)
        P = 1.0
        d = spectral_efficiency(ch.H, digital_eigen(ch, 2, P).input_covariance, LINEAR_REFERENCE_PA, NOISE)
        h = spectral_efficiency(ch.H, hybrid_omp(ch, Nt, 2, P, default_dictionary(1024)).input_covariance,
                                LINEAR_REFERENCE_PA, NOISE)
        assert h >= 0.95 * d


def test_build_beamformer_dispatch_and_errors():
    ch = make_channel(0)
    for scheme in ("digital", "analog", "hybrid", "quantized_analog"):
        bf = build_beamformer(scheme, ch, 2, 2, 1.5)
        assert np.trace(bf.input_covariance).real == pytest.approx(1.5, rel=1e-9)
    with pytest.raises(ConfigurationError):
        build_beamformer("beamsteer", ch, 1, 1, 1.0)
    with pytest.raises(ConfigurationError):
        analog_aod(ch, 2, 3, 1.0)
    with pytest.raises(ConfigurationError):
        analog_aod(ch, 6, 1, 1.0)
    with pytest.raises(ConfigurationError):
        hybrid_omp(ch, 3, 1, 1.0, dictionary=[0.0, 0.1])


def test_json_roundtrip():
    bf = hybrid_omp(make_channel(4), 3, 2, 2.5)
    back = Beamformer.from_dict(json.loads(bf.to_json()))
    assert np.array_equal(back.f_rf, bf.f_rf) and np.array_equal(back.f_bb, bf.f_bb)
    assert back.total_input_power == bf.total_input_power

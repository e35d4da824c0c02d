import numpy as np
import pytest
from hypothesis import given, strategies as st

from leoical.channel import (ChannelParams, array_response, array_response_derivatives,
                             build_stat_csi, los_gain, sample_channel, sample_gain,
                             subcarrier_frequency)
from leoical.config import desk_profile
from leoical.scenario import sample_scenario

from conftest import small_stat

near = st.floats(np.pi / 2 - 0.6, np.pi / 2 + 0.6)


def reference_response(tx, ty, n, cfg):
    """Naive element loop over the two axis factors."""
    varpi = np.pi * (1 + subcarrier_frequency(n, cfg) / cfg.carrier_freq_Hz)
    out = np.empty(cfg.num_tx_x * cfg.num_tx_y, complex)
    for i in range(cfg.num_tx_x):
        for j in range(cfg.num_tx_y):
            ax = np.exp(-1j * varpi * i * np.sin(ty) * np.cos(tx)) / np.sqrt(cfg.num_tx_x)
            ay = np.exp(-1j * varpi * j * np.cos(ty)) / np.sqrt(cfg.num_tx_y)
            out[i * cfg.num_tx_y + j] = ax * ay
    return out


def test_boresight_is_flat():
    cfg = desk_profile()
    r = array_response(np.pi / 2, np.pi / 2, 3, cfg)
    assert np.allclose(r.axis_x, 1 / np.sqrt(cfg.num_tx_x), atol=1e-15)
    assert np.allclose(r.axis_y, 1 / np.sqrt(cfg.num_tx_y), atol=1e-15)


def test_single_element():
    cfg = desk_profile(num_tx_x=1, num_tx_y=1, num_rf_chains=1, num_uts=1)
    assert np.allclose(array_response(0.3, 1.2, 1, cfg).vector, [1.0])
    dx, dy = array_response_derivatives(0.3, 1.2, 1, cfg)
    assert np.allclose(dx, 0) and np.allclose(dy, 0)


def test_two_by_two_against_loop():
    cfg = desk_profile(num_tx_x=2, num_tx_y=2, num_rf_chains=2, num_uts=1)
    n = cfg.num_subcarriers // 2
    assert np.allclose(array_response(np.pi / 4, np.pi / 3, n, cfg).vector,
                       reference_response(np.pi / 4, np.pi / 3, n, cfg), atol=1e-14)


@given(near, near, st.integers(1, 512))
def test_kronecker_and_unit_norm(tx, ty, n):
    cfg = desk_profile()
    r = array_response(tx, ty, n, cfg)
    assert np.allclose(r.vector, np.kron(r.axis_x, r.axis_y), atol=1e-14)
    assert np.allclose(r.vector, reference_response(tx, ty, n, cfg), atol=1e-14)
    assert abs(np.linalg.norm(r.vector) - 1) < 1e-12


def test_derivatives_finite_difference(rng):
    cfg = desk_profile()
    h = 1e-6
    for _ in range(100):
        tx, ty = rng.uniform(np.pi / 2 - 0.6, np.pi / 2 + 0.6, 2)
        n = int(rng.integers(1, cfg.num_subcarriers + 1))
        dx, dy = array_response_derivatives(tx, ty, n, cfg)
        v = lambda a, b: array_response(a, b, n, cfg).vector
        fx = (v(tx + h, ty) - v(tx - h, ty)) / (2 * h)
        fy = (v(tx, ty + h) - v(tx, ty - h)) / (2 * h)
        assert np.linalg.norm(dx - fx) <= 1e-6 * max(np.linalg.norm(dx), 1e-3)
        assert np.linalg.norm(dy - fy) <= 1e-6 * max(np.linalg.norm(dy), 1e-3)


def test_boresight_y_derivative():
    cfg = desk_profile(num_tx_x=1, num_rf_chains=1, num_uts=1)
    n = 7
    varpi = np.pi * (1 + subcarrier_frequency(n, cfg) / cfg.carrier_freq_Hz)
    _, dy = array_response_derivatives(0.4, np.pi / 2, n, cfg)
    i = np.arange(cfg.num_tx_y)
    assert np.allclose(dy, 1j * varpi * i / np.sqrt(cfg.num_tx_y), atol=1e-14)


def test_los_gain_properties():
    cfg = desk_profile()
    a = 0.3 - 0.4j
    still = ChannelParams(1.0, 1.2, 0.0, 0.0, a)
    assert los_gain(still, 5, 17, cfg) == pytest.approx(a)
    p = ChannelParams(1.0, 1.2, 1e-3, 123.0, a)
    for m, n in [(1, 1), (40, 300), (7, 512)]:
        assert abs(los_gain(p, m, n, cfg)) == pytest.approx(abs(a), rel=1e-12)
    M = 9
    wrap = ChannelParams(1.0, 1.2, 2e-4, 1 / (M * cfg.symbol_duration_s), a)
    expected = a * np.exp(-2j * np.pi * 4 * cfg.subcarrier_spacing_Hz * 2e-4)
    assert los_gain(wrap, M, 4, cfg) == pytest.approx(expected, rel=1e-9)


def test_stat_csi_invariants():
    stat = small_stat(2)
    assert np.allclose((np.abs(stat.hbar) ** 2).sum(-1), stat.gamma[None], rtol=1e-9)
    for p, g, k in zip(stat.params, stat.gamma, stat.kappa):
        assert abs(p.alpha) ** 2 == pytest.approx(k * g / (1 + k), rel=1e-12)


def test_sample_channel_deterministic_limit(rng):
    stat = small_stat(1, kappa=1e12)
    h = sample_channel(stat, 0, 3, 5, rng)
    v = array_response(stat.theta[0, 0], stat.theta[0, 1], 5, stat.cfg).vector
    ref = los_gain(stat.params[0], 3, 5, stat.cfg) * v
    assert np.linalg.norm(h - ref) <= 1e-5 * np.linalg.norm(ref)


def test_gain_moments(rng):
    kappa = 4.0
    stat = small_stat(1, kappa=kappa)
    g = sample_gain(stat, 0, 2, 3, rng, size=100_000)
    gamma = stat.gamma[0]
    assert np.mean(np.abs(g) ** 2) == pytest.approx(gamma, rel=0.02)
    g_los = los_gain(stat.params[0], 2, 3, stat.cfg)
    ratio = np.mean(np.abs(g - g_los) ** 2) / abs(g_los) ** 2
    assert ratio == pytest.approx(1 / kappa, rel=0.03)


def test_channel_second_moment(rng):
    stat = small_stat(4, kappa=3.0)
    H = sample_channel(stat, 1, 1, 2, rng, size=100_000)
    R = H.T @ H.conj() / H.shape[0]
    v = array_response(stat.theta[1, 0], stat.theta[1, 1], 2, stat.cfg).vector
    ref = stat.gamma[1] * np.outer(v, v.conj())
    assert np.linalg.norm(R - ref) <= 0.02 * np.linalg.norm(ref)


def test_stat_responses_match_single_calls():
    cfg = desk_profile()
    stat = build_stat_csi(sample_scenario(cfg, 5), cfg)
    for i, n in enumerate(stat.subcarriers[:3]):
        for k in range(stat.num_uts):
            r = array_response(*stat.theta[k], n, cfg).vector
            dx, dy = array_response_derivatives(*stat.theta[k], n, cfg)
            assert np.allclose(stat.V[i, k], r) and np.allclose(stat.dVx[i, k], dx)
            assert np.allclose(stat.dVy[i, k], dy)

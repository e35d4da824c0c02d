import numpy as np
import pytest
from hypothesis import given, strategies as st

from leoical.config import ConfigError, SystemConfig, desk_profile, dump_config, parse_config, table_profile
from leoical.errors import DegenerateGeometry, DomainError
from leoical.scenario import (SatelliteState, aod_from_position, channel_gain, elevation_angle,
                              link_geometry, nadir_angle, position_from_aod, rotation_matrix,
                              sample_scenario)

angles = st.floats(-np.pi, np.pi, allow_nan=False)


def test_rotation_identity_at_zero():
    assert np.array_equal(rotation_matrix([0.0, 0.0]), np.eye(3))


def test_rotation_quarter_turn_about_y():
    R = rotation_matrix([0.0, np.pi / 2])
    expected = np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]], dtype=float)
    # columns are [0,0,-1], [0,1,0], [1,0,0]
    assert np.allclose(R, expected, atol=1e-15)
    assert np.allclose(R[:, 0], [0, 0, -1], atol=1e-15)


@given(angles, angles)
def test_rotation_is_proper_orthonormal(a, b):
    R = rotation_matrix([a, b])
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(R), 1.0, atol=1e-12)


def test_aod_simple_points():
    sat = SatelliteState()
    assert np.allclose(aod_from_position([1, 0, 1], sat), (np.pi / 4, np.pi / 2))
    assert np.allclose(aod_from_position([1, 1, 0], sat), (0.0, np.pi / 4))


def test_aod_degenerate():
    sat = SatelliteState()
    with pytest.raises(DegenerateGeometry):
        aod_from_position([0, 0, 0], sat)
    with pytest.raises(DegenerateGeometry):
        aod_from_position([0, 5, 0], sat)


def test_aod_matches_reference_formula(rng):
    # independent evaluation with a plain atan2 / arccos on the raw vector
    sat = SatelliteState()
    for _ in range(50):
        p = rng.normal(size=3) * 1e5
        tx = np.arctan2(p[2], p[0])
        ty = np.arccos(p[1] / np.sqrt(p @ p))
        assert np.allclose(aod_from_position(p, sat), (tx, ty), atol=1e-13)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_position_aod_round_trip(dx, dy, o1, o2):
    cfg = desk_profile()
    sat = SatelliteState(orientation_rad=np.array([o1, o2]))
    tx, ty = np.pi / 2 + dx, np.pi / 2 + dy
    p = position_from_aod(tx, ty, sat, cfg)
    assert np.allclose(aod_from_position(p, sat), (tx, ty), atol=1e-9)


def test_nadir_link_geometry():
    cfg = table_profile()
    sat = SatelliteState()
    p = position_from_aod(np.pi / 2, np.pi / 2, sat, cfg)
    geo = link_geometry(p, np.array([1.0, 0.0, 0.0]), sat, cfg)
    assert geo.nadir_rad == pytest.approx(0.0, abs=1e-12)
    assert geo.elevation_rad == pytest.approx(np.pi / 2)
    assert geo.slant_distance_m == pytest.approx(cfg.orbit_height_m, rel=1e-6)
    assert geo.delay_s == pytest.approx(geo.slant_distance_m / cfg.speed_of_light, rel=1e-9)
    # velocity perpendicular to the line of sight
    assert geo.doppler_Hz == pytest.approx(0.0, abs=1e-9)


def test_nadir_gain_value():
    # G_sat G_ut N_t (c / (4 pi f_c H))^2 with 6 dB, 0 dB, 576, 2 GHz, 200 km
    cfg = table_profile()
    expected = 10 ** 0.6 * 576 * (3e8 / (4 * np.pi * 2e9 * 200e3)) ** 2
    assert expected == pytest.approx(8.2e-12, rel=0.01)
    assert channel_gain(200e3, cfg) == pytest.approx(expected, rel=1e-12)


def test_gain_decreasing_in_distance():
    cfg = table_profile()
    d = np.linspace(2e5, 2e6, 50)
    assert np.all(np.diff(channel_gain(d, cfg)) < 0)


def test_elevation_domain_error():
    with pytest.raises(DomainError):
        elevation_angle(np.pi / 2 - 0.01, table_profile())


def test_sample_scenario_deterministic():
    cfg = desk_profile()
    a, b = sample_scenario(cfg, 7), sample_scenario(cfg, 7)
    assert np.array_equal(a.aods, b.aods)
    assert np.array_equal(a.los_phases, b.los_phases)
    for u, v in zip(a.uts, b.uts):
        assert np.array_equal(u.position_m, v.position_m)
        assert np.array_equal(u.velocity_mps, v.velocity_mps)


def test_sample_scenario_ranges():
    cfg = desk_profile(num_uts=8, num_rf_chains=8)
    aods, vels = [], []
    for s in range(1250):
        sc = sample_scenario(cfg, s)
        aods.append(sc.aods)
        vels.append([u.velocity_mps for u in sc.uts])
    aods, vels = np.concatenate(aods), np.concatenate(vels)
    assert aods.size >= 10_000
    assert aods.min() >= np.pi / 2 - np.pi / 6 and aods.max() <= np.pi / 2 + np.pi / 6
    assert np.abs(vels).max() <= 10.0
    assert aods.max() - aods.min() > 0.99 * np.pi / 3


def test_sampled_uts_recover_aod():
    cfg = desk_profile()
    sc = sample_scenario(cfg, 3)
    for ut, aod in zip(sc.uts, sc.aods):
        assert np.allclose(aod_from_position(ut.position_m, sc.satellite), aod, atol=1e-9)
        assert nadir_angle(*aod) <= np.pi / 6 * np.sqrt(2)


def test_config_validation():
    with pytest.raises(ConfigError):
        SystemConfig(num_uts=40)
    with pytest.raises(ConfigError):
        SystemConfig(weight_rho=1.5)
    cfg = desk_profile()
    assert cfg.symbol_duration_s == pytest.approx((512 + 36) / (2 * 15.36e6))


def test_config_file_round_trip():
    cfg = desk_profile(tx_power_W=3.5, ground_model="plane")
    assert parse_config(dump_config(cfg)) == cfg
    assert parse_config("num_uts = 2\n# comment\n", desk_profile()).num_uts == 2
    with pytest.raises(ConfigError):
        parse_config("no_such_key = 1")

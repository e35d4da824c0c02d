"""Satellite/UT geometry, link budget and seeded scenario generation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .errors import DegenerateGeometry, DomainError


@dataclass(frozen=True)
class SatelliteState:
    position_m: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation_rad: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "position_m", np.asarray(self.position_m, dtype=float))
        object.__setattr__(self, "orientation_rad", np.asarray(self.orientation_rad, dtype=float))
        if not np.all(np.isfinite(self.orientation_rad)):
            raise ValueError("orientation angles must be finite")


@dataclass(frozen=True)
class UserTerminal:
    position_m: np.ndarray
    velocity_mps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position_m", np.asarray(self.position_m, dtype=float))
        object.__setattr__(self, "velocity_mps", np.asarray(self.velocity_mps, dtype=float))


@dataclass(frozen=True)
class LinkGeometry:
    aod_pair_rad: tuple
    nadir_rad: float
    elevation_rad: float
    slant_distance_m: float
    delay_s: float
    doppler_Hz: float
    gain_linear: float


@dataclass(frozen=True)
class Scenario:
    satellite: SatelliteState
    uts: tuple
    aods: np.ndarray        # (K, 2) sampled (theta_x, theta_y)
    los_phases: np.ndarray  # (K,) uniform on (0, 2*pi]
    seed: int | None = None

    @property
    def num_uts(self) -> int:
        return len(self.uts)


def rotation_matrix(o) -> np.ndarray:
    """Rotation by phi2 about +y followed by phi1 about the rotated -x axis."""
    phi1, phi2 = np.asarray(o, dtype=float)
    s1, c1 = np.sin(phi1), np.cos(phi1)
    s2, c2 = np.sin(phi2), np.cos(phi2)
    return np.array([
        [c2, -s1 * s2, c1 * s2],
        [0.0, c1, s1],
        [-s2, -s1 * c2, c1 * c2],
    ])


def rotated_position(p, sat: SatelliteState) -> np.ndarray:
    R = rotation_matrix(sat.orientation_rad)
    return R.T @ (np.asarray(p, dtype=float) - sat.position_m)


def aod_from_position(p, sat: SatelliteState) -> tuple[float, float]:
    pr = rotated_position(p, sat)
    norm = np.linalg.norm(pr)
    if norm == 0.0:
        raise DegenerateGeometry("UT position coincides with the satellite")
    if pr[0] == 0.0 and pr[2] == 0.0:
        raise DegenerateGeometry("theta_x undefined: UT lies on the array y-axis")
    theta_x = float(np.arctan2(pr[2], pr[0]))
    theta_y = float(np.arccos(np.clip(pr[1] / norm, -1.0, 1.0)))
    return theta_x, theta_y


def direction_from_aod(theta_x: float, theta_y: float) -> np.ndarray:
    """Unit vector in the array frame pointing along the AoD pair."""
    st = np.sin(theta_y)
    return np.array([st * np.cos(theta_x), np.cos(theta_y), st * np.sin(theta_x)])


def nadir_angle(theta_x: float, theta_y: float) -> float:
    return float(np.arccos(np.clip(np.sin(theta_x) * np.sin(theta_y), -1.0, 1.0)))


def elevation_angle(nadir: float, cfg: SystemConfig) -> float:
    re, h = cfg.earth_radius_m, cfg.orbit_height_m
    arg = (re + h) / re * np.sin(nadir)
    if arg > 1.0 + 1e-12:
        raise DomainError(f"nadir angle {nadir:.4f} rad lies beyond the visible Earth cap")
    return float(np.arccos(min(arg, 1.0)))


def slant_distance(elevation: float, cfg: SystemConfig) -> float:
    re, h = cfg.earth_radius_m, cfg.orbit_height_m
    se = np.sin(elevation)
    return float(np.sqrt(h * h + 2 * h * re + (re * se) ** 2) - re * se)


def channel_gain(distance_m, cfg: SystemConfig):
    """Average LoS+NLoS power gain, including the array gain N_t."""
    c = cfg.speed_of_light
    fspl = (c / (4 * np.pi * cfg.carrier_freq_Hz * np.asarray(distance_m))) ** 2
    return cfg.sat_antenna_gain_linear * cfg.ut_antenna_gain_linear * cfg.num_antennas * fspl


def link_geometry(p, pdot, sat: SatelliteState, cfg: SystemConfig) -> LinkGeometry:
    p = np.asarray(p, dtype=float)
    pdot = np.asarray(pdot, dtype=float)
    theta_x, theta_y = aod_from_position(p, sat)
    nadir = nadir_angle(theta_x, theta_y)
    elev = elevation_angle(nadir, cfg)
    d = slant_distance(elev, cfg)
    diff = p - sat.position_m
    rng = np.linalg.norm(diff)
    c = cfg.speed_of_light
    doppler = -cfg.carrier_freq_Hz / c * float(pdot @ diff) / rng
    return LinkGeometry(
        aod_pair_rad=(theta_x, theta_y),
        nadir_rad=nadir,
        elevation_rad=elev,
        slant_distance_m=d,
        delay_s=rng / c,
        doppler_Hz=doppler,
        gain_linear=float(channel_gain(d, cfg)),
    )


def position_from_aod(theta_x: float, theta_y: float, sat: SatelliteState,
                      cfg: SystemConfig) -> np.ndarray:
    """Ground point seen from the satellite along the given AoD pair.

    ``cfg.ground_model == "sphere"`` places the UT on the Earth surface (the
    same geometry that yields the slant distance in :func:`link_geometry`);
    ``"plane"`` intersects the ray with the plane one orbit height below the
    array along boresight.
    """
    u = direction_from_aod(theta_x, theta_y)
    nadir = nadir_angle(theta_x, theta_y)
    if cfg.ground_model == "sphere":
        dist = slant_distance(elevation_angle(nadir, cfg), cfg)
    else:
        dist = cfg.orbit_height_m / np.cos(nadir)
    R = rotation_matrix(sat.orientation_rad)
    return sat.position_m + R @ (dist * u)


def sample_scenario(cfg: SystemConfig, rng_seed: int | None = None,
                    satellite: SatelliteState | None = None) -> Scenario:
    rng = np.random.default_rng(rng_seed)
    sat = satellite or SatelliteState()
    K = cfg.num_uts
    lo, hi = np.pi / 2 - cfg.max_nadir_rad, np.pi / 2 + cfg.max_nadir_rad
    aods = rng.uniform(lo, hi, size=(K, 2))
    vel = rng.uniform(-cfg.max_speed_mps, cfg.max_speed_mps, size=(K, 3))
    phases = 2 * np.pi - rng.uniform(0.0, 2 * np.pi, size=K)  # (0, 2pi]
    uts = tuple(
        UserTerminal(position_from_aod(aods[k, 0], aods[k, 1], sat, cfg), vel[k])
        for k in range(K)
    )
    return Scenario(satellite=sat, uts=uts, aods=aods, los_phases=phases, seed=rng_seed)


def jacobian_xi(p, pdot, sat: SatelliteState, cfg: SystemConfig) -> np.ndarray:
    """3x4 Jacobian [d theta_x/dp, d theta_y/dp, d tau/dp, d nu/dp] (columns)."""
    p = np.asarray(p, dtype=float)
    pdot = np.asarray(pdot, dtype=float)
    R = rotation_matrix(sat.orientation_rad)
    r1, r2, r3 = R[:, 0], R[:, 1], R[:, 2]
    diff = p - sat.position_m
    pr = R.T @ diff
    rho2 = pr[0] ** 2 + pr[2] ** 2
    n2 = float(pr @ pr)
    if n2 == 0.0 or rho2 == 0.0:
        raise DegenerateGeometry("AoD Jacobian undefined at this UT position")
    c = cfg.speed_of_light
    dist = np.sqrt(n2)
    d_tx = (pr[0] * r3 - pr[2] * r1) / rho2
    d_ty = (pr[1] * diff - r2 * n2) / (n2 * np.sqrt(rho2))
    d_tau = diff / (c * dist)
    d_nu = cfg.carrier_freq_Hz / c * ((pdot @ diff) * diff - n2 * pdot) / dist ** 3
    return np.column_stack([d_tx, d_ty, d_tau, d_nu])

"""Wideband UPA responses, statistical CSI and Rician channel draws.

Conventions
-----------
* Subcarrier indices ``n`` are 1-based, ``f_n = (n - (N_sc + 1)/2) f_s``.
* OFDM symbol indices ``m`` count CP-inclusive symbols from the frame start.
* The per-UT gain ``gamma`` is flat across subcarriers.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .scenario import Scenario, jacobian_xi, link_geometry


@dataclass(frozen=True)
class ArrayResponse:
    subcarrier_index: int
    vector: np.ndarray
    axis_x: np.ndarray
    axis_y: np.ndarray


@dataclass(frozen=True)
class ChannelParams:
    theta_x_rad: float
    theta_y_rad: float
    delay_s: float
    doppler_Hz: float
    alpha: complex

    @property
    def phase_rad(self) -> float:
        return float(np.angle(self.alpha))

    @property
    def eta(self) -> np.ndarray:
        """Real parameter vector [theta_x, theta_y, tau, nu, Re alpha, Im alpha]."""
        return np.array([self.theta_x_rad, self.theta_y_rad, self.delay_s, self.doppler_Hz,
                         self.alpha.real, self.alpha.imag])

    @classmethod
    def from_eta(cls, eta) -> "ChannelParams":
        eta = np.asarray(eta, dtype=float)
        return cls(eta[0], eta[1], eta[2], eta[3], complex(eta[4], eta[5]))


def subcarrier_frequency(n, cfg: SystemConfig):
    return (np.asarray(n, dtype=float) - (cfg.num_subcarriers + 1) / 2.0) * cfg.subcarrier_spacing_Hz


def retained_subcarriers(cfg: SystemConfig) -> np.ndarray:
    """Uniformly spaced subset of 1..N_sc (all of them when not subsampling)."""
    total = cfg.num_subcarriers
    count = cfg.retained_subcarriers or total
    if count >= total:
        return np.arange(1, total + 1)
    return np.unique(np.round(np.linspace(1, total, count)).astype(int))


def _axis_vectors(theta_x, theta_y, n, cfg: SystemConfig):
    """Axis responses and their angle derivatives, broadcast over leading dims."""
    theta_x = np.asarray(theta_x, dtype=float)[..., None]
    theta_y = np.asarray(theta_y, dtype=float)[..., None]
    varpi = np.pi * (1.0 + subcarrier_frequency(n, cfg) / cfg.carrier_freq_Hz)
    varpi = np.asarray(varpi)[..., None]
    ix = np.arange(cfg.num_tx_x)
    iy = np.arange(cfg.num_tx_y)
    sx, cx = np.sin(theta_x), np.cos(theta_x)
    sy, cy = np.sin(theta_y), np.cos(theta_y)
    vx = np.exp(-1j * varpi * ix * sy * cx) / np.sqrt(cfg.num_tx_x)
    vy = np.exp(-1j * varpi * iy * cy) / np.sqrt(cfg.num_tx_y)
    dvx_dtx = 1j * varpi * ix * sy * sx * vx
    dvx_dty = -1j * varpi * ix * cy * cx * vx
    dvy_dty = 1j * varpi * iy * sy * vy
    return vx, vy, dvx_dtx, dvx_dty, dvy_dty


def _kron_last(a, b):
    return (a[..., :, None] * b[..., None, :]).reshape(*a.shape[:-1], -1)


def array_response(theta_x: float, theta_y: float, n: int, cfg: SystemConfig) -> ArrayResponse:
    vx, vy, *_ = _axis_vectors(theta_x, theta_y, n, cfg)
    return ArrayResponse(int(n), _kron_last(vx, vy), vx, vy)


def array_response_derivatives(theta_x: float, theta_y: float, n: int, cfg: SystemConfig):
    """Return (dv/dtheta_x, dv/dtheta_y) for the Kronecker-structured response."""
    vx, vy, dvx_dtx, dvx_dty, dvy_dty = _axis_vectors(theta_x, theta_y, n, cfg)
    d_tx = _kron_last(dvx_dtx, vy)
    d_ty = _kron_last(dvx_dty, vy) + _kron_last(vx, dvy_dty)
    return d_tx, d_ty


def responses(theta, subcarriers, cfg: SystemConfig):
    """Stacked responses for K UTs and N subcarriers.

    Returns ``(V, dVx, dVy)``, each shaped (N, K, N_t).
    """
    theta = np.asarray(theta, dtype=float)
    n = np.asarray(subcarriers)[:, None]
    vx, vy, dvx_dtx, dvx_dty, dvy_dty = _axis_vectors(theta[None, :, 0], theta[None, :, 1], n, cfg)
    V = _kron_last(vx, vy)
    dVx = _kron_last(dvx_dtx, vy)
    dVy = _kron_last(dvx_dty, vy) + _kron_last(vx, dvy_dty)
    return V, dVx, dVy


def los_phase(params: ChannelParams, m, n, cfg: SystemConfig):
    """Unit-modulus factor exp{j 2 pi (nu m T - n f_s tau)}."""
    T = cfg.symbol_duration_s
    return np.exp(2j * np.pi * (params.doppler_Hz * np.asarray(m) * T
                                - np.asarray(n) * cfg.subcarrier_spacing_Hz * params.delay_s))


def los_gain(params: ChannelParams, m, n, cfg: SystemConfig):
    return params.alpha * los_phase(params, m, n, cfg)


@dataclass(frozen=True)
class StatCsi:
    """Statistical CSI of all UTs over the retained subcarriers."""
    cfg: SystemConfig
    subcarriers: np.ndarray   # (N,) 1-based indices
    theta: np.ndarray         # (K, 2)
    gamma: np.ndarray         # (K,)
    kappa: np.ndarray         # (K,)
    V: np.ndarray             # (N, K, N_t)
    dVx: np.ndarray
    dVy: np.ndarray
    params: tuple             # ChannelParams per UT
    xi: np.ndarray            # (K, 3, 4) position Jacobians
    noise: float
    pilots: np.ndarray        # pilot OFDM symbol indices

    @property
    def num_uts(self) -> int:
        return self.gamma.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.subcarriers.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.V.shape[-1]

    @property
    def band_scale(self) -> float:
        """Each retained subcarrier stands for this many physical ones."""
        return self.cfg.num_subcarriers / self.num_subcarriers

    @property
    def hbar(self) -> np.ndarray:
        """Effective mean channels sqrt(gamma) v, shaped (N, K, N_t)."""
        return np.sqrt(self.gamma)[None, :, None] * self.V

    @property
    def nlos_power(self) -> np.ndarray:
        return self.gamma / (1.0 + self.kappa)

    @property
    def alpha(self) -> np.ndarray:
        return np.array([p.alpha for p in self.params])

    def design_power(self, power: float) -> float:
        """Budget over the retained subcarriers equivalent to total power ``power``."""
        return power / self.band_scale

    def replace(self, **changes) -> "StatCsi":
        return dataclasses.replace(self, **changes)


def pilot_symbol_indices(cfg: SystemConfig) -> np.ndarray:
    """First ``M_sp`` symbols of every slot, 1-based CP-inclusive symbol count."""
    per_slot = cfg.pilot_syms_per_slot + cfg.data_syms_per_slot
    slots = np.arange(cfg.slots_per_frame)[:, None] * per_slot
    return (slots + np.arange(cfg.pilot_syms_per_slot)[None, :] + 1).ravel()


def build_stat_csi(scenario: Scenario, cfg: SystemConfig, subcarriers=None,
                   kappa=None) -> StatCsi:
    sat = scenario.satellite
    subcarriers = retained_subcarriers(cfg) if subcarriers is None else np.asarray(subcarriers)
    K = scenario.num_uts
    kappa = np.full(K, cfg.rician_factor_linear) if kappa is None else np.broadcast_to(
        np.asarray(kappa, dtype=float), (K,)).copy()
    theta = np.empty((K, 2))
    gamma = np.empty(K)
    xi = np.empty((K, 3, 4))
    params = []
    for k, ut in enumerate(scenario.uts):
        geo = link_geometry(ut.position_m, ut.velocity_mps, sat, cfg)
        theta[k] = geo.aod_pair_rad
        gamma[k] = geo.gain_linear
        amp = np.sqrt(kappa[k] * gamma[k] / (1.0 + kappa[k]))
        params.append(ChannelParams(theta[k, 0], theta[k, 1], geo.delay_s, geo.doppler_Hz,
                                    complex(amp * np.exp(1j * scenario.los_phases[k]))))
        xi[k] = jacobian_xi(ut.position_m, ut.velocity_mps, sat, cfg)
    V, dVx, dVy = responses(theta, subcarriers, cfg)
    return StatCsi(cfg=cfg, subcarriers=subcarriers, theta=theta, gamma=gamma, kappa=kappa,
                   V=V, dVx=dVx, dVy=dVy, params=tuple(params), xi=xi,
                   noise=cfg.noise_power_W, pilots=pilot_symbol_indices(cfg))


def sample_gain(stat: StatCsi, k: int, m, n, rng: np.random.Generator, size=None):
    """Draw g = g_los + g_nlos for UT ``k``; g_nlos i.i.d. across calls."""
    g_los = los_gain(stat.params[k], m, n, stat.cfg)
    sigma = np.sqrt(stat.nlos_power[k] / 2.0)
    shape = () if size is None else size
    g_nlos = sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return g_los + g_nlos


def sample_channel(stat: StatCsi, k: int, m: int, n: int, rng: np.random.Generator, size=None):
    """Rician channel vector(s) h = (g_los + g_nlos) v_{k,n}."""
    v = array_response(stat.theta[k, 0], stat.theta[k, 1], n, stat.cfg).vector
    g = sample_gain(stat, k, m, n, rng, size)
    return np.asarray(g)[..., None] * v

"""Pilot-based Fisher information, position-domain transformation and SPEB.

Parameter order per UT is ``[theta_x, theta_y, tau, nu, Re alpha, Im alpha]``.
Every LoS derivative has the form ``e(m, n) c_i(m, n) b_i`` with a unit
modulus phase ``e``, a scalar ``c_i`` and a response-type vector ``b_i``:

    b = [dv/dtheta_x, dv/dtheta_y, v, v, v, v]
    c = [alpha, alpha, -j 2 pi n f_s alpha, j 2 pi m T alpha, 1, j]

so the pilot sum over ``m`` collapses into the 6x6 matrix ``S_n`` of
``sum_m conj(c_i) c_j`` and the precoder only enters through ``W_n^T b_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, StatCsi, array_response, array_response_derivatives, los_phase
from .config import SystemConfig
from .errors import NonRealQuadraticForm
from .scenario import jacobian_xi  # noqa: F401  (re-exported)

NUM_PARAMS = 6


def equivalent_noise(stat: StatCsi, W) -> np.ndarray:
    """N_eq per (n, k): NLoS leakage through the precoder plus thermal noise."""
    P = np.einsum("nkt,ntl->nkl", stat.V, np.asarray(W))
    return stat.nlos_power[None, :] * (np.abs(P) ** 2).sum(axis=2) + stat.noise


def real_quadratic(value, tol: float = 1e-8, scale=None):
    """Real part of a Hermitian quadratic form, refusing non-negligible imaginary parts.

    ``scale`` (e.g. ||q||^2 ||Z||) sets the size below which imaginary parts
    count as rounding, for forms that nearly cancel.
    """
    value = np.asarray(value)
    ref = np.abs(value) if scale is None else np.maximum(np.abs(value), scale)
    scale = np.maximum(ref, np.finfo(float).tiny)
    if np.any(np.abs(value.imag) > tol * scale):
        raise NonRealQuadraticForm("quadratic form has a non-negligible imaginary part")
    return value.real


def channel_derivatives(params: ChannelParams, m: int, n: int, cfg: SystemConfig) -> np.ndarray:
    """Six derivatives of h_los(m, n) = g_los(m, n) v_n, stacked as rows (6, N_t)."""
    v = array_response(params.theta_x_rad, params.theta_y_rad, n, cfg).vector
    d_tx, d_ty = array_response_derivatives(params.theta_x_rad, params.theta_y_rad, n, cfg)
    e = los_phase(params, m, n, cfg)
    a = params.alpha
    T = cfg.symbol_duration_s
    return e * np.stack([
        a * d_tx,
        a * d_ty,
        -2j * np.pi * n * cfg.subcarrier_spacing_Hz * a * v,
        2j * np.pi * m * T * a * v,
        v,
        1j * v,
    ])


def derivative_vectors(stat: StatCsi) -> np.ndarray:
    """b_i per (n, k), shaped (N, K, 6, N_t)."""
    V = stat.V
    return np.stack([stat.dVx, stat.dVy, V, V, V, V], axis=2)


def pilot_coefficients(stat: StatCsi, pilots=None) -> np.ndarray:
    """c_i(m, n) per UT, shaped (M, N, K, 6)."""
    cfg = stat.cfg
    m = np.asarray(stat.pilots if pilots is None else pilots, dtype=float)[:, None, None]
    n = np.asarray(stat.subcarriers, dtype=float)[None, :, None]
    alpha = stat.alpha[None, None, :]
    shape = (m.shape[0], n.shape[1], alpha.shape[2])
    c = np.empty(shape + (NUM_PARAMS,), dtype=complex)
    c[..., 0] = alpha
    c[..., 1] = alpha
    c[..., 2] = -2j * np.pi * n * cfg.subcarrier_spacing_Hz * alpha
    c[..., 3] = 2j * np.pi * m * cfg.symbol_duration_s * alpha
    c[..., 4] = 1.0
    c[..., 5] = 1j
    return c


def pilot_gram(stat: StatCsi, pilots=None) -> np.ndarray:
    """S[n, k] = sum_m conj(c)^T c, shaped (N, K, 6, 6)."""
    c = pilot_coefficients(stat, pilots)
    return np.einsum("mnki,mnkj->nkij", c.conj(), c)


def channel_fim(stat: StatCsi, W, pilots=None, S=None) -> np.ndarray:
    """Channel-domain FIM per UT, shaped (K, 6, 6).

    The sum over retained subcarriers is scaled by ``stat.band_scale`` so that
    subsampled designs approximate the full-band information.
    """
    W = np.asarray(W)
    S = pilot_gram(stat, pilots) if S is None else S
    Pb = np.einsum("nkit,ntl->nkil", derivative_vectors(stat), W)  # (W^T b_i)^T
    gram = np.einsum("nkil,nkjl->nkij", Pb.conj(), Pb)
    neq = equivalent_noise(stat, W)
    J = 2.0 * np.real(S * gram) / neq[:, :, None, None]
    J = stat.band_scale * J.sum(axis=0)
    return 0.5 * (J + np.swapaxes(J, -1, -2))


def transformation(xi) -> np.ndarray:
    """Gamma = blkdiag(Xi, I_2), batched over leading dims of ``xi`` (.., 3, 4)."""
    xi = np.asarray(xi, dtype=float)
    G = np.zeros(xi.shape[:-2] + (5, 6))
    G[..., :3, :4] = xi
    G[..., 3, 4] = 1.0
    G[..., 4, 5] = 1.0
    return G


def position_crb(Jbar, cond_limit: float = 1e12) -> np.ndarray:
    """Tr of the leading 3x3 block of inv(Jbar); +inf where Jbar is singular."""
    Jbar = np.asarray(Jbar, dtype=float)
    flat = Jbar.reshape(-1, *Jbar.shape[-2:])
    out = np.empty(flat.shape[0])
    for i, J in enumerate(flat):
        d = np.diag(J)
        if np.any(d <= 0) or not np.all(np.isfinite(J)):
            out[i] = np.inf
            continue
        s = 1.0 / np.sqrt(d)
        Js = J * s[:, None] * s[None, :]
        w = np.linalg.eigvalsh(Js)
        if w[0] <= w[-1] / cond_limit:
            out[i] = np.inf
            continue
        inv = np.linalg.inv(Js) * s[:, None] * s[None, :]
        out[i] = float(np.trace(inv[:3, :3]))
    return out.reshape(Jbar.shape[:-2])


def transform_and_speb(J_eta, xi):
    """Return (J_etabar, speb) for one or a batch of UTs."""
    G = transformation(xi)
    Jbar = G @ np.asarray(J_eta) @ np.swapaxes(G, -1, -2)
    Jbar = 0.5 * (Jbar + np.swapaxes(Jbar, -1, -2))
    return Jbar, position_crb(Jbar)


def apeb(speb) -> float:
    speb = np.asarray(speb, dtype=float)
    return float(np.sqrt(speb.sum() / speb.size))


@dataclass(frozen=True)
class FimBundle:
    J_eta: np.ndarray        # (K, 6, 6)
    Gamma: np.ndarray        # (K, 5, 6)
    J_etabar: np.ndarray     # (K, 5, 5)
    speb: np.ndarray         # (K,) m^2
    equiv_noise: np.ndarray  # (N, K) W

    @property
    def sum_speb(self) -> float:
        return float(self.speb.sum())

    @property
    def apeb(self) -> float:
        return apeb(self.speb)

    @property
    def singular(self) -> np.ndarray:
        return ~np.isfinite(self.speb)


def fim_bundle(stat: StatCsi, W, pilots=None) -> FimBundle:
    J = channel_fim(stat, W, pilots)
    Jbar, speb = transform_and_speb(J, stat.xi)
    return FimBundle(J, transformation(stat.xi), Jbar, speb, equivalent_noise(stat, W))


def sum_speb(stat: StatCsi, W, pilots=None) -> float:
    return fim_bundle(stat, W, pilots).sum_speb

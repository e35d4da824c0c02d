"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np

from leoical.channel import ChannelParams, array_response, los_gain
from leoical.scenario import aod_from_position, link_geometry


def loop_equivalent_noise(stat, W):
    N, K = stat.num_subcarriers, stat.num_uts
    out = np.empty((N, K))
    for n in range(N):
        for k in range(K):
            v = stat.V[n, k]
            q = sum(abs(v @ W[n, :, l]) ** 2 for l in range(K))
            out[n, k] = stat.nlos_power[k] * q + stat.noise
    return out


def los_channel(eta, m, n, cfg):
    p = ChannelParams.from_eta(eta)
    v = array_response(p.theta_x_rad, p.theta_y_rad, n, cfg).vector
    return los_gain(p, m, n, cfg) * v


def parameter_steps(stat, k, rel=1e-4):
    """Per-parameter step sizes giving phase/amplitude perturbations of about ``rel``."""
    cfg = stat.cfg
    n_max = max(abs(int(stat.subcarriers.max())), 1)
    m_max = max(int(np.max(stat.pilots)), 1)
    a = abs(stat.params[k].alpha)
    return np.array([rel * 0.1, rel * 0.1,
                     rel / (2 * np.pi * n_max * cfg.subcarrier_spacing_Hz),
                     rel / (2 * np.pi * m_max * cfg.symbol_duration_s),
                     rel * a, rel * a])


def likelihood_fim(stat, W, k, rel=1e-3):
    """Hessian of the expected negative log-likelihood for UT ``k``.

    The pilots at each (m, n) run over the K unit vectors so the pilot
    covariance is the identity; the noise is circular Gaussian with variance
    N_eq.  Only the forward model h_los(eta) is used.
    """
    cfg = stat.cfg
    neq = loop_equivalent_noise(stat, W)
    eta0 = stat.params[k].eta
    steps = parameter_steps(stat, k, rel)
    base = {}
    for i, n in enumerate(stat.subcarriers):
        for m in stat.pilots:
            base[(i, m)] = los_channel(eta0, m, n, cfg) @ W[i]

    def divergence(delta):
        total = 0.0
        for i, n in enumerate(stat.subcarriers):
            for m in stat.pilots:
                mu = los_channel(eta0 + delta, m, n, cfg) @ W[i]
                total += (np.abs(mu - base[(i, m)]) ** 2).sum() / neq[i, k]
        return total

    H = np.zeros((6, 6))
    E = np.diag(steps)
    for a in range(6):
        for b in range(a, 6):
            if a == b:
                val = (divergence(2 * E[a]) - 2 * divergence(0 * E[a]) + divergence(-2 * E[a])) / (
                    4 * steps[a] ** 2)
            else:
                val = (divergence(E[a] + E[b]) - divergence(E[a] - E[b])
                       - divergence(-E[a] + E[b]) + divergence(-E[a] - E[b])) / (4 * steps[a] * steps[b])
            H[a, b] = H[b, a] = val
    # complex Gaussian: Fisher = Hessian of sum |dmu|^2 / N_eq
    return H * stat.band_scale


def fd_jacobian_xi(p, pdot, sat, cfg, h=1e-3):
    """Central differences of p -> (theta_x, theta_y, tau, nu)."""
    def f(q):
        g = link_geometry(q, pdot, sat, cfg)
        return np.array([*aod_from_position(q, sat), g.delay_s, g.doppler_Hz])

    cols = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        cols.append((f(p + e) - f(p - e)) / (2 * h))
    return np.array(cols)    # rows: position axis, columns: parameter


def schur_check(M, E, J, tol=1e-10):
    """(M - E^T J^-1 E >= 0, [[M, E^T], [E, J]] >= 0) by eigenvalues."""
    S = M - E.T @ np.linalg.solve(J, E)
    block = np.block([[M, E.T], [E, J]])
    scale = max(np.abs(block).max(), 1.0)
    return (np.linalg.eigvalsh(0.5 * (S + S.T)).min() >= -tol * scale,
            np.linalg.eigvalsh(block).min() >= -tol * scale)

"""Rate bound, spectral efficiency, Monte Carlo ergodic rate and WMMSE helpers.

Precoder stacks are shaped (N, N_t, K): one N_t x K matrix per retained
subcarrier.  Rates are natural-log internally; ``bits=True`` converts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import StatCsi

LN2 = np.log(2.0)


def effective_gains(stat: StatCsi, W) -> np.ndarray:
    """B[n, k, l] = hbar_{k,n}^T w_{l,n}."""
    return np.einsum("nkt,ntl->nkl", stat.hbar, np.asarray(W))


def sinr(stat: StatCsi, W, noise=None) -> np.ndarray:
    noise = stat.noise if noise is None else noise
    p = np.abs(effective_gains(stat, W)) ** 2
    sig = np.einsum("nkk->nk", p)
    interf = p.sum(axis=2) - sig
    return sig / (interf + noise)


def rate_upper_bound(stat: StatCsi, W, noise=None, bits: bool = False) -> np.ndarray:
    """Per (n, k) rate bound log(1 + SINR) evaluated at the mean channel power."""
    r = np.log1p(sinr(stat, W, noise))
    return r / LN2 if bits else r


def spectral_efficiency(stat: StatCsi, W, noise=None, with_constant: bool = True) -> float:
    """Sum SE in bit/s/Hz over the full band.

    Each retained subcarrier stands for ``stat.band_scale`` physical ones.
    ``with_constant=False`` drops the f_s / B_w prefactor.
    """
    total = stat.band_scale * rate_upper_bound(stat, W, noise, bits=True).sum()
    if with_constant:
        total *= stat.cfg.subcarrier_spacing_Hz / stat.cfg.bandwidth_Hz
    return float(total)


@dataclass(frozen=True)
class MonteCarloRate:
    rate: np.ndarray     # (N, K) nats, sample mean
    stderr: np.ndarray   # (N, K)
    num_draws: int

    @property
    def per_ut(self) -> np.ndarray:
        return self.rate.sum(axis=0)

    @property
    def per_ut_stderr(self) -> np.ndarray:
        return np.sqrt((self.stderr ** 2).sum(axis=0))


def monte_carlo_rate(stat: StatCsi, W, noise=None, num_draws: int = 10_000,
                     rng: np.random.Generator | None = None) -> MonteCarloRate:
    """Sample mean of log(1 + SINR) under Rician draws of the scalar gain.

    With a single propagation direction only |g|^2 enters the SINR, and the
    LoS phase drops out because the NLoS part is circularly symmetric.
    Reusing one generator seed across kappa values gives common random
    numbers.
    """
    if num_draws < 1:
        raise ValueError("num_draws must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    noise = stat.noise if noise is None else noise
    W = np.asarray(W)
    N, K = stat.num_subcarriers, stat.num_uts
    b = np.abs(np.einsum("nkt,ntl->nkl", stat.V, W)) ** 2  # unit-gain responses
    sig = np.einsum("nkk->nk", b)
    interf = b.sum(axis=2) - sig
    z = (rng.standard_normal((num_draws, N, K)) + 1j * rng.standard_normal((num_draws, N, K)))
    los = np.sqrt(stat.kappa * stat.gamma / (1.0 + stat.kappa))
    g2 = np.abs(los + np.sqrt(stat.nlos_power / 2.0) * z) ** 2
    rates = np.log1p(g2 * sig / (g2 * interf + noise))
    se = rates.std(axis=0, ddof=1) / np.sqrt(num_draws) if num_draws > 1 else np.zeros((N, K))
    return MonteCarloRate(rates.mean(axis=0), se, num_draws)


def mse(stat: StatCsi, W, u, noise=None) -> np.ndarray:
    """MSE of s_hat = conj(u) y per (n, k)."""
    noise = stat.noise if noise is None else noise
    B = effective_gains(stat, W)
    u = np.asarray(u)
    diag = np.einsum("nkk->nk", B)
    total = (np.abs(B) ** 2).sum(axis=2)
    return (np.abs(u) ** 2 * (total + noise) - 2 * np.real(np.conj(u) * diag) + 1.0)


def mmse_receiver(stat: StatCsi, W, noise=None) -> np.ndarray:
    noise = stat.noise if noise is None else noise
    B = effective_gains(stat, W)
    return np.einsum("nkk->nk", B) / ((np.abs(B) ** 2).sum(axis=2) + noise)


def mmse_weights(stat: StatCsi, W, u, noise=None) -> np.ndarray:
    return 1.0 / mse(stat, W, u, noise)

"""Is the closed-form rate bound a fair stand-in for the ergodic rate?

The design maximizes log(1 + SINR) evaluated at the mean channel power.
Jensen makes that an upper bound on the ergodic rate; the gap comes from
the NLoS fluctuation, so it should vanish as the Rician factor grows.
"""
import numpy as np

from leoical import build_stat_csi, desk_profile, sample_scenario
from leoical.comm import monte_carlo_rate, rate_upper_bound
from leoical.config import db2lin
from leoical.hybrid import baseline_codebook

cfg = desk_profile()
scen = sample_scenario(cfg, 3)
W = baseline_codebook(build_stat_csi(scen, cfg), build_stat_csi(scen, cfg).design_power(db2lin(16)))

print(" kappa [dB]   bound [nats]   Monte Carlo      rel. gap")
for kdb in (0, 6, 12, 18, 24, 30):
    stat = build_stat_csi(scen, cfg, kappa=db2lin(kdb))
    bound = rate_upper_bound(stat, W).sum()
    mc = monte_carlo_rate(stat, W, num_draws=20_000, rng=np.random.default_rng(0))
    est, se = mc.rate.sum(), np.sqrt((mc.stderr ** 2).sum())
    print(f"{kdb:11d}   {bound:12.4f}   {est:8.4f} +- {se:.4f}   {(bound - est) / bound:.2e}")

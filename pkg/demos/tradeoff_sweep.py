"""Sweeping the communication weight rho for one scenario.

rho = 1 optimizes sum SE alone, rho = 0 only tracks the localization
precoder; in between the hybrid ADMM trades one for the other.  Run with
``--arch partially_connected`` to see the cheaper analog network.
"""
import argparse
import warnings

from leoical import build_stat_csi, desk_profile, sample_scenario
from leoical.comm import spectral_efficiency
from leoical.config import db2lin
from leoical.fim import fim_bundle
from leoical.hybrid import AdmmConfig, baseline_codebook, run_hybrid
from leoical.locprec import design_localization_precoder

warnings.simplefilter("ignore")

ap = argparse.ArgumentParser()
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--power", type=float, default=16.0, help="dBW")
ap.add_argument("--arch", default="fully_connected")
args = ap.parse_args()

cfg = desk_profile()
stat = build_stat_csi(sample_scenario(cfg, args.seed), cfg)
power = db2lin(args.power)
budget = stat.design_power(power)
loc = design_localization_precoder(stat, power, rng=0, max_iter=3, sdp_max_iter=1500)

print(f"{'precoder':>22s}  {'SE [bps/Hz]':>11s}  {'APEB [m]':>9s}  iters")
print(f"{'localization only':>22s}  {spectral_efficiency(stat, loc.W):11.2f}  "
      f"{fim_bundle(stat, loc.W).apeb:9.2f}")
for rho in (0.0, 0.3, 0.5, 0.7, 0.9, 1.0):
    res = run_hybrid(stat, loc.W if rho < 1 else None, budget,
                     AdmmConfig(rho_weight=rho, architecture=args.arch))
    W = res.precoder.W
    print(f"{'rho = %.1f' % rho:>22s}  {spectral_efficiency(stat, W):11.2f}  "
          f"{fim_bundle(stat, W).apeb:9.2f}  {res.iterations}")
cb = baseline_codebook(stat, budget)
print(f"{'codebook':>22s}  {spectral_efficiency(stat, cb):11.2f}  {fim_bundle(stat, cb).apeb:9.2f}")

"""Experiment grid: scenarios x power x rho x architecture, with CSV and JSON output.

``results.csv`` columns (one row per cell, after a ``#`` timestamp line):

    seed, power_dBW, rho, arch, se_bps_hz, apeb_m, iterations, status,
    mc_se_bps_hz, mm_iterations

``se_bps_hz`` is the full-band sum SE bound, ``apeb_m`` the root-mean SPEB
of the designed precoder, ``iterations`` the hybrid ADMM count (0 for the
codebook) and ``mc_se_bps_hz`` the Monte Carlo estimate of the same sum
(blank unless requested).  ``status`` is ``ok``, ``not_converged`` or
``error:<ExceptionName>``.

Each cell also writes ``traces/<run_id>.json``::

    {"run_id": ..., "seed": ..., "power_dBW": ..., "rho": ..., "arch": ...,
     "stages": {"mm": [{"iteration": 0, ...}, ...], "admm": [...]}}
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .channel import build_stat_csi
from .comm import LN2, monte_carlo_rate, spectral_efficiency
from .config import SystemConfig, db2lin, desk_profile
from .errors import ConfigError, MissingTrace
from .fim import fim_bundle
from .hybrid import AdmmConfig, baseline_codebook, run_hybrid
from .locprec import design_localization_precoder
from .scenario import sample_scenario

ARCHS = ("fully_connected", "partially_connected", "fully_digital", "codebook")
COLUMNS = ("seed", "power_dBW", "rho", "arch", "se_bps_hz", "apeb_m", "iterations",
           "status", "mc_se_bps_hz", "mm_iterations")


@dataclass(frozen=True)
class MmSettings:
    max_iter: int = 3
    rel_tol: float = 1e-4
    sdp_tol: float = 1e-6
    sdp_max_iter: int = 1500
    num_candidates: int = 50
    polish_iter: int = 200


@dataclass(frozen=True)
class ExperimentSpec:
    config: SystemConfig = field(default_factory=desk_profile)
    powers_dBW: tuple = (10.0,)
    rhos: tuple = (1.0,)
    archs: tuple = ("fully_connected",)
    seeds: tuple = (0,)
    out_dir: str = "results"
    mc_draws: int = 0
    trace_every: int = 0
    workers: int = 1
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    mm: MmSettings = field(default_factory=MmSettings)

    def __post_init__(self):
        if not (self.powers_dBW and self.rhos and self.archs and self.seeds):
            raise ConfigError("sweep axes must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        bad = [a for a in self.archs if a not in ARCHS]
        if bad:
            raise ConfigError(f"unknown architecture(s): {', '.join(bad)}")
        if any(not 0.0 <= r <= 1.0 for r in self.rhos):
            raise ConfigError("rho values must lie in [0, 1]")
        if self.mc_draws < 0 or self.workers < 1:
            raise ConfigError("mc_draws must be >= 0 and workers >= 1")


def run_id(seed, power_dBW, rho, arch) -> str:
    return f"s{seed}_p{power_dBW:g}_r{rho:g}_{arch}"


def _clean(value):
    """JSON-safe floats (inf / nan become strings)."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, np.integer):
        return int(value)
    return value


def _scenario_block(spec: ExperimentSpec, seed: int, power_dBW: float):
    """All cells sharing one (seed, P): the localization design is done once."""
    cfg = spec.config
    stat = build_stat_csi(sample_scenario(cfg, seed), cfg)
    power = db2lin(power_dBW)
    budget = stat.design_power(power)
    need_loc = any(r < 1 for r in spec.rhos) and any(a != "codebook" for a in spec.archs)
    loc, loc_error = None, None
    if need_loc:
        try:
            loc = design_localization_precoder(
                stat, power, rng=np.random.default_rng([seed, 1]), max_iter=spec.mm.max_iter,
                rel_tol=spec.mm.rel_tol, sdp_tol=spec.mm.sdp_tol,
                sdp_max_iter=spec.mm.sdp_max_iter, num_candidates=spec.mm.num_candidates,
                polish_iter=spec.mm.polish_iter)
        except Exception as exc:  # recorded per cell
            loc_error = exc
    rows, traces = [], []
    for arch in spec.archs:
        for rho in spec.rhos:
            row = dict(seed=seed, power_dBW=power_dBW, rho=rho, arch=arch, se_bps_hz="",
                       apeb_m="", iterations=0, status="ok", mc_se_bps_hz="",
                       mm_iterations=0)
            stages = {}
            try:
                if arch == "codebook":
                    W = baseline_codebook(stat, budget)
                else:
                    if rho < 1 and loc is None:
                        raise loc_error
                    W_loc = loc.W if rho < 1 else None
                    if rho < 1:
                        stages["mm"] = loc.trace
                        row["mm_iterations"] = loc.iterations
                    admm = AdmmConfig(**{**asdict(spec.admm), "rho_weight": rho,
                                         "architecture": arch, "trace_every": spec.trace_every})
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        res = run_hybrid(stat, W_loc, budget, admm)
                    W = res.precoder.W
                    row["iterations"] = res.iterations
                    row["status"] = "ok" if res.converged else "not_converged"
                    stages["admm"] = res.trace
                row["se_bps_hz"] = spectral_efficiency(stat, W)
                row["apeb_m"] = fim_bundle(stat, W).apeb
                if spec.mc_draws:
                    mc = monte_carlo_rate(stat, W, num_draws=spec.mc_draws,
                                          rng=np.random.default_rng([seed, 2]))
                    scale = stat.band_scale * stat.cfg.subcarrier_spacing_Hz / stat.cfg.bandwidth_Hz
                    row["mc_se_bps_hz"] = float(mc.rate.sum()) * scale / LN2
            except Exception as exc:
                row["status"] = f"error:{type(exc).__name__}"
            rid = run_id(seed, power_dBW, rho, arch)
            rows.append(row)
            traces.append((rid, dict(run_id=rid, seed=seed, power_dBW=power_dBW, rho=rho,
                                     arch=arch, stages=stages)))
    return rows, traces


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def run_experiment(spec: ExperimentSpec) -> Path:
    """Run every cell and write results.csv, traces/*.json and resolved-config.json."""
    out = Path(spec.out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    jobs = [(spec, s, p) for s in spec.seeds for p in spec.powers_dBW]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            blocks = list(pool.map(_scenario_block_star, jobs))
    else:
        blocks = [_scenario_block(*j) for j in jobs]
    rows = [r for b in blocks for r in b[0]]
    for _, traces in blocks:
        for rid, tr in traces:
            (out / "traces" / f"{rid}.json").write_text(json.dumps(_clean(tr), indent=1))
    buf = io.StringIO()
    buf.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _format(r[k]) for k in COLUMNS})
    (out / "results.csv").write_text(buf.getvalue())
    resolved = dict(config=spec.config.to_dict(), powers_dBW=list(spec.powers_dBW),
                    rhos=list(spec.rhos), archs=list(spec.archs), seeds=list(spec.seeds),
                    mc_draws=spec.mc_draws, trace_every=spec.trace_every,
                    admm=asdict(spec.admm), mm=asdict(spec.mm))
    (out / "resolved-config.json").write_text(json.dumps(_clean(resolved), indent=1))
    return out / "results.csv"


def _scenario_block_star(args):
    return _scenario_block(*args)


def read_results(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def emit_convergence(trace_files, out=None) -> str:
    """Long-format CSV (run_id, iteration, metric, value) from JSON traces.

    Metrics are named ``<stage>/<key>``; values pass through unchanged.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run_id", "iteration", "metric", "value"])
    for path in trace_files:
        path = Path(path)
        if not path.is_file():
            raise MissingTrace(f"trace file not found: {path}")
        tr = json.loads(path.read_text())
        for stage, records in tr.get("stages", {}).items():
            for rec in records:
                it = rec.get("iteration")
                for key, value in rec.items():
                    if key == "iteration":
                        continue
                    writer.writerow([tr["run_id"], it, f"{stage}/{key}", value])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text

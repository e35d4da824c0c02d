"""Hybrid precoding for integrated communications and localization in LEO downlinks."""
from .channel import StatCsi, build_stat_csi
from .comm import monte_carlo_rate, spectral_efficiency
from .config import SystemConfig, desk_profile, load_config, table_profile
from .errors import LeoIcalError
from .experiment import ExperimentSpec, emit_convergence, run_experiment
from .fim import channel_fim, fim_bundle, sum_speb
from .hybrid import AdmmConfig, baseline_codebook, baseline_fully_digital, run_hybrid
from .locprec import design_localization_precoder, run_mm
from .scenario import sample_scenario

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig", "ExperimentSpec", "LeoIcalError", "StatCsi", "SystemConfig",
    "baseline_codebook", "baseline_fully_digital", "build_stat_csi", "channel_fim",
    "desk_profile", "design_localization_precoder", "emit_convergence", "fim_bundle",
    "load_config", "monte_carlo_rate", "run_experiment", "run_hybrid", "run_mm",
    "sample_scenario", "spectral_efficiency", "sum_speb", "table_profile",
]

"""System parameters and the flat ``key = value`` config file format.

Defaults reproduce the S-band simulation setup (24x24 UPA, 512 subcarriers,
9 UTs).  :func:`desk_profile` returns the reduced setup used by the
experiment runner so that the SDP-based localization design finishes in
seconds per scenario.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

SPEED_OF_LIGHT = 3e8
EARTH_RADIUS_M = 6371e3


def db2lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin2db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemConfig:
    carrier_freq_Hz: float = 2e9
    bandwidth_Hz: float = 15.36e6
    subcarrier_spacing_Hz: float = 30e3
    num_subcarriers: int = 512
    cp_length: int = 36
    num_tx_x: int = 24
    num_tx_y: int = 24
    num_rf_chains: int = 36
    num_uts: int = 9
    rician_factor_linear: float = db2lin(18.0)
    slots_per_frame: int = 20
    pilot_syms_per_slot: int = 2
    data_syms_per_slot: int = 12
    orbit_height_m: float = 200e3
    sat_antenna_gain_linear: float = db2lin(6.0)
    ut_antenna_gain_linear: float = 1.0
    noise_psd_W_per_Hz: float = db2lin(-174.0) * 1e-3
    tx_power_W: float = 10.0
    weight_rho: float = 0.7
    # scenario plumbing
    max_nadir_rad: float = math.pi / 6
    max_speed_mps: float = 10.0
    ground_model: str = "sphere"
    # subcarriers kept in FIM / SDP / ADMM sums (0 keeps all of them)
    retained_subcarriers: int = 0
    speed_of_light: float = SPEED_OF_LIGHT
    earth_radius_m: float = EARTH_RADIUS_M

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = [
            "carrier_freq_Hz", "bandwidth_Hz", "subcarrier_spacing_Hz", "num_subcarriers",
            "num_tx_x", "num_tx_y", "num_rf_chains", "num_uts", "rician_factor_linear",
            "slots_per_frame", "pilot_syms_per_slot", "orbit_height_m",
            "sat_antenna_gain_linear", "ut_antenna_gain_linear", "noise_psd_W_per_Hz",
            "tx_power_W", "speed_of_light", "earth_radius_m",
        ]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.cp_length < 0 or self.data_syms_per_slot < 0 or self.retained_subcarriers < 0:
            raise ConfigError("cp_length, data_syms_per_slot and retained_subcarriers must be >= 0")
        if not 0.0 <= self.weight_rho <= 1.0:
            raise ConfigError(f"weight_rho must lie in [0, 1], got {self.weight_rho}")
        if not self.num_uts <= self.num_rf_chains <= self.num_antennas:
            raise ConfigError(
                f"need K <= N_rf <= N_t, got K={self.num_uts}, N_rf={self.num_rf_chains}, "
                f"N_t={self.num_antennas}")
        if self.retained_subcarriers > self.num_subcarriers:
            raise ConfigError("retained_subcarriers exceeds num_subcarriers")
        if self.ground_model not in ("sphere", "plane"):
            raise ConfigError(f"unknown ground_model {self.ground_model!r}")

    @property
    def num_antennas(self) -> int:
        return self.num_tx_x * self.num_tx_y

    @property
    def sampling_period_s(self) -> float:
        return 1.0 / (2.0 * self.bandwidth_Hz)

    @property
    def symbol_duration_s(self) -> float:
        """CP-inclusive OFDM symbol duration T."""
        return (self.num_subcarriers + self.cp_length) * self.sampling_period_s

    @property
    def noise_power_W(self) -> float:
        """Per-subcarrier noise variance N0."""
        return self.noise_psd_W_per_Hz * self.subcarrier_spacing_Hz

    @property
    def num_pilot_symbols(self) -> int:
        return self.slots_per_frame * self.pilot_syms_per_slot

    @property
    def wavelength_m(self) -> float:
        return self.speed_of_light / self.carrier_freq_Hz

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def table_profile(**overrides) -> SystemConfig:
    """Full-scale parameters (N_t = 576, N_sc = 512, K = 9)."""
    return SystemConfig(**overrides)


def desk_profile(**overrides) -> SystemConfig:
    """8x8 array, 8 RF chains, 3 UTs, 8 retained subcarriers, 4 slots."""
    base = dict(num_tx_x=8, num_tx_y=8, num_rf_chains=8, num_uts=3,
                slots_per_frame=4, retained_subcarriers=8)
    base.update(overrides)
    return SystemConfig(**base)


def _coerce(raw: str, kind):
    raw = raw.strip()
    if kind in (int, "int"):
        value = float(raw)
        if not value.is_integer():
            raise ConfigError(f"expected an integer, got {raw!r}")
        return int(value)
    if kind in (float, "float"):
        return float(raw)
    return raw.strip("'\"")


def parse_config(text: str, base: SystemConfig | None = None) -> SystemConfig:
    """Parse ``key = value`` lines (``#`` comments) on top of ``base``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    base = base or SystemConfig()
    kinds = {f.name: f.type for f in fields(SystemConfig)}
    changes = {}
    for key, raw in parser["config"].items():
        if key not in kinds:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            changes[key] = _coerce(raw, kinds[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return base.replace(**changes)


def load_config(path, base: SystemConfig | None = None) -> SystemConfig:
    return parse_config(Path(path).read_text(), base=base)


def dump_config(cfg: SystemConfig) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"

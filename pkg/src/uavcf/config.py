"""Experiment configuration: YAML ingestion, band defaults and seeded streams.

Keys carry their unit in the name (``bandwidth_hz``, ``uav_height_m``);
unknown keys are rejected so that typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .access import AccessConfig
from .channels import ArrayGeometry, ChannelConfig, MmWaveParams
from .fronthaul import FronthaulConfig, SplitOption
from .optimizer import OptimizerConfig
from .powermodel import BatteryParams, PowerModelParams
from .topology import TopologyConfig
from .units import dbm2watt


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


BANDS = ("sub6", "mmwave")

# fronthaul antennas, carrier and bandwidth used unless a config overrides them
BAND_DEFAULTS = {
    "sub6": {"n_antennas": 64, "carrier_hz": 3.5e9, "bandwidth_hz": 150e6},
    "mmwave": {"n_antennas": 1024, "carrier_hz": 28e9, "bandwidth_hz": 500e6},
}

# desk scale: half the network of the full-size study
DESK_TOPOLOGY = {"n_uavs": 8, "n_ues": 4}

# stable identifiers of the per-instance random streams
STREAMS = {"access": 1, "fronthaul": 2}


@dataclass(frozen=True)
class FronthaulSection:
    # None selects the band default
    n_antennas: int | None = None
    carrier_hz: float | None = None
    bandwidth_hz: float | None = None
    p_max_w: float = 10.0
    noise_psd_dbm_per_hz: float = -174.0
    sampling_rate_hz: float = 30.72e6
    n_bits: int = 8
    n_used: int = 1200
    n_dft: int = 2048
    symbol_duration_s: float = 71.4e-6
    asd_deg: float = 15.0
    rician_k_db: float | None = None
    mmwave_scattered_paths: int = 1
    mmwave_scattered_power_db: float = -10.0
    mmwave_angular_window_deg: float = 10.0


@dataclass(frozen=True)
class AccessSection:
    n_antennas: int = 4
    carrier_hz: float = 3.5e9
    bandwidth_hz: float = 20e6
    tau_c: int = 192
    tau_u: int = 8
    pilot_power_w: float = 0.1
    noise_figure_db: float = 7.0
    p_uav_w: float = 1.0
    stat_samples: int = 2000


@dataclass(frozen=True)
class PowerSection:
    p_proc_idle_w: float = 20.8
    proc_slope_w: float = 74.0
    c_max_gops: float = 180.0
    p_amp_w: float = 64.4
    psi_t: float = 4.0
    include_fronthaul: bool = True
    battery_mass_kg: float = 1.6
    energy_density_wh_per_kg: float = 200.0
    mech_power_w: float = 150.0


@dataclass(frozen=True)
class OptimizerSection:
    t_lo: float = 1e-4
    bisect_rtol: float = 1e-3
    rel_gap: float = 1e-6
    solver_tol: float = 1e-8
    max_nodes: int = 200_000


@dataclass(frozen=True)
class SweepSection:
    n_antennas: tuple[int, ...] = (16, 64, 256, 1024)
    gamma_db: tuple[float, ...] = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    bands: tuple[str, ...] = BANDS
    splits: tuple[str, ...] = ("option8", "option72")
    feasibility_flag_below: float = 0.5
    # SINR target of the power-minimisation runs behind the service-time report
    service_gamma_db: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 200
    seed: int = 0
    out_dir: str = "results"
    threads: int = 1
    figures: bool = True
    topology: TopologyConfig = TopologyConfig(**DESK_TOPOLOGY)
    fronthaul: FronthaulSection = FronthaulSection()
    access: AccessSection = AccessSection()
    power: PowerSection = PowerSection()
    optimizer: OptimizerSection = OptimizerSection()
    sweep: SweepSection = SweepSection()

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        for b in self.sweep.bands:
            if b not in BANDS:
                raise ConfigError(f"unknown band {b!r}")
        for s in self.sweep.splits:
            try:
                SplitOption.parse(s)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if any(n < 1 for n in self.sweep.n_antennas):
            raise ConfigError("fronthaul antenna counts must be positive")

    # ----- derived module configs -----

    def band_value(self, band: str, key: str):
        v = getattr(self.fronthaul, key)
        return BAND_DEFAULTS[band][key] if v is None else v

    def channel_config(self, band: str, n_antennas: int | None = None) -> ChannelConfig:
        f = self.fronthaul
        n = n_antennas if n_antennas is not None else self.band_value(band, "n_antennas")
        return ChannelConfig(
            band=band,
            fronthaul_array=ArrayGeometry.square(int(n)),
            access_array=ArrayGeometry.square(self.access.n_antennas),
            fronthaul_carrier_hz=float(self.band_value(band, "carrier_hz")),
            access_carrier_hz=self.access.carrier_hz,
            asd_deg=f.asd_deg,
            mmwave=MmWaveParams(f.mmwave_scattered_paths, (f.mmwave_scattered_power_db,),
                                f.mmwave_angular_window_deg),
            rician_k_db=f.rician_k_db,
        )

    def fronthaul_config(self, band: str) -> FronthaulConfig:
        f = self.fronthaul
        return FronthaulConfig(
            bandwidth_hz=float(self.band_value(band, "bandwidth_hz")),
            noise_psd_w_per_hz=float(dbm2watt(f.noise_psd_dbm_per_hz)),
            p_max_w=f.p_max_w, sampling_rate_hz=f.sampling_rate_hz, n_bits=f.n_bits,
            n_used=f.n_used, n_dft=f.n_dft, symbol_duration_s=f.symbol_duration_s,
            n_access_antennas=self.access.n_antennas,
        )

    def access_config(self) -> AccessConfig:
        a = self.access
        return AccessConfig(bandwidth_hz=a.bandwidth_hz, tau_c=a.tau_c, tau_u=a.tau_u,
                            pilot_power_w=a.pilot_power_w, noise_figure_db=a.noise_figure_db,
                            p_uav_w=a.p_uav_w)

    def power_params(self) -> PowerModelParams:
        p = self.power
        return PowerModelParams(p.p_proc_idle_w, p.proc_slope_w, p.c_max_gops, p.p_amp_w,
                                p.psi_t, p.include_fronthaul)

    def battery(self) -> BatteryParams:
        p = self.power
        return BatteryParams(p.battery_mass_kg, p.energy_density_wh_per_kg, p.mech_power_w)

    def optimizer_config(self) -> OptimizerConfig:
        o = self.optimizer
        return OptimizerConfig(p_uav_w=self.access.p_uav_w,
                               p_max_fronthaul_w=self.fronthaul.p_max_w, t_lo=o.t_lo,
                               bisect_rtol=o.bisect_rtol, rel_gap=o.rel_gap,
                               solver_tol=o.solver_tol, max_nodes=o.max_nodes)

    # ----- identity and randomness -----

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def config_hash(self) -> str:
        """Hash of everything that affects results (output location excluded)."""
        d = self.to_dict()
        for k in ("out_dir", "threads", "figures"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def instance_seed(self, trial: int) -> int:
        return self.seed + trial

    def rng(self, trial: int, stream: str, *key: int) -> np.random.Generator:
        """Independent generator for one named stream of one instance.

        Extra integer ``key`` entries split a stream further (e.g. per band
        and antenna count) without disturbing the others.
        """
        ss = np.random.SeedSequence([self.instance_seed(trial), STREAMS[stream], *key])
        return np.random.default_rng(ss)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


_SECTIONS = {
    "topology": TopologyConfig,
    "fronthaul": FronthaulSection,
    "access": AccessSection,
    "power": PowerSection,
    "optimizer": OptimizerSection,
    "sweep": SweepSection,
}


def _build_section(cls, data, name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    kwargs = dict(DESK_TOPOLOGY) if cls is TopologyConfig else {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(data: dict | None) -> ExperimentConfig:
    data = dict(data or {})
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if k in _SECTIONS:
            kwargs[k] = _build_section(_SECTIONS[k], v, k)
        else:
            kwargs[k] = v
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data)

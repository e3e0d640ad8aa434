"""UAV-AP power consumption under the two functional splits, and the
battery-limited service time that follows from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fronthaul import FronthaulConfig, SplitOption


class CapacityExceededError(ValueError):
    pass


@dataclass(frozen=True)
class PowerModelParams:
    p_proc_idle_w: float = 20.8
    proc_slope_w: float = 74.0
    c_max_gops: float = 180.0
    p_amp_w: float = 64.4
    # transmit slope: 1 / amplifier efficiency
    psi_t: float = 4.0
    include_fronthaul: bool = True

    def __post_init__(self):
        for name in ("p_proc_idle_w", "proc_slope_w", "c_max_gops", "p_amp_w", "psi_t"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ProcessingLoad:
    filtering_gops: float
    dft_gops: float

    @property
    def total_gops(self) -> float:
        return self.filtering_gops + self.dft_gops


def processing_gops(cfg: FronthaulConfig) -> ProcessingLoad:
    """Low-PHY processing load of one Option 7.2 UAV-AP in GOPS.

    Polyphase filtering costs ``40 N_a f_s / 1e9`` and the DFT
    ``8 N_a N_DFT log2(N_DFT) / (T_s 1e9)``.
    """
    n_dft = cfg.n_dft
    if n_dft & (n_dft - 1):
        raise ValueError("n_dft must be a power of two")
    na = cfg.n_access_antennas
    c_f = 40.0 * na * cfg.sampling_rate_hz / 1e9
    c_d = 8.0 * na * n_dft * math.log2(n_dft) / (cfg.symbol_duration_s * 1e9)
    return ProcessingLoad(c_f, c_d)


def processing_power(params: PowerModelParams, gops: float) -> float:
    """Load-dependent processing power ``P_idle + slope * load / C_max``."""
    if gops > params.c_max_gops:
        raise CapacityExceededError(f"processing load {gops} GOPS exceeds {params.c_max_gops}")
    return params.p_proc_idle_w + params.proc_slope_w * gops / params.c_max_gops


def per_uav_static_power(split: SplitOption, fronthaul_powers, params: PowerModelParams,
                         cfg: FronthaulConfig) -> np.ndarray:
    """Cost of switching each UAV-AP on, independent of its transmit power."""
    pf = np.asarray(fronthaul_powers, dtype=float)
    static = np.full(pf.shape, params.p_amp_w)
    if params.include_fronthaul:
        static = static + pf
    if split.indicator:
        static = static + processing_power(params, processing_gops(cfg).total_gops)
    return static


@dataclass(frozen=True)
class PowerBreakdown:
    processing: float
    fronthaul: float
    amplifier_static: float
    transmit: float

    @property
    def total(self) -> float:
        return self.processing + self.fronthaul + self.amplifier_static + self.transmit

    def rows(self) -> list[tuple[str, float]]:
        return [("processing", self.processing), ("fronthaul", self.fronthaul),
                ("amplifier_static", self.amplifier_static), ("transmit", self.transmit),
                ("total", self.total)]


def total_power(alloc, split: SplitOption, fronthaul_powers, params: PowerModelParams,
                cfg: FronthaulConfig | None = None) -> PowerBreakdown:
    """Total UAV-AP power of an allocation.

    ``alloc`` carries ``rho`` (K x L power square-roots) and ``alpha`` (L
    activations). ``fronthaul_powers`` are the per-UAV fronthaul powers of
    the selected split.
    """
    cfg = cfg or FronthaulConfig()
    alpha = np.asarray(alloc.alpha, dtype=float)
    rho = np.asarray(alloc.rho, dtype=float)
    pf = np.asarray(fronthaul_powers, dtype=float)
    n_active = float(alpha.sum())
    proc = 0.0
    if split.indicator:
        proc = processing_power(params, processing_gops(cfg).total_gops) * n_active
    fh = float(alpha @ pf) if params.include_fronthaul else 0.0
    return PowerBreakdown(
        processing=proc,
        fronthaul=fh,
        amplifier_static=params.p_amp_w * n_active,
        transmit=params.psi_t * float(np.sum(rho ** 2)),
    )


@dataclass(frozen=True)
class BatteryParams:
    battery_mass_kg: float = 1.6
    energy_density_wh_per_kg: float = 200.0
    mech_power_w: float = 150.0

    def __post_init__(self):
        for name in ("battery_mass_kg", "energy_density_wh_per_kg", "mech_power_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def energy_wh(self) -> float:
        return self.battery_mass_kg * self.energy_density_wh_per_kg


def service_time(comm_power_w: float, battery: BatteryParams) -> float:
    """Flight time in minutes of one UAV-AP drawing ``comm_power_w`` for communication."""
    if comm_power_w < 0:
        raise ValueError("communication power must be nonnegative")
    return 60.0 * battery.energy_wh / (battery.mech_power_w + comm_power_w)

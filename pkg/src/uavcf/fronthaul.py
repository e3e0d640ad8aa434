"""Wireless fronthaul: split-dependent rates, ZF precoding at the CPU and the
transmit power each UAV-AP needs to sustain its fronthaul rate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .units import dbm2watt, THERMAL_NOISE_DBM_PER_HZ

LN2 = math.log(2.0)


class SplitOption(enum.Enum):
    OPTION8 = "option8"
    OPTION72 = "option72"

    @property
    def indicator(self) -> int:
        """0 for Option 8, 1 for Option 7.2."""
        return 1 if self is SplitOption.OPTION72 else 0

    @classmethod
    def parse(cls, value) -> "SplitOption":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace(".", "").replace("_", "").replace(" ", "")
        key = key.removeprefix("option")
        for member in cls:
            if member.value.removeprefix("option") == key:
                return member
        raise ValueError(f"unknown split option {value!r}")


@dataclass(frozen=True)
class FronthaulConfig:
    bandwidth_hz: float = 150e6
    noise_psd_w_per_hz: float = float(dbm2watt(THERMAL_NOISE_DBM_PER_HZ))
    p_max_w: float = 10.0
    sampling_rate_hz: float = 30.72e6
    n_bits: int = 8
    n_used: int = 1200
    n_dft: int = 2048
    symbol_duration_s: float = 71.4e-6
    n_access_antennas: int = 4

    def __post_init__(self):
        for name in ("bandwidth_hz", "noise_psd_w_per_hz", "p_max_w", "sampling_rate_hz",
                     "n_bits", "n_used", "n_dft", "symbol_duration_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_access_antennas < 0:
            raise ValueError("n_access_antennas must be nonnegative")
        if self.n_used > self.n_dft:
            raise ValueError("n_used cannot exceed n_dft")


def fronthaul_rate_requirement(split: SplitOption, cfg: FronthaulConfig) -> float:
    """Per-UAV downlink fronthaul rate in bit/s.

    Option 8 ships time-domain samples: ``2 f_s N_bits N_a``. Option 7.2 ships
    only the used subcarriers: ``2 N_bits N_used N_a / T_s``.
    """
    if split is SplitOption.OPTION8:
        return 2.0 * cfg.sampling_rate_hz * cfg.n_bits * cfg.n_access_antennas
    return 2.0 * cfg.n_bits * cfg.n_used * cfg.n_access_antennas / cfg.symbol_duration_s


class SingularChannelError(np.linalg.LinAlgError):
    """Fronthaul channel columns are (numerically) linearly dependent."""


@dataclass(frozen=True)
class ZfPrecodingResult:
    P: np.ndarray
    inv_gram_diag: np.ndarray

    @property
    def effective_gain(self) -> np.ndarray:
        return 1.0 / self.inv_gram_diag


def zf_precoder(H, cond_threshold: float = 1e10) -> ZfPrecodingResult:
    """Zero-forcing precoder with unit-norm columns.

    ``P = H^* (H^T H^*)^{-1} Z`` with ``Z = diag(1/sqrt([(H^T H^*)^{-1}]_ll))``,
    evaluated through a QR factorisation of ``H^*`` so that ``H^T P`` is
    diagonal to working precision.
    """
    H = getattr(H, "H", H)
    H = np.asarray(H, dtype=complex)
    N, L = H.shape
    if N < L:
        raise SingularChannelError(f"ZF needs N_c >= L, got N_c={N}, L={L}")
    Q, R = np.linalg.qr(H.conj())
    s = np.linalg.svd(R, compute_uv=False)
    if s[-1] == 0.0 or (s[0] / s[-1]) ** 2 > cond_threshold:
        raise SingularChannelError("fronthaul Gram matrix is singular")
    R_inv = solve_triangular(R, np.eye(L, dtype=complex))
    inv_gram_diag = np.sum(np.abs(R_inv) ** 2, axis=1)
    # P = Q R^{-H} Z
    P = Q @ R_inv.conj().T / np.sqrt(inv_gram_diag)[None, :]
    return ZfPrecodingResult(P, inv_gram_diag)


def fronthaul_power(rate, bandwidth_hz, noise_psd, inv_gram_diag):
    """Vectorised ``(2^(rate/B) - 1) B N_0 G``; overflow saturates to +inf."""
    rate = np.asarray(rate, dtype=float)
    B = np.asarray(bandwidth_hz, dtype=float)
    with np.errstate(over="ignore"):
        growth = np.expm1(rate / B * LN2)
        return growth * B * noise_psd * np.asarray(inv_gram_diag, dtype=float)


def fronthaul_power_required(zf: ZfPrecodingResult, l: int, rate: float,
                             cfg: FronthaulConfig) -> float:
    """CPU transmit power needed to carry ``rate`` to UAV-AP ``l``."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    return float(fronthaul_power(rate, cfg.bandwidth_hz, cfg.noise_psd_w_per_hz,
                                 zf.inv_gram_diag[l]))


def fronthaul_powers(H, split: SplitOption, cfg: FronthaulConfig) -> np.ndarray:
    """Required fronthaul power of every UAV-AP for one channel draw."""
    zf = zf_precoder(H)
    return fronthaul_power(fronthaul_rate_requirement(split, cfg), cfg.bandwidth_hz,
                           cfg.noise_psd_w_per_hz, zf.inv_gram_diag)


def asymptotic_power(rate: float, noise_psd: float, inv_gram: float) -> float:
    """Limit of the required power as the bandwidth grows without bound."""
    return rate * noise_psd * LN2 * inv_gram


BANDWIDTH_BRACKET_HZ = (1e3, 100e9)


def min_bandwidth_for_gain(rate: float, inv_gram: float, noise_psd: float, p_max: float,
                           rtol: float = 1e-4, bracket=BANDWIDTH_BRACKET_HZ) -> float:
    """Smallest bandwidth at which the required power drops to ``p_max``.

    Bisection in log-bandwidth; valid because the required power is strictly
    decreasing in bandwidth. Returns ``inf`` when even the upper end of the
    bracket (or the infinite-bandwidth limit) needs more than ``p_max``.
    """
    if rate == 0:
        return bracket[0]
    if asymptotic_power(rate, noise_psd, inv_gram) >= p_max:
        return math.inf

    def power(B):
        return float(fronthaul_power(rate, B, noise_psd, inv_gram))

    lo, hi = bracket
    if power(hi) > p_max:
        return math.inf
    if power(lo) <= p_max:
        return lo
    while hi - lo > rtol * lo:
        mid = math.sqrt(lo * hi)
        if power(mid) <= p_max:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class MinBandwidthResult:
    per_draw: np.ndarray  # inf marks an excluded (infeasible or singular) draw
    n_infeasible: int

    @property
    def feasible(self) -> np.ndarray:
        return self.per_draw[np.isfinite(self.per_draw)]

    @property
    def mean(self) -> float:
        f = self.feasible
        return float(f.mean()) if f.size else math.nan

    @property
    def median(self) -> float:
        f = self.feasible
        return float(np.median(f)) if f.size else math.nan

    @property
    def stderr(self) -> float:
        f = self.feasible
        return float(f.std(ddof=1) / math.sqrt(f.size)) if f.size > 1 else math.nan

    @property
    def feasible_fraction(self) -> float:
        return float(np.isfinite(self.per_draw).mean()) if self.per_draw.size else math.nan


def min_bandwidth_single_ap(channel_sampler: Callable[[np.random.Generator], object],
                            split: SplitOption, cfg: FronthaulConfig, n_mc: int,
                            rng: np.random.Generator) -> MinBandwidthResult:
    """Minimum fronthaul bandwidth that lets the best UAV-AP be activated.

    For every channel draw the UAV-AP with the smallest ``[(H^T H^*)^{-1}]_ll``
    needs the least power; the bandwidth that brings its power down to
    ``P_max`` is found by bisection.
    """
    rate = fronthaul_rate_requirement(split, cfg)
    out = np.empty(n_mc)
    for i in range(n_mc):
        out[i] = min_bandwidth_for_channel(channel_sampler(rng), rate, cfg)
    return MinBandwidthResult(out, int(np.sum(~np.isfinite(out))))


def min_bandwidth_for_channel(H, rate: float, cfg: FronthaulConfig) -> float:
    try:
        g = zf_precoder(H).inv_gram_diag.min()
    except SingularChannelError:
        return math.inf
    return min_bandwidth_for_gain(rate, g, cfg.noise_psd_w_per_hz, cfg.p_max_w)

"""Network geometry and air-to-ground large-scale propagation.

The CPU sits at the centre of a square service area, UAV access points fly at
a common altitude and ground users stand at z = 0. Large-scale gains follow an
elevation-angle dependent LoS probability model: free-space loss plus an
excess loss that mixes the LoS and NLoS values with the LoS probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .units import SPEED_OF_LIGHT, db2lin


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.z < 0:
            raise ValueError(f"height must be nonnegative, got z={self.z}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class PathLossParams:
    """Environment constants of the LoS-probability path loss model."""

    eta1: float
    eta2: float
    excess_los_db: float = 1.0
    excess_nlos_db: float = 20.0
    carrier_hz: float = 3.5e9

    def __post_init__(self):
        if self.eta1 <= 0 or self.eta2 <= 0:
            raise ValueError("eta1 and eta2 must be positive")
        if not 0 <= self.excess_los_db <= self.excess_nlos_db:
            raise ValueError("need 0 <= excess_los_db <= excess_nlos_db")

    def with_carrier(self, carrier_hz: float) -> "PathLossParams":
        return PathLossParams(self.eta1, self.eta2, self.excess_los_db,
                              self.excess_nlos_db, carrier_hz)


FRONTHAUL_ENV = PathLossParams(eta1=4.8, eta2=0.43)
ACCESS_ENV = PathLossParams(eta1=9.61, eta2=0.16)


@dataclass(frozen=True)
class TopologyConfig:
    n_uavs: int = 16
    n_ues: int = 8
    area_side_m: float = 1000.0
    uav_height_m: float = 200.0
    cpu_height_m: float = 50.0

    def __post_init__(self):
        if self.n_uavs < 1 or self.n_ues < 1:
            raise ValueError("need at least one UAV-AP and one UE")
        if self.area_side_m <= 0:
            raise ValueError("area_side_m must be positive")
        if self.uav_height_m < 0 or self.cpu_height_m < 0:
            raise ValueError("heights must be nonnegative")


@dataclass(frozen=True)
class NetworkTopology:
    cpu: Position3D
    uavs: tuple[Position3D, ...]
    ues: tuple[Position3D, ...]
    area_side: float
    seed: int | None = field(default=None, compare=False)

    @property
    def n_uavs(self) -> int:
        return len(self.uavs)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    def uav_array(self) -> np.ndarray:
        return np.array([p.as_array() for p in self.uavs])

    def ue_array(self) -> np.ndarray:
        return np.array([p.as_array() for p in self.ues])

    def to_dict(self) -> dict:
        def pos(p):
            return [p.x, p.y, p.z]
        return {
            "cpu": pos(self.cpu),
            "uavs": [pos(p) for p in self.uavs],
            "ues": [pos(p) for p in self.ues],
            "area_side": self.area_side,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkTopology":
        return cls(
            cpu=Position3D(*d["cpu"]),
            uavs=tuple(Position3D(*p) for p in d["uavs"]),
            ues=tuple(Position3D(*p) for p in d["ues"]),
            area_side=float(d["area_side"]),
            seed=d.get("seed"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "NetworkTopology":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_topology(config: TopologyConfig, seed: int) -> NetworkTopology:
    """Drop UAVs and UEs uniformly over the square area.

    The CPU is placed at the exact centre of the area at the CPU height. The
    draw depends only on ``seed``.
    """
    rng = np.random.default_rng(seed)
    side = config.area_side_m
    uav_xy = rng.uniform(0.0, side, size=(config.n_uavs, 2))
    ue_xy = rng.uniform(0.0, side, size=(config.n_ues, 2))
    return NetworkTopology(
        cpu=Position3D(side / 2, side / 2, config.cpu_height_m),
        uavs=tuple(Position3D(float(x), float(y), config.uav_height_m) for x, y in uav_xy),
        ues=tuple(Position3D(float(x), float(y), 0.0) for x, y in ue_xy),
        area_side=side,
        seed=seed,
    )


def _xyz(p) -> np.ndarray:
    return p.as_array() if isinstance(p, Position3D) else np.asarray(p, dtype=float)


def elevation_angle(a, b) -> float:
    """Elevation angle in degrees of the segment between ``a`` and ``b``.

    Measured from the horizontal plane, using the absolute height difference,
    so the result lies in [0, 90]. Vertically aligned points give 90.
    """
    d = _xyz(b) - _xyz(a)
    horizontal = math.hypot(d[0], d[1])
    if horizontal == 0.0:
        return 90.0
    return math.degrees(math.atan2(abs(d[2]), horizontal))


def azimuth_angle(a, b) -> float:
    """Azimuth in degrees of ``b`` seen from ``a`` (counter-clockwise from +x)."""
    d = _xyz(b) - _xyz(a)
    return math.degrees(math.atan2(d[1], d[0]))


def los_probability(theta_deg, params: PathLossParams):
    """Logistic LoS probability as a function of elevation angle in degrees."""
    theta = np.asarray(theta_deg, dtype=float)
    return 1.0 / (1.0 + params.eta1 * np.exp(-params.eta2 * (theta - params.eta1)))


def free_space_loss_db(distance_m, carrier_hz: float):
    d = np.asarray(distance_m, dtype=float)
    return 20.0 * np.log10(4.0 * math.pi * carrier_hz * d / SPEED_OF_LIGHT)


def mean_path_loss_db(a, b, params: PathLossParams) -> float:
    """LoS-probability weighted air-to-ground path loss in dB."""
    d = float(np.linalg.norm(_xyz(b) - _xyz(a)))
    if d == 0.0:
        raise ValueError("coincident endpoints")
    p_los = float(los_probability(elevation_angle(a, b), params))
    excess = p_los * params.excess_los_db + (1.0 - p_los) * params.excess_nlos_db
    return float(free_space_loss_db(d, params.carrier_hz)) + excess


@dataclass(frozen=True)
class LinkBudget:
    """Large-scale quantities of one link.

    ``gain`` is the linear channel gain (inverse path loss), ``p_los`` the LoS
    probability and ``los`` the LoS state actually used when the links are
    sampled per realization (always None for the probability-averaged model).
    """

    gain: float
    p_los: float
    azimuth_deg: float
    elevation_deg: float
    los: bool | None = None


def link_budget(a, b, params: PathLossParams, rng: np.random.Generator | None = None,
                sample_los: bool = False) -> LinkBudget:
    """Large-scale gain and angles of the link from ``a`` towards ``b``.

    Angles are those of ``b`` seen from ``a``; elevation is signed (negative
    when ``b`` is below ``a``). With ``sample_los`` a Bernoulli LoS state is
    drawn and the corresponding excess loss applied instead of the average.
    """
    pa, pb = _xyz(a), _xyz(b)
    d = float(np.linalg.norm(pb - pa))
    theta = elevation_angle(pa, pb)
    p_los = float(los_probability(theta, params))
    sign = 1.0 if pb[2] >= pa[2] else -1.0
    az = azimuth_angle(pa, pb)
    if sample_los:
        if rng is None:
            raise ValueError("sample_los requires an rng")
        los = bool(rng.random() < p_los)
        pl = float(free_space_loss_db(d, params.carrier_hz)) + (
            params.excess_los_db if los else params.excess_nlos_db)
        return LinkBudget(float(db2lin(-pl)), p_los, az, sign * theta, los)
    pl = mean_path_loss_db(pa, pb, params)
    return LinkBudget(float(db2lin(-pl)), p_los, az, sign * theta)

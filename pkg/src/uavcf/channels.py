"""Fronthaul and access channel models.

Fronthaul (CPU -> UAV-AP): either a mmWave Saleh-Valenzuela channel with one
direct path plus a few scattered paths, or a sub-6 GHz Rician channel whose
NLoS part is correlated Rayleigh fading from the local scattering model.
Access (UAV-AP -> UE) always uses the sub-6 GHz Rician model.

All sampling is driven by an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .topology import ACCESS_ENV, FRONTHAUL_ENV, NetworkTopology, PathLossParams, link_budget
from .units import db2lin


@dataclass(frozen=True)
class ArrayGeometry:
    rows: int
    cols: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array needs at least one row and one column")
        if self.spacing_wavelengths != 0.5:
            raise ValueError("only half-wavelength spacing is supported")

    @property
    def n_antennas(self) -> int:
        return self.rows * self.cols

    @classmethod
    def square(cls, n_antennas: int) -> "ArrayGeometry":
        """Most square factorisation rows x cols of ``n_antennas`` (rows >= cols)."""
        if n_antennas < 1:
            raise ValueError("n_antennas must be positive")
        cols = int(math.isqrt(n_antennas))
        while n_antennas % cols:
            cols -= 1
        return cls(n_antennas // cols, cols)


@dataclass(frozen=True)
class MmWaveParams:
    """Extended Saleh-Valenzuela parameters.

    ``beta_db`` holds the average power of every scattered path relative to
    the direct-path power; scattered angles are drawn uniformly within
    ``angular_window_deg`` of the direct path.
    """

    n_paths: int = 1
    beta_db: tuple[float, ...] = (-10.0,)
    angular_window_deg: float = 10.0

    def __post_init__(self):
        if self.n_paths < 0:
            raise ValueError("n_paths must be nonnegative")
        if len(self.beta_db) not in (1, self.n_paths) and self.n_paths > 0:
            raise ValueError("beta_db needs one entry or one per scattered path")

    def relative_powers(self) -> np.ndarray:
        if self.n_paths == 0:
            return np.zeros(0)
        beta = np.broadcast_to(np.asarray(self.beta_db, dtype=float), (self.n_paths,))
        return db2lin(beta)


@dataclass(frozen=True)
class ChannelConfig:
    band: str = "sub6"
    fronthaul_array: ArrayGeometry = ArrayGeometry(8, 8)
    access_array: ArrayGeometry = ArrayGeometry(2, 2)
    fronthaul_carrier_hz: float = 3.5e9
    access_carrier_hz: float = 3.5e9
    fronthaul_env: PathLossParams = FRONTHAUL_ENV
    access_env: PathLossParams = ACCESS_ENV
    asd_deg: float = 15.0
    mmwave: MmWaveParams = MmWaveParams()
    # None: LoS power fraction equals the link's LoS probability
    rician_k_db: float | None = None
    sample_los: bool = False

    def __post_init__(self):
        if self.band not in ("sub6", "mmwave"):
            raise ValueError(f"unknown band {self.band!r}")
        if self.asd_deg <= 0:
            raise ValueError("asd_deg must be positive")


def upa_response(azimuth_deg, elevation_deg, geometry: ArrayGeometry) -> np.ndarray:
    """Array response of a half-wavelength uniform planar array.

    Entry ``m * cols + q`` equals ``exp(j*pi*(m*u + q*v))`` with
    ``u = cos(el) sin(az)`` and ``v = sin(el)``. Angle arrays broadcast; the
    antenna index is the last axis.
    """
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=float))
    el = np.deg2rad(np.asarray(elevation_deg, dtype=float))
    u = (np.cos(el) * np.sin(az))[..., None]
    v = np.sin(el)[..., None]
    m = np.repeat(np.arange(geometry.rows), geometry.cols)
    q = np.tile(np.arange(geometry.cols), geometry.rows)
    return np.exp(1j * np.pi * (m * u + q * v))


def _clamp_psd(R: np.ndarray, target_trace: float) -> np.ndarray:
    R = 0.5 * (R + R.conj().T)
    w, V = np.linalg.eigh(R)
    if w.min() >= 0:
        return R
    w = np.clip(w, 0.0, None)
    R = (V * w) @ V.conj().T
    tr = np.trace(R).real
    if tr > 0:
        R *= target_trace / tr
    return 0.5 * (R + R.conj().T)


_QUAD_SIGMAS = 6.0
_QUAD_POINTS = 2049


def _scattering_factors(nominal_az_deg: float, asd_deg: float, geometry: ArrayGeometry,
                        elevation_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Row correlation ``T`` and column steering ``e`` with ``R = T kron e e^H``.

    With the elevation fixed the column phase is deterministic, so the
    correlation factors into a Toeplitz matrix over row offsets and a rank-one
    column term. ``T`` is clamped to PSD with its trace kept at ``rows``.
    """
    if asd_deg <= 0:
        raise ValueError("asd_deg must be positive")
    phi0 = math.radians(nominal_az_deg)
    sd = math.radians(asd_deg)
    cos_el = math.cos(math.radians(elevation_deg))
    v = math.sin(math.radians(elevation_deg))

    delta = np.linspace(-_QUAD_SIGMAS * sd, _QUAD_SIGMAS * sd, _QUAD_POINTS)
    weights = np.exp(-0.5 * (delta / sd) ** 2)
    weights[[0, -1]] *= 0.5
    weights /= weights.sum()
    offsets = np.arange(-(geometry.rows - 1), geometry.rows)
    kernel = np.exp(1j * np.pi * offsets[:, None] * cos_el * np.sin(phi0 + delta)[None, :])
    row_corr = kernel @ weights  # E{exp(j pi dm cos(el) sin(phi))} per offset dm

    m = np.arange(geometry.rows)
    T = row_corr[m[:, None] - m[None, :] + geometry.rows - 1]
    T = _clamp_psd(T, float(geometry.rows))
    e = np.exp(1j * np.pi * np.arange(geometry.cols) * v)
    return T, e


def local_scattering_correlation(nominal_az_deg: float, asd_deg: float,
                                 geometry: ArrayGeometry, gain: float = 1.0,
                                 elevation_deg: float = 0.0) -> np.ndarray:
    """Spatial correlation of the local scattering model.

    ``R = gain * E{a(phi) a(phi)^H}`` with the azimuth ``phi`` Gaussian around
    ``nominal_az_deg`` with standard deviation ``asd_deg`` and the elevation
    fixed. The expectation only depends on the row offset between antennas,
    so one 1-D trapezoidal integral per offset is evaluated on a fixed grid.
    """
    T, e = _scattering_factors(nominal_az_deg, asd_deg, geometry, elevation_deg)
    return gain * np.kron(T, np.outer(e, e.conj()))


def _scattering_correlation_and_root(nominal_az_deg, asd_deg, geometry, gain, elevation_deg):
    T, e = _scattering_factors(nominal_az_deg, asd_deg, geometry, elevation_deg)
    E = np.outer(e, e.conj())
    # (e e^H)^{1/2} = e e^H / ||e||
    root = math.sqrt(gain) * np.kron(psd_factor(T), E / math.sqrt(geometry.cols))
    return gain * np.kron(T, E), root


def psd_factor(R: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix (negative eigenvalues dropped)."""
    w, V = np.linalg.eigh(0.5 * (R + R.conj().T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _los_fraction(p_los: float, cfg: ChannelConfig, los: bool | None) -> float:
    if cfg.rician_k_db is None:
        frac = p_los
    else:
        k = float(db2lin(cfg.rician_k_db))
        frac = k / (1.0 + k)
    if los is False:
        return 0.0
    return frac


@dataclass(frozen=True)
class RicianLinks:
    """Large-scale description of a set of Rician links sharing one array.

    Arrays are indexed by link ``(..., N)``: ``los_mean`` is the LoS component
    without its random phase, ``R`` the NLoS correlation matrix and ``sqrt_R``
    its Hermitian square root.
    """

    gain: np.ndarray
    p_los: np.ndarray
    los_fraction: np.ndarray
    los_mean: np.ndarray
    R: np.ndarray
    sqrt_R: np.ndarray

    @property
    def second_moment(self) -> np.ndarray:
        """``E{h h^H}`` including the phase-randomised LoS term."""
        h = self.los_mean
        return self.R + h[..., :, None] * h[..., None, :].conj()

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw channel vectors, shape ``(size, *links, N)`` (no leading axis for None)."""
        n = 1 if size is None else size
        link_shape = self.gain.shape
        N = self.los_mean.shape[-1]
        phase = np.exp(2j * np.pi * rng.random((n, *link_shape)))
        z = _cn(rng, (n, *link_shape, N))
        h = phase[..., None] * self.los_mean + np.einsum("...ij,n...j->n...i", self.sqrt_R, z)
        return h[0] if size is None else h


def _rician_links(budgets, geometry: ArrayGeometry, cfg: ChannelConfig) -> RicianLinks:
    shape = np.shape(budgets)
    flat = np.ravel(np.asarray(budgets, dtype=object))
    N = geometry.n_antennas
    gain = np.empty(flat.size)
    p_los = np.empty(flat.size)
    frac = np.empty(flat.size)
    los_mean = np.zeros((flat.size, N), dtype=complex)
    R = np.zeros((flat.size, N, N), dtype=complex)
    sqrt_R = np.zeros_like(R)
    for i, lb in enumerate(flat):
        gain[i], p_los[i] = lb.gain, lb.p_los
        frac[i] = _los_fraction(lb.p_los, cfg, lb.los)
        if lb.gain == 0.0:
            continue
        los_mean[i] = math.sqrt(frac[i] * lb.gain) * upa_response(lb.azimuth_deg, lb.elevation_deg, geometry)
        nlos_gain = (1.0 - frac[i]) * lb.gain
        if nlos_gain > 0.0:
            R[i], sqrt_R[i] = _scattering_correlation_and_root(
                lb.azimuth_deg, cfg.asd_deg, geometry, nlos_gain, lb.elevation_deg)
    return RicianLinks(
        gain=gain.reshape(shape), p_los=p_los.reshape(shape), los_fraction=frac.reshape(shape),
        los_mean=los_mean.reshape(*shape, N), R=R.reshape(*shape, N, N),
        sqrt_R=sqrt_R.reshape(*shape, N, N),
    )


def fronthaul_budgets(topology: NetworkTopology, cfg: ChannelConfig,
                      rng: np.random.Generator | None = None):
    env = cfg.fronthaul_env.with_carrier(cfg.fronthaul_carrier_hz)
    return [link_budget(topology.cpu, u, env, rng, cfg.sample_los) for u in topology.uavs]


def access_budgets(topology: NetworkTopology, cfg: ChannelConfig,
                   rng: np.random.Generator | None = None):
    """Budgets indexed ``[k][l]``, angles of UE k seen from UAV l."""
    env = cfg.access_env.with_carrier(cfg.access_carrier_hz)
    return [[link_budget(u, ue, env, rng, cfg.sample_los) for u in topology.uavs]
            for ue in topology.ues]


@dataclass(frozen=True)
class FronthaulChannel:
    """CPU-side channel matrix, column ``l`` is the channel of UAV-AP ``l``."""

    H: np.ndarray
    gain: np.ndarray = field(default=None, compare=False)

    @property
    def n_antennas(self) -> int:
        return self.H.shape[0]

    @property
    def n_uavs(self) -> int:
        return self.H.shape[1]

    def to_dict(self) -> dict:
        return {"re": self.H.real.tolist(), "im": self.H.imag.tolist()}

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "FronthaulChannel":
        d = json.loads(Path(path).read_text())
        return cls(np.asarray(d["re"]) + 1j * np.asarray(d["im"]))


def sub6_fronthaul_links(topology: NetworkTopology, cfg: ChannelConfig,
                         rng: np.random.Generator | None = None) -> RicianLinks:
    return _rician_links(fronthaul_budgets(topology, cfg, rng), cfg.fronthaul_array, cfg)


def sample_sub6_fronthaul(topology: NetworkTopology, cfg: ChannelConfig,
                          rng: np.random.Generator) -> FronthaulChannel:
    """One Rician fronthaul realization (LoS with random phase + correlated NLoS)."""
    links = sub6_fronthaul_links(topology, cfg, rng)
    h = links.sample(rng)
    return FronthaulChannel(h.T.copy(), links.gain)


@dataclass(frozen=True)
class MmWaveLinks:
    gain: np.ndarray
    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray


def mmwave_fronthaul_links(topology: NetworkTopology, cfg: ChannelConfig,
                           rng: np.random.Generator | None = None) -> MmWaveLinks:
    b = fronthaul_budgets(topology, cfg, rng)
    return MmWaveLinks(np.array([x.gain for x in b]), np.array([x.azimuth_deg for x in b]),
                       np.array([x.elevation_deg for x in b]))


def sample_mmwave_paths(links: MmWaveLinks, params: MmWaveParams, geometry: ArrayGeometry,
                        rng: np.random.Generator, size: int | None = None):
    """Draw path gains and channels of the Saleh-Valenzuela model.

    Returns ``(alpha, h)`` with ``alpha`` of shape ``(n, L, 1 + n_paths)`` and
    ``h`` of shape ``(n, L, N)``; the leading axis is dropped for ``size=None``.
    The direct path has magnitude ``sqrt(gain)`` and a uniform phase;
    scattered path ``i`` is CN(0, beta_i * gain).
    """
    n = 1 if size is None else size
    L = links.gain.shape[0]
    rel = params.relative_powers()
    direct = np.sqrt(links.gain) * np.exp(2j * np.pi * rng.random((n, L)))
    scattered = _cn(rng, (n, L, params.n_paths)) * np.sqrt(links.gain[:, None] * rel)
    w = params.angular_window_deg
    d_az = rng.uniform(-w, w, (n, L, params.n_paths))
    d_el = rng.uniform(-w, w, (n, L, params.n_paths))
    h = direct[..., None] * upa_response(links.azimuth_deg, links.elevation_deg, geometry)[None]
    if params.n_paths:
        a = upa_response(links.azimuth_deg[:, None] + d_az, links.elevation_deg[:, None] + d_el,
                         geometry)
        h = h + np.einsum("nlp,nlpa->nla", scattered, a)
    alpha = np.concatenate([direct[..., None], scattered], axis=-1)
    if size is None:
        return alpha[0], h[0]
    return alpha, h


def sample_mmwave_fronthaul(topology: NetworkTopology, cfg: ChannelConfig,
                            rng: np.random.Generator) -> FronthaulChannel:
    """One extended Saleh-Valenzuela fronthaul realization."""
    links = mmwave_fronthaul_links(topology, cfg, rng)
    _, h = sample_mmwave_paths(links, cfg.mmwave, cfg.fronthaul_array, rng)
    return FronthaulChannel(h.T.copy(), links.gain)


def sample_fronthaul(topology: NetworkTopology, cfg: ChannelConfig,
                     rng: np.random.Generator) -> FronthaulChannel:
    if cfg.band == "mmwave":
        return sample_mmwave_fronthaul(topology, cfg, rng)
    return sample_sub6_fronthaul(topology, cfg, rng)


@dataclass(frozen=True)
class AccessChannelSet:
    """Access channel realizations and their large-scale statistics.

    ``h`` has shape ``(n_blocks, K, L, N_a)``: one independent realization
    per coherence block. ``R`` is the NLoS correlation of each link and
    ``second_moment`` the full ``E{h h^H}`` used by the LMMSE estimator.
    """

    h: np.ndarray
    R: np.ndarray
    second_moment: np.ndarray
    los_prob: np.ndarray
    mean_gain: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.h.shape[0]


def access_links(topology: NetworkTopology, cfg: ChannelConfig,
                 rng: np.random.Generator | None = None) -> RicianLinks:
    return _rician_links(access_budgets(topology, cfg, rng), cfg.access_array, cfg)


def sample_access_channels(topology: NetworkTopology, cfg: ChannelConfig,
                           rng: np.random.Generator, n_blocks: int = 1,
                           links: RicianLinks | None = None) -> AccessChannelSet:
    """Draw ``n_blocks`` independent access-channel realizations for all links."""
    if links is None:
        links = access_links(topology, cfg, rng)
    h = links.sample(rng, n_blocks)
    return AccessChannelSet(h=h, R=links.R, second_moment=links.second_moment,
                            los_prob=links.p_los, mean_gain=links.gain)

"""Cell-free access link: channel estimation, local precoding and the
hardening-bound SINR statistics ``b_k`` and ``C_ki``.

Conventions: ``h_kl`` is the channel between UE ``k`` and UAV-AP ``l``, the
UE receives ``sum_l h_kl^T x_l`` and products are transposes (not conjugate
transposes), so the precoder is the complex conjugate of the local MMSE
combining vector.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import ChannelConfig, _cn, access_links
from .topology import NetworkTopology
from .units import THERMAL_NOISE_DBM_PER_HZ, db2lin, dbm2watt


class UnsupportedConfigurationError(ValueError):
    pass


class StatisticsWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class AccessConfig:
    bandwidth_hz: float = 20e6
    tau_c: int = 192
    tau_u: int = 8
    pilot_power_w: float = 0.1
    noise_psd_w_per_hz: float = float(dbm2watt(THERMAL_NOISE_DBM_PER_HZ))
    noise_figure_db: float = 7.0
    p_uav_w: float = 1.0

    def __post_init__(self):
        if not 0 < self.tau_u < self.tau_c:
            raise ValueError("need 0 < tau_u < tau_c")
        if self.pilot_power_w <= 0 or self.bandwidth_hz <= 0 or self.p_uav_w <= 0:
            raise ValueError("powers and bandwidth must be positive")

    @property
    def tau_d(self) -> int:
        return self.tau_c - self.tau_u

    @property
    def noise_power_w(self) -> float:
        return self.bandwidth_hz * self.noise_psd_w_per_hz * float(db2lin(self.noise_figure_db))


def assign_pilots(n_ues: int, tau_u: int) -> np.ndarray:
    """Give every UE its own orthogonal pilot (UE k gets pilot k)."""
    if n_ues < 1:
        raise ValueError("need at least one UE")
    if n_ues > tau_u:
        raise UnsupportedConfigurationError(
            f"{n_ues} UEs cannot get orthogonal pilots from {tau_u} pilot samples")
    return np.arange(n_ues)


def lmmse_estimate(y, R, pilot_power: float, tau_u: int, noise_power: float):
    """LMMSE estimate from the despread pilot observation ``y = sqrt(p tau) h + n``.

    ``R`` is the second moment ``E{h h^H}`` with shape ``(..., N, N)`` and
    ``y`` has shape ``(n, ..., N)`` or ``(..., N)``. Returns the estimate
    (same shape as ``y``) and the error covariance ``(..., N, N)``.
    """
    R = np.asarray(R, dtype=complex)
    y = np.asarray(y, dtype=complex)
    N = R.shape[-1]
    ptau = pilot_power * tau_u
    Psi = ptau * R + noise_power * np.eye(N)
    # Psi is affine in R, so R Psi^{-1} = Psi^{-1} R
    RPsi = np.linalg.solve(Psi, R)
    A = math.sqrt(ptau) * RPsi
    extra = y.ndim - (R.ndim - 1)
    A_b = A.reshape((1,) * extra + A.shape)
    h_hat = np.einsum("...ij,...j->...i", A_b, y)
    C_err = R - ptau * RPsi @ R
    C_err = 0.5 * (C_err + np.swapaxes(C_err, -1, -2).conj())
    return h_hat, C_err


def lmmse_precoder(h_hat, C_err, pilot_power: float, noise_power: float) -> np.ndarray:
    """Local L-MMSE precoders of one or more UAV-APs.

    ``h_hat`` has shape ``(n, K, ..., N)`` (realizations, UEs, optional AP
    axes, antennas) and ``C_err`` shape ``(K, ..., N, N)``. The combining
    vector ``v_k = (sum_i p (h_i h_i^H + C_i) + sigma^2 I)^{-1} h_k`` is
    conjugated and scaled so that its average power over the ``n``
    realizations equals one.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    N = h_hat.shape[-1]
    gram = np.einsum("nk...a,nk...b->n...ab", h_hat, h_hat.conj())
    M = pilot_power * (gram + C_err.sum(axis=0)[None]) + noise_power * np.eye(N)
    # solve M v = h for every UE: move the UE axis last as extra right-hand sides
    rhs = np.moveaxis(h_hat, 1, -1)
    v = np.moveaxis(np.linalg.solve(M, rhs), -1, 1)
    norm2 = np.mean(np.sum(np.abs(v) ** 2, axis=-1), axis=0)
    scale = np.zeros_like(norm2)
    nz = norm2 > 0
    scale[nz] = 1.0 / np.sqrt(norm2[nz])
    return v.conj() * scale[None, ..., None]


@dataclass(frozen=True)
class SinrStatistics:
    """Monte-Carlo expectations entering the effective SINR.

    ``b[k, l] = E{h_kl^T w_kl}`` (real part) and
    ``C[k, i, l, r] = E{h_kl^T w_il w_ir^H h_kr^*}``.
    """

    b: np.ndarray
    C: np.ndarray
    noise_power: float
    n_mc: int
    b_imag: np.ndarray | None = None
    b_stderr: np.ndarray | None = None

    @property
    def n_ues(self) -> int:
        return self.b.shape[0]

    @property
    def n_uavs(self) -> int:
        return self.b.shape[1]

    def normalized(self) -> "SinrStatistics":
        """Same statistics with the noise power scaled to one."""
        s = math.sqrt(self.noise_power)
        return SinrStatistics(
            self.b / s, self.C / self.noise_power, 1.0, self.n_mc,
            None if self.b_imag is None else self.b_imag / s,
            None if self.b_stderr is None else self.b_stderr / s,
        )

    def save(self, path) -> None:
        np.savez(path, b=self.b, C=self.C, noise_power=self.noise_power, n_mc=self.n_mc,
                 b_imag=self.b_imag if self.b_imag is not None else np.zeros_like(self.b),
                 b_stderr=self.b_stderr if self.b_stderr is not None else np.zeros_like(self.b))

    @classmethod
    def load(cls, path) -> "SinrStatistics":
        with np.load(path) as d:
            return cls(d["b"], d["C"], float(d["noise_power"]), int(d["n_mc"]),
                       d["b_imag"], d["b_stderr"])


def statistics_cache_key(topology: NetworkTopology, channel_cfg: ChannelConfig,
                         access_cfg: AccessConfig, n_mc: int, seed) -> str:
    payload = json.dumps({"topology": topology.to_dict(), "channel": repr(channel_cfg),
                          "access": repr(access_cfg), "n_mc": n_mc, "seed": repr(seed)},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def _clamp_variance(Ckk: np.ndarray, b: np.ndarray) -> np.ndarray:
    D = Ckk - np.outer(b, b)
    D = 0.5 * (D + D.conj().T)
    w, V = np.linalg.eigh(D)
    if w.min() >= 0:
        return Ckk
    D = (V * np.clip(w, 0.0, None)) @ V.conj().T
    return D + np.outer(b, b)


def statistics_from_samples(h, w, noise_power: float, chunk: int = 1000) -> SinrStatistics:
    """Sample means of ``h_kl^T w_il`` products.

    ``h`` and ``w`` have shape ``(n, K, L, N)``. The standard error of ``b``
    accounts for the precoder normalisation being estimated on the same
    samples (delta method on ``E{h^T v} / sqrt(E{|v|^2})``).
    """
    n, K, L, _ = h.shape
    z_diag_sum = np.zeros((K, L), dtype=complex)
    # running sums of a = Re(h^T w), c = |w|^2 and their products
    m = {key: np.zeros((K, L)) for key in ("aa", "c", "cc", "ac")}
    C = np.zeros((K, K, L, L), dtype=complex)
    for s in range(0, n, chunk):
        z = np.einsum("nkla,nila->nkil", h[s:s + chunk], w[s:s + chunk])
        d = z[:, np.arange(K), np.arange(K), :]
        c = np.sum(np.abs(w[s:s + chunk]) ** 2, axis=-1)
        z_diag_sum += d.sum(axis=0)
        m["aa"] += (d.real ** 2).sum(axis=0)
        m["c"] += c.sum(axis=0)
        m["cc"] += (c ** 2).sum(axis=0)
        m["ac"] += (d.real * c).sum(axis=0)
        C += np.einsum("nkil,nkir->kilr", z, z.conj())
    mean = z_diag_sum / n
    C /= n
    C = 0.5 * (C + np.swapaxes(C, -1, -2).conj())
    b = mean.real
    m = {key: v / n for key, v in m.items()}
    mc = np.where(m["c"] > 0, m["c"], 1.0)
    var_a = m["aa"] - b ** 2
    var_c = m["cc"] - m["c"] ** 2
    cov_ac = m["ac"] - b * m["c"]
    var = np.maximum(var_a - b / mc * cov_ac + b ** 2 / (4 * mc ** 2) * var_c, 0.0)
    stderr = np.sqrt(var / max(n - 1, 1))
    for k in range(K):
        C[k, k] = _clamp_variance(C[k, k], b[k])
    big = np.abs(b) > 0
    if np.any(np.abs(mean.imag[big]) > 0.05 * np.abs(b[big])):
        warnings.warn("imaginary part of E{h^T w} is not negligible", StatisticsWarning,
                      stacklevel=2)
    return SinrStatistics(b, C, noise_power, n, mean.imag.copy(), stderr)


def estimate_sinr_statistics(topology: NetworkTopology, channel_cfg: ChannelConfig,
                             access_cfg: AccessConfig, n_mc: int,
                             rng: np.random.Generator, perfect_csi: bool = False
                             ) -> SinrStatistics:
    """Monte-Carlo estimate of ``b_k`` and ``C_ki``.

    Channels are drawn once per coherence block, estimated from orthogonal
    pilots with LMMSE, and precoded with normalised local L-MMSE. The
    precoder normalisation is computed on the whole ensemble before the
    statistics are accumulated.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    assign_pilots(topology.n_ues, access_cfg.tau_u)
    channel_rng, noise_rng = rng.spawn(2)
    links = access_links(topology, channel_cfg, channel_rng)
    h = links.sample(channel_rng, n_mc)
    sigma2 = access_cfg.noise_power_w
    p = access_cfg.pilot_power_w
    if perfect_csi:
        h_hat = h
        C_err = np.zeros_like(links.R)
    else:
        y = math.sqrt(p * access_cfg.tau_u) * h + math.sqrt(sigma2) * _cn(noise_rng, h.shape)
        h_hat, C_err = lmmse_estimate(y, links.second_moment, p, access_cfg.tau_u, sigma2)
    w = lmmse_precoder(h_hat, C_err, p, sigma2)
    return statistics_from_samples(h, w, sigma2)


class NegativeInterferenceWarning(RuntimeWarning):
    pass


def _alloc_rho(alloc) -> np.ndarray:
    return np.asarray(getattr(alloc, "rho", alloc), dtype=float)


def signal_interference(stats: SinrStatistics, alloc):
    """Return ``(|b_k^T rho_k|^2, sum_i rho_i^T C_ki rho_i - |b_k^T rho_k|^2)`` per UE."""
    rho = _alloc_rho(alloc)
    sig = np.einsum("kl,kl->k", stats.b, rho) ** 2
    quad = np.einsum("il,kilr,ir->k", rho, stats.C.real, rho)
    return sig, quad - sig


def effective_sinr(stats: SinrStatistics, alloc) -> np.ndarray:
    """Effective (hardening-bound) downlink SINR of every UE.

    A negative interference term, possible only through Monte-Carlo noise,
    is clamped to zero with a warning.
    """
    sig, interf = signal_interference(stats, alloc)
    tiny = -1e-9 * np.maximum(sig, 1e-300)
    if np.any(interf < tiny):
        warnings.warn("negative interference term clamped to zero",
                      NegativeInterferenceWarning, stacklevel=2)
    interf = np.maximum(interf, 0.0)
    return sig / (interf + stats.noise_power)


def spectral_efficiency(gamma, cfg: AccessConfig):
    """Achievable spectral efficiency in bit/s/Hz, ``tau_d/tau_c log2(1 + gamma)``."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR must be nonnegative")
    return cfg.tau_d / cfg.tau_c * np.log2(1.0 + gamma)


@dataclass(frozen=True)
class PowerAllocation:
    """Access power square-roots ``rho[k, l]`` and UAV-AP activations ``alpha[l]``."""

    rho: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        alpha = np.asarray(self.alpha)
        if rho.ndim != 2 or alpha.shape != (rho.shape[1],):
            raise ValueError("rho must be K x L and alpha of length L")
        if np.any(rho < 0):
            raise ValueError("rho must be nonnegative")
        if np.any(np.abs(rho[:, alpha == 0]) > 0):
            raise ValueError("inactive UAV-AP with nonzero power")

    @classmethod
    def zeros(cls, n_ues: int, n_uavs: int) -> "PowerAllocation":
        return cls(np.zeros((n_ues, n_uavs)), np.zeros(n_uavs, dtype=int))

    @property
    def per_uav_power(self) -> np.ndarray:
        return np.sum(np.asarray(self.rho) ** 2, axis=0)

    @property
    def n_active(self) -> int:
        return int(np.sum(self.alpha))


def save_statistics_cached(cache_dir, key: str, stats: SinrStatistics) -> Path:
    path = Path(cache_dir) / f"sinr_{key}.npz"
    path.parent.mkdir(parents=True, exist_ok=True)
    stats.save(path)
    return path


def load_statistics_cached(cache_dir, key: str) -> SinrStatistics | None:
    path = Path(cache_dir) / f"sinr_{key}.npz"
    return SinrStatistics.load(path) if path.exists() else None

"""Joint UAV-AP activation and access power control.

Two problems share one variable layout ``x = [rho (K*L, UE-major), alpha (L),
tau]`` where ``tau`` is an epigraph variable for ``sum rho^2``:

* max-min fairness, solved by bisection on the common SINR target where each
  step minimises ``sum rho^2`` subject to the SINR cones;
* total UAV-AP power minimisation for given per-UE SINR targets.

Statistics are normalised to unit noise power internally; ``rho`` keeps its
physical meaning (square root of watts).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .access import PowerAllocation, SinrStatistics, effective_sinr
from .conic import ConeConstraint, LinearConstraint, SocpProblem, psd_sqrt, solve_mbsocp
from .fronthaul import FronthaulConfig, SplitOption
from .powermodel import PowerBreakdown, PowerModelParams, per_uav_static_power, total_power

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    p_uav_w: float = 1.0
    p_max_fronthaul_w: float = 10.0
    t_lo: float = 1e-4
    bisect_rtol: float = 1e-3
    rel_gap: float = 1e-6
    solver_tol: float = 1e-8
    max_nodes: int = 200_000


class Layout:
    """Index bookkeeping for ``[rho, alpha, tau]``."""

    def __init__(self, n_ues: int, n_uavs: int):
        self.K, self.L = n_ues, n_uavs
        self.n_rho = n_ues * n_uavs
        self.n_vars = self.n_rho + n_uavs + 1

    def rho(self, k: int, l: int) -> int:
        return k * self.L + l

    def rho_ue(self, k: int) -> slice:
        return slice(k * self.L, (k + 1) * self.L)

    def alpha(self, l: int) -> int:
        return self.n_rho + l

    @property
    def alphas(self) -> np.ndarray:
        return np.arange(self.n_rho, self.n_rho + self.L)

    @property
    def tau(self) -> int:
        return self.n_vars - 1

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rho = np.clip(x[:self.n_rho].reshape(self.K, self.L), 0.0, None)
        alpha = np.round(x[self.alphas]).astype(int)
        return rho, alpha


class SinrConeBuilder:
    """Caches ``Re(C_ki)^{1/2}`` so SINR cones can be rebuilt for any target."""

    def __init__(self, stats: SinrStatistics, layout: Layout | None = None):
        self.stats = stats.normalized()
        K, L = self.stats.n_ues, self.stats.n_uavs
        self.layout = layout or Layout(K, L)
        self.sqrt_C = np.empty((K, K, L, L))
        for k in range(K):
            for i in range(K):
                self.sqrt_C[k, i] = psd_sqrt(np.ascontiguousarray(self.stats.C[k, i].real))

    def cone(self, k: int, target: float) -> ConeConstraint:
        return build_sinr_cone(self.stats, k, target, self.layout, self.sqrt_C[k])


def build_sinr_cone(stats: SinrStatistics, k: int, target: float,
                    layout: Layout | None = None, sqrt_C=None) -> ConeConstraint:
    """SINR constraint ``gamma_k >= target`` as a second-order cone.

    ``||[C_k1^{1/2} rho_1; ...; C_kK^{1/2} rho_K; sigma]||
    <= sqrt((1 + target) / target) * b_k^T rho_k``.
    """
    if not target > 0:
        raise ValueError("SINR target must be positive")
    K, L = stats.n_ues, stats.n_uavs
    layout = layout or Layout(K, L)
    if sqrt_C is None:
        sqrt_C = [psd_sqrt(np.ascontiguousarray(stats.C[k, i].real)) for i in range(K)]
    A = np.zeros((K * L + 1, layout.n_vars))
    for i in range(K):
        A[i * L:(i + 1) * L, layout.rho_ue(i)] = sqrt_C[i]
    b = np.zeros(K * L + 1)
    b[-1] = math.sqrt(stats.noise_power)
    c = np.zeros(layout.n_vars)
    c[layout.rho_ue(k)] = math.sqrt((1.0 + target) / target) * stats.b[k]
    return ConeConstraint(A, b, c, 0.0)


def _uav_power_cones(layout: Layout, p_uav: float) -> list[ConeConstraint]:
    cones = []
    for l in range(layout.L):
        A = np.zeros((layout.K, layout.n_vars))
        for k in range(layout.K):
            A[k, layout.rho(k, l)] = 1.0
        c = np.zeros(layout.n_vars)
        c[layout.alpha(l)] = math.sqrt(p_uav)
        cones.append(ConeConstraint(A, np.zeros(layout.K), c, 0.0))
    return cones


def _sum_square_epigraph(layout: Layout) -> ConeConstraint:
    # ||[2 rho; tau - 1]|| <= tau + 1  <=>  sum rho^2 <= tau
    A = np.zeros((layout.n_rho + 1, layout.n_vars))
    A[:layout.n_rho, :layout.n_rho] = 2.0 * np.eye(layout.n_rho)
    A[-1, layout.tau] = 1.0
    b = np.zeros(layout.n_rho + 1)
    b[-1] = -1.0
    c = np.zeros(layout.n_vars)
    c[layout.tau] = 1.0
    return ConeConstraint(A, b, c, 1.0)


def build_problem(builder: SinrConeBuilder, targets, fronthaul_powers, cfg: OptimizerConfig,
                  static_costs=None, psi_t: float = 1.0) -> SocpProblem:
    """Mixed-binary SOCP shared by both optimisation problems.

    Without ``static_costs`` the objective is ``sum rho^2`` (the max-min
    feasibility surrogate); otherwise it is
    ``static_costs @ alpha + psi_t * sum rho^2``.
    """
    layout = builder.layout
    targets = np.broadcast_to(np.asarray(targets, dtype=float), (layout.K,))
    pf = np.asarray(fronthaul_powers, dtype=float)
    lower = np.zeros(layout.n_vars)
    upper = np.full(layout.n_vars, np.inf)
    upper[layout.alphas] = 1.0
    # a UAV-AP whose fronthaul alone exceeds the budget can never be switched on
    blocked = ~(pf <= cfg.p_max_fronthaul_w)
    upper[layout.alphas[blocked]] = 0.0
    row = np.zeros(layout.n_vars)
    row[layout.alphas] = np.where(blocked, 0.0, pf)
    linear = [LinearConstraint(row, cfg.p_max_fronthaul_w, "<=")]
    cones = [builder.cone(k, targets[k]) for k in range(layout.K)]
    cones += _uav_power_cones(layout, cfg.p_uav_w)
    cones.append(_sum_square_epigraph(layout))
    objective = np.zeros(layout.n_vars)
    objective[layout.tau] = psi_t
    if static_costs is not None:
        objective[layout.alphas] = np.where(blocked, 0.0, static_costs)
    return SocpProblem(layout.n_vars, objective, tuple(cones), tuple(linear), lower, upper,
                       tuple(int(i) for i in layout.alphas))


def _clean_allocation(layout: Layout, x: np.ndarray, p_uav: float) -> PowerAllocation:
    rho, alpha = layout.unpack(x)
    rho[:, alpha == 0] = 0.0
    col = np.linalg.norm(rho, axis=0)
    idle = (alpha == 1) & (col <= 1e-7 * math.sqrt(p_uav))
    alpha[idle] = 0
    rho[:, idle] = 0.0
    over = col > math.sqrt(p_uav)
    rho[:, over] *= math.sqrt(p_uav) / col[over]
    return PowerAllocation(rho, alpha)


@dataclass(frozen=True)
class MaxMinResult:
    t_star: float
    alloc: PowerAllocation
    iterations: int
    feasible: bool
    gamma: np.ndarray = field(default=None)
    nodes: int = 0

    @property
    def t_star_db(self) -> float:
        return 10.0 * math.log10(self.t_star) if self.t_star > 0 else -math.inf

    @property
    def min_sinr(self) -> float:
        return float(np.min(self.gamma)) if self.gamma is not None else math.nan


def _surrogate(builder, target, pf, cfg):
    problem = build_problem(builder, target, pf, cfg)
    return solve_mbsocp(problem, rel_gap=cfg.rel_gap, tol=cfg.solver_tol,
                        max_nodes=cfg.max_nodes)


def bisection_upper_bound(stats: SinrStatistics, p_uav: float) -> float:
    """Largest single-UE SINR without interference, ``max_k (sum_l b_kl sqrt(P))^2 / sigma^2``."""
    return float(np.max(np.sum(stats.b, axis=1) * math.sqrt(p_uav)) ** 2 / stats.noise_power)


def max_bisection_iterations(t_lo: float, t_hi: float, rtol: float) -> int:
    return max(0, math.ceil(math.log2(math.log(t_hi / t_lo) / math.log1p(rtol))))


def solve_max_min(stats: SinrStatistics, fronthaul_powers, cfg: OptimizerConfig = OptimizerConfig(),
                  builder: SinrConeBuilder | None = None) -> MaxMinResult:
    """Max-min SINR fairness by geometric bisection on the common target.

    Each step solves the mixed-binary problem of minimum ``sum rho^2`` under
    the SINR cones, the fronthaul budget and the per-UAV power cones; the
    bracket shrinks until ``t_hi / t_lo <= 1 + bisect_rtol``.
    """
    builder = builder or SinrConeBuilder(stats)
    layout = builder.layout
    K, L = layout.K, layout.L
    t_lo = cfg.t_lo
    t_hi = bisection_upper_bound(stats, cfg.p_uav_w)
    sol = _surrogate(builder, t_lo, fronthaul_powers, cfg)
    nodes = sol.nodes
    if not sol.optimal or t_hi <= t_lo:
        return MaxMinResult(0.0, PowerAllocation.zeros(K, L), 1, False,
                            np.zeros(K), nodes)
    best = sol.x
    iterations = 1
    while t_hi / t_lo > 1.0 + cfg.bisect_rtol:
        mid = math.sqrt(t_lo * t_hi)
        sol = _surrogate(builder, mid, fronthaul_powers, cfg)
        nodes += sol.nodes
        iterations += 1
        if sol.optimal:
            t_lo, best = mid, sol.x
        else:
            t_hi = mid
    alloc = _clean_allocation(layout, best, cfg.p_uav_w)
    gamma = effective_sinr(stats, alloc)
    return MaxMinResult(t_lo, alloc, iterations, True, gamma, nodes)


@dataclass(frozen=True)
class PowerMinResult:
    feasible: bool
    total_power: float
    alloc: PowerAllocation
    breakdown: PowerBreakdown | None
    gamma: np.ndarray | None = None
    nodes: int = 0
    gap: float = 0.0


def minimize_total_power(stats: SinrStatistics, targets, split: SplitOption, fronthaul_powers,
                         power_params: PowerModelParams = PowerModelParams(),
                         cfg: OptimizerConfig = OptimizerConfig(),
                         fronthaul_cfg: FronthaulConfig | None = None,
                         builder: SinrConeBuilder | None = None) -> PowerMinResult:
    """Minimum total UAV-AP power meeting per-UE SINR targets.

    ``targets`` are linear SINRs (scalar or one per UE). Infeasibility is
    reported through ``feasible=False``; targets are never relaxed.
    """
    fronthaul_cfg = fronthaul_cfg or FronthaulConfig()
    targets = np.broadcast_to(np.asarray(targets, dtype=float), (stats.n_ues,))
    if np.any(targets <= 0):
        raise ValueError("SINR targets must be positive")
    builder = builder or SinrConeBuilder(stats)
    layout = builder.layout
    pf = np.asarray(fronthaul_powers, dtype=float)
    static = per_uav_static_power(split, np.where(np.isfinite(pf), pf, 0.0), power_params,
                                  fronthaul_cfg)
    problem = build_problem(builder, targets, pf, cfg, static_costs=static,
                            psi_t=power_params.psi_t)
    sol = solve_mbsocp(problem, rel_gap=cfg.rel_gap, tol=cfg.solver_tol, max_nodes=cfg.max_nodes)
    if not sol.optimal:
        return PowerMinResult(False, math.nan, PowerAllocation.zeros(layout.K, layout.L), None,
                              nodes=sol.nodes)
    alloc = _clean_allocation(layout, sol.x, cfg.p_uav_w)
    breakdown = total_power(alloc, split, np.where(alloc.alpha == 1, pf, 0.0), power_params,
                            fronthaul_cfg)
    return PowerMinResult(True, breakdown.total, alloc, breakdown, effective_sinr(stats, alloc),
                          sol.nodes, sol.gap)


@dataclass(frozen=True)
class FairPowerResult:
    maxmin: MaxMinResult
    maxmin_breakdown: PowerBreakdown | None
    minimized: PowerMinResult

    @property
    def feasible(self) -> bool:
        return self.maxmin.feasible and self.minimized.feasible

    @property
    def power_of_maxmin(self) -> float:
        return self.maxmin_breakdown.total if self.maxmin_breakdown else math.nan

    @property
    def power_after_minimization(self) -> float:
        return self.minimized.total_power


def fair_then_minimize(stats: SinrStatistics, fronthaul_powers, split: SplitOption,
                       power_params: PowerModelParams = PowerModelParams(),
                       cfg: OptimizerConfig = OptimizerConfig(),
                       fronthaul_cfg: FronthaulConfig | None = None,
                       builder: SinrConeBuilder | None = None) -> FairPowerResult:
    """Max-min fairness, then minimum total power at the fair SINR for every UE."""
    fronthaul_cfg = fronthaul_cfg or FronthaulConfig()
    builder = builder or SinrConeBuilder(stats)
    mm = solve_max_min(stats, fronthaul_powers, cfg, builder)
    if not mm.feasible:
        empty = PowerMinResult(False, math.nan,
                               PowerAllocation.zeros(stats.n_ues, stats.n_uavs), None)
        return FairPowerResult(mm, None, empty)
    pf = np.asarray(fronthaul_powers, dtype=float)
    mm_power = total_power(mm.alloc, split, np.where(mm.alloc.alpha == 1, pf, 0.0),
                           power_params, fronthaul_cfg)
    pm = minimize_total_power(stats, mm.t_star, split, pf, power_params, cfg, fronthaul_cfg,
                              builder)
    return FairPowerResult(mm, mm_power, pm)

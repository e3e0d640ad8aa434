"""Best-first branch-and-bound for SOCPs with binary variables."""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .interior import solve_socp
from .problem import SocpProblem, SocpSolution, SolveStatus

log = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-6
FEASIBILITY_TOL = 1e-7


@dataclass
class _Node:
    bound: float
    fixed: dict[int, float]


def _implied_fixings(p: SocpProblem) -> dict[int, float] | None:
    """Variables pinned by zero-radius cones ``||A x + b|| <= 0``.

    A cone whose right-hand side is identically zero forces ``A x + b = 0``;
    rows touching a single variable fix it. Returns None when a fixing is
    contradictory or violates a bound.
    """
    out: dict[int, float] = {}
    for cone in p.cones:
        if np.any(cone.c != 0.0) or cone.d > 0.0:
            continue
        if cone.d < 0.0:
            return None
        for a, b in zip(cone.A, cone.b):
            nz = np.flatnonzero(a)
            if nz.size == 0:
                if b != 0.0:
                    return None
                continue
            if nz.size == 1:
                j = int(nz[0])
                v = -b / a[j]
                if j in out and out[j] != v:
                    return None
                out[j] = v
    for j, v in out.items():
        if v < p.lower[j] - FEASIBILITY_TOL or v > p.upper[j] + FEASIBILITY_TOL:
            return None
    return out


def _solve_node(p: SocpProblem, fixed: dict[int, float], tol: float) -> SocpSolution:
    relaxed = p.relaxation()
    fixed = dict(fixed)
    while True:
        sub, keep = relaxed.fix(fixed)
        implied = _implied_fixings(sub)
        if implied is None:
            return SocpSolution.infeasible()
        if not implied:
            break
        fixed.update({int(keep[j]): v for j, v in implied.items()})
    sol = solve_socp(sub, tol=tol)
    if sol.x is None:
        return sol
    x = np.empty(p.n_vars)
    x[keep] = sol.x
    for i, v in fixed.items():
        x[i] = v
    return SocpSolution(sol.status, x, sol.objective, iterations=sol.iterations, info=sol.info)


def _rounded_candidates(x: np.ndarray, binaries: np.ndarray):
    """Integral points sharing the continuous part of ``x``."""
    up = x.copy()
    up[binaries] = (x[binaries] > INTEGRALITY_TOL).astype(float)
    near = x.copy()
    near[binaries] = np.round(x[binaries])
    yield up
    if not np.array_equal(up, near):
        yield near


def _branch_variable(x: np.ndarray, binaries: np.ndarray) -> int | None:
    frac = np.abs(x[binaries] - np.round(x[binaries]))
    if frac.max(initial=0.0) <= INTEGRALITY_TOL:
        return None
    # most fractional first; argmax keeps the lowest index on ties
    return int(binaries[np.argmax(np.round(frac, 12))])


def solve_mbsocp(p: SocpProblem, rel_gap: float = 1e-6, tol: float = 1e-8,
                 max_nodes: int = 200_000, incumbent: np.ndarray | None = None) -> SocpSolution:
    """Mixed-binary SOCP by best-first branch-and-bound.

    Every node solves the continuous relaxation with the node's binaries
    substituted. Branching picks the most fractional binary (lowest index on
    ties); open nodes are explored in order of their parent's bound. A
    rounding check at every node turns relaxation points that stay feasible
    after rounding their binaries into incumbents. An optional feasible
    ``incumbent`` seeds the search.
    """
    binaries = np.array(p.binary_indices, dtype=int)
    if binaries.size == 0:
        return solve_socp(p, tol=tol)

    best_x, best_obj = None, math.inf
    if incumbent is not None:
        x0 = np.asarray(incumbent, dtype=float)
        if p.max_violation(x0) <= FEASIBILITY_TOL and \
                np.all(np.abs(x0[binaries] - np.round(x0[binaries])) <= INTEGRALITY_TOL):
            best_x, best_obj = x0.copy(), p.objective_value(x0)

    counter = itertools.count()
    heap: list[tuple[float, int, _Node]] = []
    heapq.heappush(heap, (-math.inf, next(counter), _Node(-math.inf, {})))
    nodes = iterations = 0
    unbounded = False

    def closed(bound: float) -> bool:
        if best_x is None:
            return False
        return best_obj - bound <= rel_gap * max(abs(best_obj), 1e-9)

    while heap:
        bound, _, node = heapq.heappop(heap)
        if closed(bound):
            heap.clear()
            break
        if nodes >= max_nodes:
            heapq.heappush(heap, (bound, next(counter), node))
            log.warning("branch-and-bound stopped at node limit %d", max_nodes)
            break
        nodes += 1
        sol = _solve_node(p, node.fixed, tol)
        iterations += sol.iterations
        if sol.status is SolveStatus.UNBOUNDED:
            unbounded = True
            break
        if sol.status is SolveStatus.NUMERICAL_FAILURE:
            # no certificate either way: split instead of pruning, children keep the parent bound
            free = [int(i) for i in binaries if int(i) not in node.fixed]
            if not free:
                log.warning("node %d: leaf relaxation failed numerically, dropped", nodes)
                continue
            for v in (0.0, 1.0):
                fixed = dict(node.fixed)
                fixed[free[0]] = v
                heapq.heappush(heap, (node.bound, next(counter), _Node(node.bound, fixed)))
            continue
        if sol.status is SolveStatus.INFEASIBLE or closed(sol.objective):
            continue
        x = sol.x
        j = _branch_variable(x, binaries)
        if j is None:
            leaf = _solve_node(p, {int(i): float(round(x[i])) for i in binaries}, tol)
            iterations += leaf.iterations
            if leaf.optimal and leaf.objective < best_obj:
                best_x, best_obj = leaf.x, leaf.objective
            continue
        for cand in _rounded_candidates(x, binaries):
            obj = p.objective_value(cand)
            if obj < best_obj and p.max_violation(cand) <= FEASIBILITY_TOL:
                best_x, best_obj = cand, obj
        if closed(sol.objective):
            continue
        for v in (0.0, 1.0):
            fixed = dict(node.fixed)
            fixed[j] = v
            heapq.heappush(heap, (sol.objective, next(counter), _Node(sol.objective, fixed)))

    if unbounded:
        return SocpSolution(SolveStatus.UNBOUNDED, None, -math.inf, nodes=nodes,
                            iterations=iterations)
    if best_x is None:
        if heap:
            return SocpSolution(SolveStatus.NUMERICAL_FAILURE, None, math.nan, nodes=nodes,
                                iterations=iterations)
        return SocpSolution.infeasible(nodes=nodes, iterations=iterations)
    lower = min([b for b, _, _ in heap], default=best_obj)
    gap = max(0.0, (best_obj - lower) / max(abs(best_obj), 1e-9))
    x = best_x.copy()
    x[binaries] = np.round(x[binaries])
    return SocpSolution(SolveStatus.OPTIMAL, x, best_obj, gap=gap, nodes=nodes,
                        iterations=iterations)

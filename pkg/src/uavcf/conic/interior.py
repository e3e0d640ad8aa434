"""Continuous SOCP solves.

The interior-point work is delegated to ``cvxopt.solvers.conelp``, a
primal-dual path-following method with Nesterov-Todd scaling that detects
infeasibility through its homogeneous self-dual embedding. This module
translates :class:`SocpProblem` into conelp's standard form and maps the
result back, checking residuals itself before declaring a point optimal.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from cvxopt import matrix, solvers

from .problem import SocpProblem, SocpSolution, SolveStatus

log = logging.getLogger(__name__)

# residual levels at which a conelp "unknown" exit is still usable
_ACCEPT_FEAS = 1e-6
_ACCEPT_GAP = 1e-6
_RETRY_TOL_LIMIT = 1e-6


def _standard_form(p: SocpProblem):
    """Build ``(G, h, dims, A, b)`` for ``G x + s = h, s in K, A x = b``."""
    n = p.n_vars
    G_lin, h_lin, A_eq, b_eq = [], [], [], []
    for lin in p.linear:
        if lin.sense == "==":
            A_eq.append(lin.row)
            b_eq.append(lin.rhs)
        else:
            G_lin.append(lin.row)
            h_lin.append(lin.rhs)
    for i in range(n):
        if np.isfinite(p.upper[i]):
            e = np.zeros(n)
            e[i] = 1.0
            G_lin.append(e)
            h_lin.append(p.upper[i])
        if np.isfinite(p.lower[i]):
            e = np.zeros(n)
            e[i] = -1.0
            G_lin.append(e)
            h_lin.append(-p.lower[i])
    G_blocks, h_blocks, q_dims = [], [], []
    for cone in p.cones:
        G_blocks.append(np.vstack([-cone.c[None, :], -cone.A]))
        h_blocks.append(np.concatenate([[cone.d], cone.b]))
        q_dims.append(cone.A.shape[0] + 1)
    G = np.vstack([np.array(G_lin).reshape(-1, n)] + G_blocks) if (G_lin or G_blocks) \
        else np.zeros((0, n))
    h = np.concatenate([np.array(h_lin, dtype=float)] + h_blocks) if (G_lin or G_blocks) \
        else np.zeros(0)
    A = np.array(A_eq, dtype=float).reshape(-1, n)
    b = np.array(b_eq, dtype=float)
    return G, h, {"l": len(G_lin), "q": q_dims, "s": []}, A, b


def _drop_empty_rows(G, h, dims, A, b):
    """Remove all-zero rows of the linear blocks; report trivially violated ones."""
    n_l = dims["l"]
    lin_rows = G[:n_l]
    empty = ~np.any(lin_rows != 0.0, axis=1)
    if np.any(h[:n_l][empty] < 0.0):
        return None
    keep = np.concatenate([~empty, np.ones(G.shape[0] - n_l, dtype=bool)])
    G, h = G[keep], h[keep]
    dims = dict(dims, l=int(np.sum(~empty)))
    empty_eq = ~np.any(A != 0.0, axis=1)
    if np.any(np.abs(b[empty_eq]) > 0.0):
        return None
    return G, h, dims, A[~empty_eq], b[~empty_eq]


def _cvx(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return matrix(a.copy(), (a.size, 1), "d")
    return matrix(np.asfortranarray(a), a.shape, "d")


def solve_socp(p: SocpProblem, tol: float = 1e-8, max_iter: int = 200) -> SocpSolution:
    """Solve a continuous SOCP (binary markers are ignored; use the relaxation).

    Returns ``OPTIMAL`` only if the recovered point satisfies every
    constraint to within ``_ACCEPT_FEAS`` (relative to the data scale);
    infeasibility and unboundedness are certified by the embedding.
    """
    if p.binary_indices:
        p = p.relaxation()
    n = p.n_vars
    if n == 0:
        x = np.zeros(0)
        if p.max_violation(x) > _ACCEPT_FEAS:
            return SocpSolution.infeasible()
        return SocpSolution(SolveStatus.OPTIMAL, x, p.objective_offset)

    G, h, dims, A, b = _standard_form(p)
    reduced = _drop_empty_rows(G, h, dims, A, b)
    if reduced is None:
        return SocpSolution.infeasible()
    G, h, dims, A, b = reduced

    # variables that appear in no constraint: unbounded if they move the objective
    free = ~np.any(np.vstack([G, A]) != 0.0, axis=0)
    if np.any(free):
        if np.any(p.objective[free] != 0.0):
            return SocpSolution(SolveStatus.UNBOUNDED, None, -math.inf)
        fixed = {int(i): 0.0 for i in np.flatnonzero(free)}
        sub, keep = p.fix(fixed)
        sol = solve_socp(sub, tol, max_iter)
        if sol.x is None:
            return sol
        x = np.zeros(n)
        x[keep] = sol.x
        return SocpSolution(sol.status, x, sol.objective, sol.gap, sol.iterations, sol.nodes,
                            sol.info)

    args = [_cvx(p.objective), _cvx(G), _cvx(h), dims]
    if A.shape[0]:
        args += [_cvx(A), _cvx(b)]
    # a line-search breakdown near the boundary is retried at looser tolerances
    attempt_tol = tol
    while True:
        options = {"show_progress": False, "maxiters": max_iter, "abstol": attempt_tol,
                   "reltol": attempt_tol, "feastol": attempt_tol}
        try:
            res = solvers.conelp(*args, options=options)
            break
        except (ValueError, ArithmeticError) as exc:
            if attempt_tol * 10.0 > _RETRY_TOL_LIMIT:
                log.warning("conelp failed: %s", exc)
                return SocpSolution(SolveStatus.NUMERICAL_FAILURE, None, math.nan,
                                    info={"error": str(exc)})
            attempt_tol *= 10.0

    status = res["status"]
    iters = int(res.get("iterations", 0))
    info = {k: res.get(k) for k in ("primal infeasibility", "dual infeasibility",
                                    "relative gap", "gap")}
    if status == "primal infeasible":
        return SocpSolution.infeasible(iterations=iters, info=info)
    if status == "dual infeasible":
        return SocpSolution(SolveStatus.UNBOUNDED, None, -math.inf, iterations=iters, info=info)

    x = np.array(res["x"]).ravel() if res["x"] is not None else None
    if x is None:
        return _unknown_exit(res, iters, info)
    scale = 1.0 + max(float(np.max(np.abs(h), initial=0.0)),
                      float(np.max(np.abs(b), initial=0.0)))
    violation = p.max_violation(x)
    if status == "optimal" or (violation <= _ACCEPT_FEAS * scale and _small_gap(res)):
        if violation > _ACCEPT_FEAS * scale:
            log.warning("conelp optimum violates constraints by %.3g", violation)
            return SocpSolution(SolveStatus.NUMERICAL_FAILURE, x, p.objective_value(x),
                                iterations=iters, info=info)
        return SocpSolution(SolveStatus.OPTIMAL, x, p.objective_value(x), iterations=iters,
                            info=info)
    return _unknown_exit(res, iters, info)


def _small_gap(res) -> bool:
    rel = res.get("relative gap")
    gap = res.get("gap")
    return (rel is not None and rel <= _ACCEPT_GAP) or (gap is not None and gap <= _ACCEPT_GAP)


def _unknown_exit(res, iters, info) -> SocpSolution:
    cert = res.get("residual as primal infeasibility certificate")
    if cert is not None and cert <= _ACCEPT_FEAS:
        return SocpSolution.infeasible(iterations=iters, info=info)
    cert = res.get("residual as dual infeasibility certificate")
    if cert is not None and cert <= _ACCEPT_FEAS:
        return SocpSolution(SolveStatus.UNBOUNDED, None, -math.inf, iterations=iters, info=info)
    log.warning("conelp stopped without a certificate (status %s)", res["status"])
    return SocpSolution(SolveStatus.NUMERICAL_FAILURE, None, math.nan, iterations=iters,
                        info=info)

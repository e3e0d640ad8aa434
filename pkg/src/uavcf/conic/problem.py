"""Second-order cone programs with optional binary variables.

A problem is::

    minimize    objective @ x + objective_offset
    subject to  ||A_j x + b_j|| <= c_j @ x + d_j     for every cone j
                row_i @ x  (<= or ==)  rhs_i          for every linear row i
                lower <= x <= upper
                x_i in {0, 1}                         for i in binary_indices
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ConeConstraint:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float = 0.0

    def residual(self, x: np.ndarray) -> float:
        """``||A x + b|| - (c @ x + d)``; nonpositive when satisfied."""
        return float(np.linalg.norm(self.A @ x + self.b) - (self.c @ x + self.d))


@dataclass(frozen=True)
class LinearConstraint:
    row: np.ndarray
    rhs: float
    sense: str = "<="

    def __post_init__(self):
        if self.sense not in ("<=", "=="):
            raise ValueError(f"unknown sense {self.sense!r}")

    def residual(self, x: np.ndarray) -> float:
        v = float(self.row @ x - self.rhs)
        return abs(v) if self.sense == "==" else v


@dataclass(frozen=True)
class SocpProblem:
    n_vars: int
    objective: np.ndarray
    cones: tuple[ConeConstraint, ...] = ()
    linear: tuple[LinearConstraint, ...] = ()
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    binary_indices: tuple[int, ...] = ()
    objective_offset: float = 0.0

    def __post_init__(self):
        n = self.n_vars
        obj = np.asarray(self.objective, dtype=float)
        if obj.shape != (n,):
            raise ValueError("objective length must equal n_vars")
        object.__setattr__(self, "objective", obj)
        lo = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
        hi = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lo.shape != (n,) or hi.shape != (n,):
            raise ValueError("bounds must have length n_vars")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        for cone in self.cones:
            if cone.A.ndim != 2 or cone.A.shape[1] != n or cone.b.shape != (cone.A.shape[0],) \
                    or cone.c.shape != (n,):
                raise ValueError("cone dimensions inconsistent with n_vars")
        for lin in self.linear:
            if lin.row.shape != (n,):
                raise ValueError("linear row length must equal n_vars")
        binaries = tuple(sorted(set(int(i) for i in self.binary_indices)))
        if binaries and (binaries[0] < 0 or binaries[-1] >= n):
            raise ValueError("binary index out of range")
        if any(lo[i] > 1 or hi[i] < 0 or lo[i] > hi[i] for i in binaries):
            raise ValueError("binary variable bounds exclude both 0 and 1")
        object.__setattr__(self, "binary_indices", binaries)
        object.__setattr__(self, "cones", tuple(self.cones))
        object.__setattr__(self, "linear", tuple(self.linear))

    def relaxation(self) -> "SocpProblem":
        """Continuous relaxation: binaries become variables in [0, 1]."""
        lo, hi = self.lower.copy(), self.upper.copy()
        for i in self.binary_indices:
            lo[i] = max(lo[i], 0.0)
            hi[i] = min(hi[i], 1.0)
        return replace(self, lower=lo, upper=hi, binary_indices=())

    def max_violation(self, x: np.ndarray) -> float:
        """Largest constraint violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        v = 0.0
        for cone in self.cones:
            v = max(v, cone.residual(x))
        for lin in self.linear:
            v = max(v, lin.residual(x))
        v = max(v, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0)))
        return v

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective @ x + self.objective_offset)

    def fix(self, values: dict[int, float]) -> tuple["SocpProblem", np.ndarray]:
        """Substitute fixed values for some variables.

        Returns the reduced problem and the indices of the remaining
        variables in the original numbering.
        """
        if not values:
            return self, np.arange(self.n_vars)
        fixed = np.array(sorted(values), dtype=int)
        vals = np.array([values[i] for i in fixed], dtype=float)
        keep = np.setdiff1d(np.arange(self.n_vars), fixed)
        cones = tuple(ConeConstraint(c.A[:, keep], c.b + c.A[:, fixed] @ vals, c.c[keep],
                                     c.d + float(c.c[fixed] @ vals)) for c in self.cones)
        linear = tuple(LinearConstraint(r.row[keep], r.rhs - float(r.row[fixed] @ vals), r.sense)
                       for r in self.linear)
        remap = {int(old): new for new, old in enumerate(keep)}
        binaries = tuple(remap[i] for i in self.binary_indices if i in remap)
        reduced = SocpProblem(
            n_vars=keep.size,
            objective=self.objective[keep],
            cones=cones,
            linear=linear,
            lower=self.lower[keep],
            upper=self.upper[keep],
            binary_indices=binaries,
            objective_offset=self.objective_offset + float(self.objective[fixed] @ vals),
        )
        return reduced, keep

    # plain-text dump format ------------------------------------------------

    def dumps(self) -> str:
        def vec(v):
            return " ".join(repr(float(a)) for a in np.ravel(v))

        out = ["socp 1", f"n_vars {self.n_vars}", f"objective {vec(self.objective)}",
               f"offset {self.objective_offset!r}", f"lower {vec(self.lower)}",
               f"upper {vec(self.upper)}",
               "binaries " + " ".join(str(i) for i in self.binary_indices)]
        for cone in self.cones:
            out.append(f"cone {cone.A.shape[0]}")
            out.extend(f"A {vec(row)}" for row in cone.A)
            out.append(f"b {vec(cone.b)}")
            out.append(f"c {vec(cone.c)}")
            out.append(f"d {float(cone.d)!r}")
        for lin in self.linear:
            out.append(f"linear {lin.sense} {float(lin.rhs)!r}")
            out.append(f"row {vec(lin.row)}")
        out.append("end")
        return "\n".join(out) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SocpProblem":
        lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        it = iter(lines)

        def expect(key):
            tok = next(it)
            if tok[0] != key:
                raise ValueError(f"expected {key!r}, found {tok[0]!r}")
            return tok[1:]

        def floats(tok):
            return np.array([float(t) for t in tok])

        if expect("socp") != ["1"]:
            raise ValueError("unsupported format version")
        n = int(expect("n_vars")[0])
        obj = floats(expect("objective"))
        offset = float(expect("offset")[0])
        lo = floats(expect("lower"))
        hi = floats(expect("upper"))
        binaries = tuple(int(t) for t in expect("binaries"))
        cones, linear = [], []
        for tok in it:
            if tok[0] == "end":
                break
            if tok[0] == "cone":
                m = int(tok[1])
                A = np.array([floats(expect("A")) for _ in range(m)]).reshape(m, n)
                cones.append(ConeConstraint(A, floats(expect("b")), floats(expect("c")),
                                            float(expect("d")[0])))
            elif tok[0] == "linear":
                linear.append(LinearConstraint(floats(expect("row")), float(tok[2]), tok[1]))
            else:
                raise ValueError(f"unexpected record {tok[0]!r}")
        return cls(n, obj, tuple(cones), tuple(linear), lo, hi, binaries, offset)

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "SocpProblem":
        return cls.loads(Path(path).read_text())


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SocpSolution:
    status: SolveStatus
    x: np.ndarray | None
    objective: float
    gap: float = 0.0
    iterations: int = 0
    nodes: int = 0
    info: dict = field(default_factory=dict, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @classmethod
    def infeasible(cls, **kw) -> "SocpSolution":
        return cls(SolveStatus.INFEASIBLE, None, math.inf, **kw)

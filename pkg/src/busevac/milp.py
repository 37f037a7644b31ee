"""Solver-agnostic MILP representation.

Plain variable table plus sparse rows with deterministic insertion order.
This is the exchange format between the linearizer, the internal solver and
the MPS reader/writer; it carries no evacuation semantics of its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"

SENSES = ("LE", "GE", "EQ")


@dataclass
class MilpVar:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    kind: str = CONTINUOUS


@dataclass
class MilpRow:
    name: str
    sense: str
    coeffs: dict[str, float]
    rhs: float


@dataclass
class MilpProblem:
    """Minimization MILP: variable table, sparse rows, linear objective."""

    variables: list[MilpVar] = field(default_factory=list)
    rows: list[MilpRow] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    objective_name: str = "COST"
    metadata: dict = field(default_factory=dict)

    def add_var(self, name, lb=0.0, ub=math.inf, kind=CONTINUOUS) -> MilpVar:
        v = MilpVar(name, float(lb), float(ub), kind)
        self.variables.append(v)
        self.__dict__.pop("var_index", None)
        return v

    def add_row(self, name, sense, coeffs, rhs) -> MilpRow:
        r = MilpRow(name, sense, dict(coeffs), float(rhs))
        self.rows.append(r)
        return r

    @cached_property
    def var_index(self) -> dict[str, int]:
        return {v.name: k for k, v in enumerate(self.variables)}

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def integer_variables(self) -> list[str]:
        return [v.name for v in self.variables if v.kind in (BINARY, INTEGER)]

    def validate(self) -> list[str]:
        """Structural checks; empty list when the problem is well formed."""
        bad: list[str] = []
        seen = set()
        for v in self.variables:
            if v.name in seen:
                bad.append(f"duplicate variable name {v.name}")
            seen.add(v.name)
            if v.kind == BINARY and (v.lb, v.ub) != (0.0, 1.0):
                bad.append(f"binary variable {v.name} must have bounds [0,1]")
            if math.isnan(v.lb) or math.isnan(v.ub) or v.lb > v.ub:
                bad.append(f"variable {v.name} has inconsistent bounds [{v.lb}, {v.ub}]")
        names = set(seen)
        row_seen = {self.objective_name}
        for r in self.rows:
            if r.name in row_seen:
                bad.append(f"duplicate row name {r.name}")
            row_seen.add(r.name)
            if r.sense not in SENSES:
                bad.append(f"row {r.name} has unknown sense {r.sense}")
            if not math.isfinite(r.rhs):
                bad.append(f"row {r.name} has non-finite right side {r.rhs}")
            for n, c in r.coeffs.items():
                if n not in names:
                    bad.append(f"row {r.name} references unknown variable {n}")
                if not math.isfinite(c):
                    bad.append(f"row {r.name} has non-finite coefficient on {n}")
        for n, c in self.objective.items():
            if n not in names:
                bad.append(f"objective references unknown variable {n}")
            if not math.isfinite(c):
                bad.append(f"objective has non-finite coefficient on {n}")
        return bad


def objective_value(problem: MilpProblem, values: dict[str, float]) -> float:
    return sum(c * values.get(n, 0.0) for n, c in problem.objective.items())


@dataclass(frozen=True)
class PointViolation:
    what: str  # row name, or "bound:<var>" / "integrality:<var>"
    amount: float

    def __str__(self) -> str:
        return f"{self.what} violated by {self.amount:.3e}"


def evaluate_point(
    problem: MilpProblem,
    values: dict[str, float],
    tol: float = 1e-6,
    int_tol: float = 1e-6,
) -> list[PointViolation]:
    """All row, bound and integrality violations of a candidate point."""
    out: list[PointViolation] = []
    for v in problem.variables:
        val = values.get(v.name, 0.0)
        if val < v.lb - tol:
            out.append(PointViolation(f"bound:{v.name}", v.lb - val))
        if val > v.ub + tol:
            out.append(PointViolation(f"bound:{v.name}", val - v.ub))
        if v.kind in (BINARY, INTEGER) and abs(val - round(val)) > int_tol:
            out.append(PointViolation(f"integrality:{v.name}", abs(val - round(val))))
    for r in problem.rows:
        act = sum(c * values.get(n, 0.0) for n, c in r.coeffs.items())
        if r.sense == "LE" and act > r.rhs + tol:
            out.append(PointViolation(r.name, act - r.rhs))
        elif r.sense == "GE" and act < r.rhs - tol:
            out.append(PointViolation(r.name, r.rhs - act))
        elif r.sense == "EQ" and abs(act - r.rhs) > tol:
            out.append(PointViolation(r.name, abs(act - r.rhs)))
    return out


def point_feasible(rows, values: dict[str, float], tol: float = 1e-9) -> bool:
    """Check a value assignment against a bare list of rows (no bounds)."""
    for r in rows:
        act = sum(c * values.get(n, 0.0) for n, c in r.coeffs.items())
        if r.sense == "LE" and act > r.rhs + tol:
            return False
        if r.sense == "GE" and act < r.rhs - tol:
            return False
        if r.sense == "EQ" and abs(act - r.rhs) > tol:
            return False
    return True

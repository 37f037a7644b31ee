"""Branch-and-bound MILP engine.

Best-bound node selection over LP relaxations solved by the internal simplex,
branching on the most fractional integer variable with a lexicographic
tie-break.  Incumbents come from integral node relaxations and from a
rounding heuristic run at every node; an optional problem context can replace
the generic rounding with domain-aware completion and validate every
incumbent.  With one worker and a fixed seed the node sequence, the stats and
the returned assignment are fully deterministic.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass, field, replace
from time import perf_counter

import numpy as np

from .milp import MilpProblem, evaluate_point, objective_value
from .oracle import OracleResult, SearchSpaceError, brute_force_oracle  # re-export
from .simplex import Basis, SimplexCore, StandardForm

INT_TOL = 1e-6

TERM_OPTIMAL = "optimal"
TERM_GAP = "gap-reached"
TERM_TIME = "time-limit"
TERM_NODE = "node-limit"
TERM_INFEASIBLE = "infeasible"

__all__ = [
    "SolverConfig",
    "SolveStats",
    "BnbNode",
    "solve_milp",
    "relative_gap",
    "format_gap",
    "brute_force_oracle",
    "OracleResult",
    "SearchSpaceError",
]


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-4
    time_limit_s: float = 3600.0
    node_limit: int | None = None
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class SolveStats:
    """Incumbent objective (UB), best bound (LB), gap, node count, timing."""

    incumbent: float
    bound: float
    gap: float
    nodes: int
    wall_s: float
    termination: str

    def deterministic_fields(self) -> tuple:
        """Everything except wall time; equal across reruns at workers=1."""
        return (self.incumbent, self.bound, self.gap, self.nodes, self.termination)


@dataclass(frozen=True)
class BnbNode:
    """Bound changes relative to the root, each one tightening the parent."""

    changes: tuple  # ((var_position, "lo" | "hi", value), ...)
    parent_obj: float
    depth: int
    basis: Basis | None = None


def relative_gap(ub: float, lb: float) -> float:
    """(UB - LB) / (1e-10 + |UB|), clamped at zero; infinite without an incumbent."""
    if math.isinf(ub):
        return math.inf
    return max(0.0, (ub - lb) / (1e-10 + abs(ub)))


def format_gap(gap: float) -> str:
    """Result-table gap label: proven-zero gaps read "0%", others "0.01 %" style."""
    if math.isinf(gap):
        return "inf"
    if gap == 0.0:
        return "0%"
    return f"{gap * 100:.2f} %"


# ---------------------------------------------------------------------------
# presolve: singleton rows to bounds, fixed variables substituted out


@dataclass
class PresolveResult:
    problem: MilpProblem
    fixed: dict[str, float]
    obj_offset: float
    infeasible: bool


def presolve_fixings(problem: MilpProblem) -> PresolveResult:
    """Remove singleton rows and variables with equal bounds.

    Singleton rows become variable bounds; variables fixed by their bounds are
    substituted into the remaining rows and the objective.  Repeats to a fixed
    point.  This is deliberately the only reduction performed.
    """
    lo = {v.name: v.lb for v in problem.variables}
    up = {v.name: v.ub for v in problem.variables}
    kind = {v.name: v.kind for v in problem.variables}
    rows = [(r.name, r.sense, dict(r.coeffs), r.rhs) for r in problem.rows]
    fixed: dict[str, float] = {}
    obj = dict(problem.objective)
    offset = 0.0

    def infeasible() -> PresolveResult:
        return PresolveResult(problem, {}, 0.0, True)

    changed = True
    while changed:
        changed = False
        kept = []
        for name, sense, coeffs, rhs in rows:
            if len(coeffs) == 0:
                bad = (
                    (sense == "LE" and rhs < -1e-9)
                    or (sense == "GE" and rhs > 1e-9)
                    or (sense == "EQ" and abs(rhs) > 1e-9)
                )
                if bad:
                    return infeasible()
                changed = True
                continue
            if len(coeffs) == 1:
                (vn, a), = coeffs.items()
                if a == 0.0:
                    bad = (
                        (sense == "LE" and rhs < -1e-9)
                        or (sense == "GE" and rhs > 1e-9)
                        or (sense == "EQ" and abs(rhs) > 1e-9)
                    )
                    if bad:
                        return infeasible()
                    changed = True
                    continue
                val = rhs / a
                if sense == "EQ":
                    lo[vn] = max(lo[vn], val)
                    up[vn] = min(up[vn], val)
                elif (sense == "LE") == (a > 0):
                    up[vn] = min(up[vn], val)
                else:
                    lo[vn] = max(lo[vn], val)
                changed = True
                continue
            kept.append((name, sense, coeffs, rhs))
        rows = kept

        for vn in list(lo):
            if vn in fixed:
                continue
            if lo[vn] > up[vn] + 1e-9:
                return infeasible()
            if lo[vn] == up[vn]:
                val = lo[vn]
                fixed[vn] = val
                offset += obj.pop(vn, 0.0) * val
                changed = True
        if fixed:
            new_rows = []
            for name, sense, coeffs, rhs in rows:
                for vn in [v for v in coeffs if v in fixed]:
                    rhs -= coeffs.pop(vn) * fixed[vn]
                new_rows.append((name, sense, coeffs, rhs))
            rows = new_rows

    reduced = MilpProblem(metadata=dict(problem.metadata))
    reduced.objective_name = problem.objective_name
    for v in problem.variables:
        if v.name not in fixed:
            reduced.add_var(v.name, lo[v.name], up[v.name], v.kind)
    for name, sense, coeffs, rhs in rows:
        reduced.add_row(name, sense, coeffs, rhs)
    reduced.objective = {n: c for n, c in obj.items() if n not in fixed}
    return PresolveResult(reduced, fixed, offset, False)


# ---------------------------------------------------------------------------
# the search


class _Shared:
    """State shared between workers; all mutation under the lock."""

    def __init__(self):
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.heap: list[tuple[float, int, BnbNode]] = []
        self.seq = 0
        self.ub = math.inf
        self.incumbent: dict[str, float] | None = None
        self.nodes = 0
        self.active = 0
        self.stop_reason: str | None = None

    def push(self, bound: float, node: BnbNode):
        heapq.heappush(self.heap, (bound, self.seq, node))
        self.seq += 1

    def open_bound(self) -> float:
        return self.heap[0][0] if self.heap else math.inf


class _Run:
    def __init__(self, problem: MilpProblem, cfg: SolverConfig, context):
        self.problem = problem
        self.cfg = cfg
        self.context = context
        self.t0 = perf_counter()

        self.pres = presolve_fixings(problem)
        self.reduced = self.pres.problem
        self.offset = self.pres.obj_offset
        self.form = None
        if not self.pres.infeasible:
            self.form = StandardForm.from_milp(self.reduced)
            self.int_pos = np.array(
                [k for k, v in enumerate(self.reduced.variables) if v.kind in ("binary", "integer")],
                dtype=np.int64,
            )
            names = [v.name for v in self.reduced.variables]
            order = sorted(range(len(names)), key=lambda k: names[k])
            self.lex_rank = np.empty(len(names), dtype=np.int64)
            for rank, k in enumerate(order):
                self.lex_rank[k] = rank
            self.root_lo = np.array([v.lb for v in self.reduced.variables])
            self.root_up = np.array([v.ub for v in self.reduced.variables])
        self.shared = _Shared()

    # -- helpers ---------------------------------------------------------------

    def elapsed(self) -> float:
        return perf_counter() - self.t0

    def full_values(self, x_reduced: np.ndarray) -> dict[str, float]:
        vals = dict(self.pres.fixed)
        for k, v in enumerate(self.reduced.variables):
            val = x_reduced[k]
            if v.kind in ("binary", "integer"):
                val = float(round(val))
            vals[v.name] = float(val)
        return vals

    def consider(self, values: dict[str, float] | None) -> bool:
        """Validate a candidate assignment and adopt it as incumbent if better."""
        if values is None:
            return False
        if evaluate_point(self.problem, values, tol=1e-6):
            return False
        if self.context is not None and not self.context.accept(values):
            return False
        obj = objective_value(self.problem, values)
        with self.shared.lock:
            if obj < self.shared.ub - 1e-12:
                self.shared.ub = obj
                self.shared.incumbent = values
                return True
        return False

    def node_bounds(self, node: BnbNode):
        lo = self.root_lo.copy()
        up = self.root_up.copy()
        for pos, side, val in node.changes:
            if side == "lo":
                lo[pos] = max(lo[pos], val)
            else:
                up[pos] = min(up[pos], val)
        return lo, up

    def heuristic(self, x_reduced: np.ndarray) -> None:
        if self.context is not None:
            lp_vals = dict(self.pres.fixed)
            for k, v in enumerate(self.reduced.variables):
                lp_vals[v.name] = float(x_reduced[k])
            self.consider(self.context.candidate(lp_vals, integral=False))
            return
        # generic rounding: snap integer variables, keep the rest
        vals = dict(self.pres.fixed)
        for k, v in enumerate(self.reduced.variables):
            val = float(x_reduced[k])
            if v.kind in ("binary", "integer"):
                val = float(round(val))
            vals[v.name] = val
        self.consider(vals)

    def integral_candidate(self, x_reduced: np.ndarray) -> None:
        if self.context is not None:
            lp_vals = dict(self.pres.fixed)
            for k, v in enumerate(self.reduced.variables):
                lp_vals[v.name] = float(x_reduced[k])
            if self.consider(self.context.candidate(lp_vals, integral=True)):
                return
            # fall through: even if the context cannot rebuild it, the raw
            # rounded point may stand on its own
        self.consider(self.full_values(x_reduced))

    # -- worker loop -------------------------------------------------------------

    def work(self, core: SimplexCore):
        sh = self.shared
        cfg = self.cfg
        last_basis: Basis | None = None
        while True:
            with sh.cond:
                while True:
                    if sh.stop_reason is not None:
                        return
                    if sh.heap:
                        break
                    if sh.active == 0:
                        sh.stop_reason = "exhausted"
                        sh.cond.notify_all()
                        return
                    sh.cond.wait(0.05)
                est, _, node = sh.heap[0]
                slack = 1e-9 * max(1.0, abs(sh.ub))
                if est >= sh.ub - slack:
                    sh.stop_reason = "exhausted"
                    sh.cond.notify_all()
                    return
                if cfg.gap_tol > 0 and relative_gap(sh.ub, est) <= cfg.gap_tol:
                    sh.stop_reason = TERM_GAP
                    sh.cond.notify_all()
                    return
                if self.elapsed() >= cfg.time_limit_s:
                    sh.stop_reason = TERM_TIME
                    sh.cond.notify_all()
                    return
                if cfg.node_limit is not None and sh.nodes >= cfg.node_limit:
                    sh.stop_reason = TERM_NODE
                    sh.cond.notify_all()
                    return
                heapq.heappop(sh.heap)
                sh.nodes += 1
                sh.active += 1

            try:
                lo, up = self.node_bounds(node)
                hint = node.basis if node.basis is not None else last_basis
                sol = core.solve(basis=hint, lo_struct=lo, up_struct=up)
                if sol.basis is not None:
                    last_basis = sol.basis
                if sol.status == "optimal":
                    bound = sol.objective + self.offset
                    with sh.lock:
                        fathom = bound >= sh.ub - 1e-9 * max(1.0, abs(sh.ub))
                    if not fathom:
                        x = sol.x
                        fracs = np.abs(x[self.int_pos] - np.round(x[self.int_pos]))
                        if fracs.size == 0 or fracs.max() <= INT_TOL:
                            self.integral_candidate(x)
                        else:
                            self.heuristic(x)
                            self.branch(node, bound, x, fracs, last_basis)
                elif sol.status == "unbounded":
                    raise RuntimeError("LP relaxation is unbounded; MILP is ill-posed")
                elif sol.status == "iteration-limit":
                    raise RuntimeError("LP relaxation hit the simplex iteration limit")
                # infeasible nodes are fathomed silently
            finally:
                with sh.cond:
                    sh.active -= 1
                    sh.cond.notify_all()

    def branch(self, node: BnbNode, bound: float, x: np.ndarray, fracs: np.ndarray, basis):
        cand = self.int_pos[fracs > INT_TOL]
        dist = np.abs(x[cand] - np.floor(x[cand]) - 0.5)
        best = np.lexsort((self.lex_rank[cand], dist))[0]
        pos = int(cand[best])
        val = x[pos]
        down = BnbNode(node.changes + ((pos, "hi", math.floor(val)),), bound, node.depth + 1)
        upn = BnbNode(node.changes + ((pos, "lo", math.ceil(val)),), bound, node.depth + 1)
        with self.shared.lock:
            self.shared.push(bound, down)
            self.shared.push(bound, upn)

    # -- orchestration -------------------------------------------------------------

    def run(self) -> tuple[dict[str, float] | None, SolveStats]:
        cfg = self.cfg
        sh = self.shared

        if cfg.time_limit_s <= 0:
            return None, SolveStats(math.inf, -math.inf, math.inf, 0, self.elapsed(), TERM_TIME)
        if self.pres.infeasible:
            return None, SolveStats(math.inf, math.inf, math.inf, 0, self.elapsed(), TERM_INFEASIBLE)

        if self.context is not None:
            for cand in self.context.initial_solutions():
                self.consider(cand)

        sh.push(-math.inf, BnbNode((), -math.inf, 0))

        n_workers = max(1, cfg.workers)
        if n_workers == 1:
            self.work(SimplexCore(self.form))
        else:
            threads = [
                threading.Thread(target=self.work, args=(SimplexCore(self.form),), daemon=True)
                for _ in range(n_workers)
            ]
            for th in threads:
                th.start()
            for th in threads:
                th.join()

        ub = sh.ub
        if sh.stop_reason == "exhausted" or sh.stop_reason is None:
            if sh.incumbent is None:
                return None, SolveStats(
                    math.inf, math.inf, math.inf, sh.nodes, self.elapsed(), TERM_INFEASIBLE
                )
            lb = ub
            term = TERM_OPTIMAL
        else:
            lb = min(sh.open_bound(), ub)
            term = sh.stop_reason
            if term == TERM_GAP and relative_gap(ub, lb) == 0.0:
                term = TERM_OPTIMAL
        gap = relative_gap(ub, lb)
        stats = SolveStats(ub, lb, gap, sh.nodes, self.elapsed(), term)
        return sh.incumbent, stats


def solve_milp(
    problem: MilpProblem,
    config: SolverConfig | None = None,
    context=None,
) -> tuple[dict[str, float] | None, SolveStats]:
    """Solve a MilpProblem to the configured gap within the configured limits.

    Returns the best assignment found (variable name to value, None when no
    incumbent exists) and the solve statistics.  ``context``, when given,
    supplies initial solutions, node heuristics and incumbent validation; it
    must provide ``initial_solutions()``, ``candidate(values, integral)`` and
    ``accept(values)``.
    """
    bad = problem.validate()
    if bad:
        raise ValueError("invalid MILP: " + "; ".join(bad))
    run = _Run(problem, config or SolverConfig(), context)
    return run.run()

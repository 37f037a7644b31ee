"""Bounded-variable primal simplex for LP relaxations.

Rows are folded into slack bounds (one slack per row), so variable bounds are
handled implicitly instead of as extra rows.  The basis is refactorized with
a sparse LU at fixed intervals and advanced between refactorizations with
product-form eta updates.  Feasibility is restored by a composite phase that
minimizes the total bound violation of the basic variables, which warm
starts cleanly from any prior basis.

Tolerances (on the scaled problem): feasibility 1e-7, optimality 1e-7,
pivot threshold 1e-9.  Power-of-two equilibration scaling is applied before
solving and undone on the way out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .milp import MilpProblem

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_STREAK = 40

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_ITERLIMIT = "iteration-limit"


class NumericalBreakdownError(RuntimeError):
    """Factorization kept failing after bounded retries."""


@dataclass
class Basis:
    """Basic column set plus the bound each nonbasic column sits at."""

    basic: np.ndarray      # m column indices into the augmented matrix
    at_upper: np.ndarray   # length n+m bool, meaningful for nonbasic columns


@dataclass
class InfeasibilityCertificate:
    """Positive optimum of the phase-1 infeasibility objective."""

    value: float


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None         # structural variable values, original units
    objective: float
    basis: Basis | None
    iterations: int
    duals: np.ndarray | None = None           # row duals, original units
    reduced_costs: np.ndarray | None = None   # structural reduced costs, original units
    infeasibility: float = 0.0


def _pow2_scale(maxabs: np.ndarray) -> np.ndarray:
    """Nearest power-of-two reciprocal scales; exact under binary arithmetic."""
    maxabs = np.asarray(maxabs, dtype=float)
    s = np.ones(maxabs.shape, dtype=float)
    pos = maxabs > 0
    s[pos] = np.exp2(-np.round(np.log2(maxabs[pos])))
    return s


class StandardForm:
    """Equality form [A | I] z = b with row senses folded onto slack bounds."""

    def __init__(self, A: sp.csc_matrix, b, c, lo, up, n_struct: int):
        self.m = A.shape[0]
        self.n_struct = n_struct
        self.n_total = n_struct + self.m

        A = A.tocsc().astype(float)
        row_max = np.zeros(self.m)
        if A.nnz:
            row_max = abs(A).max(axis=1).toarray().ravel()
        self.row_scale = _pow2_scale(row_max)
        A = sp.diags(self.row_scale) @ A
        col_max = np.zeros(n_struct)
        if A.nnz:
            col_max = abs(A).max(axis=0).toarray().ravel()
        self.col_scale = _pow2_scale(col_max)
        A = (A @ sp.diags(self.col_scale)).tocsc()

        self.A = sp.hstack([A, sp.identity(self.m, format="csc")], format="csc")
        self.AT = self.A.T.tocsr()
        self.b = np.asarray(b, dtype=float) * self.row_scale
        self.c = np.zeros(self.n_total)
        self.c[:n_struct] = np.asarray(c, dtype=float) * self.col_scale
        self.base_lo = np.asarray(lo, dtype=float).copy()
        self.base_up = np.asarray(up, dtype=float).copy()
        with np.errstate(invalid="ignore"):
            self.base_lo[:n_struct] = self.base_lo[:n_struct] / self.col_scale
            self.base_up[:n_struct] = self.base_up[:n_struct] / self.col_scale

    @classmethod
    def from_milp(cls, problem: MilpProblem) -> "StandardForm":
        n = problem.n_vars
        m = problem.n_rows
        idx = problem.var_index
        data, ri, ci = [], [], []
        b = np.zeros(m)
        lo = np.zeros(n + m)
        up = np.zeros(n + m)
        for k, v in enumerate(problem.variables):
            lo[k], up[k] = v.lb, v.ub
        for r, row in enumerate(problem.rows):
            b[r] = row.rhs
            for name, coef in row.coeffs.items():
                ri.append(r)
                ci.append(idx[name])
                data.append(coef)
            s = n + r
            if row.sense == "LE":
                lo[s], up[s] = 0.0, math.inf
            elif row.sense == "GE":
                lo[s], up[s] = -math.inf, 0.0
            else:
                lo[s], up[s] = 0.0, 0.0
        c = np.zeros(n)
        for name, coef in problem.objective.items():
            c[idx[name]] = coef
        A = sp.csc_matrix((data, (ri, ci)), shape=(m, n))
        return cls(A, b, c, lo, up, n)

    def scaled_bounds(self, lo_struct=None, up_struct=None):
        """Scaled bound arrays, optionally overriding structural bounds."""
        lo = self.base_lo.copy()
        up = self.base_up.copy()
        if lo_struct is not None:
            lo[: self.n_struct] = np.asarray(lo_struct, dtype=float) / self.col_scale
        if up_struct is not None:
            up[: self.n_struct] = np.asarray(up_struct, dtype=float) / self.col_scale
        return lo, up


class _Factor:
    """Sparse LU of the basis plus product-form eta updates."""

    def __init__(self, A: sp.csc_matrix, basic: np.ndarray):
        self.m = A.shape[0]
        self.etas: list[tuple[int, np.ndarray]] = []
        if self.m == 0:
            self.lu = None
            return
        self.lu = splu(A[:, basic].tocsc())

    def ftran(self, v: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.asarray(v, dtype=float)
        x = self.lu.solve(v)
        for r, u in self.etas:
            x = x - u * x[r]
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.asarray(v, dtype=float)
        y = np.asarray(v, dtype=float).copy()
        for r, u in reversed(self.etas):
            y[r] -= u @ y
        return self.lu.solve(y, trans="T")

    def push_eta(self, r: int, w: np.ndarray) -> None:
        u = w.copy()
        u[r] -= 1.0
        u /= w[r]
        self.etas.append((r, u))


class SimplexCore:
    """One reusable solver; keeps the standard form and evolving basis state."""

    def __init__(
        self,
        form: StandardForm,
        feas_tol: float = FEAS_TOL,
        opt_tol: float = OPT_TOL,
        pivot_tol: float = PIVOT_TOL,
        refactor_every: int = REFACTOR_EVERY,
        iteration_limit: int = 200_000,
    ):
        self.form = form
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.iteration_limit = iteration_limit
        self.basic: np.ndarray | None = None
        self.at_upper: np.ndarray | None = None
        self.factor: _Factor | None = None

    # -- basis bookkeeping ---------------------------------------------------

    def _slack_basis(self) -> None:
        f = self.form
        self.basic = np.arange(f.n_struct, f.n_total, dtype=np.int64)
        self.at_upper = (self.lo == -math.inf) & np.isfinite(self.up)

    def _try_basis(self, basis: Basis) -> bool:
        f = self.form
        b = np.asarray(basis.basic, dtype=np.int64)
        if b.shape != (f.m,):
            return False
        if f.m and (b.min() < 0 or b.max() >= f.n_total or len(np.unique(b)) != f.m):
            return False
        try:
            fac = _Factor(f.A, b)
        except RuntimeError:
            return False
        self.basic = b.copy()
        self.at_upper = np.asarray(basis.at_upper, dtype=bool).copy()
        # resting bounds may have changed; keep flags pointing at finite bounds
        self.at_upper &= np.isfinite(self.up)
        self.at_upper |= (self.lo == -math.inf) & np.isfinite(self.up)
        self.factor = fac
        return True

    def _nonbasic_values(self) -> np.ndarray:
        v = np.where(self.at_upper, self.up, self.lo)
        v[~np.isfinite(v)] = 0.0
        v[self.basic] = 0.0
        return v

    def _recompute_xb(self) -> None:
        xn = self._nonbasic_values()
        rhs = self.form.b - self.form.A @ xn
        self.xB = self.factor.ftran(rhs)

    def _refactor(self) -> None:
        self.factor = _Factor(self.form.A, self.basic)
        self._recompute_xb()

    # -- iteration pieces ------------------------------------------------------

    def _infeasibility(self):
        lo_b = self.lo[self.basic]
        up_b = self.up[self.basic]
        below = self.xB < lo_b - self.feas_tol
        above = self.xB > up_b + self.feas_tol
        total = float(
            np.sum(lo_b[below] - self.xB[below]) + np.sum(self.xB[above] - up_b[above])
        )
        return below, above, total

    def _price(self, cB: np.ndarray, c_full: np.ndarray) -> np.ndarray:
        pi = self.factor.btran(cB)
        d = c_full - self.form.AT @ pi
        d[self.basic] = 0.0
        self._pi = pi
        return d

    def _entering(self, d: np.ndarray, banned: set[int]) -> int:
        can_up = ~self.at_upper
        free = (self.lo == -math.inf) & (self.up == math.inf)
        mask = (can_up & (d < -self.opt_tol)) | ((self.at_upper | free) & (d > self.opt_tol))
        mask[self.basic] = False
        mask[self.lo == self.up] = False
        if banned:
            mask[list(banned)] = False
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return -1
        if self._bland_mode:
            return int(idx[0])
        return int(idx[np.argmax(np.abs(d[idx]))])

    def _ratio_test(self, q: int, delta: float, w: np.ndarray, phase1: bool):
        """Smallest blocking step: (t, blocking basic position, own-bound flip)."""
        move = -delta * w
        lo_b = self.lo[self.basic]
        up_b = self.up[self.basic]
        x = self.xB
        eps = self.pivot_tol

        tvals = np.full(len(x), math.inf)
        if phase1:
            below = x < lo_b - self.feas_tol
            above = x > up_b + self.feas_tol
            feas = ~(below | above)
            ok = below & (move > eps)
            tvals[ok] = (lo_b[ok] - x[ok]) / move[ok]
            ok = above & (move < -eps)
            tvals[ok] = (up_b[ok] - x[ok]) / move[ok]
        else:
            feas = np.ones(len(x), dtype=bool)
        ok = feas & (move > eps) & np.isfinite(up_b)
        tvals[ok] = (up_b[ok] - x[ok]) / move[ok]
        ok = feas & (move < -eps) & np.isfinite(lo_b)
        tvals[ok] = (lo_b[ok] - x[ok]) / move[ok]
        np.maximum(tvals, 0.0, out=tvals)

        t_own = math.inf
        if math.isfinite(self.lo[q]) and math.isfinite(self.up[q]):
            t_own = self.up[q] - self.lo[q]
        t_basics = float(tvals.min()) if len(tvals) else math.inf
        if math.isinf(t_basics) and math.isinf(t_own):
            return math.inf, -1, False
        if t_own <= t_basics:
            return t_own, -1, True
        near = np.flatnonzero(tvals <= t_basics * (1 + 1e-9) + 1e-12)
        if self._bland_mode:
            r = int(near[np.argmin(self.basic[near])])
        else:
            r = int(near[np.argmax(np.abs(w[near]))])
        return float(tvals[r]), r, False

    def _apply_pivot(self, q, delta, w, t, r, flip) -> None:
        self.xB = self.xB - delta * t * w
        if flip:
            self.at_upper[q] = ~self.at_upper[q]
            return
        k_out = self.basic[r]
        x_out = self.xB[r]
        lo_k, up_k = self.lo[k_out], self.up[k_out]
        if math.isfinite(up_k) and (
            not math.isfinite(lo_k) or abs(x_out - up_k) <= abs(x_out - lo_k)
        ):
            self.at_upper[k_out] = True
        else:
            self.at_upper[k_out] = False
        entering_from = self.up[q] if self.at_upper[q] else self.lo[q]
        if not math.isfinite(entering_from):
            entering_from = 0.0
        self.factor.push_eta(r, w)
        self.basic[r] = q
        self.xB[r] = entering_from + delta * t
        self.at_upper[q] = False

    def _column(self, q: int) -> np.ndarray:
        col = np.zeros(self.form.m)
        a_q = self.form.A[:, q]
        col[a_q.indices] = a_q.data
        return col

    # -- main loop -------------------------------------------------------------

    def solve(
        self,
        basis: Basis | None = None,
        lo_struct=None,
        up_struct=None,
        iteration_limit: int | None = None,
    ) -> LpSolution:
        f = self.form
        self.lo, self.up = f.scaled_bounds(lo_struct, up_struct)
        limit = iteration_limit if iteration_limit is not None else self.iteration_limit

        if not (basis is not None and self._try_basis(basis)):
            self._slack_basis()
            self.factor = _Factor(f.A, self.basic)
        self._recompute_xb()

        iters = 0
        self._bland_mode = False
        degen_streak = 0
        banned: set[int] = set()
        bad_pivots = 0

        while True:
            if iters >= limit:
                return LpSolution(STATUS_ITERLIMIT, None, math.nan, self._basis(), iters)
            below, above, infeas = self._infeasibility()
            phase1 = infeas > self.feas_tol
            if phase1:
                cB = np.zeros(len(self.basic))
                cB[below] = -1.0
                cB[above] = 1.0
                d = self._price(cB, np.zeros(f.n_total))
            else:
                d = self._price(f.c[self.basic], f.c.copy())
            q = self._entering(d, banned)
            if q < 0:
                if banned:
                    # retry rejected columns against a fresh factorization
                    banned.clear()
                    self._refactor()
                    q = self._entering(d, banned)
                if q < 0:
                    if phase1:
                        return self._finish_infeasible(iters, infeas)
                    return self._finish_optimal(iters)
            delta = 1.0 if (not self.at_upper[q] and d[q] < 0) else -1.0
            w = self.factor.ftran(self._column(q))
            t, r, flip = self._ratio_test(q, delta, w, phase1)
            if math.isinf(t):
                if phase1:
                    # improving ray with no breakpoint cannot shrink a
                    # bounded-below objective; treat as numerical trouble
                    self._refactor()
                    bad_pivots += 1
                    if bad_pivots > 10:
                        raise NumericalBreakdownError("phase-1 ray without breakpoint")
                    iters += 1
                    continue
                return LpSolution(STATUS_UNBOUNDED, None, -math.inf, self._basis(), iters)
            if not flip and abs(w[r]) < self.pivot_tol:
                if self.factor.etas:
                    self._refactor()
                else:
                    banned.add(q)
                    bad_pivots += 1
                    if bad_pivots > 50:
                        raise NumericalBreakdownError("persistent tiny pivots")
                iters += 1
                continue
            self._apply_pivot(q, delta, w, t, r, flip)
            banned.clear()
            bad_pivots = 0
            iters += 1
            if t <= 1e-12:
                degen_streak += 1
                if degen_streak > DEGENERATE_STREAK:
                    self._bland_mode = True
            else:
                degen_streak = 0
                self._bland_mode = False
            if len(self.factor.etas) >= self.refactor_every:
                self._refactor()

    # -- result assembly -------------------------------------------------------

    def _basis(self) -> Basis:
        return Basis(self.basic.copy(), self.at_upper.copy())

    def _full_point(self) -> np.ndarray:
        z = self._nonbasic_values()
        z[self.basic] = self.xB
        return z

    def _finish_optimal(self, iters: int) -> LpSolution:
        f = self.form
        z = self._full_point()
        x = z[: f.n_struct] * f.col_scale
        obj = float(f.c @ z)
        pi = self.factor.btran(f.c[self.basic]) if f.m else np.zeros(0)
        duals = pi * f.row_scale
        d = f.c - (f.AT @ pi)
        reduced = d[: f.n_struct] / f.col_scale
        return LpSolution(
            STATUS_OPTIMAL, x, obj, self._basis(), iters,
            duals=duals, reduced_costs=reduced,
        )

    def _finish_infeasible(self, iters: int, infeas: float) -> LpSolution:
        return LpSolution(
            STATUS_INFEASIBLE, None, math.inf, self._basis(), iters, infeasibility=infeas
        )


def solve_lp(
    problem: MilpProblem,
    basis: Basis | None = None,
    iteration_limit: int = 200_000,
) -> LpSolution:
    """Solve the LP relaxation of a MilpProblem (integrality ignored).

    A basis hint is honored when it is structurally compatible (right size,
    unique in-range columns, factorizable); otherwise the solver cold starts
    from the slack basis.
    """
    form = StandardForm.from_milp(problem)
    core = SimplexCore(form, iteration_limit=iteration_limit)
    return core.solve(basis=basis)


def phase1_feasibility(problem: MilpProblem):
    """Primal-feasible basis, or a certificate with the positive infeasibility optimum."""
    form = StandardForm.from_milp(problem)
    core = SimplexCore(form)
    sol = core.solve()
    if sol.status == STATUS_INFEASIBLE:
        return InfeasibilityCertificate(value=sol.infeasibility)
    if sol.status == STATUS_ITERLIMIT:
        raise NumericalBreakdownError("phase 1 hit the iteration limit")
    return sol.basis

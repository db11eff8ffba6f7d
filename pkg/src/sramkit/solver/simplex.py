"""Bounded-variable primal simplex with a dual-simplex warm restart.

Tableau method over the computational form ``[A | I] z = rhs`` where
every row owns a slack encoding its relation (ranges become slacks with
a finite span) plus one artificial column used by phase 1.  Warm
restarts after variable-bound changes (branch and bound) run the dual
simplex from the previous optimal basis.
"""

from __future__ import annotations

import math

import numpy as np

from ..config import DEFAULT_TOL, Tolerances
from . import kernels
from .program import INF, LinearProgram, Relation, SolveResult, Status

__all__ = ["SimplexSolver", "solve_lp"]

_AT_LO, _AT_HI, _FREE, _BASIC = 0, 1, 2, 3


class SimplexSolver:
    """Two-phase solver bound to one LinearProgram instance.

    The instance keeps its final tableau so that ``resolve`` can
    reoptimize after bound tightenings without starting over.
    """

    def __init__(self, lp: LinearProgram, tol: Tolerances = DEFAULT_TOL):
        self.lp = lp
        self.tol = tol
        n, m = lp.n, lp.m
        self.n = n
        self.m = m
        self.ncols = n + m  # artificial columns appended lazily at solve time
        # internal sense is minimization
        self.sign = 1.0 if lp.minimize else -1.0
        self.cint = np.zeros(self.ncols)
        self.cint[:n] = self.sign * lp.c

        G = np.zeros((m, self.ncols))
        G[:, :n] = lp.A
        G[:, n : n + m] = np.eye(m)
        self.G = G

        lo = np.empty(self.ncols)
        hi = np.empty(self.ncols)
        lo[:n] = lp.lo
        hi[:n] = lp.hi
        for i in range(m):
            r = int(lp.rel[i])
            if r == Relation.LE:
                lo[n + i], hi[n + i] = 0.0, INF
            elif r == Relation.GE:
                lo[n + i], hi[n + i] = -INF, 0.0
            elif r == Relation.EQ:
                lo[n + i], hi[n + i] = 0.0, 0.0
            else:  # RANGE: row expr + s = rhs, s in [0, span]
                lo[n + i], hi[n + i] = 0.0, lp.rhs[i] - lp.rhs_lo[i]
        self.lo = lo
        self.hi = hi
        self.rhs = lp.rhs.astype(float).copy()

        self.T: np.ndarray | None = None
        self.basis: np.ndarray | None = None
        self.vstat: np.ndarray | None = None
        self.xval: np.ndarray | None = None
        self._movable: np.ndarray | None = None
        self.last_status: Status | None = None
        self.iterations = 0

    # -- setup ---------------------------------------------------------

    def _start_value(self, j: int) -> tuple[float, int]:
        lo, hi = self.lo[j], self.hi[j]
        if lo > -INF:
            return lo, _AT_LO
        if hi < INF:
            return hi, _AT_HI
        return 0.0, _FREE

    def _init_tableau(self):
        """Slack basis where the slack start fits its bounds; artificials elsewhere."""
        n, m = self.n, self.m
        base = n + m
        xval0 = np.zeros(base)
        vstat0 = np.empty(base, dtype=np.int8)
        for j in range(n):
            xval0[j], vstat0[j] = self._start_value(j)
        resid = self.rhs - self.G[:, :n] @ xval0[:n]
        need_art = []
        for i in range(m):
            s = n + i
            if self.lo[s] - 1e-12 <= resid[i] <= self.hi[s] + 1e-12:
                xval0[s] = resid[i]
                vstat0[s] = _BASIC
            else:
                xval0[s] = np.clip(resid[i], self.lo[s], self.hi[s])
                vstat0[s] = _AT_LO if xval0[s] == self.lo[s] else _AT_HI
                need_art.append(i)
        n_art = len(need_art)
        self.ncols = base + n_art
        self._art_rows = need_art
        G = np.zeros((m, self.ncols))
        G[:, :base] = self.G[:, :base]
        lo = np.empty(self.ncols)
        hi = np.empty(self.ncols)
        lo[:base] = self.lo[:base]
        hi[:base] = self.hi[:base]
        cint = np.zeros(self.ncols)
        cint[:n] = self.cint[:n]
        cph1 = np.zeros(self.ncols)
        xval = np.zeros(self.ncols)
        xval[:base] = xval0
        vstat = np.empty(self.ncols, dtype=np.int8)
        vstat[:base] = vstat0
        basis = np.empty(m, dtype=np.int64)
        for i in range(m):
            basis[i] = n + i
        for t, i in enumerate(need_art):
            a = base + t
            G[i, a] = 1.0
            gap = resid[i] - xval0[n + i]
            if gap >= 0.0:
                lo[a], hi[a] = 0.0, INF
                cph1[a] = 1.0
            else:
                lo[a], hi[a] = -INF, 0.0
                cph1[a] = -1.0
            xval[a] = gap
            vstat[a] = _BASIC
            basis[i] = a
        self.G = G
        self.lo = lo
        self.hi = hi
        self.cint = cint
        T = np.empty((m + 1, self.ncols))
        T[:m] = G
        T[m] = cph1 - cph1[basis] @ T[:m]
        self.T, self.basis, self.vstat, self.xval = T, basis, vstat, xval
        self._cph1 = cph1
        self._n_art = n_art
        self._refresh_movable()

    def _refresh_movable(self):
        self._movable = ((self.hi - self.lo) > 0.0).astype(np.uint8)

    # -- primal iterations ----------------------------------------------

    def _primal_loop(self, cap: int) -> Status:
        tol = self.tol
        T, basis, vstat, xval = self.T, self.basis, self.vstat, self.xval
        bland = False
        degen = 0
        it = 0
        while it < cap:
            it += 1
            d = T[self.m]
            if bland:
                j = kernels.price_bland(d, vstat, self._movable, tol.reduced_cost)
            else:
                j = kernels.price_dantzig(d, vstat, self._movable, tol.reduced_cost)
            if j < 0:
                self.iterations += it
                return Status.OPTIMAL
            if vstat[j] == _AT_LO:
                direction = 1.0
            elif vstat[j] == _AT_HI:
                direction = -1.0
            else:
                direction = 1.0 if d[j] < 0 else -1.0
            gap = self.hi[j] - self.lo[j]
            t, r, kind = kernels.ratio_test(
                T[: self.m, j],
                direction,
                basis,
                xval,
                self.lo,
                self.hi,
                gap,
                tol.pivot,
                bland,
            )
            if kind == 2:
                self.iterations += it
                self._ray_col = j
                self._ray_dir = direction
                return Status.UNBOUNDED
            step = t * direction
            if step != 0.0:
                xval[basis] -= T[: self.m, j] * step
                xval[j] += step
            if kind == 1:
                vstat[j] = _AT_HI if vstat[j] == _AT_LO else _AT_LO
                xval[j] = self.hi[j] if vstat[j] == _AT_HI else self.lo[j]
            else:
                bvar = basis[r]
                hit_lo = direction * T[r, j] > 0
                xval[bvar] = self.lo[bvar] if hit_lo else self.hi[bvar]
                vstat[bvar] = _AT_LO if hit_lo else _AT_HI
                basis[r] = j
                vstat[j] = _BASIC
                kernels.pivot_update(T, r, j)
            if t <= 1e-12:
                degen += 1
                if degen > tol.degenerate_steps:
                    bland = True
            else:
                degen = 0
        self.iterations += it
        return Status.ITER_LIMIT

    # -- public entry points ---------------------------------------------

    def solve(self) -> SolveResult:
        self._init_tableau()
        m = self.m
        cap = self.tol.pivot_cap_factor * (m + self.ncols)
        if self._n_art:
            status = self._primal_loop(cap)
            if status is not Status.OPTIMAL:
                self.last_status = Status.ITER_LIMIT
                return SolveResult(status=Status.ITER_LIMIT, iterations=self.iterations)
            ph1 = float(self._cph1 @ self.xval)
            scale = 1.0 + (np.abs(self.rhs).max() if self.rhs.size else 0.0)
            if ph1 > 1e-7 * scale:
                y = -self.T[m, self.n : self.n + m].copy()
                self.last_status = Status.INFEASIBLE
                return SolveResult(
                    status=Status.INFEASIBLE, farkas=y, iterations=self.iterations
                )
            # freeze artificials and switch to the real objective
            base = self.n + m
            self.lo[base:] = 0.0
            self.hi[base:] = 0.0
            nb_art = self.vstat[base:] != _BASIC
            self.xval[base:][nb_art] = 0.0
            self.vstat[base:][nb_art] = _AT_LO
            self._refresh_movable()
        self.T[m] = self.cint - self.cint[self.basis] @ self.T[:m]
        status = self._primal_loop(cap)
        return self._finish(status)

    def resolve(self, new_bounds: dict[int, tuple[float, float]]) -> SolveResult:
        """Reoptimize after changing bounds of structural variables.

        Falls back to a cold solve when no optimal basis is available.
        """
        if self.last_status is not Status.OPTIMAL or self.T is None:
            self._apply_bounds(new_bounds)
            return self.solve()
        self._apply_bounds(new_bounds)
        for j, (lo_j, hi_j) in new_bounds.items():
            if self.vstat[j] == _BASIC:
                continue
            x = self.xval[j]
            if x < lo_j:
                self._shift_nonbasic(j, lo_j, _AT_LO)
            elif x > hi_j:
                self._shift_nonbasic(j, hi_j, _AT_HI)
            else:
                if x == lo_j:
                    self.vstat[j] = _AT_LO
                elif x == hi_j:
                    self.vstat[j] = _AT_HI
        status = self._dual_loop()
        if status is Status.ITER_LIMIT:
            # numerical trouble: retry cold
            return self.solve()
        if status is Status.INFEASIBLE:
            self.last_status = Status.INFEASIBLE
            return SolveResult(status=Status.INFEASIBLE, iterations=self.iterations)
        return self._finish(status)

    def resolve_objective(self, c_new: np.ndarray) -> SolveResult:
        """Reoptimize with a new objective from the current (feasible) basis.

        Bound states and feasibility carry over, so only primal pivots are
        needed.  Used by linear-minimization-oracle loops.
        """
        self.cint[: self.n] = self.sign * np.asarray(c_new, dtype=float)
        if self.last_status not in (Status.OPTIMAL, Status.UNBOUNDED) or self.T is None:
            return self.solve()
        m = self.m
        self.T[m] = self.cint - self.cint[self.basis] @ self.T[:m]
        cap = self.tol.pivot_cap_factor * (m + self.ncols)
        status = self._primal_loop(cap)
        return self._finish(status)

    def _apply_bounds(self, new_bounds):
        for j, (lo_j, hi_j) in new_bounds.items():
            self.lo[j] = lo_j
            self.hi[j] = hi_j
        self._refresh_movable()

    def _shift_nonbasic(self, j: int, target: float, state: int):
        delta = target - self.xval[j]
        self.xval[self.basis] -= self.T[: self.m, j] * delta
        self.xval[j] = target
        self.vstat[j] = state

    def _dual_loop(self) -> Status:
        tol = self.tol
        T, basis, vstat, xval = self.T, self.basis, self.vstat, self.xval
        cap = tol.pivot_cap_factor * (self.m + self.ncols)
        it = 0
        while it < cap:
            it += 1
            r = kernels.dual_pick_row(basis, xval, self.lo, self.hi, 0.1 * tol.feas)
            if r < 0:
                self.iterations += it
                return Status.OPTIMAL
            bvar = basis[r]
            below = xval[bvar] < self.lo[bvar]
            want = 1 if below else -1
            j = kernels.dual_ratio(T[r], T[self.m], vstat, self._movable, want, tol.pivot)
            if j < 0:
                self.iterations += it
                return Status.INFEASIBLE
            target = self.lo[bvar] if below else self.hi[bvar]
            step = (xval[bvar] - target) / T[r, j]
            xval[basis] -= T[: self.m, j] * step
            xval[j] += step
            xval[bvar] = target
            vstat[bvar] = _AT_LO if below else _AT_HI
            basis[r] = j
            vstat[j] = _BASIC
            kernels.pivot_update(T, r, j)
        self.iterations += it
        return Status.ITER_LIMIT

    # -- extraction -------------------------------------------------------

    def _finish(self, status: Status) -> SolveResult:
        self.last_status = status
        if status is Status.UNBOUNDED:
            ray = np.zeros(self.ncols)
            ray[self._ray_col] = self._ray_dir
            ray[self.basis] -= self.T[: self.m, self._ray_col] * self._ray_dir
            return SolveResult(
                status=status,
                ray=self.sign * ray[: self.n] if not self.lp.minimize else ray[: self.n],
                iterations=self.iterations,
            )
        if status is not Status.OPTIMAL:
            return SolveResult(status=status, iterations=self.iterations)

        n, m = self.n, self.m
        resid = self.G @ self.xval - self.rhs
        if np.abs(resid).max(initial=0.0) > self.tol.feas:
            self._polish()
            resid = self.G @ self.xval - self.rhs
            if np.abs(resid).max(initial=0.0) > self.tol.feas:
                self.last_status = Status.ITER_LIMIT
                return SolveResult(status=Status.ITER_LIMIT, iterations=self.iterations)
        x = self.xval[:n].copy()
        d_int = self.T[m]
        y_int = -d_int[n : n + m].copy()
        obj_int = float(self.cint[:n] @ x)
        dual_int = self._dual_value(y_int, d_int)
        const = self.lp.obj_const
        if self.lp.minimize:
            return SolveResult(
                status=status,
                x=x,
                objective=obj_int + const,
                duals=y_int,
                reduced=d_int[:n].copy(),
                dual_objective=dual_int + const,
                iterations=self.iterations,
            )
        return SolveResult(
            status=status,
            x=x,
            objective=-obj_int + const,
            duals=-y_int,
            reduced=-d_int[:n].copy(),
            dual_objective=-dual_int + const,
            iterations=self.iterations,
        )

    def _dual_value(self, y: np.ndarray, d: np.ndarray) -> float:
        """Lagrangian dual value: y.rhs plus bound contributions of d."""
        total = float(y @ self.rhs)
        nm = self.n + self.m
        dd = d[:nm]
        lo, hi = self.lo[:nm], self.hi[:nm]
        tolrc = self.tol.reduced_cost
        pos = dd > tolrc
        neg = dd < -tolrc
        lo_c = np.where(np.isfinite(lo), lo, 0.0)
        hi_c = np.where(np.isfinite(hi), hi, 0.0)
        total += float(dd[pos] @ lo_c[pos]) + float(dd[neg] @ hi_c[neg])
        return total

    def _polish(self):
        """Re-derive basic values exactly from the original columns."""
        nonbasic = self.vstat != _BASIC
        nb_cols = np.nonzero(nonbasic)[0]
        rhs_eff = self.rhs - self.G[:, nb_cols] @ self.xval[nb_cols]
        B = self.G[:, self.basis]
        try:
            xb = np.linalg.solve(B, rhs_eff)
        except np.linalg.LinAlgError:
            return
        self.xval[self.basis] = xb


def solve_lp(lp: LinearProgram, tol: Tolerances = DEFAULT_TOL) -> SolveResult:
    """Solve a linear program from scratch."""
    return SimplexSolver(lp, tol).solve()

"""Branch and bound over binary variables on top of the bounded simplex.

Best-bound node selection with a depth-first dive tiebreak: the solver
dives on warm-started children (dual simplex) until the dive dies, then
pops the globally best open node and re-solves it cold.  Branching is on
the most fractional binary.  Separable quadratic objective terms are
reduced to piecewise-linear form before solving.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from ..config import DEFAULT_TOL, Tolerances
from .program import LinearProgram, MixedBinaryProgram, SolveResult, Status
from .simplex import SimplexSolver

__all__ = ["solve_mbp"]


def _to_min(lp: LinearProgram) -> LinearProgram:
    if lp.minimize:
        return lp
    return LinearProgram(
        minimize=True,
        c=-lp.c,
        A=lp.A,
        rel=lp.rel,
        rhs=lp.rhs,
        rhs_lo=lp.rhs_lo,
        lo=lp.lo,
        hi=lp.hi,
        var_names=lp.var_names,
        row_names=lp.row_names,
        obj_const=-lp.obj_const,
    )


def _most_fractional(x: np.ndarray, binaries: np.ndarray, tol: float) -> int:
    if binaries.size == 0:
        return -1
    frac = x[binaries]
    dist = np.minimum(frac, 1.0 - frac)
    j = int(np.argmax(dist))
    return int(binaries[j]) if dist[j] > tol else -1


def solve_mbp(
    mbp: MixedBinaryProgram,
    tol: Tolerances = DEFAULT_TOL,
    incumbent_value: float | None = None,
    node_cap: int | None = None,
) -> SolveResult:
    """Global optimum of a mixed binary program.

    ``incumbent_value`` (in the program's own sense) seeds pruning; when
    branch and bound cannot beat it, the result carries no point and the
    caller's incumbent stands.  Hitting the node cap returns
    ``Status.ITER_LIMIT`` with the best incumbent and proven bound.
    """
    if mbp.quad_terms:
        from .pwl import reduce_quadratics

        mbp = reduce_quadratics(mbp, tol.pwl_segments)
    user_min = mbp.lp.minimize
    lp = _to_min(mbp.lp)
    sign = 1.0 if user_min else -1.0
    binaries = np.array(sorted(mbp.binaries), dtype=int)
    cap = node_cap if node_cap is not None else tol.node_cap

    best_x: np.ndarray | None = None
    best_val = math.inf if incumbent_value is None else sign * incumbent_value
    seeded = incumbent_value is not None

    root = SimplexSolver(lp, tol)
    res = root.solve()
    nodes = 1
    if res.status is Status.INFEASIBLE:
        return SolveResult(status=Status.INFEASIBLE, nodes=nodes)
    if res.status is Status.UNBOUNDED:
        return SolveResult(status=Status.UNBOUNDED, nodes=nodes)
    if res.status is Status.ITER_LIMIT:
        return SolveResult(status=Status.ITER_LIMIT, nodes=nodes)

    heap: list[tuple[float, int, dict]] = []
    counter = 0
    pruned_min = math.inf
    solver = root
    live: tuple[float, dict, SolveResult] | None = (res.objective, {}, res)
    limit_hit = False

    while True:
        if live is None:
            if not heap:
                break
            bound_est, _, fixed = heapq.heappop(heap)
            if bound_est >= best_val - tol.mbp_gap:
                pruned_min = min(pruned_min, bound_est)
                continue
            if nodes >= cap:
                limit_hit = True
                pruned_min = min(pruned_min, bound_est)
                break
            solver = SimplexSolver(lp, tol)
            solver._apply_bounds(fixed)
            res = solver.solve()
            nodes += 1
            if res.status is Status.INFEASIBLE:
                continue
            if res.status is not Status.OPTIMAL:
                limit_hit = True
                break
            live = (res.objective, fixed, res)
            continue

        lpval, fixed, res = live
        live = None
        if lpval >= best_val - tol.mbp_gap:
            pruned_min = min(pruned_min, lpval)
            continue
        j = _most_fractional(res.x, binaries, tol.integrality)
        if j < 0:
            if lpval < best_val:
                best_val = lpval
                best_x = res.x.copy()
                seeded = False
            continue
        if nodes >= cap:
            limit_hit = True
            pruned_min = min(pruned_min, lpval)
            break
        up_first = res.x[j] >= 0.5
        first = (1.0, 1.0) if up_first else (0.0, 0.0)
        second = (0.0, 0.0) if up_first else (1.0, 1.0)
        sib = dict(fixed)
        sib[int(j)] = second
        heapq.heappush(heap, (lpval, counter, sib))
        counter += 1
        child = dict(fixed)
        child[int(j)] = first
        cres = solver.resolve({int(j): first})
        nodes += 1
        if cres.status is Status.INFEASIBLE:
            continue
        if cres.status is not Status.OPTIMAL:
            limit_hit = True
            break
        live = (cres.objective, child, cres)

    open_bounds = [b for b, _, _ in heap]
    if live is not None:
        open_bounds.append(live[0])
    bound = min(open_bounds + [pruned_min, best_val])
    gap = best_val - bound if math.isfinite(best_val) else math.inf

    if best_x is None and not math.isfinite(best_val):
        status = Status.ITER_LIMIT if limit_hit else Status.INFEASIBLE
        return SolveResult(status=status, nodes=nodes, bound=sign * bound)
    status = Status.ITER_LIMIT if limit_hit else Status.OPTIMAL
    out = SolveResult(
        status=status,
        x=best_x,
        objective=sign * best_val if math.isfinite(best_val) else math.nan,
        bound=sign * bound,
        gap=gap,
        nodes=nodes,
    )
    if best_x is None and seeded:
        # pruning matched the seeded value; objective stands, point is the caller's
        out.x = None
    return out

"""Consistency check (step 1): can one separable model explain all instances?

Representability holds iff Lagrange multipliers exist whose per-variable
reduced costs order the same way the observed probabilities do, strictly
for strict probability order and tied for interior ties.  The check
maximizes the worst strictness margin under unit boxes on the reduced
costs; a positive optimum is a certificate.  From a certificate, the
constructive recovery builds explicit piecewise-linear marginal cost
functions whose instance-wise optimizers reproduce the data, which
``forward_solve`` verifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._order import VarGroups, group_by_variable
from .config import DEFAULT_TOL, Tolerances
from .model import Dataset, InstancePattern, PolytopeFamily, validate_dataset
from .solver import (
    INF,
    LinearProgram,
    ProgramBuilder,
    SimplexSolver,
    Status,
    solve_lp,
)
from .solver.frank_wolfe import frank_wolfe
from .solver.pwl import PwlFunction

__all__ = [
    "Certificate",
    "PerturbationSpec",
    "InvalidDatasetError",
    "SolverLimitError",
    "StaleCertificateError",
    "ForwardSolveError",
    "build_consistency_lp",
    "check_representability",
    "certificate_violations",
    "construct_perturbation",
    "forward_solve",
]


class InvalidDatasetError(ValueError):
    """Dataset failed validation; carries the violation list."""

    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class SolverLimitError(RuntimeError):
    """The underlying solve hit its iteration/node cap; verdict indeterminate."""


class StaleCertificateError(ValueError):
    """Certificate multipliers do not order-match the dataset they were paired with."""


class ForwardSolveError(RuntimeError):
    """Forward optimization failed to reach its convergence target."""


@dataclass(frozen=True)
class Certificate:
    """Multipliers and margin witnessing (non-)representability.

    ``lam`` has shape (K, m).  ``representable`` is True exactly when the
    margin cleared the configured threshold.
    """

    lam: np.ndarray
    epsilon: float
    representable: bool

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    def reduced(self, family: PolytopeFamily, k: int, j: int) -> float:
        return float(self.lam[k] @ family.A[:, j])


def _lam_index(k: int, i: int, m: int) -> int:
    return k * m + i


def _add_lam_vars(b: ProgramBuilder, K: int, m: int) -> None:
    for k in range(K):
        for i in range(m):
            b.add_var(f"lam[{k},{i}]", -INF, INF)


def _reduced_coeffs(A: np.ndarray, k: int, j: int, m: int, sign: float = 1.0) -> dict[int, float]:
    col = A[:, j]
    return {_lam_index(k, i, m): sign * float(col[i]) for i in np.nonzero(col)[0]}


def _strict_row(b, A, m, j, k_low, k_high, eps_var, name):
    # r_j^low - r_j^high + eps <= 0
    coeffs = _reduced_coeffs(A, k_low, j, m)
    for idx, v in _reduced_coeffs(A, k_high, j, m, -1.0).items():
        coeffs[idx] = coeffs.get(idx, 0.0) + v
    coeffs[eps_var] = coeffs.get(eps_var, 0.0) + 1.0
    b.add_row(coeffs, "<=", 0.0, name=name)


def _equal_row(b, A, m, j, k1, k2, name):
    coeffs = _reduced_coeffs(A, k1, j, m)
    for idx, v in _reduced_coeffs(A, k2, j, m, -1.0).items():
        coeffs[idx] = coeffs.get(idx, 0.0) + v
    b.add_row(coeffs, "=", 0.0, name=name)


def _box_rows(b, d: Dataset) -> None:
    A, m = d.family.A, d.family.m
    for k, ob in enumerate(d.observations):
        for j in ob.pattern.active:
            b.add_row(_reduced_coeffs(A, k, j, m), "range", 1.0, rhs_lo=-1.0, name=f"box[{k},{j}]")


def build_consistency_lp(
    d: Dataset,
    prob_tie_tol: float = DEFAULT_TOL.prob_tie,
) -> LinearProgram:
    """Margin-maximization LP over all pairwise order conditions.

    One strictness row per ordered pair of observations sharing a
    variable, one equality row per interior tie; ties at 0 or 1 generate
    nothing.  Reduced costs are boxed to [-1, 1] and the margin to
    [-1, 1], so the verdict is scale-free and inconsistent data comes
    back with a diagnostic (nonpositive) margin instead of infeasibility.
    """
    A, m, K = d.family.A, d.family.m, d.K
    b = ProgramBuilder(minimize=False)
    _add_lam_vars(b, K, m)
    eps = b.add_var("eps", -1.0, 1.0, obj=1.0)
    tie = prob_tie_tol
    for k in range(K):
        ok = d.observations[k]
        shared_k = set(ok.pattern.active)
        for l in range(k + 1, K):
            ol = d.observations[l]
            for j in shared_k.intersection(ol.pattern.active):
                pk, pl = ok.value(j), ol.value(j)
                if pk < pl - tie:
                    _strict_row(b, A, m, j, k, l, eps, f"ord[{k}<{l},{j}]")
                elif pl < pk - tie:
                    _strict_row(b, A, m, j, l, k, eps, f"ord[{l}<{k},{j}]")
                elif min(pk, pl) > tie and max(pk, pl) < 1.0 - tie:
                    _equal_row(b, A, m, j, k, l, f"tie[{k}={l},{j}]")
    _box_rows(b, d)
    return b.build_lp()


def _build_consistency_lp_grouped(d: Dataset, tie_tol: float) -> LinearProgram:
    """Order-equivalent LP with per-variable chains instead of all pairs.

    Chains at a nonnegative margin imply every pairwise condition, so the
    representability verdict is unchanged while row counts drop from
    O(nK^2) to O(nK).
    """
    A, m, K = d.family.A, d.family.m, d.K
    b = ProgramBuilder(minimize=False)
    _add_lam_vars(b, K, m)
    eps = b.add_var("eps", -1.0, 1.0, obj=1.0)
    groups = group_by_variable(d, tie_tol)
    for j, g in sorted(groups.items()):
        reps = [c[0] for c in g.clusters]
        for c in g.clusters:
            for a, bb in zip(c, c[1:]):
                _equal_row(b, A, m, j, a, bb, f"tie[{a}={bb},{j}]")
        for r1, r2 in zip(reps, reps[1:]):
            _strict_row(b, A, m, j, r1, r2, eps, f"ord[{r1}<{r2},{j}]")
        if reps:
            for a in g.zeros:
                _strict_row(b, A, m, j, a, reps[0], eps, f"ord[{a}<{reps[0]},{j}]")
            for o in g.ones:
                _strict_row(b, A, m, j, reps[-1], o, eps, f"ord[{reps[-1]}<{o},{j}]")
        elif g.zeros and g.ones:
            if len(g.zeros) * len(g.ones) <= len(g.zeros) + len(g.ones) + 1:
                for a in g.zeros:
                    for o in g.ones:
                        _strict_row(b, A, m, j, a, o, eps, f"ord[{a}<{o},{j}]")
            else:
                u = b.add_var(f"sep[{j}]", -INF, INF)
                for a in g.zeros:
                    coeffs = _reduced_coeffs(A, a, j, m)
                    coeffs[u] = coeffs.get(u, 0.0) - 1.0
                    b.add_row(coeffs, "<=", 0.0, name=f"sep_lo[{a},{j}]")
                for o in g.ones:
                    coeffs = _reduced_coeffs(A, o, j, m, -1.0)
                    coeffs[u] = coeffs.get(u, 0.0) + 1.0
                    coeffs[eps] = coeffs.get(eps, 0.0) + 1.0
                    b.add_row(coeffs, "<=", 0.0, name=f"sep_hi[{o},{j}]")
    _box_rows(b, d)
    return b.build_lp()


def _pair_comparisons(d: Dataset) -> int:
    total = 0
    sets = [set(ob.pattern.active) for ob in d.observations]
    for k in range(d.K):
        for l in range(k + 1, d.K):
            total += len(sets[k] & sets[l])
    return total


def check_representability(
    d: Dataset,
    tol: Tolerances = DEFAULT_TOL,
    prob_tie_tol: float | None = None,
) -> Certificate:
    """Decide representability and return the maximizing certificate.

    Raises :class:`InvalidDatasetError` on bad input and
    :class:`SolverLimitError` when the LP hits its pivot cap (the verdict
    is then indeterminate, never silently negative).
    """
    violations = validate_dataset(d, tol.feas)
    if violations:
        raise InvalidDatasetError(violations)
    tie = tol.prob_tie if prob_tie_tol is None else prob_tie_tol
    if _pair_comparisons(d) <= 4000:
        lp = build_consistency_lp(d, tie)
    else:
        lp = _build_consistency_lp_grouped(d, tie)
    res = solve_lp(lp, tol)
    if res.status is not Status.OPTIMAL:
        raise SolverLimitError(f"consistency LP ended with {res.status.value}")
    m, K = d.family.m, d.K
    lam = res.x[: K * m].reshape(K, m).copy()
    eps = float(res.objective)
    return Certificate(lam=lam, epsilon=eps, representable=eps > tol.epsilon_margin)


def certificate_violations(
    d: Dataset,
    cert: Certificate,
    margin: float = 0.0,
    tie_tol: float = DEFAULT_TOL.prob_tie,
) -> list[dict]:
    """Replay every pairwise order condition against certificate multipliers.

    Returns one record per violated comparison; empty means the
    certificate witnesses the data at the given margin.
    """
    A, m = d.family.A, d.family.m
    out = []
    for k in range(d.K):
        ok = d.observations[k]
        shared_k = set(ok.pattern.active)
        for l in range(k + 1, d.K):
            ol = d.observations[l]
            for j in sorted(shared_k.intersection(ol.pattern.active)):
                pk, pl = ok.value(j), ol.value(j)
                rk, rl = cert.reduced(d.family, k, j), cert.reduced(d.family, l, j)
                if pk < pl - tie_tol and not rk + margin <= rl + 1e-9:
                    out.append({"k": k, "l": l, "var": j, "kind": "order", "slack": rl - rk})
                elif pl < pk - tie_tol and not rl + margin <= rk + 1e-9:
                    out.append({"k": l, "l": k, "var": j, "kind": "order", "slack": rk - rl})
                elif (
                    abs(pk - pl) <= tie_tol
                    and min(pk, pl) > tie_tol
                    and max(pk, pl) < 1 - tie_tol
                    and abs(rk - rl) > 1e-7
                ):
                    out.append({"k": k, "l": l, "var": j, "kind": "tie", "slack": abs(rk - rl)})
    return out


@dataclass(frozen=True)
class PerturbationSpec:
    """Per-variable strictly increasing marginal-cost derivatives on [0, 1].

    Each entry is the piecewise-linear derivative of a strictly convex
    cost; its integral is the cost itself (piecewise quadratic).
    """

    derivatives: tuple[PwlFunction, ...]
    delta_ext: float

    def __post_init__(self):
        if self.delta_ext <= 0:
            raise ValueError("delta_ext must be positive")
        for idx, fn in enumerate(self.derivatives):
            if abs(fn.xs[0]) > 1e-12 or abs(fn.xs[-1] - 1.0) > 1e-12:
                raise ValueError(f"derivative {idx} must cover [0, 1]")
            if np.any(np.diff(fn.ys) <= 0):
                raise ValueError(f"derivative {idx} must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.derivatives)

    def derivative(self, j: int, x) -> float:
        return float(self.derivatives[j](x))

    def cost(self, j: int, x) -> float:
        return float(self.derivatives[j].integral(x))

    def total_cost(self, active, x: np.ndarray) -> float:
        return float(sum(self.cost(j, xi) for j, xi in zip(active, x)))

    def curvature_floor(self, active) -> float:
        return min(float(self.derivatives[j].slopes.min()) for j in active)


def construct_perturbation(
    d: Dataset,
    cert: Certificate,
    delta_ext: float = 1.0,
    tie_tol: float = DEFAULT_TOL.prob_tie,
) -> PerturbationSpec:
    """Explicit marginal costs whose optimizers reproduce a certified dataset.

    Interior observations anchor the derivative at (p, reduced cost);
    consecutive anchors are joined by segments, and the ends extend to 0
    and 1 with slope driven by ``delta_ext``.  Zero/one observations pin
    the boundary values instead (max over the zero block, min over the
    one block).  Deterministic utilities are fixed to zero.
    """
    if not cert.representable:
        raise ValueError("perturbation construction needs a representable certificate")
    if delta_ext <= 0:
        raise ValueError("delta_ext must be positive")
    groups = group_by_variable(d, tie_tol)
    fns: list[PwlFunction] = []
    for j in range(d.family.n):
        g = groups.get(j)
        if g is None:
            fns.append(PwlFunction(np.array([0.0, 1.0]), np.array([-0.5, 0.5]) * delta_ext))
            continue
        anchors_x: list[float] = []
        anchors_y: list[float] = []
        for c, pc in zip(g.clusters, g.cluster_p):
            rs = [cert.reduced(d.family, k, j) for k in c]
            if max(rs) - min(rs) > 1e-6:
                raise StaleCertificateError(
                    f"tied observations disagree on reduced cost for variable {j}"
                )
            anchors_x.append(pc)
            anchors_y.append(float(np.mean(rs)))
        lo_y = max(cert.reduced(d.family, k, j) for k in g.zeros) if g.zeros else None
        hi_y = min(cert.reduced(d.family, k, j) for k in g.ones) if g.ones else None
        xs = [0.0]
        if anchors_x:
            ys = [lo_y if lo_y is not None else anchors_y[0] - delta_ext]
            xs.extend(anchors_x)
            ys.extend(anchors_y)
            xs.append(1.0)
            ys.append(hi_y if hi_y is not None else anchors_y[-1] + delta_ext)
        elif lo_y is not None and hi_y is not None:
            ys = [lo_y]
            xs.append(1.0)
            ys.append(hi_y)
        elif lo_y is not None:
            ys = [lo_y]
            xs.append(1.0)
            ys.append(lo_y + delta_ext)
        elif hi_y is not None:
            ys = [hi_y - delta_ext]
            xs.append(1.0)
            ys.append(hi_y)
        else:  # unreachable: g exists only when some observation contains j
            ys = [-0.5 * delta_ext]
            xs.append(1.0)
            ys.append(0.5 * delta_ext)
        if np.any(np.diff(ys) <= 0):
            raise StaleCertificateError(
                f"anchor values for variable {j} are not strictly increasing; "
                "certificate does not match this dataset"
            )
        fns.append(PwlFunction(np.asarray(xs), np.asarray(ys)))
    return PerturbationSpec(derivatives=tuple(fns), delta_ext=delta_ext)


class _PaddedDerivatives:
    """Vectorized evaluation of many PWL derivatives at once."""

    def __init__(self, spec: PerturbationSpec, active):
        fns = [spec.derivatives[j] for j in active]
        S = max(fn.xs.size for fn in fns)
        n = len(fns)
        self.XS = np.full((n, S), np.inf)
        self.YS = np.zeros((n, S))
        self.SL = np.zeros((n, S - 1))
        for i, fn in enumerate(fns):
            s = fn.xs.size
            self.XS[i, :s] = fn.xs
            self.YS[i, :s] = fn.ys
            self.SL[i, : s - 1] = fn.slopes
            if s < S:
                self.SL[i, s - 1 :] = fn.slopes[-1]
        self.rows = np.arange(n)
        self.breaks = [fn.xs for fn in fns]

    def eval(self, x: np.ndarray) -> np.ndarray:
        idx = (self.XS[:, :-1] <= x[:, None]).sum(axis=1) - 1
        idx = np.clip(idx, 0, self.XS.shape[1] - 2)
        x0 = self.XS[self.rows, idx]
        return self.YS[self.rows, idx] + self.SL[self.rows, idx] * (x - x0)


def _exact_pwl_line_search(pads: _PaddedDerivatives, x, dvec):
    """Exact minimizer of the piecewise-quadratic objective along [0, 1]."""

    def phi_prime(t: float) -> float:
        return float(pads.eval(x + t * dvec) @ dvec)

    if phi_prime(1.0) <= 0.0:
        return 1.0
    cands = [0.0, 1.0]
    for i, brks in enumerate(pads.breaks):
        if abs(dvec[i]) < 1e-15:
            continue
        t = (brks - x[i]) / dvec[i]
        cands.extend(t[(t > 0.0) & (t < 1.0)].tolist())
    cands = sorted(set(cands))
    lo = 0.0
    for t in cands[1:]:
        if phi_prime(t) >= 0.0:
            # linear on [lo, t]: interpolate the root
            a, bb = phi_prime(lo), phi_prime(t)
            if bb <= a + 1e-18:
                return t
            return lo + (t - lo) * (-a) / (bb - a)
        lo = t
    return 1.0


def instance_lp(family: PolytopeFamily, pattern: InstancePattern, c=None) -> LinearProgram:
    """LP relaxation of one instance: restricted equality rows, unit box."""
    b = ProgramBuilder(minimize=True)
    cols = list(pattern.active)
    for pos, j in enumerate(cols):
        b.add_var(family.var_labels[j], 0.0, 1.0, obj=0.0 if c is None else float(c[pos]))
    A = family.A
    for i in range(family.m):
        coeffs = {pos: float(A[i, j]) for pos, j in enumerate(cols) if A[i, j] != 0.0}
        b.add_row(coeffs, "=", float(family.b[i]), name=f"row{i}")
    return b.build_lp()


def interior_start(
    family: PolytopeFamily, pattern: InstancePattern, tol: Tolerances = DEFAULT_TOL
) -> np.ndarray:
    """Feasible point pushed off the unit-box faces where possible."""
    b = ProgramBuilder(minimize=False)
    cols = list(pattern.active)
    for j in cols:
        b.add_var(family.var_labels[j], 0.0, 1.0)
    t = b.add_var("margin", 0.0, 0.5, obj=1.0)
    A = family.A
    for i in range(family.m):
        coeffs = {pos: float(A[i, j]) for pos, j in enumerate(cols) if A[i, j] != 0.0}
        b.add_row(coeffs, "=", float(family.b[i]), name=f"row{i}")
    for pos in range(len(cols)):
        b.add_row({pos: 1.0, t: -1.0}, ">=", 0.0)
        b.add_row({pos: 1.0, t: 1.0}, "<=", 1.0)
    res = solve_lp(b.build_lp(), tol)
    if res.status is not Status.OPTIMAL:
        raise ForwardSolveError("instance relaxation is empty")
    return res.x[: len(cols)].copy()


def forward_solve(
    family: PolytopeFamily,
    pattern: InstancePattern,
    spec: PerturbationSpec,
    tol: Tolerances = DEFAULT_TOL,
    x_tol: float = 1e-6,
    max_iter: int | None = None,
) -> np.ndarray:
    """Unique maximizer of the perturbed utility on one instance.

    Minimizes the summed integral costs (utilities are zero) with
    Frank-Wolfe against the instance's exact vertex oracle, using exact
    piecewise-linear line searches.  The gap target is derived from the
    curvature floor so the returned point is within ``x_tol`` of the
    optimum; failure to converge raises instead of returning silently.
    """
    active = list(pattern.active)
    pads = _PaddedDerivatives(spec, active)
    lp = instance_lp(family, pattern)
    lmo_solver = SimplexSolver(lp, tol)
    x0 = interior_start(family, pattern, tol)

    def grad(x: np.ndarray) -> np.ndarray:
        return pads.eval(np.clip(x, 0.0, 1.0))

    def lmo(c: np.ndarray) -> np.ndarray:
        res = lmo_solver.resolve_objective(c)
        if res.status is not Status.OPTIMAL:
            raise ForwardSolveError(f"vertex oracle failed: {res.status.value}")
        return res.x.copy()

    mu = spec.curvature_floor(active)
    gap_tol = max(0.5 * mu * x_tol * x_tol, 1e-12)
    iters = max_iter if max_iter is not None else tol.fw_max_iter

    def search(x, dvec):
        return _exact_pwl_line_search(pads, x, dvec)

    res = frank_wolfe(grad, lmo, x0, tol=gap_tol, max_iter=iters, line_search=search, config=tol)
    if not res.converged:
        raise ForwardSolveError(
            f"conditional gradient stalled at gap {res.gap:.3g} (target {gap_tol:.3g})"
        )
    return np.clip(res.x, 0.0, 1.0)

"""Counterfactual bounds for a new instance (step 2).

Worst- and best-case values of a functional over every separable model
consistent with the data: binaries encode the trichotomy between the new
instance's reduced costs and each historical one, historical order
constraints are frozen from the observed comparisons at an explicit
margin, and the functional is minimized/maximized over the joint system.
Order-implication cuts derived from the frozen chains tighten the
relaxations without changing the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._order import group_by_variable
from .config import DEFAULT_TOL, Tolerances
from .estimation import FitResult, default_order_margin
from .model import Dataset, InstancePattern, validate_dataset
from .representability import (
    InvalidDatasetError,
    _reduced_coeffs,
    check_representability,
)
from .solver import INF, ProgramBuilder, Status, solve_mbp
from .solver.pwl import encode_pwl_convex, encode_pwl_incremental, quad_secant_pwl, quad_tangent_pwl

__all__ = [
    "ObjectiveSpec",
    "PredictionInterval",
    "PredictionError",
    "NarrowingReport",
    "predict_bounds",
    "interval_narrowing_report",
]


class PredictionError(RuntimeError):
    """Prediction system infeasible or otherwise unusable."""


@dataclass(frozen=True)
class ObjectiveSpec:
    """Functional of the new instance's selection vector.

    Coefficients align with the new pattern's active order.  Quadratic
    terms require the unit box (always true here) and route through
    piecewise-linear encodings chosen by sense and curvature.
    """

    kind: str  # "linear" | "separable_quadratic"
    linear: np.ndarray
    quad: np.ndarray | None = None

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=float)
        if not np.all(np.isfinite(lin)):
            raise ValueError("linear coefficients must be finite")
        object.__setattr__(self, "linear", lin)
        if self.kind not in ("linear", "separable_quadratic"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.quad is not None:
            qd = np.asarray(self.quad, dtype=float)
            if qd.shape != lin.shape or not np.all(np.isfinite(qd)):
                raise ValueError("quad coefficients must be finite and match linear")
            object.__setattr__(self, "quad", qd)
        if self.kind == "separable_quadratic" and self.quad is None:
            raise ValueError("separable_quadratic needs quad coefficients")

    @staticmethod
    def for_variable(pattern: InstancePattern, var: int) -> "ObjectiveSpec":
        c = np.zeros(len(pattern))
        c[pattern.position(var)] = 1.0
        return ObjectiveSpec("linear", c)

    def value(self, x: np.ndarray) -> float:
        v = float(self.linear @ x)
        if self.quad is not None:
            v += float(self.quad @ (x * x))
        return v


@dataclass(frozen=True)
class PredictionInterval:
    lower: float
    upper: float
    witness_lower: np.ndarray | None
    witness_upper: np.ndarray | None
    lam_new_lower: np.ndarray | None
    lam_new_upper: np.ndarray | None
    exact_lower: bool
    exact_upper: bool
    epsilon: float
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if (
            math.isfinite(self.lower)
            and math.isfinite(self.upper)
            and self.lower > self.upper + 1e-9
        ):
            raise PredictionError(f"interval inverted: [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _historical_rows(b, d, lam_of, eps, groups, tie_tol):
    """Frozen order/equality constraints among historical multipliers."""
    A, m = d.family.A, d.family.m

    def strict(j, klow, khigh, tag):
        coeffs = _reduced_coeffs(A, lam_of(khigh), j, m)
        for idx, v in _reduced_coeffs(A, lam_of(klow), j, m, -1.0).items():
            coeffs[idx] = coeffs.get(idx, 0.0) + v
        b.add_row(coeffs, ">=", eps, name=f"hist_ord[{tag},{j}]")

    def equal(j, k1, k2, tag):
        coeffs = _reduced_coeffs(A, lam_of(k1), j, m)
        for idx, v in _reduced_coeffs(A, lam_of(k2), j, m, -1.0).items():
            coeffs[idx] = coeffs.get(idx, 0.0) + v
        b.add_row(coeffs, "=", 0.0, name=f"hist_tie[{tag},{j}]")

    for j, g in sorted(groups.items()):
        reps = [c[0] for c in g.clusters]
        for c in g.clusters:
            for a, bb in zip(c, c[1:]):
                equal(j, a, bb, f"{a}={bb}")
        for r1, r2 in zip(reps, reps[1:]):
            strict(j, r1, r2, f"{r1}<{r2}")
        if reps:
            for a in g.zeros:
                strict(j, a, reps[0], f"{a}<{reps[0]}")
            for o in g.ones:
                strict(j, reps[-1], o, f"{reps[-1]}<{o}")
        elif g.zeros and g.ones:
            for a in g.zeros:
                for o in g.ones:
                    strict(j, a, o, f"{a}<{o}")


def _build_prediction_program(d, new_pattern, f, eps, sense, tol, add_cuts):
    A, m, K = d.family.A, d.family.m, d.K
    b = ProgramBuilder(minimize=(sense == "min"))
    for k in range(K):
        for i in range(m):
            b.add_var(f"lam[{k},{i}]", -INF, INF)
    lam_new0 = b.num_vars
    for i in range(m):
        b.add_var(f"lam[new,{i}]", -INF, INF)

    def lam_of(k):  # historical index passthrough; "new" sits at K
        return k

    new_active = list(new_pattern.active)
    xvar = {j: b.add_var(f"x[{j}]", 0.0, 1.0) for j in new_active}

    groups = group_by_variable(d, tol.prob_tie)
    _historical_rows(b, d, lam_of, eps, groups, tol.prob_tie)

    def rdiff_new_minus(k, j):
        coeffs = dict(_reduced_coeffs(A, K, j, m))  # lam_new occupies slot K
        for idx, v in _reduced_coeffs(A, k, j, m, -1.0).items():
            coeffs[idx] = coeffs.get(idx, 0.0) + v
        return coeffs

    dn_var: dict[tuple[int, int], int] = {}
    dk_var: dict[tuple[int, int], int] = {}
    new_set = set(new_active)
    for k, ob in enumerate(d.observations):
        for j in ob.pattern.active:
            if j not in new_set:
                continue
            p = ob.value(j)
            dn = b.add_var(f"dn[{k},{j}]", 0.0, 1.0, binary=True)
            dk = b.add_var(f"dk[{k},{j}]", 0.0, 1.0, binary=True)
            dn_var[(k, j)] = dn
            dk_var[(k, j)] = dk
            diff = rdiff_new_minus(k, j)
            b.add_row({**diff, dn: 1.0}, ">=", 0.0, name=f"tri_a1[{k},{j}]")
            b.add_row({**diff, dn: 1.0 + eps}, "<=", 1.0, name=f"tri_a2[{k},{j}]")
            ndiff = {idx: -v for idx, v in diff.items()}
            b.add_row({**ndiff, dk: 1.0}, ">=", 0.0, name=f"tri_b1[{k},{j}]")
            b.add_row({**ndiff, dk: 1.0 + eps}, "<=", 1.0, name=f"tri_b2[{k},{j}]")
            x = xvar[j]
            b.add_row({x: 1.0, dn: 1.0}, "<=", 1.0 + p, name=f"tri_c1[{k},{j}]")
            b.add_row({x: 1.0, dk: -1.0}, ">=", p - 1.0, name=f"tri_c2[{k},{j}]")
            b.add_row({x: 1.0, dn: -1.0, dk: -1.0}, "<=", p, name=f"tri_d1[{k},{j}]")
            b.add_row({x: 1.0, dn: 1.0, dk: 1.0}, ">=", p, name=f"tri_d2[{k},{j}]")

    if add_cuts:
        for j, g in sorted(groups.items()):
            if j not in new_set:
                continue

            def link(klow, khigh):
                a = (klow, j) in dn_var
                bb = (khigh, j) in dn_var
                if not (a and bb):
                    return
                b.add_row(
                    {dn_var[(khigh, j)]: 1.0, dn_var[(klow, j)]: -1.0}, ">=", 0.0,
                    name=f"cut_dn[{klow}<{khigh},{j}]",
                )
                b.add_row(
                    {dk_var[(klow, j)]: 1.0, dk_var[(khigh, j)]: -1.0}, ">=", 0.0,
                    name=f"cut_dk[{klow}<{khigh},{j}]",
                )

            def same(k1, k2):
                if (k1, j) not in dn_var or (k2, j) not in dn_var:
                    return
                b.add_row({dn_var[(k1, j)]: 1.0, dn_var[(k2, j)]: -1.0}, "=", 0.0)
                b.add_row({dk_var[(k1, j)]: 1.0, dk_var[(k2, j)]: -1.0}, "=", 0.0)

            reps = [c[0] for c in g.clusters]
            for c in g.clusters:
                for a, bb2 in zip(c, c[1:]):
                    same(a, bb2)
            for r1, r2 in zip(reps, reps[1:]):
                link(r1, r2)
            if reps:
                for a in g.zeros:
                    link(a, reps[0])
                for o in g.ones:
                    link(reps[-1], o)

    # reduced-cost unit boxes for every pattern including the new one
    for k, ob in enumerate(d.observations):
        for j in ob.pattern.active:
            b.add_row(_reduced_coeffs(A, k, j, m), "range", 1.0, rhs_lo=-1.0, name=f"rbox[{k},{j}]")
    for j in new_active:
        b.add_row(_reduced_coeffs(A, K, j, m), "range", 1.0, rhs_lo=-1.0, name=f"rbox[new,{j}]")

    for i in range(m):
        coeffs = {xvar[j]: float(A[i, j]) for j in new_active if A[i, j] != 0.0}
        b.add_row(coeffs, "=", float(d.family.b[i]), name=f"new_inst[{i}]")

    for pos, j in enumerate(new_active):
        if f.linear[pos] != 0.0:
            b.add_objective(xvar[j], float(f.linear[pos]))
    if f.quad is not None:
        for pos, j in enumerate(new_active):
            q = float(f.quad[pos])
            if q == 0.0:
                continue
            easy = (sense == "min" and q > 0) or (sense == "max" and q < 0)
            if easy:
                fn = quad_tangent_pwl(q, 0.0, 1.0, tol.pwl_segments)
                encode_pwl_convex(b, xvar[j], fn, sense, name=f"fq[{j}]")
            else:
                fn = quad_secant_pwl(q, 0.0, 1.0, tol.pwl_segments)
                encode_pwl_incremental(b, xvar[j], fn, name=f"fq[{j}]")
    return b.build_mbp(), xvar, lam_new0


def predict_bounds(
    d: Dataset,
    new_pattern: InstancePattern,
    f: ObjectiveSpec,
    eps: float | None = None,
    sense: str = "both",
    fit: FitResult | None = None,
    tol: Tolerances = DEFAULT_TOL,
    node_cap: int | None = None,
    add_cuts: bool = True,
    skip_check: bool = False,
) -> PredictionInterval:
    """Worst/best-case interval for ``f`` on an unseen pattern.

    The data must pass the consistency check (pass a recovered ``fit``
    to predict from step-1' output; its ``x_star`` then replaces the
    observed probabilities everywhere).  Node-capped solves report the
    proven outer bound and are flagged inexact.
    """
    meta: dict[str, object] = {}
    if fit is not None:
        d = fit.as_dataset(d)
        meta["from_fit"] = True
        meta["fit_loss"] = fit.loss
    violations = validate_dataset(d, tol.feas)
    if violations:
        raise InvalidDatasetError(violations)
    if len(f.linear) != len(new_pattern):
        raise ValueError("objective length must match the new pattern")
    if new_pattern.active[-1] >= d.family.n:
        raise ValueError("new pattern references variables outside the family")
    if not skip_check:
        cert = check_representability(d, tol)
        if not cert.representable:
            raise PredictionError(
                f"data is not representable (margin {cert.epsilon:.3g}); "
                "run the best-fit step first and predict from its output"
            )
    n, K = d.family.n, d.K
    if eps is None:
        eps = default_order_margin(d)
    if not (0.0 < eps < 1.0 / (2.0 * n * K)):
        raise ValueError(f"eps must lie in (0, 1/(2nK)) = (0, {1.0/(2*n*K):.3g})")
    if sense not in ("both", "min", "max"):
        raise ValueError("sense must be 'both', 'min' or 'max'")

    m = d.family.m
    results = {}
    for s in ("min", "max") if sense == "both" else (sense,):
        mbp, xvar, lam_new0 = _build_prediction_program(d, new_pattern, f, eps, s, tol, add_cuts)
        res = solve_mbp(mbp, tol, node_cap=node_cap)
        if res.status is Status.INFEASIBLE:
            raise PredictionError(
                "prediction system infeasible: data may fail representability "
                f"at this margin, or eps={eps:.3g} is too large"
            )
        if res.status is Status.UNBOUNDED:
            raise PredictionError("prediction objective unbounded on the uncertainty set")
        exact = res.status is Status.OPTIMAL
        witness = None
        lam_new = None
        if res.x is not None:
            witness = np.array([res.x[xvar[j]] for j in new_pattern.active])
            lam_new = res.x[lam_new0 : lam_new0 + m].copy()
        value = res.objective if exact else res.bound
        results[s] = (value, witness, lam_new, exact, res)
    lo = results.get("min", (math.nan, None, None, True, None))
    hi = results.get("max", (math.nan, None, None, True, None))
    meta["epsilon"] = eps
    return PredictionInterval(
        lower=lo[0],
        upper=hi[0],
        witness_lower=lo[1],
        witness_upper=hi[1],
        lam_new_lower=lo[2],
        lam_new_upper=hi[2],
        exact_lower=lo[3],
        exact_upper=hi[3],
        epsilon=eps,
        meta=meta,
    )


@dataclass(frozen=True)
class NarrowingReport:
    widths: tuple[float, ...]
    intervals: tuple[PredictionInterval, ...]
    violations: tuple[int, ...]  # indices where width grew by more than 1e-6


def interval_narrowing_report(
    datasets: Sequence[Dataset],
    new_pattern: InstancePattern,
    f: ObjectiveSpec,
    eps: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> NarrowingReport:
    """Interval widths along a nested chain of datasets.

    Each dataset must extend the previous one's observations as a prefix.
    A common margin (from the largest dataset) keeps the uncertainty sets
    nested, so widths should not increase; any growth beyond 1e-6 is
    flagged.
    """
    for a, bb in zip(datasets, datasets[1:]):
        if bb.K < a.K:
            raise ValueError("datasets must be ordered by inclusion")
        for oa, ob in zip(a.observations, bb.observations[: a.K]):
            if oa.pattern.active != ob.pattern.active or not np.array_equal(oa.p, ob.p):
                raise ValueError("chain is not a prefix extension")
    if eps is None:
        eps = default_order_margin(datasets[-1])
    intervals = [
        predict_bounds(d, new_pattern, f, eps=eps, tol=tol) for d in datasets
    ]
    widths = tuple(iv.width for iv in intervals)
    bad = tuple(
        t for t in range(1, len(widths)) if widths[t] > widths[t - 1] + 1e-6
    )
    return NarrowingReport(widths=widths, intervals=tuple(intervals), violations=bad)

"""Best representable fit for inconsistent data (step 1'), plus recovery.

The fit minimizes weighted L1 distance to the data over the closure of
the representable set, encoded as a mixed binary program whose binaries
pick the relative order of reduced costs per shared variable.  A
delta-optimal recovery pass then re-opens the strict inequalities so the
fitted assignment itself passes the consistency check.

The exact program is desk-scale; beyond a binary budget the solver falls
back to the certificate-guided order heuristic and reports the gap
honestly instead of pretending optimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._order import group_by_variable
from .config import DEFAULT_TOL, Tolerances
from .model import Dataset, validate_dataset
from .representability import (
    Certificate,
    InvalidDatasetError,
    check_representability,
)
from .solver import INF, ProgramBuilder, Status, solve_lp, solve_mbp

__all__ = ["FitResult", "RecoveryError", "best_fit", "recover_representable", "default_order_margin"]


class RecoveryError(RuntimeError):
    """Recovery LP infeasible at the requested slack budget."""


@dataclass(frozen=True)
class FitResult:
    """Fitted representable(-closure) assignment and its loss.

    ``x_star`` holds one vector per observation (pattern order),
    ``lam_star`` the multipliers its order pattern came from.
    ``optimal`` is False when the binary program was cut short; ``gap``
    then bounds the distance to the true optimum.  ``recovered`` means
    the assignment itself passes the consistency check.
    """

    x_star: tuple[np.ndarray, ...]
    lam_star: np.ndarray
    loss: float
    delta_used: float
    recovered: bool
    optimal: bool
    gap: float
    epsilon_order: float

    def as_dataset(self, d: Dataset) -> Dataset:
        """The input dataset with observed probabilities replaced by the fit."""
        return d.replace_probabilities(self.x_star)


def default_order_margin(d: Dataset) -> float:
    """Safe strictness margin for order binaries: midpoint of (0, 1/(2nK))."""
    return 1.0 / (4.0 * d.family.n * d.K)


def weighted_l1(d: Dataset, vectors) -> float:
    return float(
        sum(ob.weight * np.abs(ob.p - x).sum() for ob, x in zip(d.observations, vectors))
    )


def _shared_pairs(d: Dataset) -> list[tuple[int, int, list[int]]]:
    sets = [set(ob.pattern.active) for ob in d.observations]
    out = []
    for k in range(d.K):
        for l in range(k + 1, d.K):
            shared = sorted(sets[k] & sets[l])
            if shared:
                out.append((k, l, shared))
    return out


def _add_fit_core(b: ProgramBuilder, d: Dataset):
    """x, deviation variables, instance rows and the L1 objective terms."""
    xvar: dict[tuple[int, int], int] = {}
    uvar: dict[tuple[int, int], int] = {}
    for k, ob in enumerate(d.observations):
        for pos, j in enumerate(ob.pattern.active):
            xj = b.add_var(f"x[{k},{j}]", 0.0, 1.0)
            u = b.add_var(f"u[{k},{j}]", 0.0, INF, obj=ob.weight)
            p = float(ob.p[pos])
            b.add_row({xj: 1.0, u: 1.0}, ">=", p, name=f"dev_lo[{k},{j}]")
            b.add_row({xj: 1.0, u: -1.0}, "<=", p, name=f"dev_hi[{k},{j}]")
            xvar[(k, j)] = xj
            uvar[(k, j)] = u
    A, bvec = d.family.A, d.family.b
    for k, ob in enumerate(d.observations):
        cols = ob.pattern.active
        for i in range(d.family.m):
            coeffs = {xvar[(k, j)]: float(A[i, j]) for j in cols if A[i, j] != 0.0}
            b.add_row(coeffs, "=", float(bvec[i]), name=f"inst[{k},{i}]")
    return xvar, uvar


def build_fit_program(d: Dataset, eps: float):
    """Order-binary program whose optimum is the minimal weighted L1 loss."""
    from .representability import _lam_index, _reduced_coeffs

    A, m = d.family.A, d.family.m
    b = ProgramBuilder(minimize=True)
    for k in range(d.K):
        for i in range(m):
            b.add_var(f"lam[{k},{i}]", -INF, INF)
    xvar, _ = _add_fit_core(b, d)
    delta: dict[tuple[int, int, int], int] = {}
    for k, l, shared in _shared_pairs(d):
        for j in shared:
            dkl = b.add_var(f"d[{k},{l},{j}]", 0.0, 1.0, binary=True)
            dlk = b.add_var(f"d[{l},{k},{j}]", 0.0, 1.0, binary=True)
            delta[(k, l, j)] = dkl
            delta[(l, k, j)] = dlk
            diff = _reduced_coeffs(A, k, j, m)
            for idx, v in _reduced_coeffs(A, l, j, m, -1.0).items():
                diff[idx] = diff.get(idx, 0.0) + v
            # dkl = 1 iff r^k < r^l  (and symmetrically for dlk)
            b.add_row({**diff, dkl: 1.0}, ">=", 0.0, name=f"ordlo[{k},{l},{j}]")
            b.add_row({**diff, dkl: 1.0 + eps}, "<=", 1.0, name=f"ordhi[{k},{l},{j}]")
            ndiff = {idx: -v for idx, v in diff.items()}
            b.add_row({**ndiff, dlk: 1.0}, ">=", 0.0, name=f"ordlo[{l},{k},{j}]")
            b.add_row({**ndiff, dlk: 1.0 + eps}, "<=", 1.0, name=f"ordhi[{l},{k},{j}]")
            xk, xl = xvar[(k, j)], xvar[(l, j)]
            # dkl = 1 -> x^k <= x^l;  dlk = 1 -> x^l <= x^k;  both 0 -> equal
            b.add_row({xl: 1.0, xk: -1.0, dkl: -1.0}, ">=", -1.0, name=f"mono_a[{k},{l},{j}]")
            b.add_row({xl: 1.0, xk: -1.0, dlk: 1.0}, "<=", 1.0, name=f"mono_b[{k},{l},{j}]")
            b.add_row({xl: 1.0, xk: -1.0, dkl: 1.0, dlk: 1.0}, ">=", 0.0, name=f"eq_a[{k},{l},{j}]")
            b.add_row({xl: 1.0, xk: -1.0, dkl: -1.0, dlk: -1.0}, "<=", 0.0, name=f"eq_b[{k},{l},{j}]")
    return b.build_mbp(), xvar, delta


def _order_heuristic_fit(d: Dataset, cert: Certificate, tol: Tolerances):
    """Loss-minimizing fit under the weak order pattern of given multipliers.

    Any solution is a valid point of the representable closure (the
    multipliers witness its order), so its loss upper-bounds the optimum.
    """
    b = ProgramBuilder(minimize=True)
    xvar, _ = _add_fit_core(b, d)
    groups = group_by_variable(d, tol.prob_tie)
    for j, g in sorted(groups.items()):
        members = g.members
        if len(members) < 2:
            continue
        ranked = sorted(members, key=lambda k: cert.reduced(d.family, k, j))
        rvals = [cert.reduced(d.family, k, j) for k in ranked]
        for (k1, r1), (k2, r2) in zip(zip(ranked, rvals), zip(ranked[1:], rvals[1:])):
            if r2 - r1 <= 1e-9:
                b.add_row({xvar[(k2, j)]: 1.0, xvar[(k1, j)]: -1.0}, "=", 0.0)
            else:
                b.add_row({xvar[(k2, j)]: 1.0, xvar[(k1, j)]: -1.0}, ">=", 0.0)
    res = solve_lp(b.build_lp(), tol)
    if res.status is not Status.OPTIMAL:
        return None
    vectors = _extract_vectors(d, res.x, xvar)
    return vectors, weighted_l1(d, vectors)


def _extract_vectors(d: Dataset, x: np.ndarray, xvar) -> tuple[np.ndarray, ...]:
    out = []
    for k, ob in enumerate(d.observations):
        out.append(np.array([x[xvar[(k, j)]] for j in ob.pattern.active]))
    return tuple(out)


def best_fit(
    d: Dataset,
    eps: float | None = None,
    loss: str = "l1",
    tol: Tolerances = DEFAULT_TOL,
    force_program: bool = False,
    node_cap: int | None = None,
    exact_binary_budget: int = 120,
) -> FitResult:
    """Minimal-loss representable approximation of the observed data.

    Representable data short-circuits to zero loss (pass
    ``force_program`` to run the binary program anyway, e.g. for
    cross-checks).  Inconsistent data is solved exactly within the
    binary budget; beyond it the certificate-guided heuristic provides
    the fit, flagged non-optimal with its gap.
    """
    if loss == "kl":
        raise NotImplementedError(
            "KL loss is accepted at the interface but not implemented; use 'l1'"
        )
    if loss != "l1":
        raise ValueError(f"unknown loss {loss!r}")
    violations = validate_dataset(d, tol.feas)
    if violations:
        raise InvalidDatasetError(violations)
    n, K = d.family.n, d.K
    if eps is None:
        eps = default_order_margin(d)
    if not (0.0 < eps < 1.0 / (2.0 * n * K)):
        raise ValueError(f"eps must lie in (0, 1/(2nK)) = (0, {1.0/(2*n*K):.3g})")

    cert = check_representability(d, tol)
    if cert.representable and not force_program:
        return FitResult(
            x_star=tuple(ob.p.copy() for ob in d.observations),
            lam_star=cert.lam,
            loss=0.0,
            delta_used=0.0,
            recovered=True,
            optimal=True,
            gap=0.0,
            epsilon_order=eps,
        )

    heur = _order_heuristic_fit(d, cert, tol)
    mbp, xvar, _ = build_fit_program(d, eps)
    n_bin = len(mbp.binaries)
    if n_bin > exact_binary_budget and not force_program:
        if heur is None:
            raise RecoveryError("heuristic fit LP failed and program exceeds binary budget")
        vectors, hloss = heur
        return FitResult(
            x_star=vectors,
            lam_star=cert.lam,
            loss=hloss,
            delta_used=0.0,
            recovered=False,
            optimal=False,
            gap=hloss,
            epsilon_order=eps,
        )

    seed_val = heur[1] if heur is not None else None
    res = solve_mbp(mbp, tol, incumbent_value=seed_val, node_cap=node_cap)
    if res.status is Status.INFEASIBLE:
        raise RecoveryError("order program infeasible; eps may be too large")
    optimal = res.status is Status.OPTIMAL
    if res.x is not None:
        vectors = _extract_vectors(d, res.x, xvar)
        lam = res.x[: K * d.family.m].reshape(K, d.family.m).copy()
        fit_loss = weighted_l1(d, vectors)
    elif heur is not None:
        vectors, fit_loss = heur
        lam = cert.lam
    else:
        raise RecoveryError(f"no fit found (status {res.status.value})")
    gap = max(0.0, fit_loss - res.bound) if math.isfinite(res.bound) else math.inf
    return FitResult(
        x_star=vectors,
        lam_star=lam,
        loss=fit_loss,
        delta_used=0.0,
        recovered=fit_loss <= tol.loss_zero,
        optimal=optimal,
        gap=gap if not optimal else 0.0,
        epsilon_order=eps,
    )


def recover_representable(
    d: Dataset,
    fit: FitResult,
    delta: float,
    tol: Tolerances = DEFAULT_TOL,
) -> FitResult:
    """Strictly representable assignment within (1+delta) of the fitted loss.

    Freezes the order pattern of the fitted multipliers, re-opens every
    strict inequality by a maximized common slack, and caps the loss at
    ``fit.loss * (1 + delta)``.  Skipped when the fit is already at zero
    loss.  The output is verified with a fresh consistency check.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive (the representable set is open)")
    if fit.loss <= tol.loss_zero:
        return fit
    cert_like = Certificate(lam=fit.lam_star, epsilon=0.0, representable=False)
    b = ProgramBuilder(minimize=False)
    epsp = b.add_var("slack", 0.0, 1.0, obj=1.0)
    xvar, uvar = _add_fit_core(b, d)
    # the recovery objective is the slack alone; the L1 loss moves from the
    # objective into a budget row
    budget = {}
    for k, ob in enumerate(d.observations):
        for j in ob.pattern.active:
            budget[uvar[(k, j)]] = ob.weight
    for idx in budget:
        b._c[idx] = 0.0
    b.add_row(budget, "<=", fit.loss * (1.0 + delta), name="loss_budget")
    groups = group_by_variable(d, tol.prob_tie)
    for j, g in sorted(groups.items()):
        members = g.members
        if len(members) < 2:
            continue
        ranked = sorted(members, key=lambda k: cert_like.reduced(d.family, k, j))
        rvals = [cert_like.reduced(d.family, k, j) for k in ranked]
        for (k1, r1), (k2, r2) in zip(zip(ranked, rvals), zip(ranked[1:], rvals[1:])):
            if r2 - r1 <= 1e-9:
                b.add_row({xvar[(k2, j)]: 1.0, xvar[(k1, j)]: -1.0}, "=", 0.0)
            else:
                b.add_row(
                    {xvar[(k2, j)]: 1.0, xvar[(k1, j)]: -1.0, epsp: -1.0}, ">=", 0.0
                )
    res = solve_lp(b.build_lp(), tol)
    if res.status is not Status.OPTIMAL:
        raise RecoveryError(
            f"recovery LP {res.status.value}; try a larger delta than {delta}"
        )
    vectors = _extract_vectors(d, res.x, xvar)
    out_loss = weighted_l1(d, vectors)
    cert2 = check_representability(d.replace_probabilities(vectors), tol)
    return FitResult(
        x_star=vectors,
        lam_star=cert2.lam if cert2.representable else fit.lam_star,
        loss=out_loss,
        delta_used=delta,
        recovered=cert2.representable,
        optimal=fit.optimal,
        gap=fit.gap,
        epsilon_order=fit.epsilon_order,
    )

"""Frank-Wolfe (conditional gradient) for separable convex minimization.

Works against a caller-supplied gradient and an exact linear minimization
oracle.  Step sizes come from exact line search: the directional
derivative of a convex objective is nondecreasing along the segment, so
its root is found by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..config import DEFAULT_TOL, Tolerances

__all__ = ["FrankWolfeResult", "frank_wolfe"]


@dataclass
class FrankWolfeResult:
    x: np.ndarray
    gap: float
    iterations: int
    converged: bool
    lmo_calls: int


def _line_search(grad, x, d, clip_hi: float) -> float:
    """Exact step on [0, clip_hi] via bisection on the directional derivative."""
    hi = clip_hi
    if grad(x + hi * d) @ d <= 0.0:
        return hi
    lo = 0.0
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        if grad(x + mid * d) @ d <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def frank_wolfe(
    grad: Callable[[np.ndarray], np.ndarray],
    lmo: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float | None = None,
    max_iter: int | None = None,
    boundary_clip: float = 0.0,
    callback: Callable[[np.ndarray, float, int], None] | None = None,
    line_search: Callable[[np.ndarray, np.ndarray], float] | None = None,
    config: Tolerances = DEFAULT_TOL,
) -> FrankWolfeResult:
    """Minimize a convex differentiable function over a polytope.

    ``lmo(c)`` must return an exact vertex minimizer of ``c @ v``.  When
    the gradient involves logarithms the caller sets ``boundary_clip`` so
    steps stop short of the boundary (and clips inside ``grad`` itself).
    ``line_search`` overrides the bisection step rule with an exact one.
    Returns the final iterate with its Frank-Wolfe gap; ``converged`` is
    False on gap stagnation or iteration exhaustion.
    """
    gap_tol = config.fw_gap if tol is None else tol
    iters = config.fw_max_iter if max_iter is None else max_iter
    x = np.array(x0, dtype=float)
    lmo_calls = 0
    prev_g: np.ndarray | None = None
    prev_v: np.ndarray | None = None
    gap = np.inf
    it = 0
    while it < iters:
        it += 1
        g = grad(x)
        if prev_g is not None and np.array_equal(g, prev_g):
            v = prev_v
        else:
            v = lmo(g)
            lmo_calls += 1
            prev_g, prev_v = g.copy(), v
        gap = float(g @ (x - v))
        if callback is not None:
            callback(x, gap, it)
        if gap <= gap_tol:
            return FrankWolfeResult(x, gap, it, True, lmo_calls)
        d = v - x
        clip_hi = 1.0 - boundary_clip if boundary_clip > 0.0 else 1.0
        if line_search is not None:
            step = min(line_search(x, d), clip_hi)
        else:
            step = _line_search(grad, x, d, clip_hi)
        if step <= 1e-16:
            return FrankWolfeResult(x, gap, it, False, lmo_calls)
        x = x + step * d
    return FrankWolfeResult(x, gap, it, gap <= gap_tol, lmo_calls)


def away_frank_wolfe(
    grad: Callable[[np.ndarray], np.ndarray],
    lmo: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float | None = None,
    max_iter: int | None = None,
    boundary_clip: float = 0.0,
    config: Tolerances = DEFAULT_TOL,
) -> FrankWolfeResult:
    """Away-step Frank-Wolfe: linear convergence where the vanilla rule zigzags.

    Tracks the iterate as an explicit vertex combination so mass on bad
    vertices can be removed exactly (drop steps).  ``x0`` must itself be
    a convex combination the oracle could produce; any feasible vertex
    works, as does a vertex average.
    """
    gap_tol = config.fw_gap if tol is None else tol
    iters = config.fw_max_iter if max_iter is None else max_iter
    clip_hi = 1.0 - boundary_clip if boundary_clip > 0.0 else 1.0

    def key(v: np.ndarray) -> bytes:
        return np.round(v, 12).tobytes()

    atoms: dict[bytes, np.ndarray] = {key(x0): np.array(x0, dtype=float)}
    weights: dict[bytes, float] = {key(x0): 1.0}
    x = np.array(x0, dtype=float)
    lmo_calls = 0
    gap = np.inf
    it = 0
    while it < iters:
        it += 1
        g = grad(x)
        v = lmo(g)
        lmo_calls += 1
        gap = float(g @ (x - v))
        if gap <= gap_tol:
            return FrankWolfeResult(x, gap, it, True, lmo_calls)
        akey = max(weights, key=lambda kk: float(g @ atoms[kk]))
        a = atoms[akey]
        away_gap = float(g @ (a - x))
        if gap >= away_gap or len(weights) == 1:
            d = v - x
            gamma_max = clip_hi
            vkey = key(v)
            step = _line_search(grad, x, d, gamma_max)
            if step <= 1e-18:
                return FrankWolfeResult(x, gap, it, False, lmo_calls)
            for kk in list(weights):
                weights[kk] *= 1.0 - step
            atoms.setdefault(vkey, v.copy())
            weights[vkey] = weights.get(vkey, 0.0) + step
        else:
            d = x - a
            wa = weights[akey]
            gamma_max = wa / (1.0 - wa) if wa < 1.0 else 1.0
            step = _line_search(grad, x, d, gamma_max)
            if step <= 1e-18:
                return FrankWolfeResult(x, gap, it, False, lmo_calls)
            for kk in list(weights):
                weights[kk] *= 1.0 + step
            weights[akey] -= step
        # prune and renormalize: drift control and drop-step cleanup
        dead = [kk for kk, w in weights.items() if w <= 1e-15]
        for kk in dead:
            del weights[kk]
            del atoms[kk]
        total = sum(weights.values())
        if abs(total - 1.0) > 1e-9:
            for kk in weights:
                weights[kk] /= total
        x = np.zeros_like(x)
        for kk, w in weights.items():
            x += w * atoms[kk]
    return FrankWolfeResult(x, gap, it, gap <= gap_tol, lmo_calls)

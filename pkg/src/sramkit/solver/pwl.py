"""Piecewise-linear machinery: encodings and quadratic reductions.

Encoding routes follow the sense/curvature pairing: convex-minimization
and concave-maximization admit the exact continuous epigraph/hypograph
form; the opposite pairings need the incremental binary form.  Quadratic
terms are reduced to PWL via tangents (outer approximation) on the easy
pairings and secants (interpolation) otherwise, so computed optima always
bound the true quadratic optimum from the safe side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .program import INF, MixedBinaryProgram, ProgramBuilder

__all__ = [
    "PwlFunction",
    "encode_pwl_convex",
    "encode_pwl_incremental",
    "quad_tangent_pwl",
    "quad_secant_pwl",
    "reduce_quadratics",
]


@dataclass(frozen=True)
class PwlFunction:
    """Continuous piecewise-linear function given by its breakpoints."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("need matching 1-d breakpoint arrays with >= 2 points")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoint arguments must be strictly increasing")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.ys) / np.diff(self.xs)

    def is_convex(self, tol: float = 1e-12) -> bool:
        s = self.slopes
        return bool(np.all(np.diff(s) >= -tol))

    def is_concave(self, tol: float = 1e-12) -> bool:
        s = self.slopes
        return bool(np.all(np.diff(s) <= tol))

    def integral(self, x) -> np.ndarray | float:
        """Exact integral from xs[0]; piecewise quadratic in x."""
        xs, ys = self.xs, self.ys
        seg_area = 0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)
        cum = np.concatenate(([0.0], np.cumsum(seg_area)))
        xq = np.clip(np.asarray(x, dtype=float), xs[0], xs[-1])
        idx = np.clip(np.searchsorted(xs, xq, side="right") - 1, 0, xs.size - 2)
        dx = xq - xs[idx]
        sl = self.slopes[idx]
        val = cum[idx] + ys[idx] * dx + 0.5 * sl * dx * dx
        return float(val) if np.isscalar(x) else val


def quad_tangent_pwl(q: float, lo: float, hi: float, segments: int) -> PwlFunction:
    """Outer PWL approximation of ``q*x**2`` from tangents at a uniform grid.

    Underestimates for q > 0, overestimates for q < 0; exact at the grid
    tangency points' secant intersections.
    """
    u = np.linspace(lo, hi, segments + 1)
    # consecutive tangents of q x^2 intersect at the midpoints
    xs = np.concatenate(([lo], 0.5 * (u[:-1] + u[1:]), [hi]))
    ys = np.concatenate(([q * lo * lo], q * u[:-1] * u[1:], [q * hi * hi]))
    return PwlFunction(xs, ys)


def quad_secant_pwl(q: float, lo: float, hi: float, segments: int) -> PwlFunction:
    """Interpolating PWL of ``q*x**2`` (chords between grid points)."""
    xs = np.linspace(lo, hi, segments + 1)
    return PwlFunction(xs, q * xs * xs)


def encode_pwl_convex(
    builder: ProgramBuilder,
    var: int,
    fn: PwlFunction,
    sense: str,
    weight: float = 1.0,
    name: str | None = None,
) -> int:
    """Add ``weight * fn(x_var)`` to the objective via the continuous form.

    ``sense`` is the objective sense of the surrounding program; the
    function must be convex for "min" and concave for "max" (the exact
    epigraph/hypograph cases).  Returns the index of the value variable.
    Minimizing the fragment reproduces fn exactly at breakpoints and
    linearly in between.
    """
    if weight <= 0:
        raise ValueError("weight must be positive")
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    if sense == "min" and not fn.is_convex():
        raise ValueError("non-convex slope sequence rejected for epigraph encoding")
    if sense == "max" and not fn.is_concave():
        raise ValueError("non-concave slope sequence rejected for hypograph encoding")
    nm = name or f"pwl{var}"
    t = builder.add_var(nm, lo=-INF, hi=INF, obj=weight)
    xs, ys, slopes = fn.xs, fn.ys, fn.slopes
    rel = ">=" if sense == "min" else "<="
    for s in range(slopes.size):
        # t (rel) ys[s] + slopes[s]*(x - xs[s])
        builder.add_row(
            {t: 1.0, var: -slopes[s]},
            rel,
            ys[s] - slopes[s] * xs[s],
            name=f"{nm}_seg{s}",
        )
    return t


def encode_pwl_incremental(
    builder: ProgramBuilder,
    var: int,
    fn: PwlFunction,
    weight: float = 1.0,
    name: str | None = None,
) -> list[int]:
    """Exact binary encoding of ``weight * fn(x_var)``, any curvature.

    Splits x into ordered segment fills with binaries enforcing the fill
    order.  Returns the binary indices added.
    """
    nm = name or f"pwli{var}"
    xs, ys, slopes = fn.xs, fn.ys, fn.slopes
    widths = np.diff(xs)
    S = widths.size
    fills = [builder.add_var(f"{nm}_f{s}", 0.0, float(widths[s])) for s in range(S)]
    zs = [builder.add_var(f"{nm}_z{s}", 0.0, 1.0, binary=True) for s in range(S - 1)]
    # x = xs[0] + sum fills
    builder.add_row({var: 1.0, **{f: -1.0 for f in fills}}, "=", xs[0], name=f"{nm}_link")
    for s in range(S - 1):
        builder.add_row({fills[s]: 1.0, zs[s]: -float(widths[s])}, ">=", 0.0, name=f"{nm}_lo{s}")
        builder.add_row({fills[s + 1]: 1.0, zs[s]: -float(widths[s + 1])}, "<=", 0.0, name=f"{nm}_hi{s}")
    for s in range(S):
        builder.add_objective(fills[s], weight * float(slopes[s]))
    builder.add_obj_const(weight * float(ys[0]))
    return zs


def reduce_quadratics(mbp: MixedBinaryProgram, segments: int) -> MixedBinaryProgram:
    """Replace separable quadratic terms by PWL encodings.

    Easy sense/curvature pairings use tangent outer approximations with
    the continuous encoding; the others use secants with binaries.
    """
    lp = mbp.lp
    sense = "min" if lp.minimize else "max"
    b = ProgramBuilder(minimize=lp.minimize)
    for j in range(lp.n):
        b.add_var(lp.var_names[j], lp.lo[j], lp.hi[j], obj=lp.c[j], binary=j in set(mbp.binaries))
    for i in range(lp.m):
        nz = np.nonzero(lp.A[i])[0]
        coeffs = {int(j): float(lp.A[i, j]) for j in nz}
        rel = int(lp.rel[i])
        relstr = {-1: "<=", 0: "=", 1: ">=", 2: "range"}[rel]
        if relstr == "range":
            b.add_row(coeffs, "range", float(lp.rhs[i]), rhs_lo=float(lp.rhs_lo[i]), name=lp.row_names[i])
        else:
            b.add_row(coeffs, relstr, float(lp.rhs[i]), name=lp.row_names[i])
    for term in mbp.quad_terms:
        j, q = term.var, term.q
        lo, hi = lp.lo[j], lp.hi[j]
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("quadratic terms need finite variable bounds")
        easy = (sense == "min" and q > 0) or (sense == "max" and q < 0)
        if easy:
            fn = quad_tangent_pwl(q, lo, hi, segments)
            encode_pwl_convex(b, j, fn, sense, name=f"q{j}")
        else:
            fn = quad_secant_pwl(q, lo, hi, segments)
            encode_pwl_incremental(b, j, fn, name=f"q{j}")
    return b.build_mbp()

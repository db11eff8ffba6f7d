"""Program containers shared by the LP/MBP engines, plus an LP-format dump.

Relations are weak only; callers that need strictness add an explicit
margin before a program reaches this layer.  Range rows carry both a
lower and an upper right-hand side.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

INF = math.inf

__all__ = [
    "INF",
    "Relation",
    "Status",
    "LinearProgram",
    "QuadTerm",
    "MixedBinaryProgram",
    "SolveResult",
    "ProgramBuilder",
    "lp_text",
]


class Relation(enum.IntEnum):
    LE = -1
    EQ = 0
    GE = 1
    RANGE = 2


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"


@dataclass(frozen=True)
class LinearProgram:
    """min/max ``c @ x + obj_const`` s.t. ``A x (rel) rhs`` and ``lo <= x <= hi``."""

    minimize: bool
    c: np.ndarray
    A: np.ndarray
    rel: np.ndarray  # Relation values per row
    rhs: np.ndarray  # upper rhs for RANGE rows
    rhs_lo: np.ndarray  # lower rhs, only meaningful for RANGE rows
    lo: np.ndarray
    hi: np.ndarray
    var_names: tuple[str, ...] = ()
    row_names: tuple[str, ...] = ()
    obj_const: float = 0.0

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class QuadTerm:
    """Separable objective term ``q * x_j**2`` on a continuous variable."""

    var: int
    q: float


@dataclass(frozen=True)
class MixedBinaryProgram:
    lp: LinearProgram
    binaries: tuple[int, ...]
    quad_terms: tuple[QuadTerm, ...] = ()

    def __post_init__(self):
        bins = set(self.binaries)
        for j in bins:
            if self.lp.lo[j] < -1e-12 or self.lp.hi[j] > 1 + 1e-12:
                raise ValueError(f"binary variable {j} must have bounds within [0,1]")
        for term in self.quad_terms:
            if term.var in bins:
                raise ValueError("quadratic terms are allowed on continuous variables only")


@dataclass
class SolveResult:
    status: Status
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced: np.ndarray | None = None
    dual_objective: float = math.nan
    farkas: np.ndarray | None = None
    ray: np.ndarray | None = None
    iterations: int = 0
    # mixed-binary extras
    bound: float = math.nan
    gap: float = math.nan
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class ProgramBuilder:
    """Incrementally assemble a LinearProgram / MixedBinaryProgram."""

    def __init__(self, minimize: bool = True):
        self.minimize = minimize
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._c: list[float] = []
        self._names: list[str] = []
        self._binaries: list[int] = []
        self._rows: list[tuple[np.ndarray, np.ndarray]] = []
        self._rel: list[int] = []
        self._rhs: list[float] = []
        self._rhs_lo: list[float] = []
        self._row_names: list[str] = []
        self._quad: list[QuadTerm] = []
        self._obj_const = 0.0

    @property
    def num_vars(self) -> int:
        return len(self._c)

    @property
    def num_rows(self) -> int:
        return len(self._rel)

    def add_var(
        self,
        name: str | None = None,
        lo: float = 0.0,
        hi: float = INF,
        obj: float = 0.0,
        binary: bool = False,
    ) -> int:
        if lo > hi:
            raise ValueError(f"variable lower bound {lo} exceeds upper bound {hi}")
        j = len(self._c)
        self._lo.append(float(lo))
        self._hi.append(float(hi))
        self._c.append(float(obj))
        self._names.append(name if name is not None else f"x{j}")
        if binary:
            self._binaries.append(j)
        return j

    def add_objective(self, var: int, coef: float) -> None:
        self._c[var] += float(coef)

    def add_obj_const(self, value: float) -> None:
        self._obj_const += float(value)

    def add_quad(self, var: int, q: float) -> None:
        self._quad.append(QuadTerm(var, float(q)))

    def add_row(
        self,
        coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
        rel: Relation | str,
        rhs: float,
        rhs_lo: float | None = None,
        name: str | None = None,
    ) -> int:
        if isinstance(rel, str):
            rel = {"<=": Relation.LE, "=": Relation.EQ, ">=": Relation.GE, "range": Relation.RANGE}[rel]
        items = coeffs.items() if isinstance(coeffs, Mapping) else list(coeffs)
        acc: dict[int, float] = {}
        for j, v in items:
            if v != 0.0:
                acc[j] = acc.get(j, 0.0) + float(v)
        idx = np.array(sorted(acc), dtype=np.int64)
        vals = np.array([acc[j] for j in idx], dtype=float)
        if rel is Relation.RANGE:
            if rhs_lo is None:
                raise ValueError("range rows need rhs_lo")
            if rhs_lo > rhs:
                raise ValueError("range row has rhs_lo > rhs")
        self._rows.append((idx, vals))
        self._rel.append(int(rel))
        self._rhs.append(float(rhs))
        self._rhs_lo.append(float(rhs_lo) if rhs_lo is not None else float(rhs))
        self._row_names.append(name if name is not None else f"r{len(self._rel) - 1}")
        return len(self._rel) - 1

    def _assemble(self) -> LinearProgram:
        n = len(self._c)
        m = len(self._rel)
        A = np.zeros((m, n))
        for i, (idx, vals) in enumerate(self._rows):
            if idx.size and idx[-1] >= n:
                raise ValueError("row references an unknown variable")
            A[i, idx] = vals
        return LinearProgram(
            minimize=self.minimize,
            c=np.array(self._c, dtype=float),
            A=A,
            rel=np.array(self._rel, dtype=np.int8),
            rhs=np.array(self._rhs, dtype=float),
            rhs_lo=np.array(self._rhs_lo, dtype=float),
            lo=np.array(self._lo, dtype=float),
            hi=np.array(self._hi, dtype=float),
            var_names=tuple(self._names),
            row_names=tuple(self._row_names),
            obj_const=self._obj_const,
        )

    def build_lp(self) -> LinearProgram:
        if self._binaries or self._quad:
            raise ValueError("program has binary/quadratic parts; use build_mbp")
        return self._assemble()

    def build_mbp(self) -> MixedBinaryProgram:
        return MixedBinaryProgram(
            lp=self._assemble(),
            binaries=tuple(self._binaries),
            quad_terms=tuple(self._quad),
        )


def _fmt_coef(v: float, name: str, first: bool) -> str:
    sign = "-" if v < 0 else ("" if first else "+")
    mag = abs(v)
    return f" {sign} {mag:.12g} {name}" if not first else f"{sign}{mag:.12g} {name}"


def lp_text(prog: LinearProgram | MixedBinaryProgram, name: str = "prog") -> str:
    """Render a program in CPLEX-LP-style text for external cross-checking."""
    mbp = prog if isinstance(prog, MixedBinaryProgram) else None
    lp = mbp.lp if mbp else prog
    lines = [f"\\ {name}", "Minimize" if lp.minimize else "Maximize"]
    terms = [
        _fmt_coef(lp.c[j], lp.var_names[j], not k)
        for k, j in enumerate(np.nonzero(lp.c)[0])
    ]
    lines.append(" obj: " + ("".join(terms) if terms else "0 " + lp.var_names[0]))
    lines.append("Subject To")
    for i in range(lp.m):
        row = lp.A[i]
        nz = np.nonzero(row)[0]
        expr = "".join(_fmt_coef(row[j], lp.var_names[j], not k) for k, j in enumerate(nz))
        rel = Relation(int(lp.rel[i]))
        rn = lp.row_names[i]
        if rel is Relation.LE:
            lines.append(f" {rn}: {expr} <= {lp.rhs[i]:.12g}")
        elif rel is Relation.GE:
            lines.append(f" {rn}: {expr} >= {lp.rhs[i]:.12g}")
        elif rel is Relation.EQ:
            lines.append(f" {rn}: {expr} = {lp.rhs[i]:.12g}")
        else:
            lines.append(f" {rn}_lo: {expr} >= {lp.rhs_lo[i]:.12g}")
            lines.append(f" {rn}_hi: {expr} <= {lp.rhs[i]:.12g}")
    lines.append("Bounds")
    for j in range(lp.n):
        lo, hi = lp.lo[j], lp.hi[j]
        nm = lp.var_names[j]
        if lo == -INF and hi == INF:
            lines.append(f" {nm} free")
        elif hi == INF:
            lines.append(f" {lo:.12g} <= {nm}")
        elif lo == -INF:
            lines.append(f" {nm} <= {hi:.12g}")
        else:
            lines.append(f" {lo:.12g} <= {nm} <= {hi:.12g}")
    if mbp and mbp.binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(lp.var_names[j] for j in mbp.binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"

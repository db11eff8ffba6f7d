"""Data model: polytope families, instance patterns and observed selections.

A family is a shared equality system ``A x = b`` over binary variables;
an instance pattern names the variables a historical instance left free,
and an observation stores the aggregated selection vector seen there.
All types are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import DEFAULT_TOL

__all__ = [
    "PolytopeFamily",
    "InstancePattern",
    "Observation",
    "Dataset",
    "ReducedCostView",
    "Violation",
    "DimensionError",
    "validate_dataset",
    "reduced_costs",
]


class DimensionError(ValueError):
    """Structural mismatch between a family and dependent data."""


def _as_float_array(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class PolytopeFamily:
    """Equality system ``A x = b`` shared by every instance of a family.

    ``A`` is dense ``m x n``; instances in scope are tiny, so sparse
    storage is deliberately not used.
    """

    A: np.ndarray
    b: np.ndarray
    var_labels: tuple[str, ...]
    notes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        A = _as_float_array(self.A, "A")
        if A.ndim != 2:
            raise ValueError("A must be a 2-d matrix")
        b = _as_float_array(self.b, "b")
        if b.ndim != 1 or b.shape[0] != A.shape[0]:
            raise DimensionError("b length must match the row count of A")
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError("family needs at least one row and one variable")
        labels = tuple(str(s) for s in self.var_labels)
        if len(labels) != A.shape[1]:
            raise DimensionError("var_labels length must match the column count of A")
        if len(set(labels)) != len(labels):
            raise ValueError("variable labels must be unique")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "var_labels", labels)
        object.__setattr__(self, "notes", dict(self.notes))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def label_index(self, label: str) -> int:
        try:
            return self.var_labels.index(label)
        except ValueError:
            raise KeyError(f"unknown variable label {label!r}") from None


@dataclass(frozen=True)
class InstancePattern:
    """Strictly increasing indices of the variables an instance keeps."""

    active: tuple[int, ...]

    def __post_init__(self):
        act = tuple(int(i) for i in self.active)
        if not act:
            raise ValueError("pattern must keep at least one variable")
        if any(b <= a for a, b in zip(act, act[1:])):
            raise ValueError("pattern indices must be strictly increasing")
        if act[0] < 0:
            raise ValueError("pattern indices must be nonnegative")
        object.__setattr__(self, "active", act)

    def __len__(self) -> int:
        return len(self.active)

    def __contains__(self, j: int) -> bool:
        return j in set(self.active)

    def position(self, j: int) -> int:
        """Offset of family variable ``j`` inside this pattern."""
        return self.active.index(j)

    @staticmethod
    def from_indices(indices) -> "InstancePattern":
        return InstancePattern(tuple(sorted(set(int(i) for i in indices))))


@dataclass(frozen=True)
class Observation:
    """Selection vector ``p`` over a pattern, with a nonnegative weight."""

    pattern: InstancePattern
    p: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        p = _as_float_array(self.p, "p")
        if p.ndim != 1 or p.shape[0] != len(self.pattern):
            raise DimensionError("p length must match the pattern size")
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "weight", float(self.weight))

    def value(self, j: int) -> float:
        """Observed probability of family variable ``j``."""
        return float(self.p[self.pattern.position(j)])


@dataclass(frozen=True)
class Dataset:
    """A family plus K observations on patterns of that family."""

    family: PolytopeFamily
    observations: tuple[Observation, ...]

    def __post_init__(self):
        obs = tuple(self.observations)
        if not obs:
            raise ValueError("dataset needs at least one observation")
        n = self.family.n
        for idx, ob in enumerate(obs):
            if ob.pattern.active[-1] >= n:
                raise DimensionError(
                    f"observation {idx} references variable "
                    f"{ob.pattern.active[-1]} outside the family (n={n})"
                )
        object.__setattr__(self, "observations", obs)

    @property
    def K(self) -> int:
        return len(self.observations)

    def patterns(self) -> list[InstancePattern]:
        return [ob.pattern for ob in self.observations]

    def replace_probabilities(self, vectors: Sequence[np.ndarray]) -> "Dataset":
        """Same patterns and weights, new selection vectors."""
        if len(vectors) != self.K:
            raise DimensionError("need one vector per observation")
        new = tuple(
            Observation(ob.pattern, np.asarray(v, dtype=float), ob.weight)
            for ob, v in zip(self.observations, vectors)
        )
        return Dataset(self.family, new)


@dataclass(frozen=True)
class ReducedCostView:
    """Aggregates ``r_j^k = sum_i lam_i^k a_ij`` for ``j`` active in instance k."""

    r: Mapping[tuple[int, int], float]

    def __post_init__(self):
        object.__setattr__(self, "r", dict(self.r))

    def __getitem__(self, key: tuple[int, int]) -> float:
        return self.r[key]

    def items(self):
        return self.r.items()


@dataclass(frozen=True)
class Violation:
    """One failed observation invariant, with its residual."""

    observation: int
    kind: str  # "range" or "feasibility"
    detail: str
    residual: float

    def __str__(self) -> str:
        return f"obs {self.observation}: {self.kind} {self.detail} (residual {self.residual:.3g})"


def validate_dataset(d: Dataset, tol_feas: float = DEFAULT_TOL.feas) -> list[Violation]:
    """Check every observation against its instance's LP relaxation.

    Returns an empty list iff all probabilities lie in [0, 1] and each
    restricted equality row holds within ``tol_feas``.  Membership in the
    integral hull is deliberately not verified; downstream steps only
    consume the relaxation constraints.

    Dimension mismatches raise :class:`DimensionError` instead of being
    reported as numeric violations.
    """
    out: list[Violation] = []
    A, b = d.family.A, d.family.b
    for idx, ob in enumerate(d.observations):
        cols = np.array(ob.pattern.active, dtype=int)
        if cols[-1] >= d.family.n:
            raise DimensionError(f"observation {idx} exceeds family dimension")
        for pos, pj in enumerate(ob.p):
            if pj < -tol_feas or pj > 1.0 + tol_feas:
                out.append(
                    Violation(
                        idx,
                        "range",
                        f"p[{d.family.var_labels[cols[pos]]}]={pj:.6g} outside [0,1]",
                        float(max(-pj, pj - 1.0)),
                    )
                )
        resid = A[:, cols] @ ob.p - b
        for i, ri in enumerate(resid):
            if abs(ri) > tol_feas:
                out.append(
                    Violation(
                        idx,
                        "feasibility",
                        f"row {i} residual",
                        float(abs(ri)),
                    )
                )
    return out


def reduced_costs(
    family: PolytopeFamily,
    lam: Mapping[tuple[int, int], float] | np.ndarray,
    patterns: Sequence[InstancePattern],
) -> ReducedCostView:
    """Evaluate ``r_j^k = sum_i lam_i^k a_ij`` for every k and j active in k.

    ``lam`` is either a ``(K, m)`` array or a map ``(k, i) -> value``
    defined for all k and all ``i in [m]``.
    """
    m = family.m
    K = len(patterns)
    if isinstance(lam, np.ndarray):
        L = np.asarray(lam, dtype=float)
        if L.shape != (K, m):
            raise DimensionError(f"lam must have shape ({K}, {m})")
    else:
        L = np.empty((K, m))
        for k in range(K):
            for i in range(m):
                if (k, i) not in lam:
                    raise KeyError(f"lam missing entry ({k}, {i})")
                L[k, i] = lam[(k, i)]
    out: dict[tuple[int, int], float] = {}
    for k, pat in enumerate(patterns):
        cols = np.array(pat.active, dtype=int)
        vals = L[k] @ family.A[:, cols]
        for j, v in zip(cols, vals):
            out[(k, int(j))] = float(v)
    return ReducedCostView(out)

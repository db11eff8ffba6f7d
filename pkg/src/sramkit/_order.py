"""Grouping of observed probabilities by variable, shared by the workflow steps.

For each family variable the observations containing it are split into a
zero block, interior tie clusters ordered by probability, and a one
block.  Cross-instance order conditions only ever compare within these
structures, so every step (consistency rows, perturbation anchors,
frozen prediction constraints) reuses this view.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import DEFAULT_TOL
from .model import Dataset

__all__ = ["VarGroups", "group_by_variable"]


@dataclass(frozen=True)
class VarGroups:
    var: int
    zeros: tuple[int, ...]  # observation indices with p ~ 0 (unordered)
    clusters: tuple[tuple[int, ...], ...]  # interior ties, ascending p
    cluster_p: tuple[float, ...]
    ones: tuple[int, ...]  # observation indices with p ~ 1 (unordered)
    values: dict[int, float]  # observation index -> p

    @property
    def members(self) -> list[int]:
        out = list(self.zeros)
        for c in self.clusters:
            out.extend(c)
        out.extend(self.ones)
        return out


def group_by_variable(d: Dataset, tie_tol: float = DEFAULT_TOL.prob_tie) -> dict[int, VarGroups]:
    """Classify observations per variable into zero/interior/one order groups."""
    per_var: dict[int, list[tuple[float, int]]] = {}
    for k, ob in enumerate(d.observations):
        for pos, j in enumerate(ob.pattern.active):
            per_var.setdefault(j, []).append((float(ob.p[pos]), k))
    out: dict[int, VarGroups] = {}
    for j, entries in per_var.items():
        zeros: list[int] = []
        ones: list[int] = []
        interior: list[tuple[float, int]] = []
        values: dict[int, float] = {}
        for p, k in entries:
            values[k] = p
            if p <= tie_tol:
                zeros.append(k)
            elif p >= 1.0 - tie_tol:
                ones.append(k)
            else:
                interior.append((p, k))
        interior.sort()
        clusters: list[tuple[int, ...]] = []
        cluster_p: list[float] = []
        cur: list[int] = []
        prev_p = None
        for p, k in interior:
            if prev_p is not None and p - prev_p > tie_tol:
                clusters.append(tuple(cur))
                cur = []
            if not cur:
                cluster_p.append(p)
            cur.append(k)
            prev_p = p
        if cur:
            clusters.append(tuple(cur))
        out[j] = VarGroups(
            var=j,
            zeros=tuple(zeros),
            clusters=tuple(clusters),
            cluster_p=tuple(cluster_p),
            ones=tuple(ones),
            values=values,
        )
    return out

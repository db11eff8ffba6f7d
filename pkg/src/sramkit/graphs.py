"""Polytope adapters for the three problem classes: s-t flows and assignments.

Flow polytopes come from node-arc incidence over a DAG (unit divergence,
redundant sink row dropped by default so the system has full row rank).
Assignment polytopes are balanced doubly-stochastic systems; unbalanced
or removable sides carry explicit slack columns so the data model stays
equality-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .model import InstancePattern, PolytopeFamily
from .solver import ProgramBuilder, Status, solve_lp

__all__ = [
    "Dag",
    "BipartiteGraph",
    "flow_polytope",
    "assignment_polytope",
    "assignment_pattern",
    "subgraph_pattern",
    "edge_label",
    "pair_label",
]


def edge_label(tail: int, head: int) -> str:
    return f"{tail}->{head}"


def pair_label(left: int, right: int) -> str:
    return f"L{left}~R{right}"


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph with one source and one sink.

    Construction prunes to the s-t-connected core: kept nodes lie on some
    source-to-sink path and kept edges join kept nodes.  Raises when no
    source-to-sink path exists.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    source: int = 0
    sink: int | None = None

    def __post_init__(self):
        sink = self.n_nodes - 1 if self.sink is None else self.sink
        object.__setattr__(self, "sink", sink)
        edges = sorted(set((int(t), int(h)) for t, h in self.edges))
        if any(t == h for t, h in edges):
            raise ValueError("self-loops are not allowed")
        if any(t < 0 or h < 0 or t >= self.n_nodes or h >= self.n_nodes for t, h in edges):
            raise ValueError("edge endpoint outside node range")
        adj: dict[int, list[int]] = {}
        radj: dict[int, list[int]] = {}
        for t, h in edges:
            adj.setdefault(t, []).append(h)
            radj.setdefault(h, []).append(t)
        order = self._topo_order(edges)
        if order is None:
            raise ValueError("graph contains a cycle")
        fwd = self._reach(self.source, adj)
        bwd = self._reach(sink, radj)
        keep = fwd & bwd
        if self.source not in keep or sink not in keep:
            raise ValueError("no source-to-sink path")
        kept_edges = tuple((t, h) for t, h in edges if t in keep and h in keep)
        object.__setattr__(self, "edges", kept_edges)
        object.__setattr__(self, "_kept_nodes", tuple(sorted(keep)))
        object.__setattr__(self, "_topo", tuple(v for v in order if v in keep))

    @staticmethod
    def _topo_order(edges):
        heads: dict[int, int] = {}
        adj: dict[int, list[int]] = {}
        nodes = set()
        for t, h in edges:
            nodes.add(t)
            nodes.add(h)
            heads[h] = heads.get(h, 0) + 1
            adj.setdefault(t, []).append(h)
        queue = sorted(n for n in nodes if heads.get(n, 0) == 0)
        out = []
        indeg = dict(heads)
        while queue:
            v = queue.pop(0)
            out.append(v)
            for w in adj.get(v, ()):
                indeg[w] -= 1
                if indeg[w] == 0:
                    queue.append(w)
            queue.sort()
        if len(out) != len(nodes):
            return None
        return out

    @staticmethod
    def _reach(start, adj):
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    @property
    def kept_nodes(self) -> tuple[int, ...]:
        return self._kept_nodes

    @property
    def topo(self) -> tuple[int, ...]:
        return self._topo

    def edge_labels(self) -> tuple[str, ...]:
        return tuple(edge_label(t, h) for t, h in self.edges)


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph over left/right node index sets.

    Every listed node must keep degree at least one; node removal is
    expressed by constructing a new graph without it.
    """

    n_left: int
    n_right: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = sorted(set((int(i), int(j)) for i, j in self.edges))
        if any(i < 0 or i >= self.n_left or j < 0 or j >= self.n_right for i, j in edges):
            raise ValueError("edge endpoint outside side range")
        object.__setattr__(self, "edges", tuple(edges))

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        dl = np.zeros(self.n_left, dtype=int)
        dr = np.zeros(self.n_right, dtype=int)
        for i, j in self.edges:
            dl[i] += 1
            dr[j] += 1
        return dl, dr

    def edge_labels(self) -> tuple[str, ...]:
        return tuple(pair_label(i, j) for i, j in self.edges)

    @staticmethod
    def complete(n_left: int, n_right: int) -> "BipartiteGraph":
        return BipartiteGraph(
            n_left, n_right, tuple((i, j) for i in range(n_left) for j in range(n_right))
        )


def flow_polytope(g: Dag, drop_redundant_row: bool = True) -> PolytopeFamily:
    """Unit s-t flow system on the pruned DAG.

    Incidence convention: +1 at the tail row, -1 at the head row, so an
    edge's reduced cost under node multipliers is lam_tail - lam_head.
    The sink's conservation row is redundant (rows sum to zero) and is
    dropped by default; the drop is recorded in the family notes.
    """
    nodes = list(g.kept_nodes)
    rows = [v for v in nodes if not (drop_redundant_row and v == g.sink)]
    row_of = {v: i for i, v in enumerate(rows)}
    n = len(g.edges)
    A = np.zeros((len(rows), n))
    for col, (t, h) in enumerate(g.edges):
        if t in row_of:
            A[row_of[t], col] = 1.0
        if h in row_of:
            A[row_of[h], col] = -1.0
    b = np.zeros(len(rows))
    b[row_of[g.source]] = 1.0
    if not drop_redundant_row:
        b[row_of[g.sink]] = -1.0
    notes = {"kind": "flow", "source": str(g.source), "sink": str(g.sink)}
    if drop_redundant_row:
        notes["dropped_row"] = f"node {g.sink}"
    notes["row_nodes"] = ",".join(str(v) for v in rows)
    return PolytopeFamily(A=A, b=b, var_labels=g.edge_labels(), notes=notes)


def assignment_polytope(g: BipartiteGraph, slack_mode: str = "auto") -> PolytopeFamily:
    """Doubly-stochastic system on a bipartite graph.

    Balanced sides give pure equality rows (the Birkhoff-style polytope).
    With unequal sides the larger side's rows relax to "<= 1" through
    explicit slack columns; ``slack_mode='all'`` puts a slack on every
    row, which master families use so node removals stay feasible.  The
    reduced cost of edge (i, j) is lam_left[i] + lam_right[j]; a slack's
    is its own row's multiplier.
    """
    dl, dr = g.degrees()
    if np.any(dl < 1) or np.any(dr < 1):
        bad = [f"L{i}" for i in np.nonzero(dl < 1)[0]] + [f"R{j}" for j in np.nonzero(dr < 1)[0]]
        raise ValueError(f"isolated retained node(s): {', '.join(bad)}")
    if slack_mode not in ("auto", "none", "all"):
        raise ValueError("slack_mode must be auto, none or all")
    nl, nr = g.n_left, g.n_right
    slack_left = slack_right = False
    if slack_mode == "all":
        slack_left = slack_right = True
    elif slack_mode == "auto":
        slack_left = nl > nr
        slack_right = nr > nl
    labels = list(g.edge_labels())
    m = nl + nr
    cols = len(g.edges) + (nl if slack_left else 0) + (nr if slack_right else 0)
    A = np.zeros((m, cols))
    for col, (i, j) in enumerate(g.edges):
        A[i, col] = 1.0
        A[nl + j, col] = 1.0
    col = len(g.edges)
    if slack_left:
        for i in range(nl):
            A[i, col] = 1.0
            labels.append(f"slack:L{i}")
            col += 1
    if slack_right:
        for j in range(nr):
            A[nl + j, col] = 1.0
            labels.append(f"slack:R{j}")
            col += 1
    b = np.ones(m)
    notes = {
        "kind": "assignment",
        "n_left": str(nl),
        "n_right": str(nr),
        "slack_left": str(slack_left),
        "slack_right": str(slack_right),
    }
    return PolytopeFamily(A=A, b=b, var_labels=tuple(labels), notes=notes)


def assignment_pattern(
    family: PolytopeFamily,
    kept_left: set[int] | None = None,
    kept_right: set[int] | None = None,
    kept_edges=None,
) -> InstancePattern:
    """Pattern for an assignment instance with node removals.

    Removed nodes' slacks stay active (they absorb the row); retained
    nodes on the saturated (smaller) side drop their slacks so those rows
    bind, while the larger retained side keeps slacks for spare capacity.
    """
    nl = int(family.notes["n_left"])
    nr = int(family.notes["n_right"])
    kept_left = set(range(nl)) if kept_left is None else set(kept_left)
    kept_right = set(range(nr)) if kept_right is None else set(kept_right)
    label_idx = {lab: i for i, lab in enumerate(family.var_labels)}
    for i in set(range(nl)) - kept_left:
        if f"slack:L{i}" not in label_idx:
            raise ValueError(f"family has no slack column for removed node L{i}")
    for j in set(range(nr)) - kept_right:
        if f"slack:R{j}" not in label_idx:
            raise ValueError(f"family has no slack column for removed node R{j}")
    active: list[int] = []
    for idx, lab in enumerate(family.var_labels):
        if lab.startswith("slack:"):
            side, num = lab[6], int(lab[7:])
            kept = kept_left if side == "L" else kept_right
            other = kept_right if side == "L" else kept_left
            if num not in kept or len(kept) > len(other):
                active.append(idx)
        else:
            i, j = lab[1:].split("~R")
            i, j = int(i), int(j)
            if i in kept_left and j in kept_right:
                if kept_edges is None or (i, j) in kept_edges:
                    active.append(idx)
    if not active:
        raise ValueError("pattern would be empty")
    return InstancePattern(tuple(sorted(active)))


def subgraph_pattern(
    full: PolytopeFamily,
    kept_vars,
    tol: Tolerances = DEFAULT_TOL,
    check_feasible: bool = True,
) -> InstancePattern:
    """Pattern restricting a family to a variable subset, with a feasibility probe.

    ``kept_vars`` may hold labels or indices.  An empty restricted
    relaxation raises with the most binding constraint row named.
    """
    idx = []
    for v in kept_vars:
        idx.append(full.label_index(v) if isinstance(v, str) else int(v))
    pattern = InstancePattern.from_indices(idx)
    if check_feasible:
        b = ProgramBuilder()
        cols = list(pattern.active)
        for j in cols:
            b.add_var(full.var_labels[j], 0.0, 1.0)
        for i in range(full.m):
            coeffs = {pos: float(full.A[i, j]) for pos, j in enumerate(cols) if full.A[i, j] != 0.0}
            b.add_row(coeffs, "=", float(full.b[i]), name=f"row{i}")
        res = solve_lp(b.build_lp(), tol)
        if res.status is not Status.OPTIMAL:
            worst = ""
            if res.farkas is not None and res.farkas.size:
                worst = f" (most binding: row {int(np.argmax(np.abs(res.farkas)))})"
            raise ValueError(f"restricted relaxation is empty{worst}")
    return pattern

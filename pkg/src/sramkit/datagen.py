"""Synthetic data: seeded random graphs, misspecified Gaussian aggregates,
and exactly-specified parametric selection probabilities.

Gaussian aggregates average many per-sample combinatorial optima under
correlated cost noise (data generally outside the representable family).
Parametric data solves, per instance, the convex program induced by
exponential or uniform noise marginals, which is representable by
construction; a truth oracle of the drawn parameters supports
counterfactual evaluation on unseen patterns.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import DEFAULT_TOL, Tolerances
from .graphs import (
    BipartiteGraph,
    Dag,
    assignment_pattern,
    assignment_polytope,
    edge_label,
    flow_polytope,
)
from .model import Dataset, InstancePattern, Observation, PolytopeFamily
from .representability import check_representability, instance_lp, interior_start
from .solver import SimplexSolver, Status
from .solver.frank_wolfe import away_frank_wolfe

__all__ = [
    "NoiseSpec",
    "MdmSpec",
    "TruthOracle",
    "gen_random_dag",
    "gen_random_bipartite",
    "gen_gaussian_observations",
    "gen_mdm_observations",
    "PathScenario",
    "AssignmentScenario",
    "path_scenario",
    "assignment_scenario",
]

_CORR_RANGES = {"independent": None, "negative": (-0.9, -0.5), "positive": (0.5, 0.9)}


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian cost-noise structure for misspecified data."""

    mode: str = "independent"
    variance_range: tuple[float, float] = (9.0, 25.0)
    corr_range: tuple[float, float] | None = None
    samples: int = 100
    weight: float = 1.0

    def __post_init__(self):
        if self.mode not in _CORR_RANGES:
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.samples < 1:
            raise ValueError("need at least one sample")
        if self.corr_range is None:
            object.__setattr__(self, "corr_range", _CORR_RANGES[self.mode])


@dataclass(frozen=True)
class MdmSpec:
    """Parametric marginal structure for exactly-specified data."""

    marginal: str = "exponential"  # or "uniform"
    rate_range: tuple[float, float] = (1.0, 2.0)
    a_range: tuple[float, float] = (1.0, 2.0)
    b_range: tuple[float, float] = (5.0, 10.0)
    cost_range: tuple[float, float] = (1.0, 7.0)
    key_var: str | None = None
    key_cost: float | None = None
    weight: float = 1.0

    def __post_init__(self):
        if self.marginal not in ("exponential", "uniform"):
            raise ValueError(f"unknown marginal family {self.marginal!r}")
        if self.rate_range[0] <= 0:
            raise ValueError("rates must be positive")
        if self.a_range[1] >= self.b_range[0] and self.a_range[1] >= self.b_range[1]:
            raise ValueError("uniform support needs a < b")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_random_dag(
    n_nodes: int,
    seed,
    force_edges: Sequence[tuple[int, int]] = (),
) -> Dag:
    """Random DAG on nodes 0..n-1 with a guaranteed source-to-sink path.

    A random increasing backbone path is included first, then every
    forward pair enters independently with one inclusion probability
    drawn from [0.4, 0.6]; non-connected parts are pruned.
    """
    if n_nodes < 2:
        raise ValueError("need at least source and sink")
    rng = _rng(seed)
    inner = np.arange(1, n_nodes - 1)
    on_path = inner[rng.random(inner.size) < 0.5]
    backbone = [0, *on_path.tolist(), n_nodes - 1]
    edges = set(zip(backbone, backbone[1:]))
    p = rng.uniform(0.4, 0.6)
    for t in range(n_nodes - 1):
        for h in range(t + 1, n_nodes):
            if rng.random() < p:
                edges.add((t, h))
    edges.update((int(t), int(h)) for t, h in force_edges)
    return Dag(n_nodes, tuple(sorted(edges)))


def gen_random_bipartite(
    sides: tuple[int, int] = (4, 6),
    seed=None,
    max_redraws: int = 100,
    require_saturating: bool = True,
) -> BipartiteGraph:
    """Random bipartite graph with edge probability drawn from [0.4, 0.6].

    Redraws until every node has degree >= 1 (and, by default, until a
    matching saturating the smaller side exists, so instance systems are
    feasible).  Raises after ``max_redraws`` attempts.
    """
    rng = _rng(seed)
    nl, nr = sides
    for _ in range(max_redraws):
        p = rng.uniform(0.4, 0.6)
        mask = rng.random((nl, nr)) < p
        if not (mask.any(axis=1).all() and mask.any(axis=0).all()):
            continue
        g = BipartiteGraph(nl, nr, tuple((i, j) for i in range(nl) for j in range(nr) if mask[i, j]))
        if not require_saturating or _has_saturating_matching(g):
            return g
    raise RuntimeError(f"no usable bipartite graph in {max_redraws} redraws")


def _has_saturating_matching(g: BipartiteGraph) -> bool:
    small, large = (0, 1) if g.n_left <= g.n_right else (1, 0)
    adj: dict[int, list[int]] = {}
    for i, j in g.edges:
        a, bnode = (i, j) if small == 0 else (j, i)
        adj.setdefault(a, []).append(bnode)
    match: dict[int, int] = {}

    def augment(u, seen):
        for v in adj.get(u, ()):
            if v in seen:
                continue
            seen.add(v)
            if v not in match or augment(match[v], seen):
                match[v] = u
                return True
        return False

    n_small = g.n_left if small == 0 else g.n_right
    return all(augment(u, set()) for u in range(n_small))


# -- Gaussian (misspecified) data -------------------------------------------


def _edge_columns(family: PolytopeFamily) -> list[int]:
    return [j for j, lab in enumerate(family.var_labels) if not lab.startswith("slack:")]


def _psd_covariance(n_edges: int, spec: NoiseSpec, rng) -> tuple[np.ndarray, float]:
    """Covariance from sampled pairwise correlations, eigenvalue-clipped PSD."""
    sig = np.sqrt(rng.uniform(*spec.variance_range, size=n_edges))
    if spec.mode == "independent" or n_edges == 1:
        return np.diag(sig * sig), 0.0
    lo, hi = spec.corr_range
    C = np.eye(n_edges)
    iu = np.triu_indices(n_edges, 1)
    draws = rng.uniform(lo, hi, size=iu[0].size)
    C[iu] = draws
    C[(iu[1], iu[0])] = draws
    w, V = np.linalg.eigh(C)
    clip = float(np.clip(1e-10 - w, 0.0, None).max())
    w = np.maximum(w, 1e-10)
    Cp = (V * w) @ V.T
    dd = np.sqrt(np.diag(Cp))
    Cp = Cp / np.outer(dd, dd)
    return np.outer(sig, sig) * Cp, clip


def _parse_flow_edges(family: PolytopeFamily) -> list[tuple[int, int]]:
    out = []
    for lab in family.var_labels:
        t, h = lab.split("->")
        out.append((int(t), int(h)))
    return out


def _path_dp(edges, eidx, weights, source, sink, longest: bool):
    """Optimal s-t path over given edges; returns indicator over eidx order."""
    adj: dict[int, list[tuple[int, int]]] = {}
    for pos, e in enumerate(eidx):
        t, h = edges[e]
        adj.setdefault(t, []).append((h, pos))
    order = sorted({n for e in eidx for n in edges[e]})
    best = {source: 0.0}
    back: dict[int, tuple[int, int]] = {}
    sgn = 1.0 if longest else -1.0
    for v in order:
        if v not in best:
            continue
        for h, pos in adj.get(v, ()):
            cand = best[v] + sgn * weights[pos]
            if h not in best or cand > best[h] + 0.0:
                best[h] = cand
                back[h] = (v, pos)
    x = np.zeros(len(eidx))
    v = sink
    while v != source:
        v, pos = back[v]
        x[pos] = 1.0
    return x


def _parse_assign_vars(family, pattern):
    nl = int(family.notes["n_left"])
    edges, slacks = [], []
    for pos, j in enumerate(pattern.active):
        lab = family.var_labels[j]
        if lab.startswith("slack:"):
            side, num = lab[6], int(lab[7:])
            slacks.append((pos, side, num))
        else:
            i, jj = lab[1:].split("~R")
            edges.append((pos, int(i), int(jj)))
    return nl, edges, slacks


def _assignment_sample(family, pattern, values) -> np.ndarray:
    """Max-value assignment saturating the smaller retained side."""
    nl, edges, slacks = _parse_assign_vars(family, pattern)
    lefts = sorted({i for _, i, _ in edges})
    rights = sorted({j for _, _, j in edges})
    li = {v: t for t, v in enumerate(lefts)}
    ri = {v: t for t, v in enumerate(rights)}
    BIG = 1e9
    cost = np.full((len(lefts), len(rights)), BIG)
    for pos, i, j in edges:
        cost[li[i], ri[j]] = -values[pos]
    if len(lefts) > len(rights):
        rows, cols = linear_sum_assignment(cost.T)
        chosen = {(lefts[c], rights[r]) for r, c in zip(rows, cols)}
    else:
        rows, cols = linear_sum_assignment(cost)
        chosen = {(lefts[r], rights[c]) for r, c in zip(rows, cols)}
    x = np.zeros(len(pattern))
    matched_l: set[int] = set()
    matched_r: set[int] = set()
    for pos, i, j in edges:
        if (i, j) in chosen:
            x[pos] = 1.0
            matched_l.add(i)
            matched_r.add(j)
    for pos, side, num in slacks:
        used = (num in matched_l) if side == "L" else (num in matched_r)
        x[pos] = 0.0 if used else 1.0
    return x


def gen_gaussian_observations(
    family: PolytopeFamily,
    patterns: Sequence[InstancePattern],
    spec: NoiseSpec,
    sense: str,
    seed,
) -> tuple[Dataset, dict]:
    """Average per-sample optima of noise-perturbed deterministic problems.

    One deterministic cost draw and one covariance are shared by all
    instances; each instance averages ``spec.samples`` solved noise
    realizations.  Returns the dataset plus generation info (PSD repair
    magnitude), warning when the repair was material.
    """
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    kind = family.notes.get("kind")
    if kind not in ("flow", "assignment"):
        raise ValueError("family must come from a graph adapter")
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    kids = ss.spawn(len(patterns) + 1)
    rng0 = np.random.default_rng(kids[0])
    edge_cols = _edge_columns(family)
    col_pos = {j: t for t, j in enumerate(edge_cols)}
    v = rng0.uniform(1.0, 7.0, size=len(edge_cols))
    cov, clip = _psd_covariance(len(edge_cols), spec, rng0)
    if clip > 1e-6:
        warnings.warn(f"covariance PSD repair clipped eigenvalues by {clip:.3g}", stacklevel=2)
    w_eig, V = np.linalg.eigh(cov)
    factor = V * np.sqrt(np.maximum(w_eig, 0.0))
    edges = _parse_flow_edges(family) if kind == "flow" else None
    source = int(family.notes.get("source", 0)) if kind == "flow" else None
    sink = int(family.notes.get("sink", 0)) if kind == "flow" else None

    observations = []
    for t, pat in enumerate(patterns):
        rng = np.random.default_rng(kids[t + 1])
        act_edges = [j for j in pat.active if j in col_pos]
        rows = [col_pos[j] for j in act_edges]
        mean = v[rows]
        sub_factor = factor[rows]
        acc = np.zeros(len(pat))
        epos = [pat.position(j) for j in act_edges]
        for _ in range(spec.samples):
            noise = sub_factor @ rng.standard_normal(factor.shape[1])
            vals = mean + noise
            if kind == "flow":
                x_edges = _path_dp(edges, act_edges, vals, source, sink, longest=(sense == "max"))
                x = np.zeros(len(pat))
                x[epos] = x_edges
            else:
                full_vals = np.zeros(len(pat))
                full_vals[epos] = vals if sense == "max" else -vals
                x = _assignment_sample(family, pat, full_vals)
            acc += x
        observations.append(Observation(pat, acc / spec.samples, spec.weight))
    return Dataset(family, tuple(observations)), {"psd_clip": clip, "costs": v}


# -- parametric (exactly specified) data -------------------------------------


@dataclass(frozen=True)
class TruthOracle:
    """Ground-truth parametric model behind a generated dataset.

    Produces true selection probabilities for any pattern of the family
    and the true welfare value for assignment instances.
    """

    family: PolytopeFamily
    problem: str
    marginal: str
    nu: np.ndarray
    rates: np.ndarray | None
    unif_a: np.ndarray | None
    unif_b: np.ndarray | None
    key_var: int | None
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)

    def selection(self, pattern: InstancePattern) -> np.ndarray:
        return _solve_parametric(self, pattern)

    def welfare_coeffs(self, pattern: InstancePattern) -> tuple[np.ndarray, np.ndarray]:
        lin = np.zeros(len(pattern))
        quad = np.zeros(len(pattern))
        for pos, j in enumerate(pattern.active):
            if self.family.var_labels[j].startswith("slack:"):
                continue
            lin[pos] = self.nu[j] + self.unif_b[j]
            quad[pos] = -(self.unif_b[j] - self.unif_a[j]) / 2.0
        return lin, quad

    def welfare(self, pattern: InstancePattern, x: np.ndarray | None = None) -> float:
        if x is None:
            x = self.selection(pattern)
        lin, quad = self.welfare_coeffs(pattern)
        return float(lin @ x + quad @ (x * x))


def _mdm_gradient(oracle: TruthOracle, pattern: InstancePattern):
    """Gradient of the minimized (negated-utility) objective on a pattern."""
    act = list(pattern.active)
    is_edge = np.array(
        [not oracle.family.var_labels[j].startswith("slack:") for j in act]
    )
    nu = oracle.nu[act]
    if oracle.marginal == "exponential":
        inv_rate = 1.0 / oracle.rates[act]
        if oracle.problem == "longest_path":

            def grad(x):
                xc = np.clip(x, 1e-12, 1.0 - 1e-12)
                g = -(nu + inv_rate) + inv_rate * (np.log(xc) + 1.0)
                return np.where(is_edge, g, 0.0)

        elif oracle.problem == "shortest_path":

            def grad(x):
                xc = np.clip(x, 1e-12, 1.0 - 1e-12)
                g = (nu + inv_rate) - inv_rate * (np.log(1.0 - xc) + 1.0)
                return np.where(is_edge, g, 0.0)

        else:
            raise ValueError("exponential marginals pair with path problems")
    else:
        if oracle.problem != "assignment":
            raise ValueError("uniform marginals pair with the assignment problem")
        a, bu = oracle.unif_a[act], oracle.unif_b[act]

        def grad(x):
            g = -(nu + bu) + (bu - a) * x
            return np.where(is_edge, g, 0.0)

    return grad


def _entropy_flow_longest(
    edges, act, nu, w, source, sink, tol_resid: float = 1e-13
) -> np.ndarray:
    """Exact solve of the exponential-marginal longest-path program.

    On unit s-t DAG flows the unit box is implied, so stationarity gives
    x_e = exp((nu_e - (y_tail - y_head)) / w_e) with node potentials y
    solving the conservation system; damped Newton on y converges to
    machine precision (the Jacobian is a weighted graph Laplacian).
    """
    nodes = sorted({v for e in act for v in edges[e]})
    rows = [v for v in nodes if v != sink]
    ridx = {v: i for i, v in enumerate(rows)}
    nr = len(rows)
    tails = np.array([edges[e][0] for e in act])
    heads = np.array([edges[e][1] for e in act])
    t_row = np.array([ridx.get(t, -1) for t in tails])
    h_row = np.array([ridx.get(h, -1) for h in heads])
    bvec = np.zeros(nr)
    bvec[ridx[source]] = 1.0

    def x_of(y: np.ndarray) -> np.ndarray:
        yt = np.where(t_row >= 0, y[t_row], 0.0)
        yh = np.where(h_row >= 0, y[h_row], 0.0)
        expo = np.clip((nu - (yt - yh)) / w, -700.0, 40.0)
        return np.exp(expo)

    def resid(x: np.ndarray) -> np.ndarray:
        F = -bvec.copy()
        np.add.at(F, t_row[t_row >= 0], x[t_row >= 0])
        np.subtract.at(F, h_row[h_row >= 0], x[h_row >= 0])
        return F

    y = np.zeros(nr)
    x = x_of(y)
    F = resid(x)
    for _ in range(200):
        err = np.abs(F).max()
        if err <= tol_resid:
            break
        D = x / w
        J = np.zeros((nr, nr))
        for pos in range(len(act)):
            tr, hr = t_row[pos], h_row[pos]
            if tr >= 0:
                J[tr, tr] += D[pos]
            if hr >= 0:
                J[hr, hr] += D[pos]
            if tr >= 0 and hr >= 0:
                J[tr, hr] -= D[pos]
                J[hr, tr] -= D[pos]
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, F, rcond=None)[0]
        gamma = 1.0
        for _ in range(60):
            y_new = y + gamma * step
            x_new = x_of(y_new)
            F_new = resid(x_new)
            if np.abs(F_new).max() < err:
                break
            gamma *= 0.5
        else:
            break
        y, x, F = y_new, x_new, F_new
    if np.abs(F).max() > 1e-9:
        raise RuntimeError(f"entropy flow Newton stalled at residual {np.abs(F).max():.3g}")
    return np.clip(x, 0.0, 1.0)


def _solve_parametric(oracle: TruthOracle, pattern: InstancePattern) -> np.ndarray:
    fam = oracle.family
    if oracle.problem == "longest_path" and fam.notes.get("kind") == "flow":
        edges = _parse_flow_edges(fam)
        act = list(pattern.active)
        return _entropy_flow_longest(
            edges,
            act,
            oracle.nu[act],
            1.0 / oracle.rates[act],
            int(fam.notes["source"]),
            int(fam.notes["sink"]),
        )
    grad = _mdm_gradient(oracle, pattern)
    if fam.notes.get("kind") == "flow":
        edges = _parse_flow_edges(fam)
        source, sink = int(fam.notes["source"]), int(fam.notes["sink"])
        act = list(pattern.active)

        def lmo(c):
            return _path_dp(edges, act, -c, source, sink, longest=True)

    else:
        solver = SimplexSolver(instance_lp(fam, pattern), oracle.tol)

        def lmo(c):
            res = solver.resolve_objective(c)
            if res.status is not Status.OPTIMAL:
                raise RuntimeError(f"vertex oracle failed: {res.status.value}")
            return res.x.copy()

    x0 = interior_start(fam, pattern, oracle.tol)
    # aim well below the contractual gap; accept a stall that still meets it
    res = away_frank_wolfe(
        grad,
        lmo,
        x0,
        tol=min(oracle.tol.fw_gap, 1e-9),
        max_iter=oracle.tol.fw_max_iter,
        boundary_clip=1e-12,
        config=oracle.tol,
    )
    if not res.converged and res.gap > oracle.tol.fw_gap:
        raise RuntimeError(f"parametric solve stalled at gap {res.gap:.3g}")
    return np.clip(res.x, 0.0, 1.0)


def gen_mdm_observations(
    family: PolytopeFamily,
    patterns: Sequence[InstancePattern],
    problem: str,
    spec: MdmSpec,
    seed,
    verify: bool = False,
    tol: Tolerances = DEFAULT_TOL,
) -> tuple[Dataset, TruthOracle]:
    """Exactly-specified selection data from one parametric model.

    Draws deterministic utilities and marginal parameters once, solves
    the induced convex program per pattern, and returns the data with a
    truth oracle.  ``verify=True`` asserts the generated data passes the
    consistency check (it must, up to numerics).
    """
    if problem not in ("longest_path", "shortest_path", "assignment"):
        raise ValueError(f"unknown problem {problem!r}")
    rng = _rng(seed)
    n = family.n
    nu = rng.uniform(*spec.cost_range, size=n)
    rates = unif_a = unif_b = None
    if spec.marginal == "exponential":
        rates = rng.uniform(*spec.rate_range, size=n)
    else:
        unif_a = rng.uniform(*spec.a_range, size=n)
        unif_b = rng.uniform(*spec.b_range, size=n)
    key = None
    if spec.key_var is not None:
        key = family.label_index(spec.key_var)
        nu = nu.copy()
        nu[key] = spec.key_cost if spec.key_cost is not None else nu[key]
    for j, lab in enumerate(family.var_labels):
        if lab.startswith("slack:"):
            nu[j] = 0.0
    oracle = TruthOracle(
        family=family,
        problem=problem,
        marginal=spec.marginal,
        nu=nu,
        rates=rates,
        unif_a=unif_a,
        unif_b=unif_b,
        key_var=key,
        tol=tol,
    )
    obs = tuple(
        Observation(pat, oracle.selection(pat), spec.weight) for pat in patterns
    )
    data = Dataset(family, obs)
    if verify:
        cert = check_representability(data, tol)
        if not cert.representable:
            raise AssertionError(
                f"parametric data failed the consistency check (margin {cert.epsilon:.3g})"
            )
    return data, oracle


# -- experiment scenarios -----------------------------------------------------


@dataclass(frozen=True)
class PathScenario:
    master: Dag
    family: PolytopeFamily
    patterns: tuple[InstancePattern, ...]
    key_var: int


@dataclass(frozen=True)
class AssignmentScenario:
    master: BipartiteGraph
    family: PolytopeFamily
    patterns: tuple[InstancePattern, ...]
    removals: tuple[tuple[frozenset, frozenset], ...]


def path_scenario(
    n_nodes: int,
    K: int,
    seed,
    force_key_edge: bool = False,
) -> PathScenario:
    """K random DAG instances as patterns over the complete-DAG master."""
    master = Dag(
        n_nodes, tuple((t, h) for t in range(n_nodes) for h in range(t + 1, n_nodes))
    )
    family = flow_polytope(master)
    label_idx = {lab: i for i, lab in enumerate(family.var_labels)}
    key_edge = (0, n_nodes - 1)
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    kids = ss.spawn(K)
    pats = []
    for k in range(K):
        g = gen_random_dag(
            n_nodes, np.random.default_rng(kids[k]), force_edges=(key_edge,) if force_key_edge else ()
        )
        pats.append(
            InstancePattern.from_indices(label_idx[edge_label(t, h)] for t, h in g.edges)
        )
    return PathScenario(
        master=master,
        family=family,
        patterns=tuple(pats),
        key_var=label_idx[edge_label(*key_edge)],
    )


def assignment_scenario(
    sides: tuple[int, int],
    K: int,
    seed,
    protocol: str = "edges",
) -> AssignmentScenario:
    """K assignment instances over the complete bipartite master.

    ``protocol='edges'`` samples edge subsets (misspecified study);
    ``'nodes'`` removes nodes keeping the retained sides balanced
    (parametric study; the balanced program then applies exactly).
    """
    nl, nr = sides
    master = BipartiteGraph.complete(nl, nr)
    family = assignment_polytope(master, slack_mode="all")
    label_idx = {lab: i for i, lab in enumerate(family.var_labels)}
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    kids = ss.spawn(K)
    pats = []
    removals = []
    for k in range(K):
        rng = np.random.default_rng(kids[k])
        if protocol == "edges":
            g = gen_random_bipartite(sides, rng)
            kept_edges = set(g.edges)
            pat_edges = [label_idx[lab] for lab in g.edge_labels()]
            spare = [label_idx[f"slack:R{j}"] for j in range(nr)] if nr > nl else []
            spare += [label_idx[f"slack:L{i}"] for i in range(nl)] if nl > nr else []
            pats.append(InstancePattern.from_indices(pat_edges + spare))
            removals.append((frozenset(), frozenset()))
        elif protocol == "nodes":
            keep = int(rng.integers(2, min(nl, nr) + 1))
            kl = frozenset(rng.choice(nl, size=keep, replace=False).tolist())
            kr = frozenset(rng.choice(nr, size=keep, replace=False).tolist())
            pats.append(assignment_pattern(family, set(kl), set(kr)))
            removals.append((kl, kr))
        else:
            raise ValueError("protocol must be 'edges' or 'nodes'")
    return AssignmentScenario(
        master=master, family=family, patterns=tuple(pats), removals=tuple(removals)
    )

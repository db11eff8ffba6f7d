"""Central numeric tolerances shared by every solver and workflow step."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """All numeric knobs in one record.

    Attributes
    ----------
    feas : float
        Primal feasibility residual accepted for an optimal LP solution,
        and the default dataset feasibility tolerance.
    duality : float
        Relative primal/dual objective agreement required of optimal LPs.
    pivot : float
        Magnitude below which a tableau entry is treated as zero in
        pivot selection.
    reduced_cost : float
        Optimality threshold on reduced costs.
    degenerate_steps : int
        Consecutive degenerate pivots tolerated before Bland's rule
        takes over.
    pivot_cap_factor : int
        Pivot limit is ``pivot_cap_factor * (rows + cols)``.
    integrality : float
        Distance from {0, 1} accepted as integral in mixed binary solves.
    mbp_gap : float
        Absolute optimality gap at which branch and bound stops.
    node_cap : int
        Branch-and-bound node limit.
    fw_gap : float
        Frank-Wolfe duality-gap target.
    fw_max_iter : int
        Frank-Wolfe iteration cap.
    prob_tie : float
        Tolerance for declaring two observed probabilities tied.
    epsilon_margin : float
        Margin above which a consistency-certificate slack counts as
        strictly positive.
    loss_zero : float
        Fit loss below which data counts as exactly representable.
    pwl_segments : int
        Segments used when quadratic objective terms are reduced to
        piecewise-linear form.
    """

    feas: float = 1e-7
    duality: float = 1e-7
    pivot: float = 1e-9
    reduced_cost: float = 1e-9
    degenerate_steps: int = 100
    pivot_cap_factor: int = 50
    integrality: float = 1e-6
    mbp_gap: float = 1e-6
    node_cap: int = 10**6
    fw_gap: float = 1e-7
    fw_max_iter: int = 20000
    prob_tie: float = 1e-9
    epsilon_margin: float = 1e-7
    loss_zero: float = 1e-6
    pwl_segments: int = 16

    def with_(self, **kwargs) -> "Tolerances":
        return replace(self, **kwargs)


DEFAULT_TOL = Tolerances()

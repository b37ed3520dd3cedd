"""Tunable tolerances and budgets, frozen per run.

Every numeric knob the pipelines consult lives here so a report can carry a
hash of the exact configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Config:
    # finite differences
    fd_step_factor: float = 1e-5

    # total-variation refinement: dyadic chord sums until relative gain
    # drops below tol, between min and max doubling levels
    variation_rel_tol: float = 1e-6
    variation_min_level: int = 6
    variation_max_level: int = 22

    # endpoint-singular curves: dyadic shells toward the bad endpoint
    shell_cap: int = 50

    # image-null verdict: defect <= null_tol * total is null,
    # defect >= 10 * null_tol * total is not_null, in between inconclusive
    null_tol: float = 1e-4

    # per-component sample banks for sup/curvature queries
    bank_size: int = 16384
    sup_min_samples: int = 64
    sup_blowup: float = 1e12

    # greedy partitions
    cell_budget: int = 4096
    cell_budget_max: int = 100000
    cell_match_rtol: float = 1e-6
    endpoint_snap: float = 1e-9

    # sqrt-variation series verdicts: growth of partial sums across the two
    # final budget doublings, and the fitted rank-decay exponent
    sum_growth_tol: float = 0.05
    sum_exponent_diverge: float = 0.98
    sum_exponent_converge: float = 1.02

    # singular-set detection and the verdict pipeline
    singular_grid: int = 2048
    osc_rtol: float = 0.25
    decide_max_components: int = 512
    convergence_tail_frac: float = 1e-3
    monotone_window_min: int = 12

    # reparametrization verification grids and the derivative-band check
    smooth_grids: tuple = (2000, 4000, 8000)
    smooth_band_lo: float = 0.8
    smooth_band_hi: float = 1.25

    seed: int = 0

    def with_overrides(self, **kw) -> "Config":
        return replace(self, **kw)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


DEFAULT = Config()

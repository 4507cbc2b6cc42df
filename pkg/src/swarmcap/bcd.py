"""Alternating direction/range optimisation of a swarm formation."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constraints import FormationConstraints, ValidationReport, validate_formation
from .errors import FeasibilityError, InvalidArgumentError
from .geometry import ArrayGeometry
from .greedy import DEFAULT_OVERSAMPLING, DirectionCodebook, build_codebook, greedy_directions_sic, greedy_directions_tin
from .metrics import SwarmFormation, channel_matrix, sic_sum_capacity, tin_sum_rate
from .orthogonal import STRICT, AngularSector, FloorMode
from .sca import (
    RangeSubproblemSIC,
    RangeSubproblemTIN,
    SCASettings,
    solve_range_sic,
    solve_range_tin,
    staggered_ranges,
)

logger = logging.getLogger(__name__)

__all__ = [
    "BcdSettings",
    "OptimizationTrace",
    "optimize_formation",
    "formation_objective",
    "validate_formation",
    "ValidationReport",
]

OBJECTIVES = ("SIC", "TIN")


@dataclass
class BcdSettings:
    max_rounds: int = 20
    rel_tol: float = 1e-4
    objective: str = "SIC"
    oversampling: int = DEFAULT_OVERSAMPLING
    floor_mode: FloorMode = STRICT
    sca: SCASettings = field(default_factory=SCASettings)

    def __post_init__(self):
        self.objective = str(self.objective).upper()
        if self.objective not in OBJECTIVES:
            raise InvalidArgumentError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.max_rounds < 1 or not self.rel_tol > 0:
            raise InvalidArgumentError("need max_rounds >= 1 and rel_tol > 0")


@dataclass
class OptimizationTrace:
    """Objective after the seed (index 0) and after every round."""

    objectives: list = field(default_factory=list)
    formations: list = field(default_factory=list)
    reason: str = ""

    @property
    def rounds(self) -> int:
        return max(0, len(self.objectives) - 1)

    @property
    def final(self) -> float:
        return self.objectives[-1]

    def is_monotone(self, slack: float = 1e-9) -> bool:
        v = np.asarray(self.objectives)
        return bool(np.all(np.diff(v) >= -slack))


def formation_objective(g: ArrayGeometry, f: SwarmFormation, r0: float, objective: str = "SIC") -> float:
    H = channel_matrix(g, f, r0)
    if objective.upper() == "SIC":
        return sic_sum_capacity(H, f.ref_snr)
    return tin_sum_rate(H, f.ref_snr)


def _greedy(g, cb, ranges, ref_snr, r0, cons, objective):
    b = ref_snr * r0**2 / ranges**2
    fn = greedy_directions_sic if objective == "SIC" else greedy_directions_tin
    res = fn(g, cb, ranges, b, cons.d_min, cons.d_max)
    return SwarmFormation.from_arrays(ranges, res.thetas, res.phis, ref_snr)


def _ranges(g, f, r0, cons, settings: BcdSettings):
    if settings.objective == "SIC":
        sub = RangeSubproblemSIC.from_formation(g, f, r0, cons)
        res = solve_range_sic(sub, settings.sca)
    else:
        sub = RangeSubproblemTIN.from_formation(g, f, r0, cons)
        res = solve_range_tin(sub, settings.sca)
    return SwarmFormation.from_arrays(res.ranges, f.thetas, f.phis, f.ref_snr)


def _raise_on_violation(report: ValidationReport, what: str):
    bad = report.failures()
    if bad:
        fam = ",".join(c.name for c in bad)
        raise FeasibilityError(f"{what} violates {fam}:\n{report}", family=fam)


def optimize_formation(
    g: ArrayGeometry,
    sector: AngularSector,
    K: int,
    constraints: FormationConstraints,
    ref_snr,
    r0: float,
    settings: Optional[BcdSettings] = None,
    initial: Optional[SwarmFormation] = None,
    codebook: Optional[DirectionCodebook] = None,
):
    """Block coordinate ascent over directions (greedy) and ranges (SCA).

    The seed places users at staggered ranges (or takes ``initial``) and
    assigns directions greedily; each round then re-optimises ranges for the
    current directions and directions for the new ranges. A round's result
    replaces the incumbent only if it is feasible and not worse, so the
    trace is nondecreasing.

    Returns ``(formation, trace)``.
    """
    settings = settings or BcdSettings()
    if K < 1:
        raise InvalidArgumentError("K must be at least 1")
    cons = dataclasses.replace(constraints, sector=sector)
    snr = np.array(np.broadcast_to(np.asarray(ref_snr, dtype=float), (K,)))
    cb = codebook if codebook is not None else build_codebook(g, sector, settings.oversampling, settings.floor_mode)
    obj = settings.objective

    if initial is not None:
        if len(initial) != K:
            raise InvalidArgumentError("initial formation has the wrong number of terminals")
        best = SwarmFormation(initial.placements, snr)
    else:
        seed_r = staggered_ranges(K, cons.r_min, cons.r_max, cons.d_min)
        best = _greedy(g, cb, seed_r, snr, r0, cons, obj)
    _raise_on_violation(validate_formation(best, cons), "seed formation")
    best_val = formation_objective(g, best, r0, obj)
    trace = OptimizationTrace([best_val], [best])

    for rnd in range(1, settings.max_rounds + 1):
        cand = _ranges(g, best, r0, cons, settings)
        cand_val = formation_objective(g, cand, r0, obj)
        if cand_val < best_val:
            cand, cand_val = best, best_val
        try:
            nxt = _greedy(g, cb, cand.ranges, snr, r0, cons, obj)
        except FeasibilityError:
            nxt = None
        if nxt is not None and validate_formation(nxt, cons).passed:
            nxt_val = formation_objective(g, nxt, r0, obj)
            if nxt_val >= cand_val:
                cand, cand_val = nxt, nxt_val
        gain = (cand_val - best_val) / max(abs(best_val), 1e-12)
        best, best_val = cand, cand_val
        trace.objectives.append(best_val)
        trace.formations.append(best)
        logger.debug("round %d: %s objective %.10g", rnd, obj, best_val)
        if gain < settings.rel_tol:
            trace.reason = "converged"
            break
    else:
        trace.reason = "max_rounds"
    return best, trace

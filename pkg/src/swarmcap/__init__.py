"""Capacity characterisation and formation optimisation for swarms of
single-antenna terminals served by a multi-antenna base station over
line-of-sight channels."""

from .bcd import BcdSettings, OptimizationTrace, formation_objective, optimize_formation
from .constraints import FormationConstraints, ValidationReport, validate_formation
from .errors import (
    CharacterizationUnavailableError,
    FeasibilityError,
    InvalidArgumentError,
    SolverError,
    SwarmCapError,
)
from .geometry import (
    ArrayGeometry,
    Direction,
    array_factor,
    beam_pattern,
    beam_pattern_closed_form,
    steering_matrix,
    steering_vector,
)
from .greedy import (
    DirectionCodebook,
    build_codebook,
    feasible_subset,
    greedy_directions_sic,
    greedy_directions_tin,
    rank_one_downdate,
    rank_one_update,
    sinr_reduction,
)
from .metrics import (
    SwarmFormation,
    UavPlacement,
    channel_matrix,
    decoupled_upper_bound,
    interference_matrix,
    lmmse_beamformer,
    orthogonality_defect,
    sic_sum_capacity,
    sinr_tin,
    tin_sum_rate,
)
from .orthogonal import (
    AngularSector,
    FloorMode,
    build_optimal_formation,
    closed_form_capacity,
    n_orthogonal,
    n_ula,
    n_upa_asymptotic,
    n_upa_bounds,
    n_upa_exact,
    orthogonal_set,
)
from .sca import RangeSubproblemSIC, RangeSubproblemTIN, SCASettings, solve_range_sic, solve_range_tin
from .scenario import ScenarioConfig, random_swarm, run_experiment

__version__ = "0.1.0"

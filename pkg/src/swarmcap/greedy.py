"""Codebook-based sequential direction selection with ranges held fixed.

Both variants place users one at a time. The SIC variant maximises the
log-det increment ``log2(1 + b_k a^H J_k a)`` where ``J_k = (I + S_k)^-1``
and ``S_k`` collects the already placed users. The TIN variant maximises the
new user's LMMSE rate plus the (reduced) rates of the incumbents. ``J_k`` is
propagated with rank-one recursions; direct inverses appear only in audits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FeasibilityError, InvalidArgumentError, SolverError
from .geometry import ArrayGeometry, Direction, direction_vectors, steering_matrix
from .orthogonal import STRICT, AngularSector, FloorMode, orthogonal_set

logger = logging.getLogger(__name__)

__all__ = [
    "DirectionCodebook",
    "GreedyResult",
    "build_codebook",
    "feasible_subset",
    "rank_one_update",
    "rank_one_downdate",
    "sinr_reduction",
    "greedy_directions_sic",
    "greedy_directions_tin",
    "DEFAULT_OVERSAMPLING",
]

DEFAULT_OVERSAMPLING = 4
_TIE_RTOL = 1e-9
_RELAX_FACTOR = 1.05
_MAX_RELAX = 3


@dataclass
class DirectionCodebook:
    """Candidate directions ordered by (elevation sine, azimuth sine)."""

    thetas: np.ndarray
    phis: np.ndarray
    oversampling: int = DEFAULT_OVERSAMPLING

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.phis = np.asarray(self.phis, dtype=float)
        if self.thetas.shape != self.phis.shape or self.thetas.ndim != 1:
            raise InvalidArgumentError("codebook angle arrays must be 1-D and equal length")

    def __len__(self):
        return self.thetas.size

    def __getitem__(self, i) -> Direction:
        return Direction(float(self.thetas[i]), float(self.phis[i]))

    @property
    def entries(self) -> list:
        return [self[i] for i in range(len(self))]

    @property
    def unit_vectors(self) -> np.ndarray:
        return direction_vectors(self.thetas, self.phis)

    def steering(self, g: ArrayGeometry) -> np.ndarray:
        return steering_matrix(g, self.thetas, self.phis)

    def subset(self, mask) -> "DirectionCodebook":
        return DirectionCodebook(self.thetas[mask], self.phis[mask], self.oversampling)

    def index_of(self, d: Direction, tol: float = 1e-12) -> int:
        hit = np.flatnonzero(
            (np.abs(np.sin(self.thetas) - math.sin(d.theta)) <= tol)
            & (np.abs(np.sin(self.phis) - math.sin(d.phi)) <= tol)
        )
        if not hit.size:
            raise KeyError(d)
        return int(hit[0])


def _sine_grid(step: float, limit: float) -> np.ndarray:
    n = math.floor(limit / step + 1e-9)
    return step * np.arange(-n, n + 1)


def build_codebook(
    g: ArrayGeometry,
    sector: AngularSector,
    oversampling: int = DEFAULT_OVERSAMPLING,
    mode: FloorMode = STRICT,
) -> DirectionCodebook:
    """Uniform sine-space grid over the sector joined with the orthogonal set.

    Elevation sines step by ``2/(O M_z)``; within each elevation row the
    azimuth coordinate ``cos(theta) sin(phi)`` steps by ``2/(O M_y)``. A ULA
    uses the single row ``theta = 0``. Entries closer than 1e-12 in sine
    space are merged.
    """
    if oversampling < 1:
        raise InvalidArgumentError("oversampling factor must be >= 1")
    st_lim = min(1.0, sector.sin_theta)
    sp_lim = min(1.0, sector.sin_phi)
    if g.kind == "ULA":
        rows = np.array([0.0])
    else:
        rows = _sine_grid(2.0 / (oversampling * g.m_z), st_lim)
    pts = []
    for st in rows:
        ct = math.sqrt(max(0.0, 1.0 - st * st))
        if ct == 0.0:
            pts.append((st, 0.0))
            continue
        us = _sine_grid(2.0 / (oversampling * g.m_y), ct * sp_lim)
        for u in us:
            pts.append((st, max(-sp_lim, min(sp_lim, u / ct))))
    for d in orthogonal_set(g, sector, mode):
        pts.append((math.sin(d.theta), math.sin(d.phi)))
    pts.sort()
    merged = []
    for p in pts:
        if merged and abs(p[0] - merged[-1][0]) <= 1e-12 and abs(p[1] - merged[-1][1]) <= 1e-12:
            continue
        merged.append(p)
    arr = np.array(merged)
    return DirectionCodebook(np.arcsin(arr[:, 0]), np.arcsin(arr[:, 1]), oversampling)


def _dot_bounds(r_k, r_j, d_min, d_max):
    lo = (r_k**2 + r_j**2 - d_max**2) / (2 * r_k * r_j) if math.isfinite(d_max) else -math.inf
    hi = (r_k**2 + r_j**2 - d_min**2) / (2 * r_k * r_j)
    return lo, hi


def _feasible_mask(units, placed, r_k, d_min, d_max, tol=1e-12):
    mask = np.ones(units.shape[0], dtype=bool)
    for r_j, u_j in placed:
        lo, hi = _dot_bounds(r_k, r_j, d_min, d_max)
        dots = units @ u_j
        mask &= (dots >= lo - tol) & (dots <= hi + tol)
    return mask


def feasible_subset(cb: DirectionCodebook, placed, r_k: float, d_min: float = 0.0, d_max: float = math.inf) -> DirectionCodebook:
    """Directions keeping a terminal at range ``r_k`` within ``[d_min, d_max]``
    of every placed ``(range, Direction)`` pair.

    Raises :class:`FeasibilityError` when nothing survives.
    """
    placed_u = [(r, direction_vectors(d.theta, d.phi)) for r, d in placed]
    mask = _feasible_mask(cb.unit_vectors, placed_u, r_k, d_min, d_max)
    if not mask.any():
        raise FeasibilityError("no codebook direction satisfies the separation limits", family="C4/C5")
    return cb.subset(mask)


def rank_one_update(J, a, b):
    """``(J^-1 + b a a^H)^-1`` via Sherman-Morrison."""
    u = J @ a
    return J - (b / (1.0 + b * np.real(np.vdot(a, u)))) * np.outer(u, u.conj())


def rank_one_downdate(J, a, b):
    """``(J^-1 - b a a^H)^-1``; requires ``b a^H J a < 1``."""
    u = J @ a
    s = b * np.real(np.vdot(a, u))
    if s >= 1.0:
        raise InvalidArgumentError("downdate would leave the matrix indefinite")
    return J + (b / (1.0 - s)) * np.outer(u, u.conj())


def sinr_reduction(J_jk, a_j, a, b_j, b_k) -> float:
    """SINR loss of incumbent ``j`` when a user with SNR ``b_k`` arrives on ``a``.

    ``J_jk`` is the inverse interference-plus-noise covariance seen by ``j``
    before the arrival.
    """
    cross = np.vdot(a_j, J_jk @ a)
    quad = np.real(np.vdot(a, J_jk @ a))
    return float(b_j * b_k * abs(cross) ** 2 / (1.0 + b_k * quad))


@dataclass
class GreedyResult:
    """Chosen directions in the caller's user order plus bookkeeping."""

    directions: list
    indices: np.ndarray
    objective: float
    order: np.ndarray
    step_objectives: list = field(default_factory=list)
    d_max_used: list = field(default_factory=list)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([d.theta for d in self.directions])

    @property
    def phis(self) -> np.ndarray:
        return np.array([d.phi for d in self.directions])


def _argmax(values) -> int:
    top = float(np.max(values))
    return int(np.flatnonzero(values >= top - _TIE_RTOL * abs(top))[0])


def _prepare(g, cb, ranges, b):
    ranges = np.atleast_1d(np.asarray(ranges, dtype=float))
    b = np.broadcast_to(np.asarray(b, dtype=float), ranges.shape)
    if ranges.size < 1:
        raise InvalidArgumentError("need at least one user")
    if np.any(b < 0):
        raise InvalidArgumentError("per-user SNRs must be nonnegative")
    if len(cb) == 0:
        raise InvalidArgumentError("empty codebook")
    order = np.argsort(-b, kind="stable")
    return ranges, b, order, cb.steering(g), cb.unit_vectors


def _candidates(units, placed, r_k, d_min, d_max, partial):
    dm = d_max
    for attempt in range(_MAX_RELAX + 1):
        mask = _feasible_mask(units, placed, r_k, d_min, dm)
        if mask.any():
            if attempt:
                logger.warning("relaxed d_max to %.6g m to keep the greedy step feasible", dm)
            return mask, dm
        if not math.isfinite(dm):
            break
        dm *= _RELAX_FACTOR
    family = "C4" if not _feasible_mask(units, placed, r_k, d_min, math.inf).any() else "C5"
    raise FeasibilityError(
        f"empty feasible direction set after {_MAX_RELAX} d_max relaxations",
        family=family,
        partial=partial,
    )


def _audit(J, A_sel, b_sel, tol=1e-8):
    M = J.shape[0]
    X = np.eye(M) + (A_sel * b_sel[None, :]) @ A_sel.conj().T
    err = np.max(np.abs(J @ X - np.eye(M)))
    if err > tol:
        raise SolverError(f"rank-one recursion drifted: max |J(I+S) - I| = {err:.3g}")


def greedy_directions_sic(
    g: ArrayGeometry,
    cb: DirectionCodebook,
    ranges,
    b,
    d_min: float = 0.0,
    d_max: float = math.inf,
    audit_every: int = 8,
) -> GreedyResult:
    """Sequential log-det maximisation over the codebook.

    Users are placed in order of decreasing ``b``; each picks the feasible
    direction maximising ``a^H J_k a`` (lowest index on ties).
    """
    ranges, b, order, A, units = _prepare(g, cb, ranges, b)
    M = A.shape[0]
    J = np.eye(M, dtype=complex)
    chosen = np.full(ranges.size, -1)
    placed, steps, used = [], [], []
    total = 0.0
    for n, k in enumerate(order):
        mask, dm = _candidates(units, placed, ranges[k], d_min, d_max, chosen.copy())
        idx = np.flatnonzero(mask)
        Ac = A[:, idx]
        vals = np.real(np.sum(Ac.conj() * (J @ Ac), axis=0))
        pick = int(idx[_argmax(vals)])
        gain = float(np.real(np.vdot(A[:, pick], J @ A[:, pick])))
        total += math.log2(1.0 + b[k] * gain)
        J = rank_one_update(J, A[:, pick], b[k])
        J = 0.5 * (J + J.conj().T)
        chosen[k] = pick
        placed.append((ranges[k], units[pick]))
        steps.append(total)
        used.append(dm)
        if audit_every and (n + 1) % audit_every == 0:
            sel = order[: n + 1]
            _audit(J, A[:, chosen[sel]], b[sel])
    return GreedyResult([cb[i] for i in chosen], chosen, total, order, steps, used)


def greedy_directions_tin(
    g: ArrayGeometry,
    cb: DirectionCodebook,
    ranges,
    b,
    d_min: float = 0.0,
    d_max: float = math.inf,
    audit_every: int = 8,
) -> GreedyResult:
    """Sequential LMMSE sum-rate maximisation over the codebook.

    Each step scores a candidate by the new user's rate plus every
    incumbent's rate after the SINR reduction the candidate causes.
    """
    ranges, b, order, A, units = _prepare(g, cb, ranges, b)
    M = A.shape[0]
    J = np.eye(M, dtype=complex)
    chosen = np.full(ranges.size, -1)
    placed, steps, used = [], [], []
    incumbents = []
    total = 0.0
    for n, k in enumerate(order):
        mask, dm = _candidates(units, placed, ranges[k], d_min, d_max, chosen.copy())
        idx = np.flatnonzero(mask)
        Ac = A[:, idx]
        q = np.real(np.sum(Ac.conj() * (J @ Ac), axis=0))
        score = np.log2(1.0 + b[k] * q)
        for j in incumbents:
            u = J @ A[:, chosen[j]]
            s = b[j] * float(np.real(np.vdot(A[:, chosen[j]], u)))
            ua = u.conj() @ Ac
            quad = q + b[j] * np.abs(ua) ** 2 / (1.0 - s)
            cross2 = np.abs(ua) ** 2 / (1.0 - s) ** 2
            sinr_prev = s / (1.0 - s)
            sinr = sinr_prev - b[j] * b[k] * cross2 / (1.0 + b[k] * quad)
            score = score + np.log2(1.0 + np.maximum(sinr, 0.0))
        best = _argmax(score)
        pick = int(idx[best])
        total = float(score[best])
        J = rank_one_update(J, A[:, pick], b[k])
        J = 0.5 * (J + J.conj().T)
        chosen[k] = pick
        incumbents.append(k)
        placed.append((ranges[k], units[pick]))
        steps.append(total)
        used.append(dm)
        if audit_every and (n + 1) % audit_every == 0:
            sel = order[: n + 1]
            _audit(J, A[:, chosen[sel]], b[sel])
    return GreedyResult([cb[i] for i in chosen], chosen, total, order, steps, used)

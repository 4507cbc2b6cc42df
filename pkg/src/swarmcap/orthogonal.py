"""Closed-form orthogonal direction sets, their counts and capacities.

Directions whose spatial frequencies differ by nonzero multiples of ``2/M``
(but never by exactly 2) give mutually orthogonal steering vectors. For a
UPA the construction is done ring by ring: orthogonal elevations on the z
axis first, then orthogonal azimuths inside each elevation ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CharacterizationUnavailableError, InvalidArgumentError
from .geometry import ArrayGeometry, Direction
from .metrics import SwarmFormation, UavPlacement

__all__ = [
    "AngularSector",
    "FloorMode",
    "STRICT",
    "OrthogonalSet",
    "UpaCountBounds",
    "ula_orthogonal_set",
    "upa_orthogonal_set",
    "orthogonal_set",
    "n_ula",
    "n_upa_exact",
    "n_orthogonal",
    "n_upa_bounds",
    "n_upa_asymptotic",
    "closed_form_capacity",
    "asymptotic_capacity",
    "build_optimal_formation",
]


@dataclass(frozen=True)
class AngularSector:
    """Half-widths of the allowed elevation/azimuth intervals, in radians."""

    theta_max: float = 0.0
    phi_max: float = math.pi / 2

    def __post_init__(self):
        for name in ("theta_max", "phi_max"):
            v = getattr(self, name)
            if not 0.0 <= v <= math.pi / 2 + 1e-12:
                raise InvalidArgumentError(f"{name}={v} outside [0, pi/2]")

    @classmethod
    def from_degrees(cls, theta_deg: float, phi_deg: float) -> "AngularSector":
        return cls(math.radians(theta_deg), math.radians(phi_deg))

    @property
    def sin_theta(self) -> float:
        return math.sin(self.theta_max)

    @property
    def sin_phi(self) -> float:
        return math.sin(self.phi_max)

    def contains(self, d: Direction, slack: float = 1e-12) -> bool:
        return (
            abs(math.sin(d.theta)) <= self.sin_theta + slack
            and abs(math.sin(d.phi)) <= self.sin_phi + slack
        )


@dataclass(frozen=True)
class FloorMode:
    """How ``floor`` treats arguments that land a hair below an integer.

    ``tolerance == 0`` is plain IEEE flooring (strict); a positive tolerance
    rounds values within ``tolerance`` of the next integer up.
    """

    tolerance: float = 0.0

    def __post_init__(self):
        if self.tolerance < 0:
            raise InvalidArgumentError("floor tolerance must be nonnegative")

    @classmethod
    def strict(cls) -> "FloorMode":
        return cls(0.0)

    @classmethod
    def tolerant(cls, eps: float = 1e-9) -> "FloorMode":
        return cls(eps)

    @classmethod
    def parse(cls, text: str) -> "FloorMode":
        text = str(text).strip().lower()
        if text == "strict":
            return cls.strict()
        if text.startswith("tolerant"):
            _, _, eps = text.partition(":")
            return cls.tolerant(float(eps) if eps else 1e-9)
        raise InvalidArgumentError(f"unknown floor mode {text!r}")

    @property
    def name(self) -> str:
        return "strict" if self.tolerance == 0 else f"tolerant:{self.tolerance:g}"

    def floor(self, x: float) -> int:
        return math.floor(x + self.tolerance)


STRICT = FloorMode.strict()


@dataclass
class OrthogonalSet:
    directions: list
    ring_index: list = field(default_factory=list)
    azimuth_index: list = field(default_factory=list)

    def __len__(self):
        return len(self.directions)

    def __iter__(self):
        return iter(self.directions)

    @property
    def ring_counts(self) -> dict:
        counts = {}
        for l in self.ring_index:
            counts[l] = counts.get(l, 0) + 1
        return counts


def _symmetric_indices(m: int, half_count: int) -> list:
    """Integers 0, +-1, .., +-half_count; for even ``m`` at ``2*half_count >= m``
    the negative endpoint is dropped so no two entries differ by ``m``."""
    half_count = min(half_count, m // 2)
    idx = [0]
    for i in range(1, half_count + 1):
        idx.append(i)
        if not (m % 2 == 0 and 2 * i >= m):
            idx.append(-i)
    return idx


def _ring_cosine(l: int, m_z: int) -> float:
    s = 2.0 * l / m_z
    return math.sqrt(max(0.0, 1.0 - s * s))


def _azimuth_half_count(m_y: int, sin_phi: float, cos_theta: float, mode: FloorMode) -> int:
    return mode.floor(sin_phi * m_y * cos_theta / 2.0)


def ula_orthogonal_set(M: int, sector: AngularSector, mode: FloorMode = STRICT) -> OrthogonalSet:
    """Broadside elevation, azimuth sines ``2l/M`` inside the sector."""
    if M < 1:
        raise InvalidArgumentError("M must be positive")
    limit = min(1.0, sector.sin_phi)
    ls = _symmetric_indices(M, mode.floor(M * sector.sin_phi / 2.0))
    ls.sort(key=lambda l: (abs(l), l < 0))
    dirs = [Direction(0.0, math.asin(max(-limit, min(limit, 2.0 * l / M)))) for l in ls]
    return OrthogonalSet(dirs, [0] * len(dirs), ls)


def n_ula(M: int, sin_phi_max: float, mode: FloorMode = STRICT) -> int:
    """Number of orthogonal ULA directions ``min(M, 2 floor(M s / 2) + 1)``."""
    return min(M, 2 * mode.floor(M * sin_phi_max / 2.0) + 1)


def upa_orthogonal_set(g: ArrayGeometry, sector: AngularSector, mode: FloorMode = STRICT) -> OrthogonalSet:
    """Ring-by-ring enumeration: elevation sines ``2l/M_z``, then azimuth
    sines ``2p / (M_y cos theta_l)`` within each ring.

    A ring at ``cos theta_l == 0`` holds the single azimuth ``phi = 0``.
    """
    m_y, m_z = g.m_y, g.m_z
    ls = _symmetric_indices(m_z, mode.floor(m_z * sector.sin_theta / 2.0))
    phi_limit = min(1.0, sector.sin_phi)
    theta_limit = min(1.0, sector.sin_theta)
    entries = []
    for l in ls:
        st = max(-theta_limit, min(theta_limit, 2.0 * l / m_z))
        ct = _ring_cosine(l, m_z)
        if ct == 0.0:
            ps = [0]
        else:
            ps = _symmetric_indices(m_y, _azimuth_half_count(m_y, sector.sin_phi, ct, mode))
        for p in ps:
            sp = 0.0 if p == 0 else max(-phi_limit, min(phi_limit, 2.0 * p / (m_y * ct)))
            entries.append((l, p, Direction(math.asin(st), math.asin(sp))))
    entries.sort(key=lambda e: (abs(e[0]), abs(e[1]), e[0] < 0, e[1] < 0))
    return OrthogonalSet(
        [e[2] for e in entries], [e[0] for e in entries], [e[1] for e in entries]
    )


def orthogonal_set(g: ArrayGeometry, sector: AngularSector, mode: FloorMode = STRICT) -> OrthogonalSet:
    if g.kind == "ULA":
        return ula_orthogonal_set(g.m_y, sector, mode)
    return upa_orthogonal_set(g, sector, mode)


def n_upa_exact(g: ArrayGeometry, sector: AngularSector, mode: FloorMode = STRICT) -> int:
    """Sum over elevation rings of ``min(M_y, 2 floor(s_phi M_y cos theta_l / 2) + 1)``."""
    n_rings_half = mode.floor(g.m_z * sector.sin_theta / 2.0)
    total = 0
    for l in _symmetric_indices(g.m_z, n_rings_half):
        ct = _ring_cosine(l, g.m_z)
        total += min(g.m_y, 2 * _azimuth_half_count(g.m_y, sector.sin_phi, ct, mode) + 1)
    return total


def n_orthogonal(g: ArrayGeometry, sector: AngularSector, mode: FloorMode = STRICT) -> int:
    if g.kind == "ULA":
        return n_ula(g.m_y, sector.sin_phi, mode)
    return n_upa_exact(g, sector, mode)


@dataclass(frozen=True)
class UpaCountBounds:
    lower: float
    upper: float
    in_regime: bool


def n_upa_bounds(g: ArrayGeometry, sector: AngularSector) -> UpaCountBounds:
    """Sandwich bounds on the UPA orthogonal count.

    The bounds come from an integral approximation that is accurate when
    ``M_z`` is large compared to ``2 / sin(Theta)``; ``in_regime`` flags
    ``M_z >= 8 / sin(Theta)``.
    """
    st, sp = sector.sin_theta, sector.sin_phi
    core = sp * g.m_y * (sector.theta_max + st * math.cos(sector.theta_max)) / 2.0
    lower = g.m_z * (core - st) + 1.0
    upper = min(g.m_z * (core + st) + 1.0, float(g.size))
    in_regime = st > 0 and g.m_z >= 8.0 / st
    return UpaCountBounds(lower, upper, in_regime)


def n_upa_asymptotic(M: int, sector: AngularSector) -> float:
    """Large-array count ``s_phi (Theta + s_theta cos Theta) M / 2``."""
    st = sector.sin_theta
    return sector.sin_phi * (sector.theta_max + st * math.cos(sector.theta_max)) * M / 2.0


def closed_form_capacity(g, sector, K=None, rho=1.0, mode: FloorMode = STRICT) -> float:
    """Optimal sum-capacity ``K log2(1 + rho M)`` for ``K`` up to the
    orthogonal count (``K=None`` uses the count itself)."""
    count = n_orthogonal(g, sector, mode)
    if K is None:
        K = count
    if K < 0:
        raise InvalidArgumentError("K must be nonnegative")
    if K > count:
        raise CharacterizationUnavailableError(
            f"K={K} exceeds the {count} orthogonal directions of {g}; use the optimizers"
        )
    return K * math.log2(1.0 + rho * g.size)


def asymptotic_capacity(M: int, sector: AngularSector, rho: float) -> float:
    return n_upa_asymptotic(M, sector) * math.log2(1.0 + rho * M)


def build_optimal_formation(
    g: ArrayGeometry,
    sector: AngularSector,
    K: int,
    r_min: float,
    mode: FloorMode = STRICT,
    ref_snr=1.0,
) -> SwarmFormation:
    """K terminals at ``r_min`` on the first K orthogonal directions."""
    dirs = orthogonal_set(g, sector, mode).directions
    if K < 1:
        raise InvalidArgumentError("K must be at least 1")
    if K > len(dirs):
        raise CharacterizationUnavailableError(
            f"only {len(dirs)} orthogonal directions available, K={K} requested"
        )
    placements = [UavPlacement(float(r_min), d) for d in dirs[:K]]
    return SwarmFormation(placements, np.broadcast_to(np.asarray(ref_snr, float), (K,)))

"""Array geometry and steering manifolds for half-wavelength ULA/UPA arrays.

The ULA lies along the y axis and the UPA in the y-z plane, both with the
reference element at the origin. Angles are radians; sine-space quantities
are computed on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "ArrayGeometry",
    "Direction",
    "direction_vector",
    "direction_vectors",
    "steering_ula",
    "steering_upa",
    "steering_vector",
    "steering_matrix",
    "array_factor",
    "beam_pattern",
    "beam_pattern_closed_form",
]

_HALF_PI = math.pi / 2
_ANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class ArrayGeometry:
    """``m_y`` elements along y times ``m_z`` along z (``m_z == 1`` is a ULA)."""

    m_y: int
    m_z: int = 1

    def __post_init__(self):
        if int(self.m_y) != self.m_y or int(self.m_z) != self.m_z:
            raise InvalidArgumentError("element counts must be integers")
        if self.m_y < 1 or self.m_z < 1:
            raise InvalidArgumentError(
                f"element counts must be positive, got {self.m_y}x{self.m_z}"
            )

    @classmethod
    def ula(cls, m: int) -> "ArrayGeometry":
        return cls(m_y=m, m_z=1)

    @classmethod
    def upa(cls, m_y: int, m_z: int) -> "ArrayGeometry":
        return cls(m_y=m_y, m_z=m_z)

    @property
    def kind(self) -> str:
        return "ULA" if self.m_z == 1 else "UPA"

    @property
    def size(self) -> int:
        return self.m_y * self.m_z

    def __str__(self):
        if self.kind == "ULA":
            return f"ULA({self.m_y})"
        return f"UPA({self.m_y}x{self.m_z})"


@dataclass(frozen=True)
class Direction:
    """Elevation ``theta`` and azimuth ``phi``, both in [-pi/2, pi/2]."""

    theta: float
    phi: float

    def __post_init__(self):
        for name in ("theta", "phi"):
            value = getattr(self, name)
            if not (-_HALF_PI - _ANGLE_SLACK <= value <= _HALF_PI + _ANGLE_SLACK):
                raise InvalidArgumentError(f"{name}={value} outside [-pi/2, pi/2]")

    @classmethod
    def from_sines(cls, sin_theta: float, sin_phi: float) -> "Direction":
        return cls(
            math.asin(min(1.0, max(-1.0, sin_theta))),
            math.asin(min(1.0, max(-1.0, sin_phi))),
        )

    @classmethod
    def from_degrees(cls, theta_deg: float, phi_deg: float) -> "Direction":
        return cls(math.radians(theta_deg), math.radians(phi_deg))


def direction_vector(d: Direction) -> np.ndarray:
    """Unit pointing vector ``[cos t cos p, cos t sin p, sin t]``."""
    ct = math.cos(d.theta)
    return np.array([ct * math.cos(d.phi), ct * math.sin(d.phi), math.sin(d.theta)])


def direction_vectors(thetas, phis) -> np.ndarray:
    """Vectorised :func:`direction_vector`; returns shape ``(n, 3)``."""
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    ct = np.cos(thetas)
    return np.stack([ct * np.cos(phis), ct * np.sin(phis), np.sin(thetas)], axis=-1)


def _progression(m: int, spatial_freq) -> np.ndarray:
    # exp(j*pi*i*u) for i = 0..m-1; u may be an array -> shape (m, n)
    idx = np.arange(m)
    u = np.asarray(spatial_freq, dtype=float)
    return np.exp(1j * np.pi * np.multiply.outer(idx, u))


def steering_ula(m: int, d: Direction) -> np.ndarray:
    """ULA response; only ``sin(phi)`` matters (elevation is taken as zero)."""
    if m < 1:
        raise InvalidArgumentError("ULA needs at least one element")
    return _progression(int(m), math.sin(d.phi))


def steering_upa(g: ArrayGeometry, d: Direction) -> np.ndarray:
    """UPA response ``a_z(theta) kron a_y(theta, phi)`` (z index outer)."""
    if not isinstance(g, ArrayGeometry):
        raise InvalidArgumentError("steering_upa needs an ArrayGeometry")
    a_z = _progression(g.m_z, math.sin(d.theta))
    a_y = _progression(g.m_y, math.cos(d.theta) * math.sin(d.phi))
    return np.kron(a_z, a_y)


def steering_vector(g: ArrayGeometry, d: Direction) -> np.ndarray:
    if g.kind == "ULA":
        return steering_ula(g.m_y, d)
    return steering_upa(g, d)


def steering_matrix(g: ArrayGeometry, thetas, phis) -> np.ndarray:
    """Stack steering vectors column-wise, shape ``(M, n)``.

    Follows the same convention as :func:`steering_vector`: a ULA ignores
    the elevation angles.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    if g.kind == "ULA":
        return _progression(g.m_y, np.sin(phis))
    a_z = _progression(g.m_z, np.sin(thetas))
    a_y = _progression(g.m_y, np.cos(thetas) * np.sin(phis))
    # column-wise Kronecker product, z index outer
    return (a_z[:, None, :] * a_y[None, :, :]).reshape(g.size, -1)


def array_factor(m: int, delta: float) -> float:
    """|sin(pi m delta / 2) / sin(pi delta / 2)|, the M-element array factor.

    Near the removable singularities the explicit geometric sum is used
    instead of the ratio.
    """
    half = math.pi * delta / 2.0
    den = math.sin(half)
    if abs(den) < 1e-8:
        return float(abs(np.sum(np.exp(1j * np.pi * np.arange(m) * delta))))
    return abs(math.sin(m * half) / den)


def beam_pattern(g: ArrayGeometry, d1: Direction, d2: Direction) -> float:
    """|a(d1)^H a(d2)| evaluated by the explicit inner product."""
    a1 = steering_vector(g, d1)
    a2 = steering_vector(g, d2)
    return float(abs(np.vdot(a1, a2)))


def beam_pattern_closed_form(g: ArrayGeometry, d1: Direction, d2: Direction) -> float:
    """Factored array-factor form of :func:`beam_pattern`."""
    if g.kind == "ULA":
        return array_factor(g.m_y, math.sin(d2.phi) - math.sin(d1.phi))
    dz = math.sin(d2.theta) - math.sin(d1.theta)
    dy = math.cos(d2.theta) * math.sin(d2.phi) - math.cos(d1.theta) * math.sin(d1.phi)
    return array_factor(g.m_z, dz) * array_factor(g.m_y, dy)

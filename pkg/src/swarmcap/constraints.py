"""Formation constraint set (range, sector, separation) and its validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .metrics import SwarmFormation, pairwise_distances
from .orthogonal import AngularSector

__all__ = ["FormationConstraints", "ConstraintCheck", "ValidationReport", "validate_formation"]


@dataclass(frozen=True)
class FormationConstraints:
    """Range interval, angular sector and pairwise separation limits (meters)."""

    r_min: float
    r_max: float
    sector: AngularSector = field(default_factory=AngularSector)
    d_min: float = 0.0
    d_max: float = math.inf

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max:
            raise InvalidArgumentError(f"need 0 < r_min <= r_max, got {self.r_min}, {self.r_max}")
        if not 0 <= self.d_min <= self.d_max:
            raise InvalidArgumentError(f"need 0 <= d_min <= d_max, got {self.d_min}, {self.d_max}")

    @property
    def has_separation(self) -> bool:
        return self.d_min > 0 or math.isfinite(self.d_max)


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    worst_slack: float

    def __str__(self):
        flag = "pass" if self.passed else "FAIL"
        return f"{self.name}: {flag} (worst slack {self.worst_slack:.6g})"


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> ConstraintCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        return "\n".join(str(c) for c in self.checks)


def validate_formation(
    f: SwarmFormation, constraints: FormationConstraints, tol: float = 1e-9
) -> ValidationReport:
    """Check C1-C5; slack is positive when satisfied, in the constraint's units.

    C1 and C4/C5 slacks are meters; C2/C3 slacks are radians. Separations are
    measured between Cartesian positions.
    """
    c = constraints
    r = f.ranges
    th = np.abs(f.thetas)
    ph = np.abs(f.phis)
    checks = []
    s1 = float(min(np.min(r - c.r_min), np.min(c.r_max - r)))
    checks.append(ConstraintCheck("C1", s1 >= -tol * max(1.0, c.r_max), s1))
    s2 = float(np.min(c.sector.theta_max - th))
    checks.append(ConstraintCheck("C2", s2 >= -1e-9, s2))
    s3 = float(np.min(c.sector.phi_max - ph))
    checks.append(ConstraintCheck("C3", s3 >= -1e-9, s3))
    _, _, dist = pairwise_distances(f)
    if dist.size:
        s4 = float(np.min(dist) - c.d_min)
        s5 = float(c.d_max - np.max(dist)) if math.isfinite(c.d_max) else math.inf
    else:
        s4 = s5 = math.inf
    scale = max(1.0, c.d_min if math.isfinite(c.d_min) else 1.0)
    checks.append(ConstraintCheck("C4", s4 >= -tol * scale, s4))
    checks.append(ConstraintCheck("C5", s5 >= -tol * max(1.0, c.d_max if math.isfinite(c.d_max) else 1.0), s5))
    return ValidationReport(checks)

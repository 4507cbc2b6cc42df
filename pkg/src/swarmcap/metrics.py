"""LoS channel synthesis and rate/capacity metrics.

Noise power is normalised to one inside the reference SNRs, so every metric
takes linear per-user SNRs ``ref_snr`` measured at the reference range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError
from .geometry import ArrayGeometry, Direction, direction_vectors, steering_matrix

__all__ = [
    "UavPlacement",
    "SwarmFormation",
    "channel_matrix",
    "sic_sum_capacity",
    "lmmse_beamformer",
    "sinr_tin",
    "sinr_with_beamformer",
    "tin_sinrs",
    "tin_sum_rate",
    "decoupled_upper_bound",
    "orthogonality_defect",
    "interference_matrix",
    "pairwise_distances",
]

_LOG2E = 1.0 / math.log(2.0)


@dataclass(frozen=True)
class UavPlacement:
    r: float
    dir: Direction

    def __post_init__(self):
        if not self.r > 0:
            raise InvalidArgumentError(f"range must be positive, got {self.r}")

    @property
    def position(self) -> np.ndarray:
        return self.r * direction_vectors(self.dir.theta, self.dir.phi)


@dataclass
class SwarmFormation:
    """Ordered placements plus linear reference SNRs (one per terminal)."""

    placements: list
    ref_snr: np.ndarray = field(default=None)

    def __post_init__(self):
        self.placements = list(self.placements)
        if not self.placements:
            raise InvalidArgumentError("a formation needs at least one terminal")
        if self.ref_snr is None:
            self.ref_snr = np.ones(len(self.placements))
        snr = np.broadcast_to(np.asarray(self.ref_snr, dtype=float), (len(self.placements),))
        if np.any(snr < 0):
            raise InvalidArgumentError("reference SNRs must be nonnegative")
        self.ref_snr = np.array(snr)

    @classmethod
    def from_arrays(cls, ranges, thetas, phis, ref_snr=1.0) -> "SwarmFormation":
        ranges = np.atleast_1d(np.asarray(ranges, dtype=float))
        thetas = np.broadcast_to(np.asarray(thetas, dtype=float), ranges.shape)
        phis = np.broadcast_to(np.asarray(phis, dtype=float), ranges.shape)
        placements = [
            UavPlacement(float(r), Direction(float(t), float(p)))
            for r, t, p in zip(ranges, thetas, phis)
        ]
        return cls(placements, np.broadcast_to(ref_snr, ranges.shape))

    def __len__(self):
        return len(self.placements)

    @property
    def K(self) -> int:
        return len(self.placements)

    @property
    def ranges(self) -> np.ndarray:
        return np.array([p.r for p in self.placements])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([p.dir.theta for p in self.placements])

    @property
    def phis(self) -> np.ndarray:
        return np.array([p.dir.phi for p in self.placements])

    @property
    def directions(self) -> list:
        return [p.dir for p in self.placements]

    @property
    def unit_vectors(self) -> np.ndarray:
        return direction_vectors(self.thetas, self.phis)

    @property
    def positions(self) -> np.ndarray:
        """Cartesian positions, shape ``(K, 3)``."""
        return self.ranges[:, None] * self.unit_vectors

    def received_snr(self, r0: float) -> np.ndarray:
        """Per-user SNR ``ref_snr * r0**2 / r**2`` before array gain."""
        return self.ref_snr * r0**2 / self.ranges**2

    def permuted(self, order) -> "SwarmFormation":
        order = list(order)
        return SwarmFormation([self.placements[i] for i in order], self.ref_snr[order])


def channel_matrix(g: ArrayGeometry, f: SwarmFormation, r0: float) -> np.ndarray:
    """Channel columns ``(r0 / r_k) a(theta_k, phi_k)``, shape ``(M, K)``."""
    ranges = f.ranges
    if np.any(ranges <= 0):
        raise InvalidArgumentError("ranges must be positive")
    A = steering_matrix(g, f.thetas, f.phis)
    return A * (r0 / ranges)[None, :]


def _logdet_hpd(X) -> float:
    # natural log-determinant of a Hermitian positive definite matrix
    L = linalg.cholesky(X, lower=True, check_finite=False)
    return 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))


def sic_sum_capacity(H, ref_snr) -> float:
    """``log2 det(I + P^1/2 H^H H P^1/2)`` in bits/s/Hz.

    Uses the K x K Gram form when K < M and the M x M covariance otherwise
    (both are equal by Sylvester's identity).
    """
    H = np.asarray(H)
    p = np.broadcast_to(np.asarray(ref_snr, dtype=float), (H.shape[1],))
    M, K = H.shape
    if K < M:
        Hs = H * np.sqrt(p)[None, :]
        X = np.eye(K) + Hs.conj().T @ Hs
    else:
        X = np.eye(M) + (H * p[None, :]) @ H.conj().T
    return _logdet_hpd(X) * _LOG2E


def _interference_plus_noise(H, p, k):
    mask = np.ones(H.shape[1], dtype=bool)
    mask[k] = False
    Hi = H[:, mask]
    return np.eye(H.shape[0]) + (Hi * p[mask][None, :]) @ Hi.conj().T


def _check_user(H, k):
    if not 0 <= k < H.shape[1]:
        raise InvalidArgumentError(f"user index {k} out of range for K={H.shape[1]}")


def lmmse_beamformer(H, ref_snr, k: int) -> np.ndarray:
    """LMMSE receive filter for user ``k`` (the SINR-optimal beamformer)."""
    H = np.asarray(H)
    _check_user(H, k)
    p = np.broadcast_to(np.asarray(ref_snr, dtype=float), (H.shape[1],))
    R = _interference_plus_noise(H, p, k)
    return linalg.solve(R, math.sqrt(p[k]) * H[:, k], assume_a="pos")


def sinr_tin(H, ref_snr, k: int) -> float:
    """Post-LMMSE SINR ``p_k h_k^H (I + sum_{j!=k} p_j h_j h_j^H)^-1 h_k``."""
    H = np.asarray(H)
    _check_user(H, k)
    p = np.broadcast_to(np.asarray(ref_snr, dtype=float), (H.shape[1],))
    R = _interference_plus_noise(H, p, k)
    h = H[:, k]
    x = linalg.solve(R, h, assume_a="pos")
    return max(0.0, float(np.real(p[k] * np.vdot(h, x))))


def sinr_with_beamformer(H, ref_snr, k: int, w) -> float:
    """SINR of user ``k`` for an arbitrary receive vector ``w``."""
    H = np.asarray(H)
    p = np.broadcast_to(np.asarray(ref_snr, dtype=float), (H.shape[1],))
    w = np.asarray(w)
    gains = np.abs(w.conj() @ H) ** 2 * p
    interference = gains.sum() - gains[k]
    return float(gains[k] / (interference + np.real(np.vdot(w, w))))


def tin_sinrs(H, ref_snr) -> np.ndarray:
    H = np.asarray(H)
    return np.array([sinr_tin(H, ref_snr, k) for k in range(H.shape[1])])


def tin_sum_rate(H, ref_snr) -> float:
    """Sum rate with LMMSE receivers and interference treated as noise."""
    return float(np.sum(np.log2(1.0 + tin_sinrs(H, ref_snr))))


def decoupled_upper_bound(f: SwarmFormation, M: int, r0: float) -> float:
    """Interference-free sum rate ``sum log2(1 + p_k M r0^2 / r_k^2)``."""
    return float(np.sum(np.log2(1.0 + f.ref_snr * M * r0**2 / f.ranges**2)))


def orthogonality_defect(H) -> float:
    """Largest normalised cross-correlation between distinct channel columns."""
    H = np.asarray(H)
    if H.shape[1] < 2:
        return 0.0
    norms = np.linalg.norm(H, axis=0)
    C = np.abs(H.conj().T @ H) / np.outer(norms, norms)
    np.fill_diagonal(C, 0.0)
    return float(C.max())


def interference_matrix(g: ArrayGeometry, f: SwarmFormation) -> np.ndarray:
    """Normalised coupling ``|A^H A|^2 / M^2`` of the steering matrix."""
    A = steering_matrix(g, f.thetas, f.phis)
    return np.abs(A.conj().T @ A) ** 2 / g.size**2


def pairwise_distances(f: SwarmFormation):
    """Return ``(i, j, distance)`` arrays over all pairs ``i < j``."""
    q = f.positions
    i, j = np.triu_indices(len(f), k=1)
    return i, j, np.linalg.norm(q[i] - q[j], axis=1)

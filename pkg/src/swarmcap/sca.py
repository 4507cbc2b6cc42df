"""Successive convex approximation over terminal ranges (directions fixed).

Two subproblems are handled:

* SIC: maximise ``log2 det(I + sum_k b_k a_k a_k^H)`` over ranges and
  per-user SNR slacks ``b_k <= p_k r0^2 / r_k^2``.
* TIN: maximise the sum rate for fixed receive beamformers in the variables
  ``x_k = 1 / r_k^2``.

Each outer iteration replaces the nonconvex pieces by first-order global
bounds taken at the current ranges, so every surrogate solution is feasible
for the original problem and the true objective never decreases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .barrier import BarrierSettings, ConstraintBlock, barrier_minimize
from .constraints import FormationConstraints
from .errors import FeasibilityError, SolverError
from .geometry import ArrayGeometry, steering_matrix
from .metrics import SwarmFormation, lmmse_beamformer, sic_sum_capacity

logger = logging.getLogger(__name__)

_LN2 = math.log(2.0)
_LOG2E = 1.0 / _LN2

__all__ = [
    "SCASettings",
    "RangeSubproblemSIC",
    "RangeSubproblemTIN",
    "SicTaylorBounds",
    "TinTaylorBounds",
    "sic_taylor_bounds",
    "tin_taylor_bounds",
    "solve_range_sic",
    "solve_range_tin",
    "RangeResult",
    "tin_coupling",
    "tin_objective",
    "tin_x_constraints",
    "staggered_ranges",
]


@dataclass
class SCASettings:
    max_outer_iters: int = 30
    objective_tol: float = 1e-5
    kernel: BarrierSettings = field(default_factory=BarrierSettings)
    feasibility_slack: float = 1e-9


@dataclass
class RangeResult:
    ranges: np.ndarray
    objective: float
    trace: list
    snr: np.ndarray = None
    iterations: int = 0


def staggered_ranges(K: int, r_min: float, r_max: float, d_min: float) -> np.ndarray:
    """Seed ranges ``r_min + i * max(d_min, 1 m)`` clipped to ``[r_min, r_max]``."""
    step = max(d_min, 1.0)
    return np.clip(r_min + step * np.arange(K), r_min, r_max)


# ---------------------------------------------------------------------------
# shared geometry helpers


def _pairs(K):
    i, j = np.triu_indices(K, k=1)
    return i, j


def _true_sqdist(r, dots, i, j):
    return r[i] ** 2 + r[j] ** 2 - 2.0 * dots[i, j] * r[i] * r[j]


def _check_start(r, dots, cons: FormationConstraints, slack):
    tol_r = slack * max(1.0, cons.r_max)
    if np.any(r < cons.r_min - tol_r) or np.any(r > cons.r_max + tol_r):
        raise FeasibilityError("expansion point violates the range interval", family="C1")
    i, j = _pairs(len(r))
    if not i.size:
        return
    dist = np.sqrt(np.maximum(_true_sqdist(r, dots, i, j), 0.0))
    if cons.d_min > 0 and np.any(dist < cons.d_min * (1 - slack) - slack):
        raise FeasibilityError("expansion point violates collision avoidance", family="C4")
    if math.isfinite(cons.d_max) and np.any(dist > cons.d_max * (1 + slack) + slack):
        raise FeasibilityError("expansion point violates swarm cohesion", family="C5")


def _active_pairs(dots, cons: FormationConstraints):
    """Pairs whose C4/C5 constraints are not implied by the range box alone."""
    i, j = _pairs(dots.shape[0])
    c = dots[i, j]
    lo, hi = cons.r_min, cons.r_max
    c4 = np.zeros(i.size, dtype=bool)
    c5 = np.zeros(i.size, dtype=bool)
    if cons.d_min > 0:
        # r_k^2 + r_j^2 - 2c r_k r_j >= (1 - max(c, 0)) * 2 r_min^2 on the box
        floor_sq = 2.0 * (1.0 - np.maximum(c, 0.0)) * lo**2
        c4 = floor_sq < cons.d_min**2 * (1 + 1e-12)
    if math.isfinite(cons.d_max):
        corners = [(lo, lo), (lo, hi), (hi, lo), (hi, hi)]
        worst = np.max([a * a + b * b - 2 * c * a * b for a, b in corners], axis=0)
        c5 = worst > cons.d_max**2 * (1 - 1e-12)
    return i, j, c, c4, c5


# ---------------------------------------------------------------------------
# SIC


@dataclass
class RangeSubproblemSIC:
    """Range subproblem for SIC capacity with fixed directions."""

    steering: np.ndarray
    unit_vectors: np.ndarray
    ref_snr: np.ndarray
    r0: float
    constraints: FormationConstraints
    ranges: np.ndarray

    @classmethod
    def from_formation(cls, g: ArrayGeometry, f: SwarmFormation, r0, constraints):
        return cls(
            steering_matrix(g, f.thetas, f.phis),
            f.unit_vectors,
            f.ref_snr.copy(),
            float(r0),
            constraints,
            f.ranges.copy(),
        )

    @property
    def dots(self) -> np.ndarray:
        d = self.unit_vectors
        return np.clip(d @ d.T, -1.0, 1.0)

    def objective(self, ranges) -> float:
        """True capacity (bits/s/Hz) at the given ranges."""
        return sic_sum_capacity(self.steering, self.ref_snr * self.r0**2 / np.asarray(ranges) ** 2)


@dataclass(frozen=True)
class SicTaylorBounds:
    """Affine global lower bounds taken at ``r_exp``.

    ``snr(r)`` bounds ``p r0^2 / r^2``; ``sqdist(r)`` bounds the pairwise
    squared distances ``|r_k d_k - r_j d_j|^2`` (matrix form).
    """

    r_exp: np.ndarray
    ref_snr: np.ndarray
    r0: float
    dots: np.ndarray

    def snr(self, r):
        s = self.ref_snr * self.r0**2 / self.r_exp**2
        return s * (3.0 - 2.0 * np.asarray(r) / self.r_exp)

    def sqdist_coefficients(self):
        """``(const, coef_k, coef_j)`` matrices so that the bound reads
        ``const + coef_k r_k + coef_j r_j`` for the pair (k, j)."""
        rl = self.r_exp
        c = self.dots
        base = rl[:, None] ** 2 + rl[None, :] ** 2 - 2 * c * rl[:, None] * rl[None, :]
        ak = 2.0 * (rl[:, None] - rl[None, :] * c)
        aj = 2.0 * (rl[None, :] - rl[:, None] * c)
        const = base - ak * rl[:, None] - aj * rl[None, :]
        return const, ak, aj

    def sqdist(self, r):
        r = np.asarray(r, dtype=float)
        const, ak, aj = self.sqdist_coefficients()
        return const + ak * r[:, None] + aj * r[None, :]


def sic_taylor_bounds(r_exp, ref_snr, r0, dots) -> SicTaylorBounds:
    r_exp = np.asarray(r_exp, dtype=float)
    return SicTaylorBounds(r_exp, np.broadcast_to(np.asarray(ref_snr, float), r_exp.shape), float(r0), np.asarray(dots))


def _logdet_objective(A, K):
    """Negative log2 det(I + A diag(b) A^H) over z = [r, b]."""
    M = A.shape[0]

    def fn(z):
        b = z[K:]
        X = np.eye(M) + (A * b[None, :]) @ A.conj().T
        try:
            c = linalg.cho_factor(X, lower=True, check_finite=False)
        except linalg.LinAlgError:
            return math.inf, np.zeros(2 * K), np.eye(2 * K)
        logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(c[0])))))
        G = A.conj().T @ linalg.cho_solve(c, A, check_finite=False)
        g = np.zeros(2 * K)
        g[K:] = -np.real(np.diag(G)) * _LOG2E
        H = np.zeros((2 * K, 2 * K))
        H[K:, K:] = np.abs(G) ** 2 * _LOG2E
        return -logdet * _LOG2E, g, H

    return fn


def _sic_blocks(sub: RangeSubproblemSIC, bounds: SicTaylorBounds):
    K = len(sub.ranges)
    cons = sub.constraints
    rk = np.arange(K)
    bk = K + rk
    s = sub.ref_snr * sub.r0**2 / bounds.r_exp**2
    blocks = [
        ConstraintBlock.linear(bk[:, None], -np.ones((K, 1)), np.zeros(K), "b>=0"),
        # b_k <= s_k (3 - 2 r_k / r_kl)
        ConstraintBlock.linear(
            np.stack([bk, rk], axis=1),
            np.stack([np.ones(K), 2.0 * s / bounds.r_exp], axis=1),
            3.0 * s,
            "snr-bound",
        ),
        ConstraintBlock.linear(rk[:, None], -np.ones((K, 1)), -np.full(K, cons.r_min), "C1-lo"),
        ConstraintBlock.linear(rk[:, None], np.ones((K, 1)), np.full(K, cons.r_max), "C1-hi"),
    ]
    i, j, c, c4, c5 = _active_pairs(bounds.dots, cons)
    if np.any(c4):
        const, ak, aj = bounds.sqdist_coefficients()
        ii, jj = i[c4], j[c4]
        blocks.append(
            ConstraintBlock.linear(
                np.stack([ii, jj], axis=1),
                np.stack([-ak[ii, jj], -aj[ii, jj]], axis=1),
                const[ii, jj] - cons.d_min**2,
                "C4-surrogate",
            )
        )
    if np.any(c5):
        ii, jj = i[c5], j[c5]
        cc = c[c5]
        dmax2 = cons.d_max**2

        def c5fn(xl, cc=cc):
            a, b = xl[:, 0], xl[:, 1]
            vals = a * a + b * b - 2 * cc * a * b - dmax2
            grads = np.stack([2 * a - 2 * cc * b, 2 * b - 2 * cc * a], axis=1)
            hess = np.empty((len(cc), 2, 2))
            hess[:, 0, 0] = hess[:, 1, 1] = 2.0
            hess[:, 0, 1] = hess[:, 1, 0] = -2.0 * cc
            return vals, grads, hess

        def c5step(xl, dl, cc=cc):
            a, b = xl[:, 0], xl[:, 1]
            da, db = dl[:, 0], dl[:, 1]
            qa = da * da + db * db - 2 * cc * da * db
            qb = 2 * (a * da + b * db - cc * (a * db + b * da))
            qc = a * a + b * b - 2 * cc * a * b - dmax2
            return _first_crossing(qa, qb, qc)

        blocks.append(ConstraintBlock(np.stack([ii, jj], axis=1), c5fn, "C5", c5step))
    return blocks


def _first_crossing(qa, qb, qc) -> float:
    """Smallest positive s with ``qa s^2 + qb s + qc = 0`` over rows (qc < 0)."""
    with np.errstate(all="ignore"):
        disc = np.sqrt(np.maximum(qb * qb - 4 * qa * qc, 0.0))
        quad = (-qb + disc) / (2 * qa)
        lin = np.where(qb > 0, -qc / qb, np.inf)
        roots = np.where(qa > 1e-300, quad, lin)
    roots = roots[np.isfinite(roots) & (roots > 0)]
    return float(roots.min()) if roots.size else np.inf


def _assert_feasible(r, dots, cons, slack, where):
    try:
        _check_start(r, dots, cons, slack)
    except FeasibilityError as exc:
        raise SolverError(f"{where}: surrogate solution left the feasible set ({exc})") from exc


def solve_range_sic(sub: RangeSubproblemSIC, settings: SCASettings = None) -> RangeResult:
    """Maximise SIC capacity over ranges by successive convex approximation.

    Returns the final ranges, the SNR slacks of the last accepted surrogate
    solve, the capacity and the per-iteration capacity trace.
    """
    settings = settings or SCASettings()
    cons = sub.constraints
    dots = sub.dots
    r = np.asarray(sub.ranges, dtype=float).copy()
    _check_start(r, dots, cons, settings.feasibility_slack)
    r = np.clip(r, cons.r_min, cons.r_max)
    K = len(r)
    obj = sub.objective(r)
    trace = [obj]
    snr = sub.ref_snr * sub.r0**2 / r**2
    objective = _logdet_objective(sub.steering, K)
    it = 0
    for it in range(1, settings.max_outer_iters + 1):
        bounds = sic_taylor_bounds(r, sub.ref_snr, sub.r0, dots)
        blocks = _sic_blocks(sub, bounds)
        z0 = np.concatenate([r, 0.5 * bounds.snr(r)])
        try:
            res = barrier_minimize(objective, blocks, z0, settings.kernel)
        except FeasibilityError as exc:
            raise SolverError(f"SIC range surrogate has no interior point: {exc}", trace) from exc
        r_new = np.clip(res.x[:K], cons.r_min, cons.r_max)
        _assert_feasible(r_new, dots, cons, 1e-7, "solve_range_sic")
        obj_new = sub.objective(r_new)
        if obj_new < obj:
            break
        rel = (obj_new - obj) / max(abs(obj), 1e-12)
        r, obj, snr = r_new, obj_new, res.x[K:].copy()
        trace.append(obj)
        if rel < settings.objective_tol:
            break
    return RangeResult(r, obj, trace, snr, it)


# ---------------------------------------------------------------------------
# TIN


def tin_coupling(A, W, ref_snr, r0) -> np.ndarray:
    """``c[k, j] = p_j r0^2 |w_k^H a_j|^2 / |w_k|^2`` for steering ``A`` and
    beamformers ``W`` (columns)."""
    W = np.asarray(W)
    proj = np.abs(W.conj().T @ A) ** 2 / np.sum(np.abs(W) ** 2, axis=0)[:, None]
    return proj * (np.asarray(ref_snr, float) * r0**2)[None, :]


def tin_objective(x, coupling) -> float:
    """Sum rate ``sum_k log2(1 + c_kk x_k / (1 + sum_{j!=k} c_kj x_j))``."""
    x = np.asarray(x, dtype=float)
    total = coupling @ x
    own = np.diag(coupling) * x
    return float(np.sum(np.log2(1.0 + own / (1.0 + total - own))))


def tin_x_constraints(x, dots):
    """Pairwise squared distances written in the ``x = 1/r^2`` variables."""
    x = np.asarray(x, dtype=float)
    return 1.0 / x[:, None] + 1.0 / x[None, :] - 2.0 * dots / np.sqrt(np.outer(x, x))


@dataclass
class RangeSubproblemTIN:
    """Range subproblem for the TIN sum rate with fixed beamformers."""

    coupling: np.ndarray
    unit_vectors: np.ndarray
    constraints: FormationConstraints
    ranges: np.ndarray

    def __post_init__(self):
        if np.any(np.diag(self.coupling) <= 0):
            raise SolverError("every user needs a positive direct-link coupling")

    @classmethod
    def from_formation(cls, g, f: SwarmFormation, r0, constraints, beamformers=None):
        """Coupling from ``beamformers`` or, by default, the LMMSE filters of ``f``."""
        from .metrics import channel_matrix

        A = steering_matrix(g, f.thetas, f.phis)
        if beamformers is None:
            H = channel_matrix(g, f, r0)
            beamformers = np.stack(
                [lmmse_beamformer(H, f.ref_snr, k) for k in range(len(f))], axis=1
            )
        return cls(tin_coupling(A, beamformers, f.ref_snr, r0), f.unit_vectors, constraints, f.ranges.copy())

    @property
    def dots(self) -> np.ndarray:
        d = self.unit_vectors
        return np.clip(d @ d.T, -1.0, 1.0)

    def objective(self, ranges) -> float:
        return tin_objective(1.0 / np.asarray(ranges, float) ** 2, self.coupling)


@dataclass(frozen=True)
class TinTaylorBounds:
    """First-order bounds at ``x_exp`` for the TIN range surrogate.

    ``g_ub`` bounds each user's log2 interference-plus-noise from above;
    ``g_lb`` bounds ``1/sqrt(x_k x_j)`` and ``h_lb`` bounds ``1/x`` from
    below.
    """

    x_exp: np.ndarray
    coupling: np.ndarray

    def _offdiag(self):
        c = self.coupling.copy()
        np.fill_diagonal(c, 0.0)
        return c

    def interference_exp(self):
        return self._offdiag() @ self.x_exp

    def g_ub(self, x) -> np.ndarray:
        c = self._offdiag()
        base = self.interference_exp()
        x = np.asarray(x, dtype=float)
        return np.log2(1.0 + base) + _LOG2E / (1.0 + base) * (c @ (x - self.x_exp))

    def g_lb(self, xk, xj, k, j):
        xkl, xjl = self.x_exp[k], self.x_exp[j]
        q = 1.0 / np.sqrt(xkl * xjl)
        return q - 0.5 * q / xkl * (xk - xkl) - 0.5 * q / xjl * (xj - xjl)

    def h_lb(self, x, k):
        xl = self.x_exp[k]
        return 1.0 / xl - (np.asarray(x) - xl) / xl**2

    def objective(self, x) -> float:
        """Concave surrogate of the sum rate (tight at ``x_exp``)."""
        x = np.asarray(x, dtype=float)
        return float(np.sum(np.log2(1.0 + self.coupling @ x) - self.g_ub(x)))


def tin_taylor_bounds(x_exp, coupling) -> TinTaylorBounds:
    return TinTaylorBounds(np.asarray(x_exp, dtype=float), np.asarray(coupling, dtype=float))


def _tin_kernel_objective(bounds: TinTaylorBounds):
    C = bounds.coupling
    c_off = bounds._offdiag()
    base = bounds.interference_exp()
    lin = (_LOG2E / (1.0 + base)) @ c_off  # gradient of sum_k g_ub_k
    const = float(np.sum(np.log2(1.0 + base)) - lin @ bounds.x_exp)

    def fn(x):
        s = 1.0 + C @ x
        if np.any(s <= 0):
            return math.inf, np.zeros_like(x), np.eye(len(x))
        val = -float(np.sum(np.log2(s))) + float(lin @ x) + const
        w = 1.0 / s
        g = -(C.T @ w) * _LOG2E + lin
        H = (C.T * w**2) @ C * _LOG2E
        return val, g, H

    return fn


def _tin_blocks(sub: RangeSubproblemTIN, bounds: TinTaylorBounds):
    cons = sub.constraints
    K = len(sub.ranges)
    idx = np.arange(K)[:, None]
    blocks = [
        ConstraintBlock.linear(idx, -np.ones((K, 1)), -np.full(K, 1.0 / cons.r_max**2), "x-lo"),
        ConstraintBlock.linear(idx, np.ones((K, 1)), np.full(K, 1.0 / cons.r_min**2), "x-hi"),
    ]
    i, j, c, c4, c5 = _active_pairs(sub.dots, cons)
    xl = bounds.x_exp
    dmin2, dmax2 = cons.d_min**2, cons.d_max**2

    def qterms(a, b):
        q = 1.0 / np.sqrt(a * b)
        grads = np.stack([-0.5 * q / a, -0.5 * q / b], axis=1)
        hess = np.empty((len(a), 2, 2))
        hess[:, 0, 0] = 0.75 * q / a**2
        hess[:, 1, 1] = 0.75 * q / b**2
        hess[:, 0, 1] = hess[:, 1, 0] = 0.25 * q / (a * b)
        return q, grads, hess

    def glb_coef(ii, jj):
        # g_lb = g0 + gk x_k + gj x_j
        q = 1.0 / np.sqrt(xl[ii] * xl[jj])
        gk = -0.5 * q / xl[ii]
        gj = -0.5 * q / xl[jj]
        g0 = q - gk * xl[ii] - gj * xl[jj]
        return g0, gk, gj

    def hlb_coef(ii):
        # h_lb = 2/x_l - x/x_l^2
        return 2.0 / xl[ii], -1.0 / xl[ii] ** 2

    # C4: 1/x_k + 1/x_j - 2c/sqrt(x_k x_j) >= d_min^2
    pos = c4 & (c > 0)
    if np.any(pos):
        ii, jj, cc = i[pos], j[pos], c[pos]
        h0k, h1k = hlb_coef(ii)
        h0j, h1j = hlb_coef(jj)

        def c4pos(xv, cc=cc, h0k=h0k, h1k=h1k, h0j=h0j, h1j=h1j):
            q, qg, qh = qterms(xv[:, 0], xv[:, 1])
            vals = dmin2 - (h0k + h1k * xv[:, 0]) - (h0j + h1j * xv[:, 1]) + 2 * cc * q
            grads = np.stack([-h1k, -h1j], axis=1) + 2 * cc[:, None] * qg
            return vals, grads, 2 * cc[:, None, None] * qh

        blocks.append(ConstraintBlock(np.stack([ii, jj], axis=1), c4pos, "C4-pos"))
    neg = c4 & (c <= 0)
    if np.any(neg):
        ii, jj, cc = i[neg], j[neg], c[neg]
        h0k, h1k = hlb_coef(ii)
        h0j, h1j = hlb_coef(jj)
        g0, gk, gj = glb_coef(ii, jj)
        # d_min^2 - h_k - h_j + 2c g_lb <= 0, affine
        coef = np.stack([-h1k + 2 * cc * gk, -h1j + 2 * cc * gj], axis=1)
        rhs = -dmin2 + h0k + h0j - 2 * cc * g0
        blocks.append(ConstraintBlock.linear(np.stack([ii, jj], axis=1), coef, rhs, "C4-neg"))

    # C5: 1/x_k + 1/x_j - 2c/sqrt(x_k x_j) <= d_max^2
    pos = c5 & (c > 0)
    if np.any(pos):
        ii, jj, cc = i[pos], j[pos], c[pos]
        g0, gk, gj = glb_coef(ii, jj)

        def c5pos(xv, cc=cc, g0=g0, gk=gk, gj=gj):
            a, b = xv[:, 0], xv[:, 1]
            vals = 1 / a + 1 / b - 2 * cc * (g0 + gk * a + gj * b) - dmax2
            grads = np.stack([-1 / a**2 - 2 * cc * gk, -1 / b**2 - 2 * cc * gj], axis=1)
            hess = np.zeros((len(a), 2, 2))
            hess[:, 0, 0] = 2 / a**3
            hess[:, 1, 1] = 2 / b**3
            return vals, grads, hess

        blocks.append(ConstraintBlock(np.stack([ii, jj], axis=1), c5pos, "C5-pos"))
    neg = c5 & (c <= 0)
    if np.any(neg):
        ii, jj, cc = i[neg], j[neg], c[neg]

        def c5neg(xv, cc=cc):
            a, b = xv[:, 0], xv[:, 1]
            q, qg, qh = qterms(a, b)
            vals = 1 / a + 1 / b - 2 * cc * q - dmax2
            grads = np.stack([-1 / a**2, -1 / b**2], axis=1) - 2 * cc[:, None] * qg
            hess = -2 * cc[:, None, None] * qh
            hess[:, 0, 0] += 2 / a**3
            hess[:, 1, 1] += 2 / b**3
            return vals, grads, hess

        blocks.append(ConstraintBlock(np.stack([ii, jj], axis=1), c5neg, "C5-neg"))
    return blocks


def solve_range_tin(sub: RangeSubproblemTIN, settings: SCASettings = None) -> RangeResult:
    """Maximise the fixed-beamformer TIN sum rate over ranges by SCA."""
    settings = settings or SCASettings()
    cons = sub.constraints
    dots = sub.dots
    r = np.asarray(sub.ranges, dtype=float).copy()
    _check_start(r, dots, cons, settings.feasibility_slack)
    r = np.clip(r, cons.r_min, cons.r_max)
    obj = sub.objective(r)
    trace = [obj]
    it = 0
    for it in range(1, settings.max_outer_iters + 1):
        x = 1.0 / r**2
        bounds = tin_taylor_bounds(x, sub.coupling)
        blocks = _tin_blocks(sub, bounds)
        try:
            res = barrier_minimize(_tin_kernel_objective(bounds), blocks, x, settings.kernel)
        except FeasibilityError as exc:
            raise SolverError(f"TIN range surrogate has no interior point: {exc}", trace) from exc
        x_new = np.clip(res.x, 1.0 / cons.r_max**2, 1.0 / cons.r_min**2)
        r_new = np.clip(1.0 / np.sqrt(x_new), cons.r_min, cons.r_max)
        _assert_feasible(r_new, dots, cons, 1e-7, "solve_range_tin")
        obj_new = sub.objective(r_new)
        if obj_new < obj:
            break
        rel = (obj_new - obj) / max(abs(obj), 1e-12)
        r, obj = r_new, obj_new
        trace.append(obj)
        if rel < settings.objective_tol:
            break
    return RangeResult(r, obj, trace, None, it)

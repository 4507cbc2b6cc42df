"""Small dense log-barrier interior-point solver.

Minimises a smooth convex objective subject to smooth convex inequalities
``f_i(x) <= 0``. Every inequality touches only a few variables, so
constraints are grouped in :class:`ConstraintBlock` objects that evaluate
many constraints at once and report local gradients and Hessians; the
barrier Hessian is then assembled in O(m) instead of O(m n^2).

A phase-I problem (minimise s subject to f_i(x) <= s) is solved first when
the starting point is not strictly feasible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from .errors import FeasibilityError

logger = logging.getLogger(__name__)


@dataclass
class ConstraintBlock:
    """A family of ``m`` constraints over ``p`` variables each.

    ``fn(xloc)`` receives ``x[index]`` with shape ``(m, p)`` and returns
    ``(values, grads, hessians)`` with shapes ``(m,)``, ``(m, p)`` and
    ``(m, p, p)``; ``hessians`` may be ``None`` for affine constraints.
    """

    index: np.ndarray
    fn: Callable
    name: str = ""
    step_limit: Optional[Callable] = None

    def __post_init__(self):
        self.index = np.atleast_2d(np.asarray(self.index, dtype=int))

    def __len__(self):
        return self.index.shape[0]

    def evaluate(self, x):
        return self.fn(x[self.index])

    def max_step(self, x, dx) -> float:
        """Largest step along ``dx`` keeping the block feasible (inf if unknown)."""
        if self.step_limit is None:
            return np.inf
        return float(self.step_limit(x[self.index], dx[self.index]))

    @classmethod
    def linear(cls, index, coef, rhs, name=""):
        """Constraints ``sum_j coef[i, j] * x[index[i, j]] <= rhs[i]``."""
        coef = np.atleast_2d(np.asarray(coef, dtype=float))
        rhs = np.asarray(rhs, dtype=float)

        def fn(xl):
            return np.sum(coef * xl, axis=1) - rhs, coef, None

        def limit(xl, dl):
            rate = np.sum(coef * dl, axis=1)
            slack = rhs - np.sum(coef * xl, axis=1)
            pos = rate > 0
            return np.min(slack[pos] / rate[pos]) if pos.any() else np.inf

        return cls(index, fn, name, limit)


@dataclass
class BarrierSettings:
    t0: float = 1.0
    mu: float = 20.0
    gap_tol: float = 1e-9
    newton_tol: float = 1e-10
    max_newton: int = 200
    alpha: float = 0.01
    beta: float = 0.5


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    newton_steps: int
    gap: float
    history: list = field(default_factory=list)


def _evaluate_blocks(blocks, x):
    out = []
    for blk in blocks:
        with np.errstate(all="ignore"):
            out.append(blk.evaluate(x))
    return out


def _strictly_feasible(evals) -> bool:
    for vals, _, _ in evals:
        if vals.size and not np.all(np.isfinite(vals) & (vals < 0)):
            return False
    return True


def _max_violation(evals) -> float:
    worst = -np.inf
    for vals, _, _ in evals:
        if vals.size:
            worst = max(worst, float(np.max(vals)))
    return worst


def _barrier_derivatives(blocks, evals, n):
    g = np.zeros(n)
    H = np.zeros((n, n))
    phi = 0.0
    for blk, (vals, grads, hess) in zip(blocks, evals):
        if not vals.size:
            continue
        inv = -1.0 / vals
        phi -= np.sum(np.log(-vals))
        idx = blk.index
        np.add.at(g, idx, inv[:, None] * grads)
        local = (inv**2)[:, None, None] * grads[:, :, None] * grads[:, None, :]
        if hess is not None:
            local = local + inv[:, None, None] * hess
        np.add.at(H, (idx[:, :, None], idx[:, None, :]), local)
    return phi, g, H


def _barrier_value(evals) -> float:
    phi = 0.0
    for vals, _, _ in evals:
        if vals.size:
            phi -= np.sum(np.log(-vals))
    return phi


def _newton_direction(H, g):
    n = len(g)
    scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    reg = 0.0
    for _ in range(8):
        try:
            c = linalg.cho_factor(H + reg * scale * np.eye(n), check_finite=False)
            return linalg.cho_solve(c, -g, check_finite=False)
        except (linalg.LinAlgError, ValueError):
            reg = 1e-14 if reg == 0.0 else reg * 100
    return np.linalg.lstsq(H, -g, rcond=None)[0]


def _center(objective, blocks, x, t, settings, budget, stop=None):
    """Newton centering on ``t f0 + phi``; returns (x, steps_used)."""
    n = len(x)
    steps = 0
    evals = _evaluate_blocks(blocks, x)
    f0, g0, H0 = objective(x)
    while steps < budget:
        phi, gb, Hb = _barrier_derivatives(blocks, evals, n)
        grad = t * g0 + gb
        hess = t * H0 + Hb
        dx = _newton_direction(hess, grad)
        lam2 = float(-grad @ dx)
        steps += 1
        if not np.isfinite(lam2) or lam2 / 2.0 <= settings.newton_tol:
            break
        F = t * f0 + phi
        s = 1.0
        for blk in blocks:
            s = min(s, 0.99 * blk.max_step(x, dx))
        while s > 1e-12:
            xn = x + s * dx
            ev = _evaluate_blocks(blocks, xn)
            if _strictly_feasible(ev):
                fn_ = objective(xn)
                Fn = t * fn_[0] + _barrier_value(ev)
                if np.isfinite(Fn) and Fn <= F + settings.alpha * s * float(grad @ dx):
                    break
            s *= settings.beta
        else:
            break
        x, evals, (f0, g0, H0) = xn, ev, fn_
        if stop is not None and stop(x):
            break
        if F - Fn <= 1e-14 * max(1.0, abs(F)):
            # progress is below round-off of the merit function
            break
    return x, steps


def _phase_one(blocks, x0, settings):
    """Find a strictly feasible point by minimising the max violation."""
    n = len(x0)
    s_idx = n

    def lift(blk):
        p = blk.index.shape[1]
        idx = np.hstack([blk.index, np.full((len(blk), 1), s_idx)])

        def fn(zl):
            vals, grads, hess = blk.fn(zl[:, :p])
            grads = np.hstack([grads, -np.ones((len(vals), 1))])
            if hess is not None:
                hess = np.pad(hess, ((0, 0), (0, 1), (0, 1)))
            return vals - zl[:, p], grads, hess

        return ConstraintBlock(idx, fn, blk.name)

    lifted = [lift(b) for b in blocks if len(b)]
    evals = _evaluate_blocks(blocks, x0)
    worst = _max_violation(evals)
    if not np.isfinite(worst):
        raise FeasibilityError("starting point outside the constraint domain")
    z = np.append(x0, worst + max(1.0, abs(worst)))

    def objective(zz):
        g = np.zeros(n + 1)
        g[s_idx] = 1.0
        return zz[s_idx], g, np.zeros((n + 1, n + 1))

    m = sum(len(b) for b in lifted)
    t = settings.t0
    used = 0
    stop = lambda zz: zz[s_idx] < 0.0
    while used < settings.max_newton * 4:
        z, steps = _center(objective, lifted, z, t, settings, settings.max_newton, stop)
        used += steps
        if z[s_idx] < 0.0:
            x = z[:n]
            if _strictly_feasible(_evaluate_blocks(blocks, x)):
                return x
        if m / t < settings.gap_tol:
            break
        t *= settings.mu
    raise FeasibilityError(
        f"no strictly feasible point found (max violation {z[s_idx]:.3g})"
    )


def barrier_minimize(
    objective: Callable,
    blocks: list,
    x0,
    settings: Optional[BarrierSettings] = None,
) -> BarrierResult:
    """Minimise ``objective`` (returning value, gradient, Hessian) subject to
    every block's constraints being strictly negative."""
    settings = settings or BarrierSettings()
    x = np.asarray(x0, dtype=float).copy()
    blocks = [b for b in blocks if len(b)]
    if not _strictly_feasible(_evaluate_blocks(blocks, x)):
        x = _phase_one(blocks, x, settings)
    m = sum(len(b) for b in blocks)
    if m == 0:
        # unconstrained: plain damped Newton
        x, steps = _center(objective, [], x, 1.0, settings, settings.max_newton)
        return BarrierResult(x, objective(x)[0], steps, 0.0)
    t = settings.t0
    total = 0
    history = []
    while True:
        x, steps = _center(objective, blocks, x, t, settings, settings.max_newton)
        total += steps
        f = objective(x)[0]
        history.append((t, f))
        gap = m / t
        if gap < settings.gap_tol * max(1.0, abs(f)):
            break
        t *= settings.mu
    logger.debug("barrier: %d Newton steps, final gap %.2e", total, gap)
    return BarrierResult(x, f, total, gap, history)

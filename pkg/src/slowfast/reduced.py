"""The degenerate problem obtained at mu = 0.

The fast equation collapses to the algebraic constraint ``F(z, y, t) = 0``.
A root branch ``phi(y, t)`` is followed by Newton iteration with
continuation, and the slow variables solve
``ybar' = f(phi(ybar, t), ybar, t)`` with jumps ``J(phi(ybar, eta), ybar)``
at the slow moments.
"""
from __future__ import annotations

import copy
import math
from typing import Callable

import numpy as np

from .errors import NewtonDivergence, NonFiniteState, SingularJacobian
from .integrator import (DEFAULT_ATOL, DEFAULT_RTOL, JumpRecord, Segment, Trajectory,
                         dopri_segment)
from .model import EventKind, SystemModel

__all__ = [
    "solve_root", "RootMap", "ReducedTrajectory", "integrate_reduced",
    "check_degenerate_impulse", "check_root_continuity",
]

MAX_NEWTON_ITER = 50
COND_LIMIT = 1e12


def _jacobian(F, z, y, t):
    m = z.size
    h = max(1e-6, 1e-6 * float(np.linalg.norm(z)))
    J = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        J[:, j] = (np.asarray(F(z + e, y, t), dtype=float)
                   - np.asarray(F(z - e, y, t), dtype=float)) / (2 * h)
    return J


def solve_root(F: Callable, y, t: float, guess, root_tol: float | None = None,
               max_iter: int = MAX_NEWTON_ITER) -> np.ndarray:
    """Newton iteration for ``F(z, y, t) = 0`` started at ``guess``.

    Converged when ``max|F| <= root_tol`` (default ``1e-12 * max(1, |z|)``).
    The Jacobian in ``z`` comes from central differences.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    z = np.array(guess, dtype=float).reshape(-1)

    def tol_at(z):
        return root_tol if root_tol is not None else 1e-12 * max(1.0, float(np.linalg.norm(z)))

    for it in range(max_iter + 1):
        try:
            r = np.asarray(F(z, y, t), dtype=float)
        except ArithmeticError as exc:
            raise NewtonDivergence(f"F failed during Newton iteration: {exc}", z) from None
        if not np.all(np.isfinite(r)):
            raise NewtonDivergence("non-finite residual during Newton iteration", z)
        if np.max(np.abs(r)) <= tol_at(z):
            return z
        if it == max_iter:
            break
        J = _jacobian(F, z, y, t)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > COND_LIMIT:
            raise SingularJacobian(f"Jacobian of F is singular near z={z}", z)
        z = z - np.linalg.solve(J, r)
    raise NewtonDivergence(f"Newton did not converge in {max_iter} iterations", z)


class RootMap:
    """A root branch ``phi(y, t)`` of ``F = 0`` followed by continuation.

    Each query is seeded with the previous answer, so sweeping ``(y, t)``
    along a path tracks one branch. ``isolation_radius`` is the distance
    within which no second root is expected; see :meth:`isolation_probe`.
    Not safe to share between threads; use :meth:`clone`.
    """

    def __init__(self, F: Callable, initial_guess, isolation_radius: float = 1e-3,
                 root_tol: float | None = None):
        self.F = F
        self.initial_guess = np.array(initial_guess, dtype=float).reshape(-1)
        self.isolation_radius = float(isolation_radius)
        self.root_tol = root_tol
        self.last = None
        self.max_jump = 0.0  # largest change between consecutive resolved values

    @classmethod
    def for_model(cls, model: SystemModel, initial_guess, **kw):
        return cls(model.F, initial_guess, **kw)

    def reset(self):
        self.last = None
        self.max_jump = 0.0

    def clone(self) -> "RootMap":
        return copy.deepcopy(self)

    def __call__(self, y, t: float) -> np.ndarray:
        guess = self.initial_guess if self.last is None else self.last
        z = solve_root(self.F, y, t, guess, self.root_tol)
        if self.last is not None:
            self.max_jump = max(self.max_jump, float(np.linalg.norm(z - self.last)))
        self.last = z
        return z.copy()

    def residual(self, z, y, t) -> float:
        return float(np.max(np.abs(np.asarray(self.F(z, y, t), dtype=float))))

    def isolation_probe(self, y, t, rng=None, n_probe: int = 8):
        """Smallest ``max|F|`` over ``n_probe`` random points at distance ``isolation_radius``.

        Returns ``(min_residual, isolated)``; isolated means the minimum is
        at least 100 times the root tolerance. A sampled surrogate only.
        """
        rng = np.random.default_rng(0) if rng is None else rng
        phi = solve_root(self.F, y, t, self.initial_guess if self.last is None else self.last,
                         self.root_tol)
        d = rng.normal(size=(n_probe, phi.size))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        res = min(self.residual(phi + self.isolation_radius * v, np.asarray(y, float), t) for v in d)
        tol = self.root_tol if self.root_tol is not None else 1e-12 * max(1.0, float(np.linalg.norm(phi)))
        return res, bool(res > 100 * tol)


class ReducedTrajectory:
    """Solution ``ybar`` of the reduced slow system and its root path ``zbar``.

    ``ybar`` is left-continuous at the slow moments. ``zbar(t)`` resolves
    ``phi(ybar(t), t)`` on demand with a private copy of the root map.
    """

    def __init__(self, traj: Trajectory, rootmap: RootMap, model: SystemModel):
        self.traj = traj
        self.rootmap = rootmap.clone()
        self.rootmap.reset()
        self.fast_dim = model.fast_dim
        self.slow_dim = model.slow_dim
        self.jumps = traj.jumps
        self.dense = None

    @property
    def t_end(self):
        return self.traj.t_end

    def ybar(self, t, right=False):
        return self.traj.right(t) if right else self.traj(t)

    def zbar(self, t, right=False):
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        ys = np.atleast_2d(self.ybar(tq, right))
        out = np.array([self.rootmap(y, s) for y, s in zip(ys, tq)]).reshape(tq.size, self.fast_dim)
        return out[0] if scalar else out

    def state(self, t, right=False):
        """``(zbar, ybar)`` stacked like a full trajectory state."""
        z = np.atleast_2d(self.zbar(t, right))
        y = np.atleast_2d(self.ybar(t, right))
        out = np.concatenate([z, y.reshape(z.shape[0], self.slow_dim)], axis=1)
        return out[0] if np.ndim(t) == 0 else out


def integrate_reduced(model: SystemModel, rootmap: RootMap, y0, grid=None,
                      rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                      t_end: float | None = None) -> ReducedTrajectory:
    """Solve the reduced slow system from ``ybar(0) = y0`` over ``[0, T]``.

    With a ``grid``, ``(grid, ybar, zbar)`` samples are stored in ``.dense``.
    """
    T = model.horizon if t_end is None else float(t_end)
    n = model.slow_dim
    y0 = np.array(y0, dtype=float).reshape(-1)
    if y0.size != n:
        raise ValueError(f"y0 has size {y0.size}, model slow dimension is {n}")
    rm = rootmap.clone()
    rm.reset()
    segments, jumps = [], []

    if n == 0:
        segments.append(Segment([0.0, T], np.zeros((2, 0)), np.zeros((2, 0))))
    else:
        f = model.f

        def rhs(t, y):
            z = rm(y, t)
            return np.asarray(f(z, y, t), dtype=float)

        etas = [e for e in model.eta if e < T]
        y = y0
        t0 = 0.0
        for bound in etas + [T]:
            seg = dopri_segment(rhs, t0, bound, y, rtol, atol)
            segments.append(seg)
            y = seg.w[-1]
            if bound < T:
                z = rm(y, bound)
                right = y + model.eval_J_slow(z, y)
                if not np.all(np.isfinite(right)):
                    raise NonFiniteState("slow impulse produced a non-finite state", bound)
                jumps.append(JumpRecord(bound, EventKind.SLOW, y.copy(), right.copy()))
                y = right
            t0 = bound

    traj = Trajectory(segments, jumps, 0, n)
    red = ReducedTrajectory(traj, rootmap, model)
    if grid is not None:
        g = np.asarray(grid, dtype=float)
        red.dense = (g, red.ybar(g), red.zbar(g))
    return red


def check_degenerate_impulse(model: SystemModel, rootmap: RootMap,
                             reduced: ReducedTrajectory) -> np.ndarray:
    """Residuals ``|I(phi(ybar(theta_i), theta_i), ybar(theta_i), 0)|`` per fast moment."""
    rm = rootmap.clone()
    rm.reset()
    out = []
    for th in model.theta:
        y = reduced.ybar(th)
        z = rm(y, th)
        out.append(float(np.linalg.norm(model.eval_I(z, y, 0.0))))
    return np.array(out)


def check_root_continuity(reduced: ReducedTrajectory) -> np.ndarray:
    """Gaps ``|phi(ybar(eta+), eta) - phi(ybar(eta), eta)|`` at each slow moment."""
    rm = reduced.rootmap.clone()
    rm.reset()
    gaps = []
    for j in reduced.jumps:
        before = rm(j.left, j.moment)
        after = rm(j.right, j.moment)
        gaps.append(float(np.linalg.norm(after - before)))
    return np.array(gaps)

"""Piecewise integration of singularly perturbed impulsive systems.

Between impulse moments the full state ``w = (z, y)`` solves
``z' = F/mu, y' = f`` with an adaptive Dormand-Prince 5(4) pair under PI
step-size control. Steps never straddle a moment: each inter-impulse
interval is its own segment, and the jump map is applied to the value at
the end of the segment. Trajectories are left-continuous, so the value
*at* a moment is the pre-jump value; use :meth:`Trajectory.right` for the
post-jump one.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteState, ToleranceFailure
from .model import EventKind, InitialState, SystemModel, moments_in_order

__all__ = [
    "SimulationParams", "Segment", "JumpRecord", "Trajectory", "AdjointTrajectory",
    "integrate_full", "integrate_rescaled", "rescaling_equivalence_check",
    "dopri_segment", "write_trajectory_csv", "write_jumps_csv",
]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12

# Dormand-Prince 5(4), FSAL
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.zeros(0),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension of order 4 (dense output coefficients of DOPRI5)
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])

# PI controller constants (Hairer, Norsett & Wanner, DOPRI5)
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_SAFE = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0


@dataclass(frozen=True)
class SimulationParams:
    mu: float
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    max_step: float = math.inf
    dense_grid: np.ndarray | None = None

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be positive (mu = 0 is the degenerate problem), got {self.mu!r}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.dense_grid is not None:
            g = np.asarray(self.dense_grid, dtype=float)
            if g.ndim != 1 or np.any(np.diff(g) < 0) or (g.size and g[0] < 0):
                raise ValueError("dense_grid must be a sorted 1-d array of non-negative times")
            object.__setattr__(self, "dense_grid", g)


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    nfev: int = 0

    def add(self, other):
        self.accepted += other.accepted
        self.rejected += other.rejected
        self.nfev += other.nfev


class Segment:
    """Dense solution on one closed interval.

    Between step nodes the Dormand-Prince quartic interpolant is used when
    the per-step coefficients ``q`` are known, cubic Hermite otherwise.
    """

    def __init__(self, t, w, dw, stats=None, q=None):
        self.t = np.asarray(t, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.dw = np.asarray(dw, dtype=float)
        self.q = None if q is None else np.asarray(q, dtype=float).reshape(-1, self.w.shape[1])
        self.stats = stats or StepStats()

    @property
    def start(self):
        return self.t[0]

    @property
    def end(self):
        return self.t[-1]

    def __call__(self, t):
        """Evaluate at scalar or array ``t`` inside the segment."""
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        if tq.size and (tq.min() < self.start or tq.max() > self.end):
            raise ValueError(f"time outside segment [{self.start}, {self.end}]")
        k = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, max(len(self.t) - 2, 0))
        if len(self.t) == 1:
            out = np.repeat(self.w[:1], tq.size, axis=0)
            return out[0] if scalar else out
        t0, t1 = self.t[k], self.t[k + 1]
        h = (t1 - t0)[:, None]
        s = ((tq - t0) / (t1 - t0))[:, None]
        y0, y1 = self.w[k], self.w[k + 1]
        f0, f1 = self.dw[k], self.dw[k + 1]
        if self.q is not None and len(self.q) == len(self.t) - 1:
            dy = y1 - y0
            r3 = h * f0 - dy
            r4 = dy - h * f1 - r3
            s1 = 1 - s
            out = y0 + s * (dy + s1 * (r3 + s * (r4 + s1 * self.q[k])))
        else:
            s2, s3 = s * s, s * s * s
            out = ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0
                   + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * f1)
        # exact node hits return the stored value
        exact = tq == t1
        out[exact] = y1[exact]
        exact = tq == t0
        out[exact] = y0[exact]
        return out[0] if scalar else out


@dataclass(frozen=True)
class JumpRecord:
    moment: float
    kind: EventKind
    left: np.ndarray
    right: np.ndarray

    @property
    def applied(self):
        return self.right - self.left


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / v.size) if v.size else 0.0


def _initial_step(rhs, t0, y0, f0, span, rtol, atol):
    sc = atol + np.abs(y0) * rtol
    d0, d1 = _rms(y0 / sc), _rms(f0 / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = np.asarray(rhs(t0 + h0, y0 + h0 * f0), dtype=float)
    d2 = _rms((f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def dopri_segment(rhs: Callable, t0: float, t1: float, y0, rtol: float, atol: float,
                  max_step: float = math.inf, on_step: Callable | None = None) -> Segment:
    """Integrate ``y' = rhs(t, y)`` on ``[t0, t1]``, landing exactly on ``t1``.

    ``on_step(t, y)`` is called after each accepted step.
    Raises :class:`NonFiniteState` on blow-up, :class:`ToleranceFailure`
    when the step size underflows.
    """
    y = np.array(y0, dtype=float)
    d = y.size
    stats = StepStats()
    ts, ws, dws, qs = [t0], [y.copy()], [], []
    if t1 <= t0:
        f = np.asarray(rhs(t0, y), dtype=float)
        stats.nfev += 1
        return Segment(ts, ws, [f], stats)
    K = np.empty((7, d))
    try:
        K[0] = rhs(t0, y)
    except ArithmeticError:
        raise NonFiniteState("right-hand side failed at segment start", t0) from None
    stats.nfev += 1
    if not np.all(np.isfinite(K[0])):
        raise NonFiniteState("non-finite derivative at segment start", t0)
    dws.append(K[0].copy())
    span = t1 - t0
    try:
        h = min(_initial_step(rhs, t0, y, K[0], span, rtol, atol), max_step)
    except ArithmeticError:
        h = min(1e-6 * span, max_step)
    stats.nfev += 1
    t = t0
    errold = 1e-4
    rejected_last = False
    nonfinite_last = False
    hmin = 16 * np.finfo(float).eps
    scale0 = max(1.0, float(np.max(np.abs(y))) if d else 0.0)
    while t < t1:
        if not h >= hmin * max(abs(t), 1.0):
            # underflow or a nan step; next to a huge state it is a blow-up
            if nonfinite_last or (d and np.max(np.abs(y)) > 1e6 * scale0):
                raise NonFiniteState("state blew up", t)
            raise ToleranceFailure("step size underflow", t)
        last = t + h * (1 + 1e-9) >= t1
        if last:
            h = t1 - t
        nonfinite_last = False
        try:
            for i in range(1, 7):
                K[i] = rhs(t + _C[i] * h, y + h * (_A[i] @ K[:i]))
            ynew = y + h * (_A[6] @ K[:6])
            ok = bool(np.all(np.isfinite(K)) and np.all(np.isfinite(ynew)))
        except ArithmeticError:
            ok = False
        stats.nfev += 6
        if not ok:
            nonfinite_last = True
            stats.rejected += 1
            h *= _FAC_MIN
            rejected_last = True
            continue
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = _rms(h * (_E @ K) / sc)
        if err <= 1.0:
            err = max(err, 1e-10)
            fac = err ** _EXPO / errold ** _BETA / _SAFE
            fac = min(1 / _FAC_MIN, max(1 / _FAC_MAX, fac))
            hnew = h / fac
            if rejected_last:
                hnew = min(hnew, h)
            t = t1 if last else t + h
            y = ynew
            qs.append(h * (_D @ K))
            K[0] = K[6]
            errold = err
            ts.append(t)
            ws.append(y.copy())
            dws.append(K[0].copy())
            stats.accepted += 1
            rejected_last = False
            if on_step is not None:
                on_step(t, y)
            h = min(hnew, max_step)
        else:
            stats.rejected += 1
            h /= min(1 / _FAC_MIN, err ** _EXPO / _SAFE)
            rejected_last = True
    return Segment(ts, ws, dws, stats, q=np.array(qs).reshape(len(qs), d))


class Trajectory:
    """Piecewise-continuous numerical solution with explicit jump records.

    ``segments[k]`` covers ``[breaks[k], breaks[k+1]]``; ``jumps[k]`` is the
    impulse applied at ``breaks[k+1]``. The state vector is ``(z, y)``.
    """

    def __init__(self, segments, jumps, fast_dim, slow_dim, mu=None, exit_time=None):
        self.segments = list(segments)
        self.jumps = list(jumps)
        self.fast_dim = fast_dim
        self.slow_dim = slow_dim
        self.mu = mu
        self.exit_time = exit_time
        self.dense = None
        self._starts = np.array([s.start for s in self.segments])
        self._ends = np.array([s.end for s in self.segments])

    @property
    def t_end(self):
        return self._ends[-1]

    @property
    def breaks(self):
        return np.append(self._starts, self._ends[-1])

    @property
    def stats(self):
        total = StepStats()
        for s in self.segments:
            total.add(s.stats)
        return total

    def _eval(self, t, right):
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        if tq.size and (tq.min() < self._starts[0] or tq.max() > self._ends[-1]):
            raise ValueError("query time outside the trajectory")
        if right:
            k = np.searchsorted(self._starts, tq, side="right") - 1
        else:
            k = np.searchsorted(self._ends, tq, side="left")
        k = np.clip(k, 0, len(self.segments) - 1)
        out = np.empty((tq.size, self.fast_dim + self.slow_dim))
        for idx in np.unique(k):
            mask = k == idx
            out[mask] = self.segments[idx](tq[mask])
        return out[0] if scalar else out

    def __call__(self, t):
        """Left-continuous value: at an impulse moment, the pre-jump state."""
        return self._eval(t, right=False)

    def right(self, t):
        """Right limit: at an impulse moment, the post-jump state."""
        return self._eval(t, right=True)

    def z(self, t, right=False):
        return self._eval(t, right)[..., :self.fast_dim]

    def y(self, t, right=False):
        return self._eval(t, right)[..., self.fast_dim:]

    def nodes(self):
        """All step nodes as ``(t, state, segment_id)``; moments appear twice (left, right)."""
        ts, ws, ids = [], [], []
        for k, seg in enumerate(self.segments):
            ts.append(seg.t)
            ws.append(seg.w)
            ids.append(np.full(seg.t.size, k))
        return np.concatenate(ts), np.concatenate(ws), np.concatenate(ids)

    def sample(self, grid_per_segment: int = 200):
        """Uniform samples on every segment, segment ends included (left and right values)."""
        ts, ws, ids = [], [], []
        for k, seg in enumerate(self.segments):
            g = np.linspace(seg.start, seg.end, grid_per_segment) if seg.end > seg.start else seg.t[:1]
            ts.append(g)
            ws.append(seg(g))
            ids.append(np.full(g.size, k))
        return np.concatenate(ts), np.concatenate(ws), np.concatenate(ids)


class AdjointTrajectory(Trajectory):
    """Solution of the rescaled fast system in stretched time ``tau``.

    The integrated state is the shifted variable ``x = z - shift``; use
    :meth:`zt` for the unshifted fast state.
    """

    def __init__(self, segment, fast_dim, shift, frozen):
        super().__init__([segment], [], fast_dim, 0)
        self.shift = np.asarray(shift, dtype=float)
        self.frozen = frozen

    def x(self, tau):
        return self(tau)

    def zt(self, tau):
        return self(tau) + self.shift


def _full_rhs(model, mu, freeze_slow=False):
    m = model.fast_dim
    F = model.F
    if model.slow_dim == 0:
        y_empty = np.zeros(0)
        inv = 1.0 / mu

        def rhs(t, w):
            return np.multiply(F(w, y_empty, t), inv)
        return rhs
    f = model.f
    d = m + model.slow_dim

    def rhs(t, w):
        out = np.empty(d)
        z, y = w[:m], w[m:]
        out[:m] = F(z, y, t)
        out[:m] /= mu
        if freeze_slow:
            out[m:] = 0.0
        else:
            out[m:] = f(z, y, t)
        return out
    return rhs


def _apply_jump(model, event, w, mu):
    m = model.fast_dim
    z, y = w[:m], w[m:]
    out = w.copy()
    if event.kind is EventKind.FAST_PRIMARY:
        out[:m] = z + model.eval_I(z, y, mu) / mu
    elif event.kind is EventKind.FAST_AUX:
        out[:m] = z + model.eval_J_fast_aux(z, y, mu) / mu
    else:
        out[m:] = y + model.eval_J_slow(z, y)
    return out


def integrate_full(model: SystemModel, params: SimulationParams, init: InitialState,
                   t_end: float | None = None, freeze_slow: bool = False) -> Trajectory:
    """Integrate the full system with impulses for fixed ``mu > 0``.

    ``t_end`` (default: the horizon) truncates the run; ``freeze_slow`` holds
    ``y`` at its initial value, which is used for rescaling checks.
    """
    init.check(model)
    T = model.horizon if t_end is None else float(t_end)
    if not 0 < T <= model.horizon:
        raise ValueError(f"t_end must lie in (0, {model.horizon}]")
    mu = params.mu
    rhs = _full_rhs(model, mu, freeze_slow)
    events = [e for e in moments_in_order(model) if e.time < T]
    region = model.region
    m = model.fast_dim
    exit_time = [None]
    check_region = math.isfinite(region.fast_bound) or math.isfinite(region.slow_bound)

    def on_step(t, w):
        if exit_time[0] is None and not region.contains(w[:m], w[m:]):
            exit_time[0] = t

    w = np.concatenate([init.z0, init.y0])
    segments, jumps = [], []
    t0 = 0.0
    for bound in [e.time for e in events] + [T]:
        seg = dopri_segment(rhs, t0, bound, w, params.rtol, params.atol, params.max_step,
                            on_step if check_region else None)
        segments.append(seg)
        w = seg.w[-1]
        if bound < T:
            ev = events[len(jumps)]
            try:
                right = _apply_jump(model, ev, w, mu)
            except ArithmeticError as exc:
                raise NonFiniteState(f"impulse map failed: {exc}", bound) from None
            if not np.all(np.isfinite(right)):
                raise NonFiniteState("impulse produced a non-finite state", bound)
            jumps.append(JumpRecord(bound, ev.kind, w.copy(), right.copy()))
            w = right
            if check_region:
                on_step(bound, w)
        t0 = bound
    traj = Trajectory(segments, jumps, model.fast_dim, model.slow_dim, mu=mu, exit_time=exit_time[0])
    if params.dense_grid is not None:
        grid = params.dense_grid[params.dense_grid <= T]
        traj.dense = (grid, traj(grid))
    return traj


def integrate_rescaled(model: SystemModel, frozen: tuple, x0, tau_end: float,
                       shift=None, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> AdjointTrajectory:
    """Integrate ``dx/dtau = F(x + shift, y, t)`` with ``(y, t) = frozen`` held fixed.

    With ``shift = phi(y, t)`` this is the shifted fast system around the
    root; with ``shift = None`` (zero) it is the adjoint system for ``z``
    itself. No impulses are applied.
    """
    if not tau_end > 0:
        raise ValueError("tau_end must be positive")
    y, t = frozen
    y = np.asarray(y, dtype=float).reshape(-1)
    t = float(t)
    m = model.fast_dim
    s = np.zeros(m) if shift is None else np.asarray(shift, dtype=float).reshape(-1)
    F = model.F
    if np.any(s):
        def rhs(tau, x):
            return np.asarray(F(x + s, y, t), dtype=float)
    else:
        def rhs(tau, x):
            return np.asarray(F(x, y, t), dtype=float)
    seg = dopri_segment(rhs, 0.0, float(tau_end), np.asarray(x0, dtype=float).reshape(-1), rtol, atol)
    return AdjointTrajectory(seg, m, s, (y, t))


def rescaling_equivalence_check(model: SystemModel, params: SimulationParams, init: InitialState,
                                t_end: float, n_grid: int = 201) -> float:
    """Sup-norm gap between ``z`` integrated in ``t`` and in ``tau = t / mu``.

    Must be run before the first impulse. Slow variables are frozen at
    ``y0`` on both routes and the fast field is evaluated at ``t = 0`` in
    the rescaled route, so the check is exact only for fast fields that do
    not depend on ``t`` explicitly.
    """
    events = moments_in_order(model)
    if events and t_end >= events[0].time:
        raise ValueError("t_end must precede the first impulse moment")
    full = integrate_full(model, params, init, t_end=t_end, freeze_slow=True)
    resc = integrate_rescaled(model, (init.y0, 0.0), init.z0, t_end / params.mu,
                              rtol=params.rtol, atol=params.atol)
    grid = np.linspace(0.0, t_end, n_grid)
    zt = full.z(grid)
    ztau = resc.zt(np.minimum(grid / params.mu, resc.t_end))
    return float(np.max(np.abs(zt - ztau)))


# -- export ---------------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, fh, grid_per_segment: int | None = None):
    """Write ``t, z1..zm, y1..yn, segment_id`` rows.

    By default the step nodes are written; with ``grid_per_segment`` a
    uniform grid per segment. Moments appear twice, pre- then post-jump.
    """
    if grid_per_segment is None:
        ts, ws, ids = traj.nodes()
    else:
        ts, ws, ids = traj.sample(grid_per_segment)
    header = (["t"] + [f"z{k + 1}" for k in range(traj.fast_dim)]
              + [f"y{k + 1}" for k in range(traj.slow_dim)] + ["segment_id"])
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for t, w, k in zip(ts, ws, ids):
        writer.writerow([_fmt(t)] + [_fmt(v) for v in w] + [int(k)])


def write_jumps_csv(traj: Trajectory, fh):
    d = traj.fast_dim + traj.slow_dim
    cols = [f"z{k + 1}" for k in range(traj.fast_dim)] + [f"y{k + 1}" for k in range(traj.slow_dim)]
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["moment", "kind"] + [f"left_{c}" for c in cols] + [f"right_{c}" for c in cols])
    for j in traj.jumps:
        writer.writerow([_fmt(j.moment), j.kind.value] + [_fmt(v) for v in j.left[:d]]
                        + [_fmt(v) for v in j.right[:d]])


def trajectory_csv_text(traj: Trajectory, grid_per_segment: int | None = None) -> str:
    buf = io.StringIO()
    write_trajectory_csv(traj, buf, grid_per_segment)
    return buf.getvalue()

"""Checks and studies built on the integrators.

* :func:`lyapunov_check` samples a candidate Lyapunov function of the
  shifted fast system around the root branch.
* :func:`impulse_limit` classifies ``I(z, y, mu) / mu`` as ``(z, mu)``
  approaches ``(phi, 0)``: zero, a finite vector, or divergent.
* :func:`attraction_check` follows the frozen fast system in stretched time.
* :func:`convergence_study` measures sup distances between full and reduced
  solutions over a ladder of ``mu`` values.
* :func:`detect_layers` and :func:`layer_scaling` locate the short intervals
  of non-uniform convergence after ``t = 0`` and after the impulses.

Every report converts to plain JSON with :func:`report_to_json`.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (ExprError, IntegrationError, NonFiniteResult,
                     RootError, UnclosedLayer)
from .expr import Expr, compile_scalar, free_variables
from .integrator import (DEFAULT_ATOL, DEFAULT_RTOL, SimulationParams, Trajectory,
                         integrate_full, integrate_rescaled)
from .model import InitialState, SystemModel
from .reduced import (ReducedTrajectory, RootMap, check_degenerate_impulse,
                      check_root_continuity, integrate_reduced)

__all__ = [
    "LyapunovSpec", "LyapunovReport", "lyapunov_check",
    "Limit", "ApproachPath", "ImpulseLimitReport", "impulse_limit", "default_mu_ladder",
    "AttractionReport", "attraction_check",
    "ConvergenceReport", "convergence_study", "exclusion_width",
    "Layer", "LayerReport", "detect_layers", "ScalingRow", "layer_scaling",
    "ConditionReport", "check_conditions",
    "to_jsonable", "report_to_json", "write_convergence_csv", "write_layers_csv",
    "write_scaling_csv",
]

TAIL_TOL = 1e-3
EPS_ATTR = 1e-6
LAYER_EPS = 0.1
DWELL = 5
LYAPUNOV_TOL = 1e-10


def _hidden(default=None, factory=None):
    """Dataclass field left out of JSON output."""
    if factory is not None:
        return field(default_factory=factory, repr=False, metadata={"json": False})
    return field(default=default, repr=False, metadata={"json": False})


# -- Lyapunov functions ----------------------------------------------------

@dataclass
class LyapunovSpec:
    """Candidate ``V(x, y, tau)`` with ``x = z - phi(y, t)``.

    ``V`` is either a parsed expression over the fast names, the slow names
    and ``tau``, or a callable ``V(x, y, tau) -> float``. Samples are drawn
    on ``n_shells`` concentric spheres of radius up to ``radius``.
    """

    V: Expr | Callable
    radius: float = 1.0
    sample_count: int = 10_000
    n_shells: int = 10
    taus: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sampling radius must be positive")
        if self.sample_count < 1 or self.n_shells < 1:
            raise ValueError("sample_count and n_shells must be positive")

    def evaluator(self, model: SystemModel) -> Callable:
        if not isinstance(self.V, Expr):
            V = self.V

            def fn(x, y, tau):
                return float(V(x, y, tau))
            return fn
        names = tuple(model.fast_names) + tuple(model.slow_names) + ("tau",)
        unknown = free_variables(self.V) - set(names)
        if unknown:
            raise ExprError(f"V uses names outside the model: {sorted(unknown)}")
        raw = compile_scalar(self.V, names)

        def fn(x, y, tau):
            return raw(*x, *y, tau)
        return fn


@dataclass
class LyapunovReport:
    passed: bool
    n_samples: int
    n_violations: int
    origin_value: float
    worst_V: dict
    worst_dV: dict
    witness: dict | None
    tolerance: float
    samples: dict = _hidden(factory=dict)


def _sample_dict(x, y, t, tau, v, dv):
    return {"x": list(map(float, x)), "y": list(map(float, y)), "t": float(t),
            "tau": float(tau), "V": float(v), "dV": float(dv)}


def lyapunov_check(model: SystemModel, rootmap: RootMap, spec: LyapunovSpec,
                   frozen: Sequence[tuple] | None = None, reduced: ReducedTrajectory | None = None,
                   seed: int = 0, tol: float = LYAPUNOV_TOL) -> LyapunovReport:
    """Sample ``V`` and its derivative along the shifted fast field.

    ``dV/dtau = grad_x V . F(x + phi, y, t) + dV/dtau`` (explicit part), with
    both derivatives from central differences. A sample violates the
    conditions when ``V <= 0`` or ``dV/dtau > -tol``.

    The frozen ``(y, t)`` points default to ``(ybar(t), t)`` at five times
    along ``reduced`` when the model has slow variables, and to ``t = 0``
    otherwise.
    """
    if spec.radius > model.region.fast_bound:
        raise ValueError("sampling radius exceeds the fast region bound")
    m, n = model.fast_dim, model.slow_dim
    V = spec.evaluator(model)
    if frozen is None:
        if n == 0:
            frozen = [(np.zeros(0), 0.0)]
        elif reduced is None:
            raise ValueError("frozen (y, t) points or a reduced trajectory are required")
        else:
            ts = np.linspace(0.0, reduced.t_end, 5)
            frozen = [(reduced.ybar(t), float(t)) for t in ts]
    frozen = [(np.asarray(y, dtype=float).reshape(-1), float(t)) for y, t in frozen]
    rm = rootmap.clone()
    rm.reset()
    rng = np.random.default_rng(seed)
    F = model.F

    total = spec.sample_count
    per_point = [total // len(frozen)] * len(frozen)
    per_point[0] += total - sum(per_point)

    xs, ys, ts, taus, vs, dvs = [], [], [], [], [], []
    origin = 0.0
    for (y, t), count in zip(frozen, per_point):
        phi = rm(y, t)
        for tau in spec.taus:
            try:
                origin = max(origin, abs(V(np.zeros(m), y, tau)))
            except ArithmeticError as exc:
                raise NonFiniteResult(f"V failed at the origin: {exc}") from None
        shells = np.arange(count) % spec.n_shells + 1
        radii = spec.radius * shells / spec.n_shells
        dirs = rng.normal(size=(count, m))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = dirs * radii[:, None]
        tau_idx = np.arange(count) % len(spec.taus)
        for x, k in zip(pts, tau_idx):
            tau = spec.taus[k]
            try:
                v = V(x, y, tau)
                h = 1e-6 * max(1.0, float(np.linalg.norm(x)))
                grad = np.empty(m)
                for j in range(m):
                    e = np.zeros(m)
                    e[j] = h
                    grad[j] = (V(x + e, y, tau) - V(x - e, y, tau)) / (2 * h)
                ht = 1e-6 * max(1.0, abs(tau))
                dtau = (V(x, y, tau + ht) - V(x, y, tau - ht)) / (2 * ht)
            except ArithmeticError as exc:
                raise NonFiniteResult(f"V failed at x={x}: {exc}") from None
            dv = float(grad @ np.asarray(F(x + phi, y, t), dtype=float)) + dtau
            if not (math.isfinite(v) and math.isfinite(dv)):
                raise NonFiniteResult(f"V or its derivative is not finite at x={x}")
            xs.append(x)
            ys.append(y)
            ts.append(t)
            taus.append(tau)
            vs.append(v)
            dvs.append(dv)

    vs, dvs = np.array(vs), np.array(dvs)
    bad = (vs <= 0) | (dvs > -tol)
    iv, idv = int(np.argmin(vs)), int(np.argmax(dvs))
    witness = None
    origin_ok = origin <= 1e-12
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        witness = _sample_dict(xs[i], ys[i], ts[i], taus[i], vs[i], dvs[i])
    elif not origin_ok:
        witness = _sample_dict(np.zeros(m), frozen[0][0], frozen[0][1], spec.taus[0], origin, 0.0)
    return LyapunovReport(
        passed=bool(origin_ok and not bad.any()),
        n_samples=int(vs.size),
        n_violations=int(bad.sum()),
        origin_value=float(origin),
        worst_V=_sample_dict(xs[iv], ys[iv], ts[iv], taus[iv], vs[iv], dvs[iv]),
        worst_dV=_sample_dict(xs[idv], ys[idv], ts[idv], taus[idv], vs[idv], dvs[idv]),
        witness=witness,
        tolerance=tol,
        samples={"x": np.array(xs), "y": np.array(ys), "t": np.array(ts),
                 "tau": np.array(taus), "V": vs, "dV": dvs},
    )


# -- impulse limits --------------------------------------------------------

class Limit(str, enum.Enum):
    ZERO = "zero"
    FINITE = "finite"
    DIVERGENT = "divergent"


def default_mu_ladder() -> np.ndarray:
    """Nine values from 1e-2 down to 1e-6, two per decade."""
    return 10.0 ** np.arange(-2.0, -6.01, -0.5)


def _wynn(g, order):
    """Shanks transform of order ``order`` on the last ``2*order + 1`` terms of a scalar sequence."""
    g = np.asarray(g, dtype=float)[-(2 * order + 1):]
    prev, cur = np.zeros(g.size + 1), g
    for _ in range(2 * order):
        d = np.diff(cur)
        if np.any(d == 0):
            return math.nan
        prev, cur = cur, prev[1:cur.size] + 1.0 / d
    return float(cur[-1])


def _extrapolate(g):
    """Componentwise limit of a convergent sequence of vectors.

    Every power ``mu^beta`` is geometric along a geometric ladder, so the
    epsilon algorithm removes several such terms at once. Components that
    have already settled are taken as they stand.
    """
    out = np.empty(g.shape[1])
    for k in range(g.shape[1]):
        col = g[:, k]
        scale = max(1.0, abs(col[-1]))
        if np.max(np.abs(np.diff(col[-4:]))) <= 1e-9 * scale:
            out[k] = col[-1]
            continue
        for order in (3, 2, 1):
            if col.size < 2 * order + 1:
                continue
            val = _wynn(col, order)
            if math.isfinite(val):
                out[k] = val
                break
        else:
            out[k] = col[-1]
    return out


@dataclass
class ApproachPath:
    moment: float
    c: float
    alpha: float
    direction: list
    limit: list | None
    divergent: bool
    reason: str = ""


@dataclass
class ImpulseLimitReport:
    """Classification of ``lim I/mu`` with the evidence behind it.

    ``I0`` is the common limit (finite case), ``spread`` the largest
    componentwise disagreement between path limits, ``tail_mean`` the plain
    mean of ``I/mu`` over the smallest-``mu`` decade of samples.
    """

    classification: Limit
    I0: np.ndarray | None
    spread: float
    tail_mean: np.ndarray
    tail_tol: float
    evidence: str
    per_moment: list
    paths: list = field(repr=False, default_factory=list)
    samples: list = _hidden(factory=list)

    @property
    def is_zero(self):
        return self.classification is Limit.ZERO

    @property
    def is_finite(self):
        return self.classification is Limit.FINITE

    @property
    def is_divergent(self):
        return self.classification is Limit.DIVERGENT


def _path_limit(values):
    norms = np.linalg.norm(values, axis=1)
    if norms[-1] > 1e8:
        return None, "magnitude exceeds 1e8"
    d = np.linalg.norm(np.diff(values, axis=0), axis=1)
    floor = 1e-9 * max(1.0, norms[-1])
    if d[-1] > floor and d[-1] >= d[-2]:
        return None, f"increments grow along the ladder ({d[-2]:.3g} -> {d[-1]:.3g})"
    return _extrapolate(values), ""


def _classify(paths, tail_tol):
    div = [p for p in paths if p.divergent]
    if div:
        p = div[0]
        return Limit.DIVERGENT, None, math.inf, (
            f"path c={p.c}, alpha={p.alpha}, direction={p.direction} at t={p.moment}: {p.reason}")
    L = np.array([p.limit for p in paths])
    spread = float(np.max(L.max(axis=0) - L.min(axis=0)))
    peak = float(np.max(np.abs(L)))
    if peak <= tail_tol:
        return Limit.ZERO, None, spread, f"largest extrapolated limit {peak:.3g} <= {tail_tol:g}"
    if spread < 10 * tail_tol:
        return Limit.FINITE, L.mean(axis=0), spread, f"path limits agree within {spread:.3g}"
    return Limit.DIVERGENT, None, spread, f"limits depend on the approach path (spread {spread:.3g})"


def impulse_limit(model: SystemModel, rootmap: RootMap, which: str = "primary",
                  reduced: ReducedTrajectory | None = None,
                  c_values: Sequence[float] = (0.5, 1.0, 2.0),
                  alphas: Sequence[float] = (0.5, 1.0, 2.0),
                  directions: Sequence | None = None, mu_ladder=None,
                  tail_tol: float = TAIL_TOL) -> ImpulseLimitReport:
    """Classify ``I(z, y, mu) / mu`` near ``(phi, ybar, 0)`` at every impulse moment.

    ``which`` selects the primary (``"primary"``) or auxiliary (``"aux"``)
    fast impulse. Along each path ``z = phi + c mu^alpha d`` the values on
    the ladder are extrapolated to ``mu -> 0``; a path whose increments stop
    shrinking is divergent. All limits below ``tail_tol`` give ``ZERO``,
    limits agreeing within ``10 * tail_tol`` give ``FINITE`` with their mean
    as ``I0``, and anything else is ``DIVERGENT``.
    """
    if which == "primary":
        fn = model.I
        moments = list(model.theta)
    elif which in ("aux", "auxiliary"):
        fn = model.J_fast_aux
        moments = [v for lst in model.tau_aux for v in lst]
    else:
        raise ValueError(f"which must be 'primary' or 'aux', got {which!r}")
    if fn is None:
        raise ValueError(f"model has no {which} fast impulse")
    if not moments:
        moments = [0.0]
    m, n = model.fast_dim, model.slow_dim
    if n and reduced is None:
        raise ValueError("a reduced trajectory is required when slow variables are present")
    ladder = default_mu_ladder() if mu_ladder is None else np.asarray(mu_ladder, dtype=float)
    if ladder.size < 3 or np.any(np.diff(ladder) >= 0) or ladder[-1] <= 0:
        raise ValueError("mu ladder must be positive, strictly decreasing, length >= 3")
    if directions is None:
        basis = list(np.eye(m))
        if m > 1:
            basis.append(np.ones(m) / math.sqrt(m))
        directions = [s * d for d in basis for s in (1.0, -1.0)]
    directions = [np.asarray(d, dtype=float).reshape(-1) for d in directions]

    rm = rootmap.clone()
    rm.reset()
    decade = ladder <= 10 * ladder[-1] * (1 + 1e-12)
    paths, samples, tail_vals, per_moment = [], [], [], []
    for t in moments:
        y = reduced.ybar(t) if n else np.zeros(0)
        phi = rm(y, t)
        mpaths = []
        for c in c_values:
            for a in alphas:
                for d in directions:
                    vals, reason = [], ""
                    for mu in ladder:
                        z = phi + c * mu ** a * d
                        try:
                            v = np.asarray(fn(z, y, mu), dtype=float) / mu
                        except ArithmeticError as exc:
                            reason = f"evaluation failed at mu={mu:g}: {exc}"
                            break
                        if not np.all(np.isfinite(v)):
                            reason = f"non-finite value at mu={mu:g}"
                            break
                        vals.append(v)
                        samples.append((z, y, float(mu), v))
                    if reason:
                        limit = None
                    else:
                        vals = np.array(vals)
                        tail_vals.extend(vals[decade])
                        limit, reason = _path_limit(vals)
                    p = ApproachPath(float(t), float(c), float(a), d.tolist(),
                                     None if limit is None else limit.tolist(),
                                     limit is None, reason)
                    mpaths.append(p)
        cls, I0, spread, _ = _classify(mpaths, tail_tol)
        per_moment.append({"moment": float(t), "classification": cls.value,
                           "I0": None if I0 is None else I0.tolist(), "spread": spread})
        paths.extend(mpaths)

    cls, I0, spread, evidence = _classify(paths, tail_tol)
    tail_mean = np.mean(tail_vals, axis=0) if tail_vals else np.full(m, math.nan)
    return ImpulseLimitReport(cls, I0, spread, tail_mean, tail_tol, evidence, per_moment,
                              paths, samples)


# -- attraction ------------------------------------------------------------

@dataclass
class AttractionReport:
    attracted: bool
    final_distance: float
    entry_tau: float | None
    min_distance: float
    stayed_in_region: bool
    diverged: bool
    tau_budget: float
    eps_attr: float
    evidence: str = ""


def attraction_check(model: SystemModel, rootmap: RootMap, z0, frozen: tuple | None = None,
                     tau_budget: float = 50.0, eps_attr: float = EPS_ATTR,
                     rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> AttractionReport:
    """Does the frozen fast flow from ``z0`` settle on ``phi(y0, t0)``?

    The shifted system ``dx/dtau = F(x + phi, y0, t0)`` is integrated over
    ``[0, tau_budget]``. Attracted means the distance drops below
    ``eps_attr``, stays there until the budget runs out, and the path never
    leaves the fast region.
    """
    if not tau_budget > 0:
        raise ValueError("tau_budget must be positive")
    if frozen is None:
        if model.slow_dim:
            raise ValueError("frozen (y0, t0) is required when slow variables are present")
        frozen = (np.zeros(0), 0.0)
    y, t = np.asarray(frozen[0], dtype=float).reshape(-1), float(frozen[1])
    rm = rootmap.clone()
    rm.reset()
    phi = rm(y, t)
    z0 = np.asarray(z0, dtype=float).reshape(-1)
    try:
        adj = integrate_rescaled(model, (y, t), z0 - phi, tau_budget, shift=phi, rtol=rtol, atol=atol)
    except IntegrationError as exc:
        return AttractionReport(False, math.inf, None, math.inf, False, True, float(tau_budget),
                                eps_attr, f"integration stopped near tau={exc.t_last}: {exc}")
    seg = adj.segments[0]
    grid = np.union1d(seg.t, np.linspace(0.0, tau_budget, 2001))
    x = adj(grid)
    dist = np.linalg.norm(x, axis=1)
    bound = model.region.fast_bound
    inside = bool(np.all(np.linalg.norm(x + phi, axis=1) < bound))
    below = dist < eps_attr
    entry = None
    if below[-1]:
        outside = np.flatnonzero(~below)
        entry = float(grid[outside[-1] + 1]) if outside.size else 0.0
    attracted = entry is not None and inside
    evidence = ""
    if not inside:
        evidence = "path leaves the fast region"
    elif entry is None:
        evidence = f"distance {dist[-1]:.3g} at tau={tau_budget:g} is not below {eps_attr:g}"
    return AttractionReport(attracted, float(dist[-1]), entry, float(dist.min()), inside, False,
                            float(tau_budget), eps_attr, evidence)


# -- convergence -----------------------------------------------------------

def exclusion_width(mu: float, epsilon: float = LAYER_EPS) -> float:
    """Default layer-exclusion width ``10 mu ln(1/epsilon)``."""
    return 10.0 * mu * math.log(1.0 / epsilon)


@dataclass
class ConvergenceReport:
    mu_values: list
    distances: list
    fast_distances: list
    slow_distances: list | None
    widths: list
    mode: str
    epsilon: float
    slow_offset: float
    order: float | None
    argmax_t: list


def _evaluation_points(traj: Trajectory, grid_per_segment: int):
    """Step nodes plus a uniform grid, sorted, with right-limit flags."""
    t1, w1, k1 = traj.nodes()
    t2, w2, k2 = traj.sample(grid_per_segment)
    t = np.concatenate([t1, t2])
    w = np.concatenate([w1, w2])
    k = np.concatenate([k1, k2])
    starts = traj.breaks[:-1]
    right = (k > 0) & (t == starts[k])
    order = np.lexsort((right, t))
    return t[order], w[order], right[order]


def _reduced_states(reduced, t, right):
    zb = np.empty((t.size, reduced.fast_dim))
    yb = np.empty((t.size, reduced.slow_dim))
    rm = reduced.rootmap
    for i, (s, r) in enumerate(zip(t, right)):
        y = reduced.ybar(s, right=bool(r))
        yb[i] = y
        zb[i] = rm(y, s)
    return zb, yb


def convergence_study(model: SystemModel, rootmap: RootMap, init: InitialState, mu_ladder,
                      width: float | None = None, mode: str = "single",
                      epsilon: float = LAYER_EPS, slow_offset: float = 0.0,
                      rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                      grid_per_segment: int = 200,
                      reduced: ReducedTrajectory | None = None) -> ConvergenceReport:
    """Sup distances between full and reduced solutions over a ``mu`` ladder.

    The fast distance is taken over ``[w, T]``; in ``"multi"`` mode the
    intervals ``(theta_i, theta_i + w]`` (post-jump values included) are
    left out as well. ``w`` defaults to :func:`exclusion_width`. The slow
    distance is taken over ``[slow_offset, T]``. ``order`` is the slope of
    ``log d`` against ``log mu``.
    """
    mus = [float(v) for v in np.atleast_1d(mu_ladder)]
    if not mus or any(v <= 0 for v in mus) or any(b >= a for a, b in zip(mus, mus[1:])):
        raise ValueError("mu ladder must be positive and strictly decreasing")
    if mode not in ("single", "multi"):
        raise ValueError(f"mode must be 'single' or 'multi', got {mode!r}")
    if reduced is None:
        reduced = integrate_reduced(model, rootmap, init.y0, rtol=rtol, atol=atol)
    m, n = model.fast_dim, model.slow_dim
    theta = np.array(model.theta)

    dist, dfast, dslow, widths, where = [], [], [], [], []
    for mu in mus:
        traj = integrate_full(model, SimulationParams(mu, rtol=rtol, atol=atol), init)
        t, w, right = _evaluation_points(traj, grid_per_segment)
        zb, yb = _reduced_states(reduced, t, right)
        wd = exclusion_width(mu, epsilon) if width is None else float(width)
        widths.append(wd)
        if mode == "multi" and theta.size:
            idx = np.where(right, np.searchsorted(theta, t, side="right"),
                           np.searchsorted(theta, t, side="left"))
            last = np.where(idx > 0, theta[np.maximum(idx - 1, 0)], 0.0)
            fast_mask = t - last >= wd
        else:
            fast_mask = t >= wd
        ez = np.linalg.norm(w[:, :m] - zb, axis=1)
        df = float(ez[fast_mask].max()) if fast_mask.any() else math.nan
        at = float(t[fast_mask][np.argmax(ez[fast_mask])]) if fast_mask.any() else math.nan
        ds = None
        if n:
            slow_mask = t >= slow_offset
            ey = np.linalg.norm(w[:, m:] - yb, axis=1)
            ds = float(ey[slow_mask].max())
        dfast.append(df)
        dslow.append(ds)
        dist.append(df if ds is None else max(df, ds))
        where.append(at)

    order = None
    d = np.array(dist)
    if len(mus) >= 2 and np.all(np.isfinite(d)) and np.all(d > 0):
        order = float(np.polyfit(np.log(mus), np.log(d), 1)[0])
    return ConvergenceReport(mus, dist, dfast, dslow if n else None, widths, mode, epsilon,
                             slow_offset, order, where)


# -- layers ----------------------------------------------------------------

@dataclass
class Layer:
    reset: float
    offset: float
    thickness: float
    closed_at: float


@dataclass
class LayerReport:
    epsilon: float
    dwell: int
    spacing: float
    layers: list

    @property
    def count(self):
        return len(self.layers)

    @property
    def thicknesses(self):
        return [ly.thickness for ly in self.layers]


def detect_layers(full: Trajectory, reduced: ReducedTrajectory, epsilon: float = LAYER_EPS,
                  dwell: int = DWELL, spacing: float | None = None) -> LayerReport:
    """Find the intervals where the fast offset ``|z - zbar|`` exceeds ``epsilon``.

    Both solutions are compared on one grid per segment (spacing ``mu/20``
    by default) that includes the post-jump value at every moment. A layer
    opens at ``t = 0`` and at each moment where the post-jump offset exceeds
    ``epsilon``; it closes at the first grid time from which the offset stays
    within ``epsilon`` for ``dwell`` consecutive points.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if dwell < 1:
        raise ValueError("dwell must be at least 1")
    segs = full.segments
    if spacing is None:
        if full.mu:
            spacing = full.mu / 20
        else:
            spacing = min(s.end - s.start for s in segs if s.end > s.start) / 200
    m = full.fast_dim
    ts, offs, heads = [], [], []
    pos = 0
    for k, seg in enumerate(segs):
        npts = max(2, int(math.ceil((seg.end - seg.start) / spacing)) + 1)
        g = np.linspace(seg.start, seg.end, npts)
        z = seg(g)[:, :m]
        right = np.zeros(npts, dtype=bool)
        right[0] = k > 0
        zb, _ = _reduced_states(reduced, g, right)
        ts.append(g)
        offs.append(np.linalg.norm(z - zb, axis=1))
        heads.append(pos)
        pos += npts
    t = np.concatenate(ts)
    off = np.concatenate(offs)
    ok = off <= epsilon

    # run[i]: length of the run of in-tube points starting at i
    run = np.zeros(t.size + 1, dtype=int)
    for i in range(t.size - 1, -1, -1):
        run[i] = run[i + 1] + 1 if ok[i] else 0

    layers = []
    for h in heads:
        if ok[h]:
            continue
        j = h + 1
        while j < t.size and not (ok[j] and (run[j] >= dwell or j + run[j] == t.size)):
            j += 1
        if j >= t.size:
            raise UnclosedLayer(float(t[h]), float(t[-1]))
        layers.append(Layer(float(t[h]), float(off[h]), float(t[j] - t[h]), float(t[j])))
    assert len(layers) <= len(full.jumps) + 1
    return LayerReport(float(epsilon), int(dwell), float(spacing), layers)


@dataclass
class ScalingRow:
    reset: float
    thickness_1: float
    thickness_2: float
    ratio: float


def layer_scaling(model: SystemModel, rootmap: RootMap, init: InitialState, epsilon: float,
                  mu_pair: tuple[float, float], dwell: int = DWELL,
                  rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                  reduced: ReducedTrajectory | None = None) -> list[ScalingRow]:
    """Thickness ratios ``t*(mu1) / t*(mu2)`` of the layers found at both ``mu`` values.

    Layers are matched by their reset time; a layer present at only one
    value is left out.
    """
    mu1, mu2 = (float(v) for v in mu_pair)
    if reduced is None:
        reduced = integrate_reduced(model, rootmap, init.y0, rtol=rtol, atol=atol)
    reports = []
    for mu in (mu1, mu2):
        traj = integrate_full(model, SimulationParams(mu, rtol=rtol, atol=atol), init)
        reports.append(detect_layers(traj, reduced, epsilon, dwell))
    second = {ly.reset: ly for ly in reports[1].layers}
    rows = []
    for ly in reports[0].layers:
        other = second.get(ly.reset)
        if other is None:
            continue
        ratio = ly.thickness / other.thickness if other.thickness > 0 else math.nan
        if ly.thickness == other.thickness:
            ratio = 1.0
        rows.append(ScalingRow(ly.reset, ly.thickness, other.thickness, ratio))
    return rows


# -- condition summary -----------------------------------------------------

@dataclass
class ConditionReport:
    """Outcome per checked condition: ``pass``, ``fail``, ``n/a`` or ``not-checkable``."""

    entries: list
    impulse: ImpulseLimitReport | None = None
    aux_impulse: ImpulseLimitReport | None = None
    lyapunov: LyapunovReport | None = None
    attraction: AttractionReport | None = None

    @property
    def failed(self):
        return [e for e in self.entries if e["status"] == "fail"]

    @property
    def passed(self):
        return not self.failed


# conventional hypothesis labels: fast-only systems, then systems with slow variables
_LABELS_FAST = {"lyapunov": "C1", "impulse_zero": "C2", "impulse_finite": "C3",
                "aux_impulse_zero": "C4", "attraction": "C3", "root": "C3",
                "degenerate_impulse": "C2", "smoothness": ""}
_LABELS_SLOW = {"smoothness": "A1", "root": "A2", "degenerate_impulse": "A2",
                "root_continuity": "A3", "lyapunov": "A4", "attraction": "A5",
                "impulse_zero": "A6", "impulse_finite": "A7", "aux_impulse_zero": "A8"}


def check_conditions(model: SystemModel, rootmap: RootMap, init: InitialState,
                     lyapunov: LyapunovSpec | None = None, tau_budget: float = 50.0,
                     tail_tol: float = TAIL_TOL, seed: int = 0,
                     rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> ConditionReport:
    """Run every automatic check that applies to ``model``.

    Conditions that cannot be verified by sampling (smoothness, global
    existence) are listed as ``not-checkable``.
    """
    entries = []
    n = model.slow_dim
    labels = _LABELS_SLOW if n else _LABELS_FAST

    def add(cid, status, detail):
        entries.append({"id": cid, "label": labels.get(cid, ""), "status": status, "detail": detail})

    reduced = None
    try:
        reduced = integrate_reduced(model, rootmap, init.y0, rtol=rtol, atol=atol)
    except (RootError, IntegrationError) as exc:
        add("root", "fail", f"reduced problem failed: {exc}")
    add("smoothness", "not-checkable", "continuity and Lipschitz bounds are assumed")

    if reduced is not None:
        rm = rootmap.clone()
        rm.reset()
        phi0 = rm(init.y0, 0.0)
        res, isolated = rm.isolation_probe(init.y0, 0.0)
        add("root", "pass" if isolated else "fail",
            f"phi(y0, 0) = {phi0.tolist()}, smallest residual at isolation radius {res:.3g}")
        if model.theta:
            gaps = check_degenerate_impulse(model, rootmap, reduced)
            add("degenerate_impulse", "pass" if np.all(gaps <= 1e-10) else "fail",
                f"max |I(phi, ybar, 0)| = {float(gaps.max()):.3g}")
        if n and model.eta:
            gaps = check_root_continuity(reduced)
            add("root_continuity", "pass" if np.all(gaps <= 1e-8) else "fail",
                f"max root gap at slow moments = {float(gaps.max()):.3g}")

    lyap = None
    if lyapunov is None:
        add("lyapunov", "not-checkable", "no Lyapunov candidate supplied")
    elif reduced is not None or n == 0:
        lyap = lyapunov_check(model, rootmap, lyapunov, reduced=reduced, seed=seed)
        add("lyapunov", "pass" if lyap.passed else "fail",
            f"{lyap.n_violations} violations in {lyap.n_samples} samples")

    att = None
    if reduced is not None or n == 0:
        att = attraction_check(model, rootmap, init.z0, (init.y0, 0.0), tau_budget, rtol=rtol, atol=atol)
        add("attraction", "pass" if att.attracted else "fail",
            f"distance {att.final_distance:.3g} after tau={tau_budget:g}" + (
                f"; {att.evidence}" if att.evidence else ""))

    imp = None
    if model.I is not None and (reduced is not None or n == 0):
        imp = impulse_limit(model, rootmap, "primary", reduced=reduced, tail_tol=tail_tol)
        if imp.is_zero:
            add("impulse_zero", "pass", imp.evidence)
            add("impulse_finite", "n/a", "impulse limit is zero")
        elif imp.is_finite:
            add("impulse_zero", "n/a", "impulse limit is finite")
            fails = []
            for i, th in enumerate(model.theta):
                y = reduced.ybar(th) if n else np.zeros(0)
                phi = rootmap.clone()
                phi.reset()
                start = phi(y, th) + imp.I0
                a = attraction_check(model, rootmap, start, (y, th), tau_budget, rtol=rtol, atol=atol)
                if not a.attracted:
                    fails.append(th)
            add("impulse_finite", "fail" if fails else "pass",
                f"I0 = {imp.I0.tolist()}" + (f"; phi + I0 not attracted at {fails}" if fails else
                                              "; phi + I0 attracted at every moment"))
        else:
            add("impulse_zero", "fail", imp.evidence)
            add("impulse_finite", "fail", imp.evidence)

    aux = None
    if model.J_fast_aux is not None and any(model.tau_aux) and (reduced is not None or n == 0):
        aux = impulse_limit(model, rootmap, "aux", reduced=reduced, tail_tol=tail_tol)
        add("aux_impulse_zero", "pass" if aux.is_zero else "fail", aux.evidence)

    return ConditionReport(entries, imp, aux, lyap, att)


# -- serialisation ---------------------------------------------------------

def to_jsonable(obj):
    """Plain JSON data for reports; field order follows the dataclass."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {}
        for f in dataclasses.fields(obj):
            if f.metadata.get("json", True):
                out[f.name] = to_jsonable(getattr(obj, f.name))
        return out
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def report_to_json(report) -> str:
    return json.dumps(to_jsonable(report), indent=2, allow_nan=False) + "\n"


def _fmt(x):
    return "" if x is None else format(float(x), ".17g")


def write_convergence_csv(report: ConvergenceReport, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["mu", "distance", "fast_distance", "slow_distance", "width", "argmax_t"])
    slow = report.slow_distances or [None] * len(report.mu_values)
    for row in zip(report.mu_values, report.distances, report.fast_distances, slow,
                   report.widths, report.argmax_t):
        w.writerow([_fmt(v) for v in row])


def write_layers_csv(report: LayerReport, fh, mu: float | None = None):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["mu", "reset", "offset", "thickness", "closed_at"])
    for ly in report.layers:
        w.writerow([_fmt(mu), _fmt(ly.reset), _fmt(ly.offset), _fmt(ly.thickness), _fmt(ly.closed_at)])


def write_scaling_csv(rows: Sequence[ScalingRow], fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["reset", "thickness_1", "thickness_2", "ratio"])
    for r in rows:
        w.writerow([_fmt(r.reset), _fmt(r.thickness_1), _fmt(r.thickness_2), _fmt(r.ratio)])

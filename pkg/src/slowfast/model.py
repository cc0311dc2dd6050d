"""Data model for slow-fast systems with singular impulses.

The general form handled here is::

    mu z' = F(z, y, t)       z(theta_i+) = z(theta_i) + I(z, y, mu) / mu
                             z(tau_j^i+) = z(tau_j^i) + Jaux(z, y, mu) / mu
       y' = f(z, y, t)       y(eta_j+)   = y(eta_j)   + J(z, y)

with ``z`` of dimension ``m`` (fast) and ``y`` of dimension ``n`` (slow,
possibly zero). All impulse moments are fixed times in ``(0, T)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (DimensionMismatch, MomentCollision, MomentOutOfRange,
                     ModelError, NonFiniteEvaluation)

__all__ = [
    "SystemModel", "RegionSpec", "InitialState", "EventKind", "Event",
    "validate_system", "moments_in_order",
]


@dataclass(frozen=True)
class RegionSpec:
    """Bounds ``|z| < fast_bound``, ``|y| <= slow_bound`` over ``[0, T]``."""

    fast_bound: float = math.inf
    slow_bound: float = math.inf

    def __post_init__(self):
        if not (self.fast_bound > 0 and self.slow_bound > 0):
            raise ValueError("region bounds must be positive")

    def contains(self, z, y) -> bool:
        return bool(np.linalg.norm(z) < self.fast_bound and np.linalg.norm(y) <= self.slow_bound)


@dataclass(frozen=True)
class InitialState:
    z0: np.ndarray
    y0: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "z0", np.array(self.z0, dtype=float).reshape(-1))
        object.__setattr__(self, "y0", np.array(self.y0, dtype=float).reshape(-1))
        if self.t0 != 0.0:
            raise ValueError("initial time must be 0")
        if not (np.all(np.isfinite(self.z0)) and np.all(np.isfinite(self.y0))):
            raise ValueError("initial state must be finite")

    def check(self, model: "SystemModel"):
        if self.z0.size != model.fast_dim or self.y0.size != model.slow_dim:
            raise DimensionMismatch(
                f"initial state has dims ({self.z0.size}, {self.y0.size}), "
                f"model has ({model.fast_dim}, {model.slow_dim})")
        if not model.region.contains(self.z0, self.y0):
            raise ValueError("initial state lies outside the model region")
        return self


@dataclass(frozen=True, eq=False)
class SystemModel:
    """A validated slow-fast impulsive system. Build through :func:`validate_system`."""

    fast_dim: int
    slow_dim: int
    F: Callable
    f: Callable | None
    I: Callable | None
    J_slow: Callable | None
    J_fast_aux: Callable | None
    theta: tuple[float, ...]
    eta: tuple[float, ...]
    tau_aux: tuple[tuple[float, ...], ...]
    horizon: float
    region: RegionSpec = RegionSpec()
    names: tuple[tuple[str, ...], tuple[str, ...]] | None = None

    def __eq__(self, other):
        if not isinstance(other, SystemModel):
            return NotImplemented
        return all(getattr(self, f.name) == getattr(other, f.name) for f in fields(self))

    __hash__ = object.__hash__

    @property
    def fast_names(self):
        if self.names:
            return self.names[0]
        return tuple(f"z{k + 1}" for k in range(self.fast_dim))

    @property
    def slow_names(self):
        if self.names:
            return self.names[1]
        return tuple(f"y{k + 1}" for k in range(self.slow_dim))

    # vectorised evaluation helpers; all return float arrays of the declared size

    def eval_F(self, z, y, t):
        return np.asarray(self.F(z, y, t), dtype=float)

    def eval_f(self, z, y, t):
        if self.slow_dim == 0:
            return np.zeros(0)
        return np.asarray(self.f(z, y, t), dtype=float)

    def eval_I(self, z, y, mu):
        if self.I is None:
            return np.zeros(self.fast_dim)
        return np.asarray(self.I(z, y, mu), dtype=float)

    def eval_J_slow(self, z, y):
        if self.J_slow is None:
            return np.zeros(self.slow_dim)
        return np.asarray(self.J_slow(z, y), dtype=float)

    def eval_J_fast_aux(self, z, y, mu):
        if self.J_fast_aux is None:
            return np.zeros(self.fast_dim)
        return np.asarray(self.J_fast_aux(z, y, mu), dtype=float)


class EventKind(str, enum.Enum):
    FAST_PRIMARY = "fast"
    FAST_AUX = "fast_aux"
    SLOW = "slow"


class Event(NamedTuple):
    time: float
    kind: EventKind
    index: int  # position within its own schedule (theta, eta or flattened tau)


def _moments(values, label, T):
    if callable(values):
        raise ModelError(f"{label} must be a list of fixed times; state-dependent moments are not supported")
    out = tuple(float(v) for v in values)
    for v in out:
        if not (0.0 < v < T):
            raise MomentOutOfRange(f"{label} moment {v!r} is not in (0, {T!r})")
    if len(set(out)) != len(out):
        dup = sorted(v for v in set(out) if out.count(v) > 1)
        raise MomentCollision(f"duplicate {label} moments {dup}")
    return tuple(sorted(out))


def _sample_points(m, n, T):
    zs = [np.zeros(m), np.linspace(0.1, 0.2, m), -np.linspace(0.05, 0.15, m)]
    ys = [np.zeros(n), np.linspace(0.5, 1.0, n), -np.linspace(0.1, 0.3, n)]
    ts = [0.0, 0.5 * T, T]
    return [(z, y, t) for z, y, t in zip(zs, ys, ts)]


def _check_handle(fn, label, args_list, dim):
    for args in args_list:
        try:
            val = np.asarray(fn(*args), dtype=float)
        except ArithmeticError as exc:
            raise NonFiniteEvaluation(f"{label} failed at sample point: {exc}") from None
        if val.shape != (dim,):
            raise DimensionMismatch(f"{label} returned shape {val.shape}, expected ({dim},)")
        if not np.all(np.isfinite(val)):
            raise NonFiniteEvaluation(f"{label} is not finite at sample point {args}")


def validate_system(raw_spec: Mapping[str, Any] | SystemModel,
                    sample_points: Sequence[tuple] | None = None) -> SystemModel:
    """Check a raw system description and return an immutable :class:`SystemModel`.

    ``raw_spec`` is a mapping with keys ``fast_dim, slow_dim, F, f, I, J_slow,
    J_fast_aux, theta, eta, tau_aux, horizon`` and optionally ``region`` and
    ``names``; a :class:`SystemModel` is accepted too and re-validated.
    Handles are evaluated at a few sample points ``(z, y, t)`` to catch
    dimension errors and non-finite output.
    """
    if isinstance(raw_spec, SystemModel):
        raw = {f.name: getattr(raw_spec, f.name) for f in fields(raw_spec)}
    else:
        raw = dict(raw_spec)
    raw.setdefault("f", None)
    raw.setdefault("I", None)
    raw.setdefault("J_slow", None)
    raw.setdefault("J_fast_aux", None)
    raw.setdefault("theta", ())
    raw.setdefault("eta", ())
    raw.setdefault("tau_aux", None)
    if "slow_dim" not in raw:
        raw["slow_dim"] = 0
    missing = [k for k in ("fast_dim", "F", "horizon") if raw.get(k) is None]
    if missing:
        raise ModelError(f"system description lacks {', '.join(missing)}")

    m, n = raw["fast_dim"], raw["slow_dim"]
    if not (isinstance(m, (int, np.integer)) and m >= 1):
        raise DimensionMismatch(f"fast_dim must be a positive integer, got {m!r}")
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise DimensionMismatch(f"slow_dim must be a non-negative integer, got {n!r}")
    m, n = int(m), int(n)
    T = float(raw["horizon"])
    if not (T > 0 and math.isfinite(T)):
        raise ValueError(f"horizon must be positive and finite, got {T!r}")

    if n == 0:
        for key in ("f", "J_slow"):
            if raw[key] is not None:
                raise DimensionMismatch(f"{key} given for a system without slow variables")
        if len(raw["eta"]):
            raise DimensionMismatch("slow impulse moments given for a system without slow variables")
    elif raw["f"] is None:
        raise ModelError("slow right-hand side f is required when slow_dim > 0")

    theta = _moments(raw["theta"], "theta", T)
    eta = _moments(raw["eta"], "eta", T)
    if len(theta) and raw["I"] is None:
        raise ModelError("theta moments given without an impulse map I")
    if len(eta) and raw["J_slow"] is None:
        raise ModelError("eta moments given without a slow impulse map J")

    tau_in = raw["tau_aux"]
    if tau_in is None or len(tau_in) == 0:
        tau_aux = tuple(() for _ in theta)
    else:
        if len(tau_in) != len(theta):
            raise DimensionMismatch(
                f"tau_aux needs one list per theta moment ({len(theta)}), got {len(tau_in)}")
        tau_aux = []
        for i, lst in enumerate(tau_in):
            lst = _moments(lst, f"tau_aux[{i}]", T)
            upper = theta[i + 1] if i + 1 < len(theta) else T
            for v in lst:
                if not (theta[i] < v < upper):
                    raise MomentOutOfRange(
                        f"auxiliary moment {v!r} is not between theta_{i + 1}={theta[i]!r} and {upper!r}")
            tau_aux.append(lst)
        tau_aux = tuple(tau_aux)
    if any(tau_aux) and raw["J_fast_aux"] is None:
        raise ModelError("auxiliary moments given without an auxiliary impulse map")

    every = list(theta) + list(eta) + [v for lst in tau_aux for v in lst]
    if len(set(every)) != len(every):
        dup = sorted(v for v in set(every) if every.count(v) > 1)
        raise MomentCollision(f"impulse moments coincide across schedules: {dup}")

    region = raw.get("region") or RegionSpec()
    if isinstance(region, Mapping):
        region = RegionSpec(**region)

    names = raw.get("names")
    if names is not None:
        names = (tuple(names[0]), tuple(names[1]))
        if len(names[0]) != m or len(names[1]) != n:
            raise DimensionMismatch("variable name lists do not match the dimensions")

    pts = list(sample_points) if sample_points is not None else _sample_points(m, n, T)
    _check_handle(raw["F"], "F", pts, m)
    if n:
        _check_handle(raw["f"], "f", pts, n)
    if raw["I"] is not None:
        _check_handle(raw["I"], "I", [(z, y, 0.1) for z, y, _ in pts], m)
    if raw["J_slow"] is not None:
        _check_handle(raw["J_slow"], "J", [(z, y) for z, y, _ in pts], n)
    if raw["J_fast_aux"] is not None:
        _check_handle(raw["J_fast_aux"], "J_fast_aux", [(z, y, 0.1) for z, y, _ in pts], m)

    return SystemModel(
        fast_dim=m, slow_dim=n, F=raw["F"], f=raw["f"], I=raw["I"],
        J_slow=raw["J_slow"], J_fast_aux=raw["J_fast_aux"],
        theta=theta, eta=eta, tau_aux=tau_aux, horizon=T,
        region=region, names=names,
    )


def moments_in_order(model: SystemModel) -> list[Event]:
    """All impulse events of ``model`` merged into one increasing list."""
    events = [Event(t, EventKind.FAST_PRIMARY, i) for i, t in enumerate(model.theta)]
    events += [Event(t, EventKind.SLOW, j) for j, t in enumerate(model.eta)]
    k = 0
    for lst in model.tau_aux:
        for t in lst:
            events.append(Event(t, EventKind.FAST_AUX, k))
            k += 1
    events.sort(key=lambda e: e.time)
    return events

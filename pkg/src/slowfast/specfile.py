"""Reader for ``.spec`` system description files.

A spec file is an INI-style document (read with :mod:`configparser`, key
case preserved). Example, the two-dimensional fast system with a
vanishing impulse limit::

    [system]
    dims = 2 0
    horizon = 11/3
    fast = x1, x2

    [fast_field]
    x1 = -x1 + x2
    x2 = -x1 - x2

    [fast_impulse]
    x1 = -2*mu*x1
    x2 = mu*sin(cbrt(x2) + mu)

    [moments]
    theta = i/3 for i in 1..10

    [initial]
    x1 = 1.5
    x2 = -1.5

    [root]
    x1 = 0
    x2 = 0

    [lyapunov]
    V = x1^2 + x2^2

Sections
--------
system        ``dims = m n``, ``horizon``, ``fast`` and ``slow`` name lists
fast_field    one expression per fast variable (names: fast, slow, ``t``)
slow_field    one expression per slow variable (names: fast, slow, ``t``)
fast_impulse  I, the scaled fast jump (names: fast, slow, ``mu``)
aux_impulse   the auxiliary fast jump at the ``tau.i`` moments (same names)
slow_impulse  J, the slow jump (names: fast, slow)
moments       ``theta``, ``eta`` and ``tau.<i>`` (auxiliary moments after
              theta_i, 1-based); explicit comma lists or ``expr for k in a..b``
initial       initial value of every state variable
root          Newton seed for the root branch, per fast variable, plus
              optional ``isolation_radius``
lyapunov      ``V`` in the shifted fast variables (fast names), slow names
              and ``tau``; optional ``radius`` and ``samples``
region        optional ``fast_bound`` and ``slow_bound``

Numbers anywhere may be constant expressions such as ``11/3``.
"""
from __future__ import annotations

import configparser
import hashlib
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ExprError, SpecFileError
from .expr import Expr, compile_vector, eval_expr, parse_expr, power_warnings
from .model import InitialState, RegionSpec, SystemModel, validate_system

__all__ = ["SpecDocument", "parse_spec", "load_spec", "bundled_spec_path", "parse_moments"]

RESERVED = {"t", "mu", "tau"}
_PROGRESSION = re.compile(
    r"^(?P<expr>.+?)\s+for\s+(?P<var>[A-Za-z_]\w*)\s+in\s+(?P<a>-?\d+)\s*\.\.\s*(?P<b>-?\d+)\s*$")


@dataclass
class SpecDocument:
    """Parsed spec file: the validated model plus run inputs."""

    model: SystemModel
    raw: dict
    exprs: dict[str, list[Expr]]
    fast_names: tuple[str, ...]
    slow_names: tuple[str, ...]
    init: InitialState | None = None
    root_guess: np.ndarray | None = None
    isolation_radius: float = 1e-3
    lyapunov: Expr | None = None
    lyapunov_radius: float | None = None
    lyapunov_samples: int | None = None
    warnings: list[str] = field(default_factory=list)
    sha256: str = ""


def _const(text, what):
    try:
        return eval_expr(parse_expr(text, names=()), {})
    except ExprError as exc:
        raise SpecFileError(f"{what}: {exc}") from None


def _names(text):
    out = tuple(s.strip() for s in text.split(",") if s.strip())
    for nm in out:
        if not re.fullmatch(r"[A-Za-z_]\w*", nm):
            raise SpecFileError(f"invalid variable name {nm!r}")
        if nm in RESERVED:
            raise SpecFileError(f"variable name {nm!r} is reserved")
    return out


def parse_moments(text: str) -> list[float]:
    """``"1/3, 2/3"`` or ``"i/3 for i in 1..10"`` -> list of floats."""
    text = text.strip()
    if not text:
        return []
    m = _PROGRESSION.match(text)
    if m:
        var = m.group("var")
        e = parse_expr(m.group("expr"), names=(var,))
        a, b = int(m.group("a")), int(m.group("b"))
        return [eval_expr(e, {var: k}) for k in range(a, b + 1)]
    return [_const(part, "moment") for part in text.split(",") if part.strip()]


def _section_exprs(cfg, section, keys, names, required):
    if not cfg.has_section(section):
        if required:
            raise SpecFileError(f"missing section [{section}]")
        return None
    sec = cfg[section]
    extra = set(sec) - set(keys)
    if extra:
        raise SpecFileError(f"[{section}] has unknown entries {sorted(extra)}")
    out = []
    for k in keys:
        if k not in sec:
            raise SpecFileError(f"[{section}] lacks an expression for {k!r}")
        try:
            out.append(parse_expr(sec[k], names=names))
        except ExprError as exc:
            raise SpecFileError(f"[{section}] {k}: {exc}") from None
    return out


def parse_spec(text: str, source: str = "<string>") -> SpecDocument:
    cfg = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cfg.optionxform = str
    try:
        cfg.read_string(text, source=source)
    except configparser.Error as exc:
        raise SpecFileError(f"{source}: {exc}") from None
    if not cfg.has_section("system"):
        raise SpecFileError("missing section [system]")
    sysec = cfg["system"]
    fast = _names(sysec.get("fast", ""))
    slow = _names(sysec.get("slow", ""))
    if not fast:
        raise SpecFileError("[system] must list the fast variables")
    if len(set(fast + slow)) != len(fast + slow):
        raise SpecFileError("fast and slow variable names must be distinct")
    if "dims" in sysec:
        try:
            dims = [int(v) for v in sysec["dims"].split()]
        except ValueError:
            raise SpecFileError(f"bad dims {sysec['dims']!r}") from None
        if dims != [len(fast), len(slow)]:
            raise SpecFileError(f"dims {dims} disagree with declared names ({len(fast)}, {len(slow)})")
    if "horizon" not in sysec:
        raise SpecFileError("[system] lacks horizon")
    horizon = _const(sysec["horizon"], "horizon")

    state = fast + slow
    exprs = {
        "fast_field": _section_exprs(cfg, "fast_field", fast, state + ("t",), True),
        "slow_field": _section_exprs(cfg, "slow_field", slow, state + ("t",), bool(slow)),
        "fast_impulse": _section_exprs(cfg, "fast_impulse", fast, state + ("mu",), False),
        "aux_impulse": _section_exprs(cfg, "aux_impulse", fast, state + ("mu",), False),
        "slow_impulse": _section_exprs(cfg, "slow_impulse", slow, state, False),
    }
    exprs = {k: v for k, v in exprs.items() if v is not None}
    if not slow:
        for k in ("slow_field", "slow_impulse"):
            if cfg.has_section(k) and len(cfg[k]):
                raise SpecFileError(f"[{k}] given for a system without slow variables")
            exprs.pop(k, None)

    msgs = []
    for section, lst in exprs.items():
        keys = slow if section.startswith("slow") else fast
        for nm, e in zip(keys, lst):
            msgs.extend(f"[{section}] {nm}: {w}" for w in power_warnings(e))

    groups = [fast, slow]
    raw = {
        "fast_dim": len(fast),
        "slow_dim": len(slow),
        "horizon": horizon,
        "names": (fast, slow),
        "F": compile_vector(exprs["fast_field"], groups, ("t",)),
    }
    if "slow_field" in exprs:
        raw["f"] = compile_vector(exprs["slow_field"], groups, ("t",))
    if "fast_impulse" in exprs:
        raw["I"] = compile_vector(exprs["fast_impulse"], groups, ("mu",))
    if "aux_impulse" in exprs:
        raw["J_fast_aux"] = compile_vector(exprs["aux_impulse"], groups, ("mu",))
    if "slow_impulse" in exprs:
        raw["J_slow"] = compile_vector(exprs["slow_impulse"], groups)

    theta, eta, tau = [], [], {}
    if cfg.has_section("moments"):
        for key, val in cfg["moments"].items():
            try:
                values = parse_moments(val)
            except ExprError as exc:
                raise SpecFileError(f"[moments] {key}: {exc}") from None
            if key == "theta":
                theta = values
            elif key == "eta":
                eta = values
            elif re.fullmatch(r"tau\.\d+", key):
                tau[int(key.split(".")[1])] = values
            else:
                raise SpecFileError(f"[moments] unknown entry {key!r}")
    raw["theta"] = theta
    raw["eta"] = eta
    if tau:
        if min(tau) < 1 or max(tau) > len(theta):
            raise SpecFileError("tau.<i> index must refer to a theta moment (1-based)")
        raw["tau_aux"] = [tau.get(i + 1, []) for i in range(len(theta))]

    if cfg.has_section("region"):
        reg = cfg["region"]
        raw["region"] = RegionSpec(
            fast_bound=_const(reg["fast_bound"], "fast_bound") if "fast_bound" in reg else float("inf"),
            slow_bound=_const(reg["slow_bound"], "slow_bound") if "slow_bound" in reg else float("inf"),
        )

    model = validate_system(raw)
    doc = SpecDocument(model=model, raw=raw, exprs=exprs, fast_names=fast, slow_names=slow,
                       warnings=msgs, sha256=hashlib.sha256(text.encode("utf-8")).hexdigest())

    if cfg.has_section("initial"):
        sec = cfg["initial"]
        missing = [nm for nm in state if nm not in sec]
        if missing:
            raise SpecFileError(f"[initial] lacks {missing}")
        z0 = [_const(sec[nm], f"initial {nm}") for nm in fast]
        y0 = [_const(sec[nm], f"initial {nm}") for nm in slow]
        doc.init = InitialState(z0, y0)
    if cfg.has_section("root"):
        sec = cfg["root"]
        missing = [nm for nm in fast if nm not in sec]
        if missing:
            raise SpecFileError(f"[root] lacks a guess for {missing}")
        doc.root_guess = np.array([_const(sec[nm], f"root {nm}") for nm in fast])
        if "isolation_radius" in sec:
            doc.isolation_radius = _const(sec["isolation_radius"], "isolation_radius")
    if cfg.has_section("lyapunov"):
        sec = cfg["lyapunov"]
        try:
            doc.lyapunov = parse_expr(sec["V"], names=state + ("tau",))
        except KeyError:
            raise SpecFileError("[lyapunov] lacks V") from None
        except ExprError as exc:
            raise SpecFileError(f"[lyapunov] V: {exc}") from None
        if "radius" in sec:
            doc.lyapunov_radius = _const(sec["radius"], "lyapunov radius")
        if "samples" in sec:
            doc.lyapunov_samples = int(_const(sec["samples"], "lyapunov samples"))

    for w in msgs:
        warnings.warn(w, stacklevel=2)
    return doc


def bundled_spec_path(name: str) -> Path | None:
    """Path of a spec shipped with the package (``ex1.spec`` etc.), if any."""
    p = Path(__file__).parent / "specs" / Path(name).name
    return p if p.is_file() else None


def load_spec(path) -> SpecDocument:
    """Read a spec file; bare names of bundled specs resolve to the package copy."""
    p = Path(path)
    if not p.is_file():
        alt = bundled_spec_path(str(path)) if p.parent == Path(".") else None
        if alt is None:
            raise FileNotFoundError(str(path))
        p = alt
    return parse_spec(p.read_text(encoding="utf-8"), source=str(p))

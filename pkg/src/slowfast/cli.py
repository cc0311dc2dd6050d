"""Command-line front end: ``slowfast {simulate,reduce,study,layers,check} SPEC``.

Data files (CSV, report JSON) depend only on the spec and the flags, so two
identical runs give identical bytes. Timestamps and timings go to the
``*_meta.json`` files only.

Exit codes: 0 success, 2 usage or spec error, 3 numerical failure,
4 failed hypothesis check under ``--strict``.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (ConvergenceReport, LyapunovSpec, check_conditions, convergence_study,
                       detect_layers, impulse_limit, layer_scaling, to_jsonable,
                       write_convergence_csv, write_layers_csv, write_scaling_csv)
from .errors import (ExprError, IntegrationError, ModelError, NonFiniteResult, RootError,
                     SlowFastError, SpecFileError, UnclosedLayer)
from .integrator import SimulationParams, integrate_full, write_jumps_csv, write_trajectory_csv
from .reduced import RootMap, check_degenerate_impulse, check_root_continuity, integrate_reduced
from .specfile import load_spec

OUT_ENV = "SLOWFAST_OUT"
DEFAULT_OUT = "slowfast-out"

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4


class UsageError(Exception):
    def __init__(self, message, **extra):
        super().__init__(message)
        self.extra = extra


def _fmt(x):
    return format(float(x), ".17g")


def _mu_ladder(text, single=False):
    try:
        mus = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--mu expects numbers, got {text!r}") from None
    if not mus:
        raise UsageError("--mu is empty")
    if any(v == 0 for v in mus):
        raise UsageError("mu = 0 is the degenerate problem; use the 'reduce' subcommand", hint="reduce")
    if any(not (v > 0 and math.isfinite(v)) for v in mus):
        raise UsageError("mu values must be positive and finite")
    if any(b >= a for a, b in zip(mus, mus[1:])):
        raise UsageError("mu ladder must be strictly decreasing")
    if single and len(mus) != 1:
        raise UsageError("this subcommand takes a single mu value")
    return mus


def _formats(text):
    fm = {f.strip() for f in text.split(",") if f.strip()}
    bad = fm - {"csv", "json"}
    if bad or not fm:
        raise UsageError(f"--format accepts csv and/or json, got {text!r}")
    return fm


def _out_dir(args):
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory: {exc}", path=str(out)) from None
    if not os.access(out, os.W_OK):
        raise UsageError("output directory is not writable", path=str(out))
    return out


def _load(args):
    try:
        return load_spec(args.spec)
    except FileNotFoundError:
        raise UsageError("spec file not found", path=str(args.spec)) from None


def _rootmap(doc, args):
    if doc.root_guess is None:
        raise UsageError("spec has no [root] section with a Newton seed", path=str(args.spec))
    return RootMap.for_model(doc.model, doc.root_guess, isolation_radius=doc.isolation_radius)


def _init(doc):
    if doc.init is None:
        raise UsageError("spec has no [initial] section")
    return doc.init


def _stem(args):
    return Path(args.spec).stem


def _write(path: Path, text: str, written: list):
    path.write_text(text, encoding="utf-8", newline="\n")
    written.append(str(path))


def _csv_text(writer, *a, **kw):
    buf = io.StringIO()
    writer(*a, buf, **kw)
    return buf.getvalue()


def _meta(args, doc, extra):
    """Run metadata; the only place for volatile fields."""
    meta = {
        "command": args.command,
        "spec": str(args.spec),
        "spec_sha256": doc.sha256,
        "rtol": args.rtol,
        "atol": args.atol,
        "version": __version__,
    }
    meta.update(extra)
    meta["volatile"] = {
        "created_unix": time.time(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    return json.dumps(to_jsonable(meta), indent=2) + "\n"


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args, out, written):
    mu = _mu_ladder(args.mu, single=True)[0]
    doc = _load(args)
    init = _init(doc)
    params = SimulationParams(mu, rtol=args.rtol, atol=args.atol)
    t0 = time.perf_counter()
    traj = integrate_full(doc.model, params, init)
    wall = time.perf_counter() - t0
    stem = f"{_stem(args)}_mu{mu:g}"
    if "csv" in args.formats:
        _write(out / f"{stem}_trajectory.csv", _csv_text(write_trajectory_csv, traj, grid_per_segment=args.grid), written)
        _write(out / f"{stem}_jumps.csv", _csv_text(write_jumps_csv, traj), written)
    st = traj.stats
    info = {"mu": mu, "segments": len(traj.segments), "jumps": len(traj.jumps),
            "exit_time": traj.exit_time,
            "steps": {"accepted": st.accepted, "rejected": st.rejected, "rhs_evals": st.nfev}}
    _write(out / f"{stem}_meta.json", _meta(args, doc, dict(info, wall_seconds=wall)), written)
    print(f"simulated mu={mu:g}: {len(traj.segments)} segments, {st.accepted} steps")
    return EXIT_OK


def cmd_reduce(args, out, written):
    doc = _load(args)
    rm = _rootmap(doc, args)
    init = _init(doc)
    model = doc.model
    red = integrate_reduced(model, rm, init.y0, rtol=args.rtol, atol=args.atol)
    t, ybar, ids = red.traj.sample(args.grid or 201)
    starts = red.traj.breaks[:-1]
    right = (ids > 0) & (t == starts[ids])
    probe = rm.clone()
    probe.reset()
    rows, residuals = [], []
    for s, r, k in zip(t, right, ids):
        y = red.ybar(s, right=bool(r))
        z = probe(y, s)
        residuals.append(probe.residual(z, y, s))
        rows.append([_fmt(s)] + [_fmt(v) for v in z] + [_fmt(v) for v in y] + [str(int(k))])
    stem = _stem(args)
    if "csv" in args.formats:
        header = (["t"] + [f"zbar{k + 1}" for k in range(model.fast_dim)]
                  + [f"ybar{k + 1}" for k in range(model.slow_dim)] + ["segment_id"])
        text = ",".join(header) + "\n" + "".join(",".join(r) + "\n" for r in rows)
        _write(out / f"{stem}_reduced.csv", text, written)
    imp = check_degenerate_impulse(model, rm, red) if model.theta else np.zeros(0)
    gaps = check_root_continuity(red)
    res0, isolated = rm.clone().isolation_probe(init.y0, 0.0)
    diag = {
        "max_newton_residual": max(residuals) if residuals else 0.0,
        "impulse_residuals": imp,
        "root_gaps": gaps,
        "isolation": {"radius": rm.isolation_radius, "min_residual": res0, "isolated": isolated},
        "max_continuation_jump": probe.max_jump,
    }
    if "json" in args.formats:
        _write(out / f"{stem}_reduced.json", json.dumps(to_jsonable(diag), indent=2) + "\n", written)
    _write(out / f"{stem}_reduced_meta.json", _meta(args, doc, {}), written)
    print(f"reduced problem solved on [0, {model.horizon:g}]; max root gap "
          f"{float(gaps.max()) if gaps.size else 0.0:.3g}")
    return EXIT_OK


def _study_mode(args, doc, rm, red):
    if args.mode != "auto":
        return args.mode, None
    if doc.model.I is None or not doc.model.theta:
        return "single", None
    rep = impulse_limit(doc.model, rm, reduced=red)
    return ("multi" if rep.is_finite else "single"), rep.classification.value


def cmd_study(args, out, written):
    mus = _mu_ladder(args.mu)
    doc = _load(args)
    init = _init(doc)
    rm = _rootmap(doc, args)
    model = doc.model
    red = integrate_reduced(model, rm, init.y0, rtol=args.rtol, atol=args.atol)
    mode, cls = _study_mode(args, doc, rm, red)
    parts, failure = [], None
    for mu in mus:
        try:
            parts.append(convergence_study(model, rm, init, [mu], width=args.width, mode=mode,
                                           epsilon=args.eps, slow_offset=args.slow_offset,
                                           rtol=args.rtol, atol=args.atol, reduced=red))
        except (IntegrationError, RootError, NonFiniteResult) as exc:
            failure = exc
            break
    done = [p.mu_values[0] for p in parts]
    d = [p.distances[0] for p in parts]
    order = None
    if len(d) >= 2 and all(v > 0 and math.isfinite(v) for v in d):
        order = float(np.polyfit(np.log(done), np.log(d), 1)[0])
    report = ConvergenceReport(
        done, d, [p.fast_distances[0] for p in parts],
        [p.slow_distances[0] for p in parts] if model.slow_dim else None,
        [p.widths[0] for p in parts], mode, args.eps, args.slow_offset, order,
        [p.argmax_t[0] for p in parts])
    stem = _stem(args)
    if "csv" in args.formats:
        _write(out / f"{stem}_study.csv", _csv_text(write_convergence_csv, report), written)
    if "json" in args.formats:
        body = {"impulse_limit": cls, "complete": failure is None, "report": report}
        _write(out / f"{stem}_study.json", json.dumps(to_jsonable(body), indent=2) + "\n", written)
    _write(out / f"{stem}_study_meta.json", _meta(args, doc, {"mu": mus}), written)
    if failure is not None:
        raise failure
    empty = [mu for mu, v in zip(done, d) if not math.isfinite(v)]
    if empty:
        sys.stderr.write(f"warning: the exclusion width leaves no evaluation window for mu={empty}; "
                         "pass a smaller --width\n")
    for mu, v in zip(done, d):
        print(f"mu={mu:g}  d={v:.6g}")
    if order is not None:
        print(f"empirical order {order:.3f} ({mode} mode)")
    return EXIT_OK


def cmd_layers(args, out, written):
    mus = _mu_ladder(args.mu)
    if len(mus) > 2:
        raise UsageError("layers takes one mu value or a pair")
    doc = _load(args)
    init = _init(doc)
    rm = _rootmap(doc, args)
    model = doc.model
    red = integrate_reduced(model, rm, init.y0, rtol=args.rtol, atol=args.atol)
    stem = _stem(args)
    reports, csv_parts, failure = [], [], None
    for mu in mus:
        try:
            traj = integrate_full(model, SimulationParams(mu, rtol=args.rtol, atol=args.atol), init)
            rep = detect_layers(traj, red, args.eps, args.dwell)
        except (IntegrationError, UnclosedLayer, RootError, NonFiniteResult) as exc:
            failure = exc
            break
        reports.append({"mu": mu, "report": rep})
        csv_parts.append(_csv_text(write_layers_csv, rep, mu=mu))
    rows = None
    if failure is None and len(mus) == 2:
        rows = layer_scaling(model, rm, init, args.eps, tuple(mus), args.dwell,
                             rtol=args.rtol, atol=args.atol, reduced=red)
    if "csv" in args.formats and csv_parts:
        text = csv_parts[0] + "".join(p.split("\n", 1)[1] for p in csv_parts[1:])
        _write(out / f"{stem}_layers.csv", text, written)
        if rows is not None:
            _write(out / f"{stem}_scaling.csv", _csv_text(write_scaling_csv, rows), written)
    if "json" in args.formats:
        body = {"epsilon": args.eps, "runs": reports, "scaling": rows}
        _write(out / f"{stem}_layers.json", json.dumps(to_jsonable(body), indent=2) + "\n", written)
    _write(out / f"{stem}_layers_meta.json", _meta(args, doc, {"mu": mus}), written)
    if failure is not None:
        raise failure
    for r in reports:
        print(f"mu={r['mu']:g}: {r['report'].count} layers")
    if rows:
        print(f"initial-layer thickness ratio {rows[0].ratio:.4g} (mu ratio {mus[0] / mus[1]:.4g})")
    return EXIT_OK


def cmd_check(args, out, written):
    doc = _load(args)
    init = _init(doc)
    rm = _rootmap(doc, args)
    model = doc.model
    lyap = None
    if doc.lyapunov is not None:
        radius = doc.lyapunov_radius if doc.lyapunov_radius is not None else min(1.0, model.region.fast_bound)
        lyap = LyapunovSpec(doc.lyapunov, radius=radius,
                            sample_count=doc.lyapunov_samples or 10_000)
    rep = check_conditions(model, rm, init, lyapunov=lyap, tau_budget=args.budget,
                           seed=args.seed, rtol=args.rtol, atol=args.atol)
    body = {"spec": str(args.spec), "passed": rep.passed, "conditions": rep.entries}
    if rep.impulse is not None:
        body["impulse_limit"] = {"classification": rep.impulse.classification.value,
                                 "I0": rep.impulse.I0, "spread": rep.impulse.spread,
                                 "per_moment": rep.impulse.per_moment}
    if rep.lyapunov is not None:
        body["lyapunov"] = rep.lyapunov
    if rep.attraction is not None:
        body["attraction"] = rep.attraction
    stem = _stem(args)
    if "json" in args.formats:
        _write(out / f"{stem}_check.json", json.dumps(to_jsonable(body), indent=2) + "\n", written)
    _write(out / f"{stem}_check_meta.json", _meta(args, doc, {"seed": args.seed}), written)
    for e in rep.entries:
        label = f"{e['label']} " if e["label"] else ""
        print(f"{label}{e['id']}: {e['status']}  {e['detail']}")
    if args.strict and not rep.passed:
        return EXIT_CHECK
    return EXIT_OK


# -- plumbing ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slowfast", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"slowfast {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mu=False, mu_required=False):
        sp.add_argument("spec", help="spec file (bundled names such as ex1.spec also work)")
        if mu:
            sp.add_argument("--mu", required=mu_required, default=None,
                            help="mu value, or a decreasing comma-separated ladder")
        sp.add_argument("--rtol", type=float, default=1e-10)
        sp.add_argument("--atol", type=float, default=1e-12)
        sp.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--format", default="csv,json", help="csv, json or both (default)")
        return sp

    sp = common(sub.add_parser("simulate", help="integrate the full system for one mu"), True, True)
    sp.add_argument("--grid", type=int, default=None, help="uniform points per segment instead of step nodes")
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("reduce", help="solve the degenerate mu = 0 problem"))
    sp.add_argument("--grid", type=int, default=None, help="points per slow segment (default 201)")
    sp.set_defaults(func=cmd_reduce)

    sp = common(sub.add_parser("study", help="distance to the reduced solution over a mu ladder"), True, True)
    sp.add_argument("--eps", type=float, default=0.1, help="tube radius behind the default exclusion width")
    sp.add_argument("--width", type=float, default=None, help="exclusion width (default 10 mu ln(1/eps))")
    sp.add_argument("--mode", choices=("auto", "single", "multi"), default="auto")
    sp.add_argument("--slow-offset", type=float, default=0.0, dest="slow_offset")
    sp.set_defaults(func=cmd_study)

    sp = common(sub.add_parser("layers", help="detect layers for one mu, or compare two"), True, True)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--dwell", type=int, default=5)
    sp.set_defaults(func=cmd_layers)

    sp = common(sub.add_parser("check", help="sample the theorem hypotheses"))
    sp.add_argument("--strict", action="store_true", help="exit 4 when a check fails")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=float, default=50.0, help="stretched-time budget for attraction")
    sp.set_defaults(func=cmd_check)
    return p


def _error(kind, exc, code, **extra):
    payload = {"error": kind, "message": str(exc), "exit_code": code}
    payload.update(extra)
    sys.stderr.write(json.dumps(to_jsonable(payload)) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    written: list[str] = []
    try:
        for name in ("rtol", "atol"):
            if not getattr(args, name) > 0:
                raise UsageError(f"--{name} must be positive")
        args.formats = _formats(args.format)
        out = _out_dir(args)
        return args.func(args, out, written)
    except UsageError as exc:
        return _error("UsageError", exc, EXIT_USAGE, **exc.extra)
    except NonFiniteResult as exc:
        return _error(type(exc).__name__, exc, EXIT_NUMERIC, written=written)
    except (SpecFileError, ModelError, ExprError) as exc:
        return _error(type(exc).__name__, exc, EXIT_USAGE, path=str(args.spec))
    except (IntegrationError, RootError, UnclosedLayer) as exc:
        extra = {"written": written}
        if hasattr(exc, "t_last"):
            extra["t_last"] = exc.t_last
        if hasattr(exc, "last_iterate"):
            extra["last_iterate"] = np.asarray(exc.last_iterate)
        if isinstance(exc, UnclosedLayer):
            extra["open_interval"] = [exc.start, exc.end]
        return _error(type(exc).__name__, exc, EXIT_NUMERIC, **extra)
    except SlowFastError as exc:
        return _error(type(exc).__name__, exc, EXIT_NUMERIC, written=written)
    except ValueError as exc:
        return _error("ValueError", exc, EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())

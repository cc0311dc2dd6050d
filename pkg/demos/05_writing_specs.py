"""
Writing your own system
=======================

Systems are described in small INI files whose right-hand sides are
written in a tiny expression language. This script builds one from a
string, then simulates it both from Python and through the CLI.
"""
import tempfile
from pathlib import Path

from slowfast import (RootMap, SimulationParams, detect_layers, eval_expr, integrate_full,
                      integrate_reduced, parse_expr, parse_spec, to_text)
from slowfast.cli import main

# %%
# The expression language: ``^`` is right-associative and unary minus
# binds tighter, so ``-x^2`` is ``(-x)^2``.
e = parse_expr("-x^2 + 2^3^2", names=("x",))
print(to_text(e), "=", eval_expr(e, {"x": 3.0}))

# %%
# A fast variable relaxing to sin(t), kicked at two moments.
SPEC = """
[system]
horizon = 2
fast = z

[fast_field]
z = sin(t) - z

[fast_impulse]
z = mu*(1 - z)

[moments]
theta = 1/2, 3/2

[initial]
z = 2

[root]
z = 0
"""
doc = parse_spec(SPEC)
rm = RootMap.for_model(doc.model, doc.root_guess)
reduced = integrate_reduced(doc.model, rm, doc.init.y0)
traj = integrate_full(doc.model, SimulationParams(0.02), doc.init)
print(f"z(1) = {traj.z(1.0)[0]:.5f}, root sin(1) = {reduced.zbar(1.0)[0]:.5f}")
print("layers:", [round(ly.reset, 3) for ly in detect_layers(traj, reduced).layers])

# %%
# The same file through the command line.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "kicked.spec"
    path.write_text(SPEC)
    main(["layers", str(path), "--mu", "0.02,0.01", "--out", tmp])
    print(sorted(p.name for p in Path(tmp).iterdir()))

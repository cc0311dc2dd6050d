"""
Checking the hypotheses numerically
===================================

Before trusting a limit, the ingredients behind it can be sampled: a
Lyapunov function for the stretched fast system, the basin of the root,
and the behaviour of ``I / mu`` near the root.
"""
import numpy as np

from slowfast import (InitialState, LyapunovSpec, RootMap, attraction_check, check_conditions,
                      impulse_limit, load_spec, lyapunov_check, parse_expr, validate_system)

ex1 = load_spec("ex1.spec")
rm1 = RootMap.for_model(ex1.model, ex1.root_guess)

# %%
# For the linear spiral, V = x1^2 + x2^2 decays exactly like -2V.
rep = lyapunov_check(ex1.model, rm1, LyapunovSpec(ex1.lyapunov, sample_count=10_000))
ratio = rep.samples["dV"] / rep.samples["V"]
print(f"V passes: {rep.passed}; dV/V in [{ratio.min():.8f}, {ratio.max():.8f}]")

# %%
# An indefinite candidate fails and names a point where it goes wrong.
bad = lyapunov_check(ex1.model, rm1, LyapunovSpec(parse_expr("x1^2 - x2^2", names=("x1", "x2"))))
print(f"x1^2 - x2^2 passes: {bad.passed}; witness {bad.witness}")

# %%
# Basin membership in stretched time.
ex2 = load_spec("ex2.spec")
rm2 = RootMap.for_model(ex2.model, ex2.root_guess)
for z0 in (0.6, 3.0):
    att = attraction_check(ex2.model, rm2, [z0])
    print(f"z0={z0}: attracted={att.attracted}, distance {att.final_distance:.1e}")

# %%
# An impulse whose quotient depends on the approach path.
m = validate_system({"fast_dim": 1, "horizon": 1.0, "F": lambda z, y, t: -z,
                     "I": lambda z, y, mu: np.sin(z) + mu, "theta": [0.5]})
lim = impulse_limit(m, RootMap(m.F, [0.0]))
print(f"sin z + mu: {lim.classification.value} ({lim.evidence})")

# %%
# Everything at once, with the conventional labels.
report = check_conditions(ex2.model, rm2, ex2.init, LyapunovSpec(ex2.lyapunov, radius=1.5))
for e in report.entries:
    print(f"  {e['label'] or '--':3} {e['id']:<20} {e['status']:<14} {e['detail']}")
report = check_conditions(m, RootMap(m.F, [0.0]), InitialState([0.2]))
print("counterexample passes:", report.passed)

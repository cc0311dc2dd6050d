"""
Slow variables with their own jumps
===================================

``ex11.spec`` couples a fast ``z`` to a slow ``y``. On the branch
``z = 0`` the slow equation is logistic, and the slow impulse squares
``y``. The reduced solution has a closed form, which makes it easy to
watch ``y(t, mu)`` converge on the whole interval.
"""
import math

import numpy as np

from slowfast import (RootMap, SimulationParams, check_root_continuity, convergence_study,
                      integrate_full, integrate_reduced, load_spec)

doc = load_spec("ex11.spec")
model, init = doc.model, doc.init
rootmap = RootMap.for_model(model, doc.root_guess)
reduced = integrate_reduced(model, rootmap, init.y0)


def logistic(t, y0):
    return y0 * math.exp(t) / (1 + y0 * (math.exp(t) - 1))


# %%
# Reduced solution against the closed form just before and after the first jump.
left = logistic(1 / 3, 2.0)
print(f"ybar(1/3-) = {reduced.ybar(1 / 3)[0]:.10f}   closed form {left:.10f}")
print(f"ybar(1/3+) = {reduced.ybar(1 / 3, right=True)[0]:.10f}   closed form {left ** 2:.10f}")

# %%
# The branch z = 0 does not move at the slow jumps, so no interior layers.
print("root gaps at the slow moments:", check_root_continuity(reduced))

# %%
# y converges everywhere, z only after the initial layer. For the two
# largest mu the default exclusion width 10 mu ln 10 covers all of [0, 2],
# so the fast window is empty and reported as nan.
rep = convergence_study(model, rootmap, init, [0.2, 0.1, 0.05, 0.01], reduced=reduced)
for mu, ds, dz in zip(rep.mu_values, rep.slow_distances, rep.fast_distances):
    print(f"  mu={mu:<5} sup|y - ybar| = {ds:.4f}   sup|z| after the layer = {dz:.2e}")

# %%
# A closer look at mu = 0.05: the slow error is largest right after t = 0.
traj = integrate_full(model, SimulationParams(0.05), init)
t = np.array([0.05, 0.2, 0.5, 1.0, 1.9])
print("t      ", t)
print("y      ", np.round(traj.y(t)[:, 0], 4))
print("ybar   ", np.round(reduced.ybar(t)[:, 0], 4))

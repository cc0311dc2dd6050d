"""
A single initial layer
======================

The two-dimensional fast system bundled as ``ex1.spec`` spirals into the
origin on the time scale ``mu``. Its impulses are small enough that
``I / mu`` vanishes at the root, so only the start of the run shows a
layer of non-uniform convergence.
"""
import numpy as np

from slowfast import (RootMap, SimulationParams, convergence_study, detect_layers,
                      impulse_limit, integrate_full, integrate_reduced, layer_scaling, load_spec)

doc = load_spec("ex1.spec")
model, init = doc.model, doc.init
rootmap = RootMap.for_model(model, doc.root_guess)
print(f"fast dimension {model.fast_dim}, {len(model.theta)} impulse moments on [0, {model.horizon:.4g}]")

# %%
# The reduced problem is just the root z = 0 of the fast field.
reduced = integrate_reduced(model, rootmap, init.y0)
print("zbar(1) =", reduced.zbar(1.0))

# %%
# Full solutions for the three values of mu used throughout.
for mu in (0.07, 0.05, 0.03):
    traj = integrate_full(model, SimulationParams(mu), init)
    t = np.array([0.1, 0.5, 1.0, 3.0])
    norms = np.linalg.norm(traj.z(t), axis=1)
    print(f"mu={mu:<5} |z| at t={t.tolist()}:", np.array2string(norms, precision=3))

# %%
# Impulses vanish in the limit, which is why no further layers appear.
lim = impulse_limit(model, rootmap, reduced=reduced)
print("impulse limit:", lim.classification.value, "-", lim.evidence)

# %%
# Sup distance to the root after the layer, d(mu), and its empirical order.
study = convergence_study(model, rootmap, init, [0.07, 0.05, 0.03, 0.01], reduced=reduced)
for mu, d in zip(study.mu_values, study.distances):
    print(f"  mu={mu:<5} d={d:.4g}")
print(f"order of decay {study.order:.2f}")

# %%
# The layer itself: one of them, and its thickness halves with mu.
layers = detect_layers(integrate_full(model, SimulationParams(0.05), init), reduced, 0.1)
print(f"{layers.count} layer(s), thickness {layers.thicknesses[0]:.4f}")
row = layer_scaling(model, rootmap, init, 0.1, (0.06, 0.03), reduced=reduced)[0]
print(f"thickness ratio t*(0.06)/t*(0.03) = {row.ratio:.3f}")

"""Probabilistic PCA on data with missing cells.

A rank-3 dataset with 30% of cells removed; the model is a dot product of
latent loadings and scores plus learned isotropic noise.  Also shows how
the broadcast plan reacts to missingness: with full data the latent
covariances are identical across observations and the engine keeps one
representative copy, while a mixed mask forces per-element covariances.
"""

import numpy as np

from vmplite import engine
from vmplite.graph import Graph

rng = np.random.default_rng(42)
L, N, D = 3, 200, 8
w_true = rng.standard_normal((D, L))
x_true = rng.standard_normal((L, N))
data = w_true @ x_true + 0.3 * rng.standard_normal((D, N))
mask = rng.random((D, N)) < 0.7


def build(observation_mask):
    g = Graph()
    w = g.gaussian(np.zeros(L), np.eye(L), plates=(D, 1), name="w", dim=L)
    x = g.gaussian(np.zeros(L), np.eye(L), plates=(1, N), name="x", dim=L)
    f = g.add_sum_product(w, x, name="f")
    tau = g.gamma(1e-3, 1e-3, name="tau")
    y = g.gaussian(f, tau, plates=(D, N), name="y", dim=1)
    y.observe(np.where(observation_mask, data, 0.0).reshape(D, N, 1),
              mask=observation_mask)
    init = np.random.default_rng(1)
    engine.initialize_from_random(w, init)
    engine.initialize_from_random(x, init)
    return g


g = build(mask)
report = engine.run_vb(g, engine.FitOptions(max_sweeps=200))
tau = g.node("tau")
a, b = tau.phi_q[1] + 1.0, -tau.phi_q[0]
print(f"converged: {report.converged} after {report.sweeps} sweeps")
print(f"observed cells: {mask.sum()} of {mask.size}")
print(f"posterior noise precision: {float(a / b):.2f} (true: {1/0.3**2:.2f})")

plan = g.plan_broadcast(g.node("x"))
print("\nbroadcast plan for the scores node (mixed mask):")
print("  mean block      :", plan.block_axes[0])
print("  precision block :", plan.block_axes[1])

g_full = build(np.ones((D, N), dtype=bool))
engine.run_vb(g_full, engine.FitOptions(max_sweeps=20))
plan_full = g_full.plan_broadcast(g_full.node("x"))
print("with full data the covariance axis collapses to one representative:")
print("  precision block :", plan_full.block_axes[1])

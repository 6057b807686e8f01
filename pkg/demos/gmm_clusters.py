"""Gaussian mixture workflow: build, observe, break symmetry, fit, inspect.

500 two-dimensional points from two clusters (200 near [2,2], 300 near
[0,0]) are fit with a 5-component mixture; the surplus components die off
on their own.
"""

import numpy as np

from vmplite import Gaussian, engine
from vmplite.graph import Graph

rng = np.random.default_rng(7)
N, D, K = 500, 2, 5
data = rng.standard_normal((N, D))
data[:200] += 2.0

g = Graph()
mu = g.gaussian(np.zeros(D), 0.01 * np.eye(D), plates=(K,), name="mu")
Lambda = g.wishart(float(D), D * np.eye(D), plates=(K,), name="Lambda")
alpha = g.dirichlet(0.01 * np.ones(K), name="alpha")
z = g.categorical(alpha, plates=(N,), name="z")
y = g.mixture(z, Gaussian(D), mu, Lambda, plates=(N,), name="y")
y.observe(data)

# Without this the components stay identical and never separate.
engine.initialize_from_random(z, seed=0)

order = [mu, Lambda, alpha, z]
report = engine.run_vb(g, engine.FitOptions(update_order=order, max_sweeps=200))

print(f"converged: {report.converged} after {report.sweeps} sweeps")
print(f"final ELBO: {report.elbo_trace[-1]:.3f}")

counts = alpha.phi_q[0] + 1.0
means = np.linalg.solve(-2.0 * mu.phi_q[1], mu.phi_q[0][..., None])[..., 0]
means = np.broadcast_to(means, (K, D))
print("\ncomponent   expected count   posterior mean")
for k in np.argsort(counts)[::-1]:
    print(f"{k:>9}   {counts[k]:>14.2f}   [{means[k][0]:+.3f}, {means[k][1]:+.3f}]")

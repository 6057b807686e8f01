"""Randomized small-model generator for monotonicity/property sweeps.

Each template exercises a different family combination; every call returns a
freshly built graph with observations bound and symmetry broken where needed,
plus the update order to sweep.
"""

import numpy as np

from vmplite import engine
from vmplite.families import Gaussian
from vmplite.graph import Graph
from helpers import random_spd


def _gaussian_mean_chain(rng):
    d = int(rng.integers(1, 4))
    n = int(rng.integers(3, 50))
    g = Graph()
    mu = g.gaussian(rng.standard_normal(d), random_spd(rng, d, 0.2), name="mu")
    y = g.gaussian(mu, random_spd(rng, d), plates=(n,), name="y")
    g.observe(y, rng.standard_normal((n, d)))
    return g, [mu]


def _wishart_precision(rng):
    d = int(rng.integers(1, 3))
    n = int(rng.integers(3, 50))
    g = Graph()
    lam = g.wishart(d + 1.0, random_spd(rng, d), name="lam")
    y = g.gaussian(rng.standard_normal(d), lam, plates=(n,), name="y")
    g.observe(y, rng.standard_normal((n, d)))
    return g, [lam]


def _gamma_noise(rng):
    n = int(rng.integers(3, 50))
    g = Graph()
    tau = g.gamma(float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 3.0)),
                  name="tau")
    y = g.gaussian(np.zeros(1), tau, plates=(n,), name="y", dim=1)
    g.observe(y, rng.standard_normal((n, 1)))
    return g, [tau]


def _dirichlet_categorical(rng):
    k = int(rng.integers(2, 6))
    n = int(rng.integers(3, 50))
    g = Graph()
    alpha = g.dirichlet(rng.uniform(0.2, 2.0, size=k), name="alpha")
    z = g.categorical(alpha, plates=(n,), name="z")
    mask = rng.random(n) < 0.8
    mask[int(rng.integers(n))] = False
    g.observe(z, rng.integers(0, k, size=n), mask=mask)
    return g, [alpha, z]


def _small_gmm(rng, seed):
    k, n = 3, int(rng.integers(10, 50))
    g = Graph()
    mu = g.gaussian(np.zeros(2), 0.05 * np.eye(2), plates=(k,), name="mu")
    lam = g.wishart(2.0, 2.0 * np.eye(2), plates=(k,), name="lam")
    alpha = g.dirichlet(0.1 * np.ones(k), name="alpha")
    z = g.categorical(alpha, plates=(n,), name="z")
    y = g.mixture(z, Gaussian(2), mu, lam, plates=(n,), name="y")
    data = rng.standard_normal((n, 2)) + rng.integers(0, 2, size=(n, 1)) * 2.0
    mask = rng.random(n) < 0.9
    mask[int(rng.integers(n))] = False
    g.observe(y, data, mask=mask)
    engine.initialize_from_random(z, seed)
    return g, [mu, lam, alpha, z, y]


def _small_pca(rng, seed):
    latent, n, d = 2, int(rng.integers(8, 30)), 4
    g = Graph()
    w = g.gaussian(np.zeros(latent), np.eye(latent), plates=(d, 1), name="w",
                   dim=latent)
    x = g.gaussian(np.zeros(latent), np.eye(latent), plates=(1, n), name="x",
                   dim=latent)
    f = g.add_sum_product(w, x, name="f")
    tau = g.gamma(1.0, 1.0, name="tau")
    y = g.gaussian(f, tau, plates=(d, n), name="y", dim=1)
    data = (rng.standard_normal((d, latent)) @ rng.standard_normal((latent, n))
            + rng.standard_normal((d, n)))
    mask = rng.random((d, n)) < 0.85
    mask[0, int(rng.integers(n))] = False
    g.observe(y, data.reshape(d, n, 1), mask=mask)
    rng_init = np.random.default_rng(seed)
    engine.initialize_from_random(w, rng_init)
    engine.initialize_from_random(x, rng_init)
    return g, [x, w, tau, y]


TEMPLATES = (
    _gaussian_mean_chain,
    _wishart_precision,
    _gamma_noise,
    _dirichlet_categorical,
    _small_gmm,
    _small_pca,
)


def random_model(seed):
    rng = np.random.default_rng(seed)
    template = TEMPLATES[seed % len(TEMPLATES)]
    if template in (_small_gmm, _small_pca):
        return template(rng, seed)
    return template(rng)

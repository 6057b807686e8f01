"""Synthetic benchmark configurations with fixed, documented data seeds.

Four models at two sizes each:

    gmm-small   10 clusters, 200 observations, 2 dimensions
    gmm-large   40 clusters, 2000 observations, 10 dimensions
    pca-small   10-dim latent space, 500 observations, 20 dimensions
    pca-large   40-dim latent space, 2000 observations, 100 dimensions

The datasets are generated once per model from the seeds below so that fit
trajectories are reproducible across machines; only wall times vary.  GMM
data comes from half as many true clusters as the fitted maximum (centers
drawn at the listed spread, unit covariance).  PCA data is a unit-noise
linear model with latent dimension equal to the model's; the noise
precision gets a broad Gamma(1e-3, 1e-3) prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine as eng
from .errors import ConfigurationError
from .families import Gaussian
from .graph import Graph

GMM_CONFIGS = {
    # name: (clusters K, observations N, dims D, true clusters, spread, data seed)
    "gmm-small": (10, 200, 2, 5, 2.2, 1010),
    "gmm-large": (40, 2000, 10, 20, 2.0, 2000),
}

PCA_CONFIGS = {
    # name: (latent dim, observations N, dims D, data seed)
    "pca-small": (10, 500, 20, 3000),
    "pca-large": (40, 2000, 100, 4000),
}

MODEL_NAMES = tuple(GMM_CONFIGS) + tuple(PCA_CONFIGS)


@dataclass
class BenchmarkRow:
    """One timing result: median milliseconds per sweep after warm-up."""

    model: str
    broadcast: str
    sweeps: int
    ms_per_iteration: float


def gmm_data(name):
    k, n, d, true_k, spread, seed = GMM_CONFIGS[name]
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, spread, size=(true_k, d))
    assign = rng.integers(0, true_k, size=n)
    return centers[assign] + rng.standard_normal((n, d))


def pca_data(name):
    latent, n, d, seed = PCA_CONFIGS[name]
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal((d, latent))
    x_true = rng.standard_normal((latent, n))
    return w_true @ x_true + rng.standard_normal((d, n))


def build_gmm(name, fit_seed, expand_broadcasts=False):
    k, n, d, _, _, _ = GMM_CONFIGS[name]
    data = gmm_data(name)
    g = Graph(expand_broadcasts=expand_broadcasts)
    mu = g.gaussian(np.zeros(d), 0.01 * np.eye(d), plates=(k,), name="mu")
    lam = g.wishart(float(d), d * np.eye(d), plates=(k,), name="Lambda")
    alpha = g.dirichlet(0.01 * np.ones(k), name="alpha")
    z = g.categorical(alpha, plates=(n,), name="z")
    y = g.mixture(z, Gaussian(d), mu, lam, plates=(n,), name="y")
    g.observe(y, data)
    eng.initialize_from_random(z, fit_seed)
    return g


def build_pca(name, fit_seed, expand_broadcasts=False):
    latent, n, d, _ = PCA_CONFIGS[name]
    data = pca_data(name)
    g = Graph(expand_broadcasts=expand_broadcasts)
    w = g.gaussian(
        np.zeros(latent), np.eye(latent), plates=(d, 1), name="w", dim=latent
    )
    x = g.gaussian(
        np.zeros(latent), np.eye(latent), plates=(1, n), name="x", dim=latent
    )
    f = g.add_sum_product(w, x, name="f")
    tau = g.gamma(1e-3, 1e-3, name="tau")
    y = g.gaussian(f, tau, plates=(d, n), name="y", dim=1)
    g.observe(y, data.reshape(d, n, 1))
    rng = np.random.default_rng(fit_seed)
    eng.initialize_from_random(w, rng)
    eng.initialize_from_random(x, rng)
    return g


def build_benchmark(name, fit_seed=0, expand_broadcasts=False):
    if name in GMM_CONFIGS:
        return build_gmm(name, fit_seed, expand_broadcasts)
    if name in PCA_CONFIGS:
        return build_pca(name, fit_seed, expand_broadcasts)
    raise ConfigurationError(
        f"unknown benchmark '{name}' (expected one of {', '.join(MODEL_NAMES)})"
    )


def run_benchmark(name, broadcast=True, seed=0, max_sweeps=200, tol=1e-6):
    """Fit one configuration; returns (BenchmarkRow, FitReport)."""
    graph = build_benchmark(name, fit_seed=seed, expand_broadcasts=not broadcast)
    options = eng.FitOptions(max_sweeps=max_sweeps, tol=tol, seed=seed)
    report = eng.run_vb(graph, options)
    times = report.ms_per_sweep[1:] or report.ms_per_sweep
    row = BenchmarkRow(
        model=name,
        broadcast="on" if broadcast else "off",
        sweeps=report.sweeps,
        ms_per_iteration=float(np.median(times)),
    )
    return row, report

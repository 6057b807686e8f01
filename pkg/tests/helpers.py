"""Shared test utilities: random valid natural parameters per family."""

import numpy as np

from vmplite.families import (
    Categorical,
    Dirichlet,
    Gamma,
    Gaussian,
    NaturalParams,
    Wishart,
)


def random_spd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T + d * np.eye(d))


def random_natural(family, rng):
    """A random parameter draw well inside the family's valid region."""
    if isinstance(family, Gaussian):
        d = family.dim
        lam = random_spd(rng, d)
        mu = rng.standard_normal(d)
        return NaturalParams(family, (lam @ mu, -0.5 * lam))
    if isinstance(family, Gamma):
        a = np.exp(rng.uniform(-1.5, 2.0))
        b = np.exp(rng.uniform(-1.5, 2.0))
        return NaturalParams(family, (np.asarray(-b), np.asarray(a - 1.0)))
    if isinstance(family, Wishart):
        d = family.dim
        n = d - 1.0 + np.exp(rng.uniform(-0.5, 1.5))
        v = random_spd(rng, d)
        return NaturalParams(family, (-0.5 * v, np.asarray(0.5 * (n - d - 1.0))))
    if isinstance(family, Dirichlet):
        alpha = np.exp(rng.uniform(np.log(0.05), np.log(5.0), family.dim))
        return NaturalParams(family, (alpha - 1.0,))
    if isinstance(family, Categorical):
        return NaturalParams(family, (2.0 * rng.standard_normal(family.dim),))
    raise TypeError(family)


ALL_FAMILIES = (
    Gaussian(1),
    Gaussian(3),
    Gamma(),
    Wishart(1),
    Wishart(2),
    Dirichlet(4),
    Categorical(5),
)

"""Exponential-family distributions in natural form.

Every family is described by the density

    p(x) = exp(phi . t(x) - A(phi) + h(x))

with the following fixed conventions (all blocks are plain ndarrays and may
carry arbitrary leading plate axes):

===========  =======================  ==========================  =============
family       natural blocks phi       moment blocks u = E[t(x)]   h(x)
===========  =======================  ==========================  =============
Gaussian(d)  (Lm, -L/2)               (E[x], E[x x^T])            -(d/2) ln 2pi
Gamma        (-b, a-1)                (E[x], E[ln x])             0
Wishart(d)   (-V/2, (n-d-1)/2)        (E[L], E[ln|L|])            0
Dirichlet(K) (alpha - 1,)             (E[ln p],)                  0
Categorical  (log-probs + const,)     (E[z] one-hot probs,)       0
===========  =======================  ==========================  =============

Here L is a precision matrix, m a mean, a/b Gamma shape/rate, n the Wishart
degrees of freedom with E[L] = n V^{-1}, and alpha a concentration vector.

Each family also owns its half of the message-passing protocol: the mapping
from parent moments to expected natural parameters, the expected
log-partition under the parents' posteriors, and the message a child sends
to each conjugate parent slot.  All functions are pure and vectorize over
leading plate axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, logsumexp, multigammaln

from .errors import (
    DomainError,
    NumericalError,
    ShapeError,
    SlotMismatchError,
    SupportError,
)

LOG_2PI = float(np.log(2.0 * np.pi))

# Smallest argument digamma/gammaln are trusted at; below this the family
# constraints are considered violated rather than silently evaluated.
MIN_SPECIAL_ARG = 1e-8


# ---------------------------------------------------------------------------
# linear-algebra helpers
# ---------------------------------------------------------------------------


def spd_cholesky(mat, error_cls=NumericalError):
    """Cholesky factor of a (stacked) SPD matrix.

    One retry with diagonal jitter 1e-10 * trace/d; a second failure raises
    ``error_cls`` (NumericalError for derived quantities, DomainError when
    used to validate natural parameters).
    """
    mat = np.asarray(mat, dtype=float)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    d = mat.shape[-1]
    jitter = 1e-10 * np.trace(mat, axis1=-2, axis2=-1) / d
    mat = mat + jitter[..., None, None] * np.eye(d)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise error_cls("matrix not positive definite after jitter retry")


def spd_logdet(mat):
    """log-determinant via Cholesky, with the same jitter policy."""
    chol = spd_cholesky(mat)
    diag = np.diagonal(chol, axis1=-2, axis2=-1)
    return 2.0 * np.sum(np.log(diag), axis=-1)


def spd_inverse(mat, error_cls=NumericalError):
    """Inverse of a (stacked) SPD matrix, validated through spd_cholesky."""
    chol = spd_cholesky(mat, error_cls)
    eye = np.broadcast_to(np.eye(mat.shape[-1]), mat.shape)
    inv_chol = np.linalg.solve(chol, eye)
    inv = np.swapaxes(inv_chol, -1, -2) @ inv_chol
    return 0.5 * (inv + np.swapaxes(inv, -1, -2))


def _sym(mat):
    return 0.5 * (mat + np.swapaxes(mat, -1, -2))


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _trace_prod(a, b):
    """tr(a @ b) for symmetric stacked matrices."""
    return np.einsum("...ij,...ij->...", a, b)


def _require_finite(value, context):
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite result in {context}")
    return value


# ---------------------------------------------------------------------------
# block containers
# ---------------------------------------------------------------------------


class _BlockVector:
    """Family-tagged tuple of ndarrays, block-aligned across subclasses."""

    __slots__ = ("family", "blocks")

    def __init__(self, family, blocks):
        self.family = family
        self.blocks = tuple(np.asarray(b, dtype=float) for b in blocks)
        if len(self.blocks) != len(family.block_event_ndims):
            raise ShapeError(
                f"{family} expects {len(family.block_event_ndims)} blocks, "
                f"got {len(self.blocks)}"
            )
        for blk, ndim, shape in zip(
            self.blocks, family.block_event_ndims, family.block_shapes
        ):
            if blk.ndim < ndim or blk.shape[blk.ndim - ndim :] != shape:
                raise ShapeError(
                    f"{family} block has event shape "
                    f"{blk.shape[max(blk.ndim - ndim, 0):]}, expected {shape}"
                )

    @property
    def plates(self):
        """Stored (possibly collapsed) leading plate shape."""
        shapes = [
            b.shape[: b.ndim - n]
            for b, n in zip(self.blocks, self.family.block_event_ndims)
        ]
        return tuple(np.broadcast_shapes(*shapes))

    def map(self, fn):
        return type(self)(self.family, tuple(fn(b) for b in self.blocks))

    def __iter__(self):
        return iter(self.blocks)

    def __repr__(self):
        return f"{type(self).__name__}({self.family}, plates={self.plates})"


class NaturalParams(_BlockVector):
    """Natural parameters phi of a family (or of a variational posterior)."""


class MomentVector(_BlockVector):
    """Expected sufficient statistics u = E[t(x)], block-aligned with phi."""


class Message(_BlockVector):
    """Additive NaturalParams-shaped contribution sent between nodes."""


# ---------------------------------------------------------------------------
# parent-slot typing
# ---------------------------------------------------------------------------

# Moment kinds a parent can provide.  Stochastic nodes provide their family's
# native kind; constants are coerced per slot.
VECTOR_OUTER = "vector_outer"  # (E[x], E[x x^T]), dim d
SPD_LOGDET = "spd_logdet"  # (E[L], E[ln|L|]), dim d
POSITIVE_LOG = "positive_log"  # (E[x], E[ln x]) scalar
LOG_SIMPLEX = "log_simplex"  # (E[ln p],), dim K
SIMPLEX = "simplex"  # (E[z],), dim K
CONST_SCALAR = "const_scalar"  # (value,)
CONST_SPD = "const_spd"  # (value,) SPD matrix
CONST_POSITIVE_VEC = "const_positive_vector"  # (value,) entrywise > 0


@dataclass(frozen=True)
class ParentSlot:
    """What a child family accepts in one parent slot."""

    name: str
    kind: str
    dim: int | None = None
    constant_only: bool = False


def _as_matrix_moments(blocks):
    """Lift scalar precision moments (E[x], E[ln x]) to 1x1 SPD moments."""
    ex, elog = blocks
    return (np.asarray(ex)[..., None, None], np.asarray(elog))


# ---------------------------------------------------------------------------
# family definitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Family:
    """Identity of one exponential family (tag plus event dimension)."""

    def __str__(self):
        return self.tag

    # subclasses define: tag, block_shapes, block_event_ndims, provides,
    # parent_slots, and the math methods below.

    def dot(self, phi_blocks, u_blocks):
        """phi . u summed over event axes, vectorized over plates."""
        total = 0.0
        for phi, u, ndim in zip(phi_blocks, u_blocks, self.block_event_ndims):
            prod = phi * u
            if ndim:
                prod = prod.sum(axis=tuple(range(-ndim, 0)))
            total = total + prod
        return total

    def log_base_constant(self):
        """E_q[h(x)], constant in q for every supported family."""
        return 0.0


@dataclass(frozen=True)
class Gaussian(Family):
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("Gaussian dimension must be >= 1")

    @property
    def tag(self):
        return f"gaussian({self.dim})"

    @property
    def block_shapes(self):
        return ((self.dim,), (self.dim, self.dim))

    @property
    def block_event_ndims(self):
        return (1, 2)

    @property
    def event_shape(self):
        return (self.dim,)

    @property
    def provides(self):
        return (VECTOR_OUTER, self.dim)

    @property
    def parent_slots(self):
        return (
            ParentSlot("mean", VECTOR_OUTER, self.dim),
            ParentSlot("precision", SPD_LOGDET, self.dim),
        )

    def _precision(self, phi):
        return -2.0 * _sym(phi[1])

    def validate_natural(self, phi):
        spd_cholesky(self._precision(phi), DomainError)

    def log_partition(self, phi):
        lam = self._precision(phi)
        chol = spd_cholesky(lam, DomainError)
        logdet = 2.0 * np.sum(
            np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1
        )
        mean = np.linalg.solve(lam, phi[0][..., None])[..., 0]
        quad = np.einsum("...i,...i->...", phi[0], mean)
        return _require_finite(0.5 * quad - 0.5 * logdet, "gaussian log_partition")

    def moments(self, phi):
        lam = self._precision(phi)
        cov = spd_inverse(lam, DomainError)
        mean = np.einsum("...ij,...j->...i", cov, phi[0])
        second = cov + _outer(mean, mean)
        _require_finite(mean, "gaussian moments")
        return (mean, second)

    def statistics(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim < 1 or x.shape[-1] != self.dim:
            raise ShapeError(f"gaussian value must end with dim {self.dim}")
        if not np.all(np.isfinite(x)):
            raise SupportError("gaussian value must be finite")
        return (x, _outer(x, x)), -0.5 * self.dim * LOG_2PI

    def log_base_constant(self):
        return -0.5 * self.dim * LOG_2PI

    def natural_from_parents(self, parents):
        (e_mu, _), (e_lam, _) = parents
        return (np.einsum("...ij,...j->...i", e_lam, e_mu), -0.5 * e_lam)

    def expected_log_partition(self, parents):
        (_, e_mumu), (e_lam, e_logdet) = parents
        return 0.5 * _trace_prod(e_lam, e_mumu) - 0.5 * e_logdet

    def message_to_parent(self, slot, u, parents, weight=None):
        e_x, e_xx = u
        w = 1.0 if weight is None else weight
        if slot == 0:
            e_lam = parents[1][0]
            phi2 = -0.5 * e_lam if weight is None else \
                -0.5 * np.asarray(w)[..., None, None] * e_lam
            return (np.einsum("...ij,...j->...i", e_lam, e_x), phi2)
        if slot == 1:
            e_mu, e_mumu = parents[0]
            cross = _outer(e_x, e_mu)
            mat = e_xx - cross - np.swapaxes(cross, -1, -2)
            if weight is None:
                mat = mat + e_mumu
            else:
                mat = mat + np.asarray(w)[..., None, None] * e_mumu
            half = np.broadcast_to(0.5 * np.asarray(w), mat.shape[:-2])
            return (-0.5 * mat, half)
        raise SlotMismatchError(f"gaussian has no slot {slot}")

    def sample(self, phi, rng):
        mean, second = self.moments(phi)
        cov = second - _outer(mean, mean)
        chol = spd_cholesky(cov)
        z = rng.standard_normal(mean.shape)
        return mean + np.einsum("...ij,...j->...i", chol, z)


@dataclass(frozen=True)
class Gamma(Family):
    @property
    def tag(self):
        return "gamma"

    @property
    def block_shapes(self):
        return ((), ())

    @property
    def block_event_ndims(self):
        return (0, 0)

    @property
    def event_shape(self):
        return ()

    @property
    def provides(self):
        return (POSITIVE_LOG, None)

    @property
    def parent_slots(self):
        return (
            ParentSlot("shape", CONST_SCALAR, constant_only=True),
            ParentSlot("rate", POSITIVE_LOG),
        )

    def _shape_rate(self, phi):
        return phi[1] + 1.0, -phi[0]

    def validate_natural(self, phi):
        a, b = self._shape_rate(phi)
        if np.any(a < MIN_SPECIAL_ARG) or np.any(b <= 0.0):
            raise DomainError("gamma requires shape > 0 and rate > 0")

    def log_partition(self, phi):
        self.validate_natural(phi)
        a, b = self._shape_rate(phi)
        return _require_finite(gammaln(a) - a * np.log(b), "gamma log_partition")

    def moments(self, phi):
        self.validate_natural(phi)
        a, b = self._shape_rate(phi)
        return (a / b, digamma(a) - np.log(b))

    def statistics(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(x > 0.0):
            raise SupportError("gamma value must be > 0")
        return (x, np.log(x)), 0.0

    def natural_from_parents(self, parents):
        (a,) = parents[0]
        e_b = parents[1][0]
        return (-e_b, a - 1.0)

    def expected_log_partition(self, parents):
        (a,) = parents[0]
        e_logb = parents[1][1]
        return gammaln(a) - a * e_logb

    def message_to_parent(self, slot, u, parents, weight=None):
        if slot == 1:
            (a,) = parents[0]
            w = np.ones_like(u[0]) if weight is None else np.asarray(weight)
            return (-u[0], a * w)
        raise SlotMismatchError("gamma shape parent is not conjugate")

    def sample(self, phi, rng):
        self.validate_natural(phi)
        a, b = self._shape_rate(phi)
        return rng.gamma(a, 1.0 / b)


@dataclass(frozen=True)
class Wishart(Family):
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("Wishart dimension must be >= 1")

    @property
    def tag(self):
        return f"wishart({self.dim})"

    @property
    def block_shapes(self):
        return ((self.dim, self.dim), ())

    @property
    def block_event_ndims(self):
        return (2, 0)

    @property
    def event_shape(self):
        return (self.dim, self.dim)

    @property
    def provides(self):
        return (SPD_LOGDET, self.dim)

    @property
    def parent_slots(self):
        return (
            ParentSlot("dof", CONST_SCALAR, constant_only=True),
            ParentSlot("inverse_scale", CONST_SPD, self.dim, constant_only=True),
        )

    def _dof_scale(self, phi):
        n = 2.0 * phi[1] + self.dim + 1.0
        v = -2.0 * _sym(phi[0])
        return n, v

    def validate_natural(self, phi):
        n, v = self._dof_scale(phi)
        if np.any(n - (self.dim - 1.0) <= 0.0):
            raise DomainError("wishart requires dof > dim - 1")
        if np.any(0.5 * (n - self.dim + 1.0) < MIN_SPECIAL_ARG):
            raise DomainError("wishart dof too close to dim - 1")
        spd_cholesky(v, DomainError)

    def _multidigamma(self, a):
        i = np.arange(self.dim)
        return digamma(a[..., None] - 0.5 * i).sum(axis=-1)

    def log_partition(self, phi):
        self.validate_natural(phi)
        n, v = self._dof_scale(phi)
        logdet_v = spd_logdet(v)
        out = (
            0.5 * n * self.dim * np.log(2.0)
            - 0.5 * n * logdet_v
            + multigammaln(0.5 * n, self.dim)
        )
        return _require_finite(out, "wishart log_partition")

    def moments(self, phi):
        self.validate_natural(phi)
        n, v = self._dof_scale(phi)
        e_lam = n[..., None, None] * spd_inverse(v)
        e_logdet = (
            self._multidigamma(np.asarray(0.5 * n))
            + self.dim * np.log(2.0)
            - spd_logdet(v)
        )
        return (e_lam, e_logdet)

    def statistics(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim < 2 or x.shape[-2:] != (self.dim, self.dim):
            raise ShapeError(f"wishart value must end with {(self.dim, self.dim)}")
        try:
            logdet = spd_logdet(x)
        except NumericalError:
            raise SupportError("wishart value must be symmetric positive definite")
        return (x, logdet), 0.0

    def natural_from_parents(self, parents):
        (n,) = parents[0]
        (v,) = parents[1]
        return (-0.5 * v, 0.5 * (n - self.dim - 1.0))

    def expected_log_partition(self, parents):
        (n,) = parents[0]
        (v,) = parents[1]
        return (
            0.5 * n * self.dim * np.log(2.0)
            - 0.5 * n * spd_logdet(v)
            + multigammaln(0.5 * np.asarray(n), self.dim)
        )

    def message_to_parent(self, slot, u, parents, weight=None):
        raise SlotMismatchError("wishart parents accept constants only")

    def sample(self, phi, rng):
        self.validate_natural(phi)
        n, v = self._dof_scale(phi)
        d = self.dim
        scale_chol = spd_cholesky(spd_inverse(v))
        n = np.asarray(n, dtype=float)
        plates = np.broadcast_shapes(n.shape, v.shape[:-2])
        a = np.zeros(plates + (d, d))
        rows, cols = np.tril_indices(d, k=-1)
        if rows.size:
            a[..., rows, cols] = rng.standard_normal(plates + (rows.size,))
        dfs = n[..., None] - np.arange(d)
        diag = np.sqrt(rng.chisquare(np.broadcast_to(dfs, plates + (d,))))
        idx = np.arange(d)
        a[..., idx, idx] = diag
        la = scale_chol @ a
        return la @ np.swapaxes(la, -1, -2)


@dataclass(frozen=True)
class Dirichlet(Family):
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError("Dirichlet needs at least 2 categories")

    @property
    def tag(self):
        return f"dirichlet({self.dim})"

    @property
    def block_shapes(self):
        return ((self.dim,),)

    @property
    def block_event_ndims(self):
        return (1,)

    @property
    def event_shape(self):
        return (self.dim,)

    @property
    def provides(self):
        return (LOG_SIMPLEX, self.dim)

    @property
    def parent_slots(self):
        return (
            ParentSlot("concentration", CONST_POSITIVE_VEC, self.dim,
                       constant_only=True),
        )

    def _alpha(self, phi):
        return phi[0] + 1.0

    def validate_natural(self, phi):
        if np.any(self._alpha(phi) < MIN_SPECIAL_ARG):
            raise DomainError("dirichlet concentration must be > 0")

    def log_partition(self, phi):
        self.validate_natural(phi)
        alpha = self._alpha(phi)
        out = gammaln(alpha).sum(axis=-1) - gammaln(alpha.sum(axis=-1))
        return _require_finite(out, "dirichlet log_partition")

    def moments(self, phi):
        self.validate_natural(phi)
        alpha = self._alpha(phi)
        return (digamma(alpha) - digamma(alpha.sum(axis=-1))[..., None],)

    def statistics(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim < 1 or x.shape[-1] != self.dim:
            raise ShapeError(f"dirichlet value must end with dim {self.dim}")
        if np.any(x <= 0.0) or np.any(np.abs(x.sum(axis=-1) - 1.0) > 1e-8):
            raise SupportError("dirichlet value must lie in the open simplex")
        return (np.log(x),), 0.0

    def natural_from_parents(self, parents):
        (alpha,) = parents[0]
        return (alpha - 1.0,)

    def expected_log_partition(self, parents):
        (alpha,) = parents[0]
        return gammaln(alpha).sum(axis=-1) - gammaln(alpha.sum(axis=-1))

    def message_to_parent(self, slot, u, parents, weight=None):
        raise SlotMismatchError("dirichlet concentration accepts constants only")

    def sample(self, phi, rng):
        self.validate_natural(phi)
        alpha = self._alpha(phi)
        g = rng.gamma(alpha)
        g = np.maximum(g, 1e-300)
        return g / g.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class Categorical(Family):
    # dim 1 is permitted as the degenerate gate of a single-component mixture.
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("Categorical needs at least 1 category")

    @property
    def tag(self):
        return f"categorical({self.dim})"

    @property
    def block_shapes(self):
        return ((self.dim,),)

    @property
    def block_event_ndims(self):
        return (1,)

    @property
    def event_shape(self):
        return (self.dim,)

    @property
    def provides(self):
        return (SIMPLEX, self.dim)

    @property
    def parent_slots(self):
        return (ParentSlot("probabilities", LOG_SIMPLEX, self.dim),)

    def validate_natural(self, phi):
        if np.any(np.isnan(phi[0])) or np.any(phi[0] == np.inf):
            raise DomainError("categorical log-probabilities must be < +inf")

    def log_partition(self, phi):
        self.validate_natural(phi)
        return _require_finite(logsumexp(phi[0], axis=-1), "categorical log_partition")

    def moments(self, phi):
        self.validate_natural(phi)
        shifted = phi[0] - phi[0].max(axis=-1, keepdims=True)
        p = np.exp(shifted)
        p = p / p.sum(axis=-1, keepdims=True)
        return (p,)

    def dot(self, phi_blocks, u_blocks):
        # 0 * (-inf) from degenerate categories contributes nothing.
        phi, u = np.broadcast_arrays(phi_blocks[0], u_blocks[0])
        prod = np.where(u != 0.0, np.where(u != 0.0, phi, 0.0) * u, 0.0)
        return prod.sum(axis=-1)

    def statistics(self, x):
        x = np.asarray(x)
        if x.ndim >= 1 and x.shape[-1] == self.dim and np.issubdtype(
            x.dtype, np.floating
        ):
            onehot = x
            if np.any((onehot != 0.0) & (onehot != 1.0)) or np.any(
                onehot.sum(axis=-1) != 1.0
            ):
                raise SupportError("categorical value must be one-hot")
            return (onehot.astype(float),), 0.0
        idx = x.astype(np.int64)
        if np.any(idx != np.asarray(x)) or np.any(idx < 0) or np.any(idx >= self.dim):
            raise SupportError(
                f"categorical index must be an integer in [0, {self.dim})"
            )
        onehot = np.zeros(idx.shape + (self.dim,))
        np.put_along_axis(onehot, idx[..., None], 1.0, axis=-1)
        return (onehot,), 0.0

    def natural_from_parents(self, parents):
        return (parents[0][0],)

    def expected_log_partition(self, parents):
        # E[ln sum_k p_k] = 0 for an exactly normalized simplex parent.
        logp = parents[0][0]
        return np.zeros(logp.shape[:-1])

    def message_to_parent(self, slot, u, parents, weight=None):
        if slot == 0:
            return (u[0],)
        raise SlotMismatchError(f"categorical has no slot {slot}")

    def sample(self, phi, rng):
        (p,) = self.moments(phi)
        cdf = np.cumsum(p, axis=-1)
        u = rng.random(p.shape[:-1])
        return (cdf < u[..., None]).sum(axis=-1)


# ---------------------------------------------------------------------------
# constant coercion and moment-kind adaptation
# ---------------------------------------------------------------------------


def constant_moments_for_slot(slot, value):
    """Exact moments of a constant array, shaped for ``slot``.

    The trailing axes of ``value`` are interpreted per the slot's moment
    kind; anything in front is plates.
    """
    value = np.asarray(value, dtype=float)
    kind = slot.kind
    if kind == VECTOR_OUTER:
        d = slot.dim
        if d == 1 and (value.ndim == 0 or value.shape[-1] != 1):
            value = value[..., None]
        if value.ndim < 1 or value.shape[-1] != d:
            raise SlotMismatchError(
                f"constant for slot '{slot.name}' must end with dim {d}"
            )
        return (value, _outer(value, value))
    if kind == SPD_LOGDET:
        d = slot.dim
        if d == 1 and (value.ndim < 2 or value.shape[-2:] != (1, 1)):
            value = value[..., None, None]
        if value.ndim < 2 or value.shape[-2:] != (d, d):
            raise SlotMismatchError(
                f"constant for slot '{slot.name}' must end with shape {(d, d)}"
            )
        return (value, spd_logdet(value))
    if kind == POSITIVE_LOG:
        if np.any(value <= 0.0):
            raise SlotMismatchError(f"constant for slot '{slot.name}' must be > 0")
        return (value, np.log(value))
    if kind == LOG_SIMPLEX:
        if value.ndim < 1 or value.shape[-1] != slot.dim:
            raise SlotMismatchError(
                f"constant for slot '{slot.name}' must end with dim {slot.dim}"
            )
        if np.any(value <= 0.0) or np.any(np.abs(value.sum(axis=-1) - 1.0) > 1e-8):
            raise SlotMismatchError(
                f"constant for slot '{slot.name}' must be a probability vector"
            )
        return (np.log(value),)
    if kind == CONST_SCALAR:
        if np.any(value <= 0.0):
            raise SlotMismatchError(f"constant for slot '{slot.name}' must be > 0")
        return (value,)
    if kind == CONST_SPD:
        d = slot.dim
        if value.ndim < 2 or value.shape[-2:] != (d, d):
            raise SlotMismatchError(
                f"constant for slot '{slot.name}' must end with shape {(d, d)}"
            )
        spd_cholesky(value)
        return (value,)
    if kind == CONST_POSITIVE_VEC:
        if value.ndim < 1 or value.shape[-1] != slot.dim:
            raise SlotMismatchError(
                f"constant for slot '{slot.name}' must end with dim {slot.dim}"
            )
        if np.any(value <= 0.0):
            raise SlotMismatchError(
                f"constant for slot '{slot.name}' must be entrywise > 0"
            )
        return (value,)
    raise SlotMismatchError(f"slot kind {kind} cannot take a constant")


def slot_accepts(slot, provided_kind, provided_dim):
    """Whether a stochastic parent providing the given kind can serve ``slot``."""
    if slot.constant_only:
        return False
    if provided_kind == slot.kind and (
        slot.dim is None or provided_dim == slot.dim
    ):
        return True
    if slot.kind == SPD_LOGDET and slot.dim == 1 and provided_kind == POSITIVE_LOG:
        return True
    if slot.kind == POSITIVE_LOG and provided_kind == SPD_LOGDET and provided_dim == 1:
        return True
    return False


def adapt_provided_moments(slot, provided_kind, provided_dim, blocks):
    """Coerce a stochastic parent's native moments to the slot's kind.

    Returns None when the parent cannot serve the slot.
    """
    kind = slot.kind
    if slot.constant_only:
        return None
    if provided_kind == kind and (slot.dim is None or provided_dim == slot.dim):
        return blocks
    if kind == SPD_LOGDET and slot.dim == 1 and provided_kind == POSITIVE_LOG:
        return _as_matrix_moments(blocks)
    if kind == POSITIVE_LOG and provided_kind == SPD_LOGDET and provided_dim == 1:
        return (blocks[0][..., 0, 0], blocks[1])
    return None


def adapt_message_to_parent(slot, parent_provides, blocks):
    """Reshape a slot-canonical message onto the parent's native blocks."""
    kind = slot.kind
    provided_kind, provided_dim = parent_provides
    if kind == SPD_LOGDET and provided_kind == POSITIVE_LOG:
        # 1x1 precision message onto a gamma rate/shape pair.
        return (blocks[0][..., 0, 0], blocks[1])
    if kind == POSITIVE_LOG and provided_kind == SPD_LOGDET and provided_dim == 1:
        return (blocks[0][..., None, None], blocks[1])
    return blocks


# ---------------------------------------------------------------------------
# module-level operations (spec surface)
# ---------------------------------------------------------------------------


def log_partition(phi: NaturalParams) -> np.ndarray:
    """A(phi), vectorized over plates."""
    return phi.family.log_partition(phi.blocks)


def moments_from_natural(phi: NaturalParams) -> MomentVector:
    """E[t(x)] under phi; equal to the gradient of log_partition."""
    return MomentVector(phi.family, phi.family.moments(phi.blocks))


def statistics_of_value(family: Family, x) -> tuple[MomentVector, float]:
    """Degenerate statistics t(x) of an observed value plus log h(x)."""
    blocks, log_h = family.statistics(x)
    return MomentVector(family, blocks), log_h


def natural_from_parent_moments(family: Family, parent_moments) -> NaturalParams:
    """Expected natural parameters given parent moment blocks."""
    return NaturalParams(family, family.natural_from_parents(parent_moments))


def expected_log_partition(family: Family, parent_moments) -> np.ndarray:
    """E[A(phi(parents))] under the parents' posteriors."""
    return family.expected_log_partition(parent_moments)


def message_to_parent(
    family: Family, slot: int, child_moments, coparent_moments, weight=None
):
    """Child-to-parent message blocks in the slot's canonical shape.

    ``weight`` scales the terms that do not depend on the child's
    statistics; passing responsibility-summed statistics together with the
    summed responsibilities yields the total message of many weighted
    child elements at once.
    """
    return family.message_to_parent(slot, child_moments, coparent_moments, weight)


def expected_log_pdf(
    phi_from_parents: NaturalParams,
    child_moments: MomentVector,
    expected_log_partition_terms,
    expected_log_base,
) -> np.ndarray:
    """E_q[log p(x | parents)] = phi.u - E[A] + E[h]."""
    fam = phi_from_parents.family
    if child_moments.family != fam:
        raise ShapeError("moments and parameters belong to different families")
    out = (
        fam.dot(phi_from_parents.blocks, child_moments.blocks)
        - expected_log_partition_terms
        + expected_log_base
    )
    return _require_finite(out, "expected_log_pdf")


def entropy(phi_q: NaturalParams, u_q: MomentVector) -> np.ndarray:
    """-E_q[log q(x)] = A(phi_q) - phi_q.u_q - E_q[h(x)]."""
    fam = phi_q.family
    out = (
        fam.log_partition(phi_q.blocks)
        - fam.dot(phi_q.blocks, u_q.blocks)
        - fam.log_base_constant()
    )
    return _require_finite(out, "entropy")


def draw_sample(phi: NaturalParams, seed) -> np.ndarray:
    """Deterministic sample from the distribution with parameters phi."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return phi.family.sample(phi.blocks, rng)

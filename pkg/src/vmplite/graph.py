"""Model graphs: stochastic, constant and deterministic nodes on plates.

Plate axes along which every element provably carries the same value are kept
collapsed to size 1 in the stored arrays; numpy broadcasting expands them only
where a child genuinely differs per element.  All reductions go through
``plates.reduce_to_plates``/``plates.plate_sum`` so that a collapsed axis
counts once per represented element.  An all-expanded mode
(``Graph(expand_broadcasts=True)``) materializes every array at its full
plate shape instead; both modes compute the same posteriors.

Observation masks mark which plate elements carry data (True).  Mask-false
elements are treated as exactly marginalized leaves: they send no messages to
parents, add no likelihood terms, and their own posterior tracks the prior
plus any messages from their own children.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import families as ef
from .errors import (
    ClusterSizeMismatchError,
    CycleError,
    DimensionMismatchError,
    NumericalError,
    PlateMismatchError,
    ShapeError,
    SlotMismatchError,
)
from .plates import (
    check_parent_plates,
    expand_to,
    plate_broadcast,
    plate_sum,
    reduce_to_plates,
)


def _filler_value(family, shape):
    """A valid in-support value used to pad masked-out observation cells."""
    if isinstance(family, ef.Gaussian):
        return np.zeros(shape)
    if isinstance(family, ef.Gamma):
        return np.ones(shape)
    if isinstance(family, ef.Wishart):
        return np.broadcast_to(np.eye(family.dim), shape).copy()
    if isinstance(family, ef.Dirichlet):
        return np.full(shape, 1.0 / family.dim)
    if isinstance(family, ef.Categorical):
        return np.zeros(shape, dtype=np.int64)
    raise TypeError(family)


def _mask_for_events(mask, event_ndim):
    return mask.reshape(mask.shape + (1,) * event_ndim)


@dataclass(frozen=True)
class BroadcastPlan:
    """Which plate axes hold one representative element.

    ``axes`` marks an axis 'shared' only when every natural-parameter block
    is constant along it; ``block_axes`` gives the same marking per block
    (for a Gaussian the second entry is the precision/covariance block,
    which often stays shared while the mean block expands).
    """

    axes: tuple
    block_axes: tuple


class Node:
    """Common base: identity, plates, child links."""

    def __init__(self, graph, name, plates):
        self.graph = graph
        self.name = name
        self.plates = tuple(int(p) for p in plates)
        self.children = []  # (child node, slot index)
        self.version = 0

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} plates={self.plates}>"


class ConstantNode(Node):
    """Wraps a raw array; emits exact moments shaped per consuming slot."""

    def __init__(self, graph, name, value):
        self.value = np.asarray(value, dtype=float)
        self._slot_cache = {}
        super().__init__(graph, name, ())

    def moments_for_slot(self, slot):
        if slot not in self._slot_cache:
            self._slot_cache[slot] = ef.constant_moments_for_slot(slot, self.value)
        return self._slot_cache[slot]


class SumProductNode(Node):
    """Deterministic dot product of two vector parents.

    Exposes scalar mean-parent moments (E[s], E[s^2]) with
    s = a . b, E[s] = E[a].E[b] and E[s^2] = tr(E[a a^T] E[b b^T]) under
    mean-field independence.  Messages from children are linear in the
    child's (m1, m2) blocks, so the summed incoming message is transformed
    once per parent: to parent a it is (m1 E[b], m2 E[b b^T]).
    """

    def __init__(self, graph, name, parent_a, parent_b):
        dims = []
        for p in (parent_a, parent_b):
            if isinstance(p, ConstantNode):
                val = p.value
                d = val.shape[-1] if val.ndim else 1
            elif isinstance(p, StochasticNode) and isinstance(
                p.family, ef.Gaussian
            ):
                d = p.family.dim
            elif isinstance(p, SumProductNode):
                d = 1
            else:
                raise SlotMismatchError(
                    f"dot-product parent {p.name} does not yield vector moments"
                )
            dims.append(d)
        if dims[0] != dims[1]:
            raise DimensionMismatchError(
                f"dot-product parents have dims {dims[0]} != {dims[1]}"
            )
        if parent_a is parent_b:
            # E[s^2] assumes the two factors are independent
            raise SlotMismatchError("dot product of a node with itself")
        self.dim = dims[0]
        self.parents = (parent_a, parent_b)
        self._slot = ef.ParentSlot("vector", ef.VECTOR_OUTER, self.dim)
        plates = ()
        for p in self.parents:
            plates = plate_broadcast(plates, _link_plates(p, self._slot))
        super().__init__(graph, name, plates)
        self._cache = None
        for i, p in enumerate(self.parents):
            p.children.append((self, i))

    def _parent_moments(self, i):
        return _moments_for_slot(self.parents[i], self._slot)

    def moments_blocks(self):
        versions = tuple(p.version for p in self.parents)
        if self._cache is not None and self._cache[0] == versions:
            return self._cache[1]
        (ea, eaa), (eb, ebb) = self._parent_moments(0), self._parent_moments(1)
        es = self._cross_sum(ea, eb, 1)
        es2 = self._cross_sum(eaa, ebb, 2)
        blocks = (es[..., None], es2[..., None, None])
        self._cache = (versions, blocks)
        return blocks

    @staticmethod
    def _cross_sum(a, b, event_ndim):
        """Contract the trailing event axes; outer (x,1)/(1,y) plate layouts
        go through one matrix product instead of a broadcast loop."""
        pa = a.shape[: a.ndim - event_ndim]
        pb = b.shape[: b.ndim - event_ndim]
        if (
            len(pa) == 2
            and len(pb) == 2
            and pa[1] == 1
            and pb[0] == 1
            and (pa[0] > 1 or pb[1] > 1)
        ):
            flat_a = a.reshape(pa[0], -1)
            flat_b = b.reshape(pb[1], -1)
            return flat_a @ flat_b.T
        subscript = "...i,...i->..." if event_ndim == 1 else "...ij,...ij->..."
        return np.einsum(subscript, a, b)

    @property
    def provides(self):
        return (ef.VECTOR_OUTER, 1)

    def message_to_parent_blocks(self, slot):
        incoming = _sum_child_messages(self)
        if incoming is None:
            return None
        m1 = incoming[0][..., 0]
        m2 = incoming[1][..., 0, 0]
        other = self._parent_moments(1 - slot)
        target = self.parents[slot].plates
        fused = self._fused_reduction(m1, m2, other, target)
        if fused is not None:
            return fused, target
        return (
            (m1[..., None] * other[0], m2[..., None, None] * other[1]),
            self.plates,
        )

    def _fused_reduction(self, m1, m2, other, target):
        """Contract the summed-out plate axis directly when both factors are
        fully expanded 2-D, instead of materializing (plates..., dim) blocks.

        Cuts the dominant allocation on large factorization models; the
        generic path in ``reduce_to_plates`` handles every other layout and
        produces the same values.
        """
        if len(self.plates) != 2 or len(target) != 2:
            return None
        p0, p1 = self.plates
        if target not in ((p0, 1), (1, p1)):
            return None
        sum_axis = 1 if target == (p0, 1) else 0
        d = self.dim
        e_vec, e_outer = other
        if np.shape(m1) != (p0, p1) or np.shape(e_vec)[-1] != d:
            return None
        e_vec_full = np.broadcast_to(e_vec, (p0, p1, d))
        if sum_axis == 1:
            first = np.einsum("ab,abd->ad", m1, e_vec_full)[:, None, :]
        else:
            first = np.einsum("ab,abd->bd", m1, e_vec_full)[None, :, :]
        second = m2[..., None, None] * e_outer
        second = reduce_to_plates(second, self.plates, target, 2)
        return (first, second)

    def message_mask(self):
        return None


class StochasticNode(Node):
    """Exponential-family variable with a variational posterior per element."""

    def __init__(self, graph, name, family, parents, plates):
        self.family = family
        self.parents = list(parents)
        super().__init__(graph, name, plates)
        self.observed_values = None
        self.observed_stats = None
        self.observed_log_h = 0.0
        self.mask = None
        self.svi_batch_mask = None  # transient, set by the SVI driver
        self._moments_cache = None
        self._register_with_parents()
        self.phi_q = self.collect_prior()
        if graph.expand_broadcasts:
            self.phi_q = self._expanded(self.phi_q)

    # -- construction -----------------------------------------------------

    def _register_with_parents(self):
        for i, p in enumerate(self.parents):
            slot = self.family.parent_slots[i]
            if not isinstance(p, ConstantNode):
                if slot.constant_only:
                    raise SlotMismatchError(
                        f"slot '{slot.name}' of {self.family} accepts constants only"
                    )
                if not _slot_accepts(p, slot):
                    raise SlotMismatchError(
                        f"node {p.name} cannot serve slot '{slot.name}' "
                        f"of {self.family}"
                    )
            check_parent_plates(self.plates, _link_plates(p, slot))
            p.children.append((self, i))

    # -- posterior state ---------------------------------------------------

    def _expanded(self, blocks):
        return tuple(
            expand_to(b, self.plates, s)
            for b, s in zip(blocks, self.family.block_shapes)
        )

    def set_posterior(self, blocks):
        blocks = tuple(np.asarray(b, dtype=float) for b in blocks)
        if self.graph.expand_broadcasts:
            blocks = self._expanded(blocks)
        self.phi_q = blocks
        self.version += 1
        self._moments_cache = None

    def posterior_moments(self):
        """Moments of the variational posterior (ignores observations)."""
        if self._moments_cache is None or self._moments_cache[0] != self.version:
            self._moments_cache = (self.version, self.family.moments(self.phi_q))
        return self._moments_cache[1]

    def moments_blocks(self):
        """Outgoing moments: exact statistics where observed, q elsewhere."""
        if self.observed_stats is not None and self.mask is None:
            return self.observed_stats
        if self.observed_stats is None:
            return self.posterior_moments()
        u_q = self.posterior_moments()
        return tuple(
            np.where(_mask_for_events(self.mask, n), s, u)
            for s, u, n in zip(
                self.observed_stats, u_q, self.family.block_event_ndims
            )
        )

    @property
    def provides(self):
        return self.family.provides

    @property
    def is_observed(self):
        return self.observed_stats is not None

    @property
    def fully_observed(self):
        return self.is_observed and self.mask is None

    # -- observation --------------------------------------------------------

    def observe(self, values, mask=True):
        fam = self.family
        values = np.asarray(values)
        event = fam.event_shape
        ev_ndim = len(event)
        expected = self.plates + event
        if isinstance(fam, ef.Categorical) and values.shape == self.plates:
            ev_ndim_vals = 0
        elif values.shape == expected:
            ev_ndim_vals = ev_ndim
        else:
            raise ShapeError(
                f"observed values for {self.name} have shape {values.shape}, "
                f"expected {expected}"
            )
        mask = np.asarray(mask, dtype=bool)
        try:
            fits = plate_broadcast(self.plates, mask.shape) == self.plates
        except PlateMismatchError:
            fits = False
        if not fits:
            raise ShapeError(
                f"mask shape {mask.shape} does not broadcast to plates "
                f"{self.plates}"
            )
        if mask.all():
            use_mask = None
            filled = values
        else:
            use_mask = np.broadcast_to(mask, self.plates)
            filler = _filler_value(fam, values.shape)
            sel = np.broadcast_to(
                use_mask.reshape(use_mask.shape + (1,) * ev_ndim_vals),
                values.shape,
            )
            filled = np.where(sel, values, filler)
        with np.errstate(over="ignore", invalid="ignore"):
            # extreme but in-support values may overflow t(x); the non-finite
            # statistics surface as NumericalError where they are consumed
            stats, log_h = fam.statistics(filled)
        self.observed_values = values
        self.observed_stats = stats
        self.observed_log_h = log_h
        self.mask = use_mask
        self.version += 1
        self._moments_cache = None

    def message_mask(self):
        """Multiplier zeroing contributions of masked-out elements.

        Combines the observation mask with any transient minibatch mask.
        """
        factor = None
        if self.observed_stats is not None and self.mask is not None:
            factor = self.mask.astype(float)
        if self.svi_batch_mask is not None:
            batch = self.svi_batch_mask.astype(float)
            factor = batch if factor is None else factor * batch
        return factor

    # -- message protocol ---------------------------------------------------

    def _parent_moments(self, i):
        return _moments_for_slot(self.parents[i], self.family.parent_slots[i])

    def collect_prior(self):
        """Expected natural parameters from the parents, per plate element."""
        parent_u = [self._parent_moments(i) for i in range(len(self.parents))]
        return self.family.natural_from_parents(parent_u)

    def expected_prior_log_partition(self):
        parent_u = [self._parent_moments(i) for i in range(len(self.parents))]
        return self.family.expected_log_partition(parent_u)

    def message_to_parent_blocks(self, slot):
        """Message to ``self.parents[slot]``, shaped for that parent."""
        parent = self.parents[slot]
        coparents = [
            self._parent_moments(i) if i != slot else None
            for i in range(len(self.parents))
        ]
        blocks = self.family.message_to_parent(
            slot, self.moments_blocks(), coparents
        )
        blocks = ef.adapt_message_to_parent(
            self.family.parent_slots[slot], parent.provides, blocks
        )
        factor = self.message_mask()
        if factor is not None:
            ndims = _parent_block_event_ndims(parent)
            blocks = tuple(
                b * _mask_for_events(factor, n) for b, n in zip(blocks, ndims)
            )
        return blocks, self.plates

    # -- elbo terms ----------------------------------------------------------

    def elbo_contribution(self):
        fam = self.family
        phi_p = self.collect_prior()
        ea_prior = self.expected_prior_log_partition()
        observed_term = None
        latent_term = None
        if self.observed_stats is not None:
            observed_term = (
                fam.dot(phi_p, self.observed_stats)
                - ea_prior
                + self.observed_log_h
            )
        if not self.fully_observed:
            u_q = self.posterior_moments()
            latent_term = (
                fam.dot(phi_p, u_q)
                - ea_prior
                + fam.log_partition(self.phi_q)
                - fam.dot(self.phi_q, u_q)
            )
        if self.observed_stats is None:
            per_element = latent_term
        elif self.mask is None:
            per_element = observed_term
        else:
            per_element = np.where(self.mask, observed_term, 0.0)
        return plate_sum(per_element, self.plates)


class MixtureNode(StochasticNode):
    """Stochastic node whose distribution is gated over K component slices.

    Slot 0 is a categorical gate of size K; the remaining slots carry the
    component family's parents with one leading cluster plate of size K.
    The prior is the responsibility-weighted average of the per-component
    expected natural parameters, the gate receives the per-component
    expected log-density vector, and component-parent messages are scaled
    by the responsibilities.
    """

    def __init__(self, graph, name, gate, component_family, parents, plates):
        self.gate = gate
        gate_provides = getattr(gate, "provides", None)
        if isinstance(gate, MixtureNode) or gate_provides is None or \
                gate_provides[0] != ef.SIMPLEX:
            raise SlotMismatchError(
                "mixture gate must be a categorical node (nested gates are "
                "unsupported)"
            )
        self.n_clusters = gate_provides[1]
        super().__init__(graph, name, component_family, parents, plates)
        check_parent_plates(self.plates, gate.plates)
        gate.children.append((self, -1))

    def _register_with_parents(self):
        k = self.n_clusters
        for i, p in enumerate(self.parents):
            slot = self.family.parent_slots[i]
            link = _link_plates(p, slot)
            if len(link) != 1 or link[0] != k:
                raise ClusterSizeMismatchError(
                    f"component parent {p.name} has plates {link}, expected ({k},)"
                )
            if not isinstance(p, ConstantNode):
                if slot.constant_only:
                    raise SlotMismatchError(
                        f"slot '{slot.name}' of {self.family} accepts constants only"
                    )
                if not _slot_accepts(p, slot):
                    raise SlotMismatchError(
                        f"node {p.name} cannot serve slot '{slot.name}' "
                        f"of {self.family}"
                    )
            p.children.append((self, i))

    def responsibilities(self):
        return self.gate.moments_blocks()[0]

    def _component_naturals(self):
        parent_u = [self._parent_moments(i) for i in range(len(self.parents))]
        k = self.n_clusters
        return tuple(
            np.broadcast_to(b, (k,) + s)
            for b, s in zip(
                self.family.natural_from_parents(parent_u),
                self.family.block_shapes,
            )
        )

    def _component_log_partitions(self):
        parent_u = [self._parent_moments(i) for i in range(len(self.parents))]
        ea = self.family.expected_log_partition(parent_u)
        return np.broadcast_to(ea, (self.n_clusters,))

    def _weighted_responsibilities(self):
        r = self.responsibilities()
        factor = self.message_mask()
        if factor is not None:
            r = r * factor[..., None]
        return r

    def collect_prior(self):
        comp = self._component_naturals()
        r = self.responsibilities()
        out = []
        for blk, shape in zip(comp, self.family.block_shapes):
            flat = blk.reshape(self.n_clusters, -1)
            out.append((r @ flat).reshape(r.shape[:-1] + shape))
        return tuple(out)

    def expected_prior_log_partition(self):
        ea = self._component_log_partitions()
        return self.responsibilities() @ ea

    def gate_message_blocks(self):
        """Per-component expected log-density of this node's value."""
        comp = self._component_naturals()
        ea = self._component_log_partitions()
        u = self.moments_blocks()
        full = self.plates
        total = 0.0
        for blk, ublk, shape in zip(comp, u, self.family.block_shapes):
            u_flat = np.broadcast_to(ublk, full + shape).reshape(full + (-1,))
            total = total + u_flat @ blk.reshape(self.n_clusters, -1).T
        g = total - ea + self.family.log_base_constant()
        factor = self.message_mask()
        if factor is not None:
            g = g * factor[..., None]
        return (g,)

    def message_to_parent_blocks(self, slot):
        """Responsibility-weighted component message, already on (K,) plates.

        The total message sum_n r_nk m(u_n) is assembled from the weighted
        statistics sum_n r_nk u_n and the weights sum_n r_nk, which avoids
        materializing per-element per-component blocks.
        """
        if slot == -1:
            return self.gate_message_blocks(), self.plates
        parent = self.parents[slot]
        coparents = [
            self._parent_moments(i) if i != slot else None
            for i in range(len(self.parents))
        ]
        r = self._weighted_responsibilities()
        k = self.n_clusters
        full = self.plates
        r_flat = np.broadcast_to(r, full + (k,)).reshape(-1, k)
        u_hat = []
        for ublk, shape in zip(self.moments_blocks(), self.family.block_shapes):
            u_flat = np.broadcast_to(ublk, full + shape).reshape(
                r_flat.shape[0], -1
            )
            u_hat.append((r_flat.T @ u_flat).reshape((k,) + shape))
        w_hat = r_flat.sum(axis=0)
        blocks = self.family.message_to_parent(
            slot, tuple(u_hat), coparents, weight=w_hat
        )
        blocks = ef.adapt_message_to_parent(
            self.family.parent_slots[slot], parent.provides, blocks
        )
        return blocks, (self.n_clusters,)

# ---------------------------------------------------------------------------
# slot/moment plumbing shared by node kinds
# ---------------------------------------------------------------------------


def _moments_for_slot(parent, slot):
    if isinstance(parent, ConstantNode):
        return parent.moments_for_slot(slot)
    kind, dim = parent.provides
    blocks = parent.moments_blocks()
    adapted = ef.adapt_provided_moments(slot, kind, dim, blocks)
    if adapted is None:
        raise SlotMismatchError(
            f"node {parent.name} cannot serve slot '{slot.name}'"
        )
    return adapted


def _slot_accepts(parent, slot):
    if isinstance(parent, ConstantNode):
        return True
    kind, dim = parent.provides
    return ef.slot_accepts(slot, kind, dim)


def _link_plates(parent, slot):
    """Plate shape a parent contributes through one slot."""
    if isinstance(parent, ConstantNode):
        blocks = parent.moments_for_slot(slot)
        ndims = _slot_block_event_ndims(slot)
        return tuple(blocks[0].shape[: blocks[0].ndim - ndims[0]])
    return parent.plates


def _slot_block_event_ndims(slot):
    kind = slot.kind
    if kind == ef.VECTOR_OUTER:
        return (1, 2)
    if kind == ef.SPD_LOGDET:
        return (2, 0)
    if kind == ef.POSITIVE_LOG:
        return (0, 0)
    if kind in (ef.LOG_SIMPLEX, ef.SIMPLEX, ef.CONST_POSITIVE_VEC):
        return (1,)
    if kind == ef.CONST_SCALAR:
        return (0,)
    if kind == ef.CONST_SPD:
        return (2,)
    raise SlotMismatchError(kind)


def _parent_block_event_ndims(parent):
    if isinstance(parent, SumProductNode):
        return (1, 2)
    return parent.family.block_event_ndims


def _sum_child_messages(node, scale=1.0):
    """Sum of all children's messages, reduced onto ``node``'s plates.

    Returns None when the node has no message-sending children.
    """
    if isinstance(node, StochasticNode):
        ndims = node.family.block_event_ndims
    else:
        ndims = (1, 2)  # dot-product node: scalar gaussian blocks
    total = None
    for child, slot in node.children:
        got = child.message_to_parent_blocks(slot)
        if got is None:
            continue
        blocks, src = got
        reduced = tuple(
            reduce_to_plates(b, src, node.plates, n)
            for b, n in zip(blocks, ndims)
        )
        if total is None:
            total = list(reduced)
        else:
            total = [t + b for t, b in zip(total, reduced)]
    if total is None:
        return None
    if scale != 1.0:
        total = [scale * t for t in total]
    return tuple(total)


# ---------------------------------------------------------------------------
# the graph container
# ---------------------------------------------------------------------------


class Graph:
    """Container for a model; nodes are created through its factory methods.

    Parents must already belong to the same graph, which keeps construction
    acyclic by definition.
    """

    def __init__(self, expand_broadcasts=False):
        self.nodes = []
        self._by_name = {}
        self.expand_broadcasts = expand_broadcasts
        self._counter = 0

    # -- membership ---------------------------------------------------------

    def _fresh_name(self, prefix):
        self._counter += 1
        return f"{prefix}{self._counter}"

    def _add(self, node):
        if node.name in self._by_name:
            raise ValueError(f"duplicate node name '{node.name}'")
        self.nodes.append(node)
        self._by_name[node.name] = node
        return node

    def node(self, name):
        return self._by_name[name]

    def _resolve(self, parent, name_hint):
        if isinstance(parent, Node):
            if parent.graph is not self:
                raise CycleError(
                    f"parent {parent.name} belongs to a different graph"
                )
            return parent
        return self.constant(parent, name=self._fresh_name(name_hint))

    # -- factories ------------------------------------------------------------

    def constant(self, value, name=None):
        return self._add(
            ConstantNode(self, name or self._fresh_name("const"), value)
        )

    def add_stochastic(self, family, parents, plates=(), name=None):
        parents = [
            self._resolve(p, f"{name or 'node'}_p{i}")
            for i, p in enumerate(parents)
        ]
        if len(parents) != len(family.parent_slots):
            raise SlotMismatchError(
                f"{family} takes {len(family.parent_slots)} parents, "
                f"got {len(parents)}"
            )
        node = StochasticNode(
            self, name or self._fresh_name("node"), family, parents, plates
        )
        return self._add(node)

    def add_mixture(self, gate, component_family, parents, plates=(), name=None):
        parents = [
            self._resolve(p, f"{name or 'mix'}_p{i}")
            for i, p in enumerate(parents)
        ]
        if len(parents) != len(component_family.parent_slots):
            raise SlotMismatchError(
                f"{component_family} takes {len(component_family.parent_slots)} "
                f"parents, got {len(parents)}"
            )
        node = MixtureNode(
            self,
            name or self._fresh_name("mixture"),
            gate,
            component_family,
            parents,
            plates,
        )
        return self._add(node)

    def add_sum_product(self, parent_a, parent_b, name=None):
        parent_a = self._resolve(parent_a, "dot_a")
        parent_b = self._resolve(parent_b, "dot_b")
        return self._add(
            SumProductNode(
                self, name or self._fresh_name("dot"), parent_a, parent_b
            )
        )

    # convenience constructors mirroring the family set

    def gaussian(self, mean, precision, plates=(), name=None, dim=None):
        if dim is None:
            dim = _infer_gaussian_dim(mean)
        return self.add_stochastic(
            ef.Gaussian(dim), [mean, precision], plates, name
        )

    def gamma(self, shape, rate, plates=(), name=None):
        return self.add_stochastic(ef.Gamma(), [shape, rate], plates, name)

    def wishart(self, dof, inverse_scale, plates=(), name=None):
        inverse_scale = np.asarray(inverse_scale, dtype=float)
        return self.add_stochastic(
            ef.Wishart(inverse_scale.shape[-1]),
            [dof, inverse_scale],
            plates,
            name,
        )

    def dirichlet(self, concentration, plates=(), name=None):
        concentration = np.asarray(concentration, dtype=float)
        return self.add_stochastic(
            ef.Dirichlet(concentration.shape[-1]), [concentration], plates, name
        )

    def categorical(self, probabilities, plates=(), name=None, dim=None):
        if dim is None:
            if isinstance(probabilities, StochasticNode):
                dim = probabilities.family.dim
            else:
                dim = np.asarray(probabilities).shape[-1]
        return self.add_stochastic(
            ef.Categorical(dim), [probabilities], plates, name
        )

    def mixture(self, gate, component_family, *parents, plates=(), name=None):
        return self.add_mixture(gate, component_family, list(parents), plates, name)

    # -- spec operations -------------------------------------------------------

    def observe(self, node, values, mask=True):
        if not isinstance(node, StochasticNode):
            raise ShapeError("only stochastic nodes can be observed")
        node.observe(values, mask)

    def collect_prior(self, node):
        return node.collect_prior()

    def collect_child_messages(self, node):
        got = _sum_child_messages(node)
        if got is None:
            if isinstance(node, StochasticNode):
                plates_shape = ()
                return tuple(
                    np.zeros(plates_shape + s) for s in node.family.block_shapes
                )
            return None
        return got

    def update_node(self, node, message_scale=1.0):
        """One coordinate update; returns the max-norm change in phi_q."""
        if not isinstance(node, StochasticNode):
            raise ShapeError("only stochastic nodes carry a posterior")
        if node.fully_observed:
            raise ShapeError(f"node {node.name} is fully observed")
        prior = node.collect_prior()
        msgs = _sum_child_messages(node, scale=message_scale)
        if msgs is None:
            new = prior
        else:
            new = tuple(p + m for p, m in zip(prior, msgs))
        old = node.phi_q
        change = max(
            float(np.max(np.abs(np.subtract(n, o)))) for n, o in zip(new, old)
        )
        node.set_posterior(new)
        node.posterior_moments()  # validates and refreshes, may raise
        return change

    def plan_broadcast(self, node):
        """Report which plate axes hold one representative element."""
        if not isinstance(node, StochasticNode):
            raise ShapeError("broadcast plans apply to stochastic nodes")
        nplates = len(node.plates)
        nblocks = len(node.family.block_shapes)
        ndims = node.family.block_event_ndims
        per_block = [[prior_b] for prior_b in node.collect_prior()]
        msgs = _sum_child_messages(node)
        if msgs is not None:
            for store, m in zip(per_block, msgs):
                store.append(m)
        mask_mixed = [False] * nplates
        if node.mask is not None:
            m = np.broadcast_to(node.mask, node.plates)
            for axis in range(nplates):
                first = np.take(m, [0], axis=axis)
                mask_mixed[axis] = not np.all(m == first)
        block_axes = []
        for b in range(nblocks):
            marks = []
            for axis in range(nplates):
                shared = True
                if node.plates[axis] != 1:
                    if mask_mixed[axis]:
                        shared = False
                    else:
                        for arr in per_block[b]:
                            lead = np.ndim(arr) - ndims[b]
                            j = lead - nplates + axis
                            if j >= 0 and np.shape(arr)[j] != 1:
                                shared = False
                                break
                marks.append("shared" if shared else "expanded")
            block_axes.append(tuple(marks))
        axes = tuple(
            "shared"
            if all(block_axes[b][axis] == "shared" for b in range(nblocks))
            else "expanded"
            for axis in range(nplates)
        )
        return BroadcastPlan(axes, tuple(block_axes))

    # -- whole-graph helpers -----------------------------------------------

    def stochastic_nodes(self):
        return [n for n in self.nodes if isinstance(n, StochasticNode)]

    def latent_nodes(self):
        return [n for n in self.stochastic_nodes() if not n.fully_observed]

    def observed_nodes(self):
        return [n for n in self.stochastic_nodes() if n.is_observed]

    def elbo(self):
        total = 0.0
        for node in self.stochastic_nodes():
            total += float(node.elbo_contribution())
        if not np.isfinite(total):
            raise NumericalError("non-finite evidence lower bound")
        return total


def _infer_gaussian_dim(mean):
    if isinstance(mean, StochasticNode) and isinstance(mean.family, ef.Gaussian):
        return mean.family.dim
    if isinstance(mean, SumProductNode):
        return 1
    if isinstance(mean, ConstantNode):
        val = mean.value
        return val.shape[-1] if val.ndim else 1
    val = np.asarray(mean)
    return val.shape[-1] if val.ndim else 1

"""Coordinate-ascent VB driver: ELBO monitoring, annealing, SVI.

A fit repeatedly sweeps the latent nodes in a fixed order, recording the
evidence lower bound after each sweep.  Convergence compares consecutive
bound values relative to the bound's magnitude; the value before the first
sweep serves as the first comparison point.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import families as ef
from .errors import ConfigurationError, NumericalError
from .graph import Graph, StochasticNode
from .plates import expand_to


@dataclass
class FitOptions:
    """Sweep control for one fit."""

    update_order: list | None = None
    max_sweeps: int = 200
    tol: float = 1e-6
    seed: int = 0

    def validate(self, graph):
        if self.max_sweeps < 1:
            raise ConfigurationError("max_sweeps must be >= 1")
        if not self.tol > 0:
            raise ConfigurationError("tol must be > 0")
        latent = graph.latent_nodes()
        if self.update_order is None:
            return list(latent)
        order = list(self.update_order)
        if sorted(id(n) for n in order) != sorted(id(n) for n in latent):
            raise ConfigurationError(
                "update order must cover every latent stochastic node exactly once"
            )
        return order


@dataclass
class FitReport:
    """Per-sweep bound values and timing for one fit."""

    elbo_trace: list = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    ms_per_sweep: list = field(default_factory=list)

    def to_dict(self):
        return {
            "elbo_trace": [float(e) for e in self.elbo_trace],
            "sweeps": self.sweeps,
            "converged": self.converged,
            "ms_per_sweep": [float(t) for t in self.ms_per_sweep],
        }


@dataclass
class AnnealingSchedule:
    """Inverse temperatures applied to likelihood messages, one per sweep.

    Must be non-decreasing, inside (0, 1], and end at exactly 1; sweeps past
    the end of the schedule run at 1.
    """

    betas: list

    def validate(self):
        betas = [float(b) for b in self.betas]
        if not betas:
            raise ConfigurationError("annealing schedule is empty")
        if any(b <= 0.0 or b > 1.0 for b in betas):
            raise ConfigurationError("annealing betas must lie in (0, 1]")
        if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
            raise ConfigurationError("annealing betas must be non-decreasing")
        if betas[-1] != 1.0:
            raise ConfigurationError("annealing schedule must end at beta = 1")
        return betas


@dataclass
class SviSchedule:
    """Minibatch schedule: step size rho_t = (t + delay)^(-forgetting)."""

    batch_axis: int
    batch_size: int
    total: int
    delay: float = 0.0
    forgetting: float = 0.7
    global_nodes: list | None = None

    def validate(self):
        if not 1 <= self.batch_size <= self.total:
            raise ConfigurationError("batch size must satisfy 1 <= M <= N")
        if self.delay < 0:
            raise ConfigurationError("delay must be >= 0")
        if not 0.5 < self.forgetting <= 1.0:
            raise ConfigurationError("forgetting rate must lie in (0.5, 1]")


def elbo(graph: Graph) -> float:
    """Evidence lower bound of the graph's current posteriors."""
    return graph.elbo()


def initialize_from_random(node: StochasticNode, seed) -> None:
    """Symmetry-breaking posterior initialization, deterministic given seed.

    Categorical nodes get per-element responsibilities from a flat Dirichlet;
    continuous nodes get a posterior re-centered on one draw from their
    prior (prior dispersion kept).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    fam = node.family
    prior = tuple(
        expand_to(b, node.plates, s)
        for b, s in zip(node.collect_prior(), fam.block_shapes)
    )
    if isinstance(fam, ef.Categorical):
        r = rng.dirichlet(np.ones(fam.dim), size=node.plates or None)
        node.set_posterior((np.log(np.maximum(r, 1e-300)),))
        return
    draw = fam.sample(prior, rng)
    if isinstance(fam, ef.Gaussian):
        lam0 = -2.0 * prior[1]
        node.set_posterior(
            (np.einsum("...ij,...j->...i", lam0, draw), prior[1])
        )
    elif isinstance(fam, ef.Gamma):
        a0 = prior[1] + 1.0
        node.set_posterior((-a0 / draw, prior[1]))
    elif isinstance(fam, ef.Wishart):
        n0 = 2.0 * prior[1] + fam.dim + 1.0
        v_new = n0[..., None, None] * ef.spd_inverse(draw)
        node.set_posterior((-0.5 * v_new, prior[1]))
    elif isinstance(fam, ef.Dirichlet):
        total = (prior[0] + 1.0).sum(axis=-1, keepdims=True)
        r = rng.dirichlet(np.ones(fam.dim), size=node.plates or None)
        node.set_posterior((np.maximum(r * total, 1e-6) - 1.0,))
    else:
        raise ConfigurationError(f"no random initialization for {fam}")


def _abort_with_partial(exc, report):
    exc.partial_report = report
    raise exc


def _run(graph, options, betas=None):
    order = options.validate(graph)
    if not graph.observed_nodes():
        raise ConfigurationError("fit requires at least one observed node")
    report = FitReport()
    try:
        elbo_prev = graph.elbo()
    except NumericalError as exc:
        _abort_with_partial(exc, report)
    for sweep in range(options.max_sweeps):
        beta = 1.0
        if betas is not None and sweep < len(betas):
            beta = betas[sweep]
        started = time.perf_counter()
        try:
            for node in order:
                graph.update_node(node, message_scale=beta)
            elbo_now = graph.elbo()
        except NumericalError as exc:
            _abort_with_partial(exc, report)
        report.ms_per_sweep.append((time.perf_counter() - started) * 1e3)
        report.elbo_trace.append(elbo_now)
        report.sweeps += 1
        if beta == 1.0 and abs(elbo_now - elbo_prev) < options.tol * abs(elbo_now):
            report.converged = True
            break
        elbo_prev = elbo_now
    return report


def run_vb(graph: Graph, options: FitOptions) -> FitReport:
    """Batch coordinate-ascent VB until convergence or max sweeps."""
    return _run(graph, options)


def run_annealed(
    graph: Graph, options: FitOptions, schedule: AnnealingSchedule
) -> FitReport:
    """VB with likelihood messages scaled by the sweep's inverse temperature.

    The reported trace always holds the unannealed bound; convergence is
    only tested once the temperature reaches 1.
    """
    betas = schedule.validate()
    return _run(graph, options, betas=betas)


def _batch_axis_offset(schedule, obs_nodes):
    """Trailing-aligned offset of the batch axis, from the observed node."""
    for node in obs_nodes:
        nplates = len(node.plates)
        axis = schedule.batch_axis
        if axis < 0:
            axis += nplates
        if 0 <= axis < nplates and node.plates[axis] == schedule.total:
            return nplates - axis, node
    raise ConfigurationError(
        "no observed node carries a plate axis of the scheduled size"
    )


def _carries_batch_axis(node, offset, total):
    plates = node.plates
    return len(plates) >= offset and plates[len(plates) - offset] == total


def _batch_mask(indices, total, offset):
    mask = np.zeros(total, dtype=bool)
    mask[indices] = True
    return mask.reshape((total,) + (1,) * (offset - 1))


def run_svi(graph: Graph, options: FitOptions, schedule: SviSchedule) -> FitReport:
    """Stochastic VB: exact local updates on a minibatch, then a blended
    natural-parameter step on the global nodes with messages rescaled by
    N over the batch size."""
    schedule.validate()
    order = options.validate(graph)
    obs_nodes = graph.observed_nodes()
    if not obs_nodes:
        raise ConfigurationError("fit requires at least one observed node")
    offset, obs = _batch_axis_offset(schedule, obs_nodes)
    total = schedule.total
    locals_ = [n for n in order if _carries_batch_axis(n, offset, total)]
    globals_ = [n for n in order if not _carries_batch_axis(n, offset, total)]
    if schedule.global_nodes is not None:
        for node in schedule.global_nodes:
            if _carries_batch_axis(node, offset, total):
                raise ConfigurationError(
                    f"global node {node.name} carries the minibatch axis"
                )
    rng = np.random.default_rng(options.seed)
    report = FitReport()
    try:
        elbo_prev = graph.elbo()
    except NumericalError as exc:
        _abort_with_partial(exc, report)
    perm = rng.permutation(total)
    cursor = 0
    batched_nodes = list(dict.fromkeys([obs] + locals_))
    for step in range(1, options.max_sweeps + 1):
        if cursor >= total:
            perm = rng.permutation(total)
            cursor = 0
        indices = perm[cursor : cursor + schedule.batch_size]
        cursor += schedule.batch_size
        scale = total / len(indices)
        rho = (step + schedule.delay) ** (-schedule.forgetting)
        batch = _batch_mask(indices, total, offset)
        started = time.perf_counter()
        try:
            for node in batched_nodes:
                node.svi_batch_mask = batch
            for node in locals_:
                old = node.phi_q
                graph.update_node(node)
                merged = tuple(
                    np.where(
                        batch.reshape(batch.shape + (1,) * nd),
                        new,
                        np.asarray(old_b),
                    )
                    for new, old_b, nd in zip(
                        node.phi_q, old, node.family.block_event_ndims
                    )
                )
                node.set_posterior(merged)
            for node in globals_:
                old = node.phi_q
                graph.update_node(node, message_scale=scale)
                blended = tuple(
                    (1.0 - rho) * np.asarray(o) + rho * new
                    for o, new in zip(old, node.phi_q)
                )
                node.set_posterior(blended)
        except NumericalError as exc:
            _abort_with_partial(exc, report)
        finally:
            for node in batched_nodes:
                node.svi_batch_mask = None
        try:
            elbo_now = graph.elbo()
        except NumericalError as exc:
            _abort_with_partial(exc, report)
        report.ms_per_sweep.append((time.perf_counter() - started) * 1e3)
        report.elbo_trace.append(elbo_now)
        report.sweeps += 1
        if abs(elbo_now - elbo_prev) < options.tol * abs(elbo_now):
            report.converged = True
            break
        elbo_prev = elbo_now
    return report

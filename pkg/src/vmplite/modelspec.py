"""Declarative model specs: JSON documents describing a graph plus fit options.

Schema (top level):

    {
      "nodes":   [ {"name", "kind", "family", "parents", "plates",
                    "constant", "dim"} ... ],
      "observe": [ {"node", "data", "missing_token"} ... ] or one object,
      "engine":  {"mode", "max_sweeps", "tol", "seed", "schedule",
                  "initialize"}
    }

``kind`` is one of stochastic / constant / mixture / sum_product (default
stochastic).  Parents are node names or literal constants (numbers or nested
arrays).  ``engine.mode`` is vb / annealed / svi; annealed takes
``schedule.betas``, svi takes ``schedule.{batch_axis,batch_size,total,
delay,forgetting}``.  ``engine.initialize`` lists nodes that receive a
seeded random initialization before the fit.

Data files are headerless numeric CSV; cells equal to the missing token
(default "NA") are masked out.  The file's cells are reshaped to the node's
plates and event shape; for families with non-scalar events a plate element
is observed only when all of its cells are present.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import engine as eng
from . import families as ef
from .errors import (
    ConfigurationError,
    CycleError,
    NonNumericError,
    ParseError,
    RaggedRowError,
    ShapeError,
    ValidationError,
    VmpError,
)
from .graph import Graph, StochasticNode
from .plates import expand_to

FAMILY_NAMES = ("gaussian", "gamma", "wishart", "dirichlet", "categorical")
NODE_KINDS = ("stochastic", "constant", "mixture", "sum_product")
ENGINE_MODES = ("vb", "annealed", "svi")


@dataclass
class NodeDecl:
    name: str
    kind: str = "stochastic"
    family: str | None = None
    parents: list = field(default_factory=list)
    plates: tuple = ()
    constant: object = None
    dim: int | None = None


@dataclass
class ObserveDecl:
    node: str
    data: str | None = None
    missing_token: str = "NA"


@dataclass
class EngineDecl:
    mode: str = "vb"
    max_sweeps: int = 200
    tol: float = 1e-6
    seed: int = 0
    schedule: dict = field(default_factory=dict)
    initialize: list = field(default_factory=list)


@dataclass
class ModelSpec:
    nodes: list
    observe: list
    engine: EngineDecl


# ---------------------------------------------------------------------------
# parsing and validation
# ---------------------------------------------------------------------------


def _fail(path, message):
    raise ValidationError(f"{path}: {message}")


def _expect_dict(obj, path):
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    return obj


def parse_model_spec(text: str) -> ModelSpec:
    """Parse and validate a spec document; diagnostics name the bad path."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}")
    _expect_dict(doc, "$")
    raw_nodes = doc.get("nodes")
    if not raw_nodes:
        _fail("$.nodes", "no nodes")
    if not isinstance(raw_nodes, list):
        _fail("$.nodes", "must be a list")
    decls = []
    names = set()
    for i, raw in enumerate(raw_nodes):
        path = f"$.nodes[{i}]"
        _expect_dict(raw, path)
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            _fail(path + ".name", "every node needs a non-empty name")
        if name in names:
            _fail(path + ".name", f"duplicate node name '{name}'")
        names.add(name)
        kind = raw.get("kind", "stochastic")
        if kind not in NODE_KINDS:
            _fail(path + ".kind", f"unknown kind '{kind}'")
        family = raw.get("family")
        if kind in ("stochastic", "mixture"):
            if family not in FAMILY_NAMES:
                _fail(path + ".family", f"unknown family '{family}'")
        plates = raw.get("plates", [])
        if not isinstance(plates, list) or not all(
            isinstance(p, int) and p >= 0 for p in plates
        ):
            _fail(path + ".plates", "plates must be a list of non-negative ints")
        parents = raw.get("parents", [])
        if not isinstance(parents, list):
            _fail(path + ".parents", "parents must be a list")
        if kind == "constant" and "constant" not in raw:
            _fail(path + ".constant", "constant nodes need a value")
        dim = raw.get("dim")
        if dim is not None and (not isinstance(dim, int) or dim < 1):
            _fail(path + ".dim", "dim must be a positive integer")
        decls.append(
            NodeDecl(
                name=name,
                kind=kind,
                family=family,
                parents=parents,
                plates=tuple(plates),
                constant=raw.get("constant"),
                dim=dim,
            )
        )
    _check_references(decls)

    raw_obs = doc.get("observe", [])
    if isinstance(raw_obs, dict):
        raw_obs = [raw_obs]
    if not isinstance(raw_obs, list):
        _fail("$.observe", "must be an object or a list")
    observe = []
    for i, raw in enumerate(raw_obs):
        path = f"$.observe[{i}]"
        _expect_dict(raw, path)
        node = raw.get("node")
        if node not in names:
            _fail(path + ".node", f"unknown node '{node}'")
        observe.append(
            ObserveDecl(
                node=node,
                data=raw.get("data"),
                missing_token=raw.get("missing_token", "NA"),
            )
        )

    raw_eng = doc.get("engine", {})
    _expect_dict(raw_eng, "$.engine")
    mode = raw_eng.get("mode", "vb")
    if mode not in ENGINE_MODES:
        _fail("$.engine.mode", f"unknown mode '{mode}'")
    engine = EngineDecl(
        mode=mode,
        max_sweeps=raw_eng.get("max_sweeps", 200),
        tol=raw_eng.get("tol", 1e-6),
        seed=raw_eng.get("seed", 0),
        schedule=raw_eng.get("schedule", {}) or {},
        initialize=raw_eng.get("initialize", []) or [],
    )
    if not isinstance(engine.max_sweeps, int) or engine.max_sweeps < 1:
        _fail("$.engine.max_sweeps", "must be an integer >= 1")
    for nm in engine.initialize:
        if nm not in names:
            _fail("$.engine.initialize", f"unknown node '{nm}'")
    if engine.mode == "svi" and "betas" in engine.schedule:
        raise ConfigurationError(
            "combining svi with an annealing schedule is not supported"
        )
    spec = ModelSpec(nodes=decls, observe=observe, engine=engine)
    _typecheck(spec)
    return spec


def _check_references(decls):
    declared = {d.name: i for i, d in enumerate(decls)}
    deps = {}
    for i, d in enumerate(decls):
        names = [p for p in d.parents if isinstance(p, str)]
        deps[d.name] = names
        for j, p in enumerate(names):
            if p not in declared:
                _fail(
                    f"$.nodes[{i}].parents",
                    f"unresolved parent name '{p}'",
                )
    # Forward references are either cycles or a non-topological ordering.
    for i, d in enumerate(decls):
        for p in deps[d.name]:
            if declared[p] >= i:
                cycle = _find_cycle(deps, d.name)
                if cycle:
                    raise CycleError("cycle: " + " -> ".join(cycle))
                _fail(
                    f"$.nodes[{i}].parents",
                    f"node '{p}' must be declared before '{d.name}'",
                )


def _find_cycle(deps, start):
    path = []
    seen = set()

    def visit(name):
        if name in path:
            return path[path.index(name) :] + [name]
        if name in seen:
            return None
        seen.add(name)
        path.append(name)
        for p in deps.get(name, ()):
            found = visit(p)
            if found:
                return found
        path.pop()
        return None

    return visit(start)


def _typecheck(spec):
    """Build a throwaway graph to surface slot/plate/shape errors early."""
    build_graph(spec)


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------


def _family_for(decl, resolved_parents):
    name = decl.family
    if name == "gamma":
        return ef.Gamma()
    if name == "gaussian":
        dim = decl.dim or _infer_dim_from(resolved_parents[0], axis_ndim=1)
        return ef.Gaussian(dim)
    if name == "wishart":
        dim = decl.dim or _infer_dim_from(resolved_parents[1], axis_ndim=2)
        return ef.Wishart(dim)
    if name == "dirichlet":
        dim = decl.dim or _infer_dim_from(resolved_parents[0], axis_ndim=1)
        return ef.Dirichlet(dim)
    if name == "categorical":
        dim = decl.dim or _infer_dim_from(resolved_parents[0], axis_ndim=1)
        return ef.Categorical(dim)
    raise ValidationError(f"unknown family '{name}'")


def _infer_dim_from(parent, axis_ndim):
    if isinstance(parent, StochasticNode):
        fam = parent.family
        if hasattr(fam, "dim"):
            return fam.dim
        return 1
    if hasattr(parent, "dim"):  # dot-product node
        return 1
    value = np.asarray(getattr(parent, "value", parent))
    if value.ndim >= axis_ndim:
        return int(value.shape[-1])
    return 1


def build_graph(spec: ModelSpec, expand_broadcasts=False) -> Graph:
    """Materialize the declared nodes; raises the spec's validation errors."""
    g = Graph(expand_broadcasts=expand_broadcasts)
    for i, decl in enumerate(spec.nodes):
        path = f"$.nodes[{i}]"
        try:
            if decl.kind == "constant":
                g.constant(np.asarray(decl.constant, dtype=float), name=decl.name)
                continue
            parents = []
            for p in decl.parents:
                if isinstance(p, str):
                    parents.append(g.node(p))
                else:
                    parents.append(
                        g.constant(
                            np.asarray(p, dtype=float),
                            name=f"{decl.name}/const{len(parents)}",
                        )
                    )
            if decl.kind == "sum_product":
                if len(parents) != 2:
                    _fail(path + ".parents", "sum_product takes two parents")
                g.add_sum_product(parents[0], parents[1], name=decl.name)
            elif decl.kind == "mixture":
                if not parents:
                    _fail(path + ".parents", "mixture needs a gate parent")
                family = _family_for(decl, parents[1:])
                g.add_mixture(
                    parents[0], family, parents[1:], decl.plates, name=decl.name
                )
            else:
                family = _family_for(decl, parents)
                g.add_stochastic(family, parents, decl.plates, name=decl.name)
        except ValidationError:
            raise
        except (VmpError, ValueError, TypeError) as exc:
            raise ValidationError(f"{path}: {exc}")
    return g


# ---------------------------------------------------------------------------
# CSV data
# ---------------------------------------------------------------------------


def load_data_csv(path, missing_token="NA"):
    """Read a rectangular numeric CSV into (tensor, cell mask)."""
    rows = []
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            rows.append((r + 1, row))
    if not rows:
        raise NonNumericError(f"{path}: empty file")
    width = len(rows[0][1])
    values = np.zeros((len(rows), width))
    mask = np.ones((len(rows), width), dtype=bool)
    for i, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise RaggedRowError(
                f"{path}: row {lineno} has {len(row)} fields, expected {width}"
            )
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == missing_token:
                mask[i, j] = False
                values[i, j] = np.nan
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise NonNumericError(
                    f"{path}: row {lineno} column {j + 1}: "
                    f"'{cell}' is not numeric"
                )
    return values, mask


def bind_observation(graph, node_name, tensor, cell_mask):
    """Reshape a CSV tensor onto a node's plates/event and observe it."""
    node = graph.node(node_name)
    if not isinstance(node, StochasticNode):
        raise ValidationError(f"node '{node_name}' cannot be observed")
    fam = node.family
    plates = node.plates
    if isinstance(fam, ef.Categorical):
        event = ()
    else:
        event = fam.event_shape
    want = int(np.prod(plates + event, dtype=np.int64)) if plates + event else 1
    if tensor.size != want:
        raise ShapeError(
            f"data for '{node_name}' has {tensor.size} cells, the node needs "
            f"{want} ({plates} plates x {event} event)"
        )
    values = tensor.reshape(plates + event)
    mask = cell_mask.reshape(plates + event)
    ev_axes = tuple(range(-len(event), 0))
    plate_mask = mask.all(axis=ev_axes) if ev_axes else mask
    if not plate_mask.all():
        safe = np.where(mask, values, 0.0)
        graph.observe(node, safe, plate_mask)
    else:
        graph.observe(node, values, True)
    return node


# ---------------------------------------------------------------------------
# fitting and dumping
# ---------------------------------------------------------------------------


def make_fit_options(graph, spec, overrides=None):
    overrides = overrides or {}
    e = spec.engine
    return eng.FitOptions(
        max_sweeps=int(overrides.get("max_sweeps", e.max_sweeps)),
        tol=float(overrides.get("tol", e.tol)),
        seed=int(overrides.get("seed", e.seed)),
    )


def apply_initialization(graph, spec, seed):
    rng = np.random.default_rng(seed)
    for name in spec.engine.initialize:
        eng.initialize_from_random(graph.node(name), rng)


def run_engine(graph, spec, options):
    mode = spec.engine.mode
    sched = spec.engine.schedule
    if mode == "vb":
        return eng.run_vb(graph, options)
    if mode == "annealed":
        betas = sched.get("betas")
        if not betas:
            raise ConfigurationError("annealed mode needs schedule.betas")
        return eng.run_annealed(graph, options, eng.AnnealingSchedule(betas))
    if mode == "svi":
        try:
            schedule = eng.SviSchedule(
                batch_axis=int(sched["batch_axis"]),
                batch_size=int(sched["batch_size"]),
                total=int(sched["total"]),
                delay=float(sched.get("delay", 0.0)),
                forgetting=float(sched.get("forgetting", 0.7)),
            )
        except KeyError as exc:
            raise ConfigurationError(f"svi schedule is missing {exc}")
        return eng.run_svi(graph, options, schedule)
    raise ConfigurationError(f"unknown engine mode '{mode}'")


def posterior_dump(graph, report):
    """JSON-ready dump: posteriors of every node carrying one, plus the report."""
    nodes = {}
    for node in graph.stochastic_nodes():
        if node.fully_observed:
            continue
        fam = node.family
        natural = [
            expand_to(b, node.plates, s).tolist()
            for b, s in zip(node.phi_q, fam.block_shapes)
        ]
        moments = [
            expand_to(b, node.plates, s).tolist()
            for b, s in zip(node.posterior_moments(), fam.block_shapes)
        ]
        nodes[node.name] = {
            "family": fam.tag,
            "plates": list(node.plates),
            "natural": natural,
            "moments": moments,
        }
    out = {"nodes": nodes}
    out.update(report.to_dict())
    return out


def load_posterior_into_graph(graph, dump):
    """Restore dumped natural parameters; moments are recomputed."""
    for name, entry in dump["nodes"].items():
        node = graph.node(name)
        node.set_posterior(tuple(np.asarray(b) for b in entry["natural"]))

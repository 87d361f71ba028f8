"""Finite decision graphs with affine guards.

A graph has exactly one source, a set of labeled target vertices, and routes
points of R^n along arrows: every vertex with more than one outgoing arrow
carries an affine guard, and the sign vector of the guard at a point picks the
arrow.  Sign convention: ``+`` means the guard row is >= 0, ``-`` means < 0,
so boundary points follow the ``+`` side.

Evaluation comes in two equivalent forms: the plain walk (`evaluate`) and the
sum over all source-to-target paths of chamber-indicator products
(`evaluate_pathsum`), which agree on every input with exactly one path
contributing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import feasibility
from .errors import (
    CyclicGraphError,
    DanglingVertexError,
    DimensionMismatchError,
    IncompleteRoutingError,
    MultipleSourcesError,
    PathExplosionError,
    UnknownSignVectorError,
)

SOURCE = "source"
INTERNAL = "internal"
TARGET = "target"

PATH_CAP = 10**6

# validate_graph checks guard routing against the exactly-realizable sign
# vectors when the problem is small enough for exact elimination
_REALIZABILITY_DIM = feasibility.DIM_BUDGET
_REALIZABILITY_CHAMBERS = 4096


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> matrix @ x + offset, with matrix of shape (k, n)."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise DimensionMismatchError(f"guard matrix must be 2-d, got shape {m.shape}")
        b = np.asarray(self.offset, dtype=float).reshape(-1)
        if b.shape[0] != m.shape[0]:
            raise DimensionMismatchError(
                f"offset length {b.shape[0]} does not match {m.shape[0]} rows")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x + self.offset

    def row(self, i):
        """(coeffs, offset) pair of a single row, for feasibility systems."""
        return self.matrix[i].tolist(), float(self.offset[i])


def sign_vector(guard: AffineMap, x: np.ndarray) -> str:
    """Sign string of the guard at x; entry i is '+' iff row i(x) >= 0."""
    x = np.asarray(x, dtype=float)
    if x.shape != (guard.dim,):
        raise DimensionMismatchError(
            f"point has shape {x.shape}, guard expects ({guard.dim},)")
    vals = guard(x)
    return "".join("+" if v >= 0 else "-" for v in vals)


@dataclass(frozen=True)
class Arrow:
    id: str
    src: str
    dst: str


@dataclass
class ValidationReport:
    errors: List[Exception] = field(default_factory=list)
    topo_order: List[str] = field(default_factory=list)
    realizability_checked: bool = False

    @property
    def ok(self) -> bool:
        return not self.errors


class LogicalGraph:
    """Immutable-by-convention decision graph over R^input_dim."""

    def __init__(self, input_dim: int, vertices: Dict[str, str], arrows: Sequence[Arrow],
                 guards: Dict[str, AffineMap], routing: Dict[str, Dict[str, str]],
                 target_labels: Dict[str, object]):
        self.input_dim = int(input_dim)
        self.vertices = dict(vertices)
        self.arrows = {a.id: a for a in arrows}
        self.guards = dict(guards)
        self.routing = {v: dict(r) for v, r in routing.items()}
        self.target_labels = dict(target_labels)
        self.out_arrows: Dict[str, List[str]] = {v: [] for v in self.vertices}
        self.in_degree: Dict[str, int] = {v: 0 for v in self.vertices}
        for a in arrows:
            if a.src in self.out_arrows:
                self.out_arrows[a.src].append(a.id)
            if a.dst in self.in_degree:
                self.in_degree[a.dst] += 1

    # -- structure ---------------------------------------------------------

    @property
    def source(self) -> str:
        for v, kind in self.vertices.items():
            if kind == SOURCE:
                return v
        raise MultipleSourcesError("graph has no source vertex")

    @property
    def labels(self):
        return set(self.target_labels.values())

    def next_arrow(self, vertex: str, x: np.ndarray) -> Arrow:
        out = self.out_arrows[vertex]
        if vertex in self.guards:
            s = sign_vector(self.guards[vertex], x)
            aid = self.routing.get(vertex, {}).get(s)
            if aid is None:
                raise UnknownSignVectorError(
                    f"vertex {vertex!r} has no route for sign vector {s!r}")
            return self.arrows[aid]
        if len(out) != 1:
            raise IncompleteRoutingError(
                f"vertex {vertex!r} has {len(out)} outgoing arrows but no guard")
        return self.arrows[out[0]]


def validate_graph(g: LogicalGraph, check_realizability: bool = True) -> ValidationReport:
    """Structural audit: acyclicity, single source, routing totality, labels.

    Routing totality is checked against the exactly-realizable sign vectors of
    each guard whenever the input dimension and chamber count fit the exact
    elimination budget; larger guards get the structural checks only.
    """
    rep = ValidationReport()
    err = rep.errors.append

    for a in g.arrows.values():
        for end in (a.src, a.dst):
            if end not in g.vertices:
                err(DanglingVertexError(f"arrow {a.id!r} references missing vertex {end!r}"))
    if any(isinstance(e, DanglingVertexError) for e in rep.errors):
        return rep

    sources = [v for v, k in g.vertices.items() if k == SOURCE]
    if len(sources) != 1:
        err(MultipleSourcesError(f"expected exactly one source, found {sorted(sources)}"))
    structural_roots = [v for v in g.vertices if g.in_degree[v] == 0]
    for v in structural_roots:
        if g.vertices[v] != SOURCE:
            err(DanglingVertexError(f"vertex {v!r} is unreachable (no incoming arrows)"))
    for v in sources:
        if g.in_degree[v] != 0:
            err(MultipleSourcesError(f"source {v!r} has incoming arrows"))

    # Kahn's algorithm for the topological order
    indeg = dict(g.in_degree)
    queue = sorted(v for v, d in indeg.items() if d == 0)
    order = []
    while queue:
        v = queue.pop(0)
        order.append(v)
        for aid in g.out_arrows[v]:
            w = g.arrows[aid].dst
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
        queue.sort()
    if len(order) != len(g.vertices):
        stuck = sorted(v for v, d in indeg.items() if d > 0)
        err(CyclicGraphError(f"cycle through vertices {stuck}"))
    else:
        rep.topo_order = order

    for v, kind in g.vertices.items():
        out = g.out_arrows[v]
        if kind == TARGET:
            if out:
                err(DanglingVertexError(f"target {v!r} has outgoing arrows {out}"))
            if v not in g.target_labels:
                err(DanglingVertexError(f"target {v!r} has no label"))
        else:
            if not out:
                err(DanglingVertexError(f"non-target {v!r} has no outgoing arrows"))
    for v in g.target_labels:
        if g.vertices.get(v) != TARGET:
            err(DanglingVertexError(f"label attached to non-target vertex {v!r}"))
    labels = list(g.target_labels.values())
    if len(set(labels)) != len(labels):
        err(DanglingVertexError("target labels are not pairwise distinct"))

    for v, out in g.out_arrows.items():
        guard = g.guards.get(v)
        if len(out) > 1 and guard is None:
            err(IncompleteRoutingError(f"vertex {v!r} branches without a guard"))
        if len(out) <= 1 and guard is not None:
            err(IncompleteRoutingError(f"vertex {v!r} has a guard but does not branch"))
        if guard is None:
            continue
        if guard.dim != g.input_dim:
            err(DimensionMismatchError(
                f"guard at {v!r} acts on R^{guard.dim}, graph is over R^{g.input_dim}"))
            continue
        routes = g.routing.get(v, {})
        for s, aid in routes.items():
            if len(s) != guard.rows or set(s) - {"+", "-"}:
                err(IncompleteRoutingError(f"vertex {v!r}: malformed sign key {s!r}"))
            elif aid not in g.arrows or g.arrows[aid].src != v:
                err(IncompleteRoutingError(f"vertex {v!r}: route {s!r} -> bad arrow {aid!r}"))
        routed = set(routes.values())
        for aid in out:
            if aid not in routed:
                err(IncompleteRoutingError(f"vertex {v!r}: arrow {aid!r} is never routed"))

    if check_realizability and not rep.errors and rep.topo_order \
            and g.input_dim <= _REALIZABILITY_DIM:
        _check_reachable_routing(g, rep)
    return rep


def _check_reachable_routing(g: LogicalGraph, rep: ValidationReport):
    """Walk the graph symbolically and flag reachable-but-unrouted chambers.

    Every sign vector of a guard that is realizable within the constraint
    system accumulated on some source path must have a route; chambers that no
    input can reach need none.  Work is capped so validation stays cheap; past
    the cap the graph is reported as structurally checked only.
    """
    budget = _REALIZABILITY_CHAMBERS
    flagged = set()
    stack = [(g.source, [], None)]
    while stack:
        v, system, witness = stack.pop()
        if g.vertices[v] == TARGET:
            continue
        guard = g.guards.get(v)
        if guard is None:
            (aid,) = g.out_arrows[v]
            stack.append((g.arrows[aid].dst, system, witness))
            continue
        rows = [guard.row(i) for i in range(guard.rows)]
        try:
            chambers = feasibility.enumerate_chambers(
                rows, g.input_dim, base=system, cap=budget, base_witness=witness)
        except Exception:
            return  # budget exceeded: structural checks only
        budget -= len(chambers)
        if budget <= 0:
            return
        for s, w in chambers.items():
            aid = g.routing.get(v, {}).get(s)
            if aid is None:
                if (v, s) not in flagged:
                    flagged.add((v, s))
                    rep.errors.append(IncompleteRoutingError(
                        f"vertex {v!r}: realizable sign vector {s!r} is unrouted"))
                continue
            sub = system + [
                feasibility.signed_constraint(*guard.row(i), c)
                for i, c in enumerate(s)
            ]
            stack.append((g.arrows[aid].dst, sub, w))
    rep.realizability_checked = True


def require_valid(g: LogicalGraph, check_realizability: bool = True) -> ValidationReport:
    rep = validate_graph(g, check_realizability)
    if not rep.ok:
        raise rep.errors[0]
    return rep


# -- evaluation ------------------------------------------------------------

def evaluate(g: LogicalGraph, x) -> object:
    """Label of the unique walk from the source to a target through x's chambers."""
    x = np.asarray(x, dtype=float)
    if x.shape != (g.input_dim,):
        raise DimensionMismatchError(
            f"point has shape {x.shape}, graph expects ({g.input_dim},)")
    v = g.source
    seen = 0
    while g.vertices[v] != TARGET:
        v = g.next_arrow(v, x).dst
        seen += 1
        if seen > len(g.vertices):
            raise CyclicGraphError("walk exceeded vertex count; graph has a cycle")
    return g.target_labels[v]


def evaluate_batch(g: LogicalGraph, X) -> list:
    """Vectorized walk for many points: labels in input order."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != g.input_dim:
        raise DimensionMismatchError(
            f"points have shape {X.shape}, graph expects (m, {g.input_dim})")
    m = X.shape[0]
    out: list = [None] * m
    pending = [(g.source, np.arange(m))]
    while pending:
        v, idx = pending.pop()
        if g.vertices[v] == TARGET:
            label = g.target_labels[v]
            for i in idx:
                out[i] = label
            continue
        if v in g.guards:
            guard = g.guards[v]
            vals = guard.matrix @ X[idx].T + guard.offset[:, None]
            signs = vals >= 0
            keys = ["".join("+" if b else "-" for b in signs[:, j]) for j in range(len(idx))]
            groups: Dict[str, list] = {}
            for j, k in enumerate(keys):
                groups.setdefault(k, []).append(idx[j])
            for k, members in groups.items():
                aid = g.routing.get(v, {}).get(k)
                if aid is None:
                    raise UnknownSignVectorError(
                        f"vertex {v!r} has no route for sign vector {k!r}")
                pending.append((g.arrows[aid].dst, np.asarray(members)))
        else:
            (aid,) = g.out_arrows[v]
            pending.append((g.arrows[aid].dst, idx))
    return out


def enumerate_paths(g: LogicalGraph, cap: int = PATH_CAP) -> List[List[str]]:
    """All source-to-target paths as arrow id lists; errors past `cap` paths."""
    counts: Dict[str, int] = {}
    order = require_topo(g)
    for v in reversed(order):
        if g.vertices[v] == TARGET:
            counts[v] = 1
        else:
            counts[v] = sum(counts[g.arrows[a].dst] for a in g.out_arrows[v])
    total = counts.get(g.source, 0)
    if total > cap:
        raise PathExplosionError(f"graph has {total} paths, cap is {cap}")
    paths: List[List[str]] = []

    def rec(v, acc):
        if g.vertices[v] == TARGET:
            paths.append(list(acc))
            return
        for aid in g.out_arrows[v]:
            acc.append(aid)
            rec(g.arrows[aid].dst, acc)
            acc.pop()

    rec(g.source, [])
    return paths


def require_topo(g: LogicalGraph) -> List[str]:
    rep = validate_graph(g, check_realizability=False)
    if not rep.topo_order:
        raise CyclicGraphError("graph is cyclic")
    return rep.topo_order


@dataclass
class PathTerm:
    arrows: List[str]
    coefficient: int
    label: object


def evaluate_pathsum(g: LogicalGraph, x, cap: int = PATH_CAP):
    """Path-sum form of evaluation.

    Returns (label, terms) where each term is a path with its 0/1 chamber
    coefficient; exactly one term carries coefficient 1 and its label is the
    value of the graph at x.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (g.input_dim,):
        raise DimensionMismatchError(
            f"point has shape {x.shape}, graph expects ({g.input_dim},)")
    signs: Dict[str, str] = {}

    def chosen(v) -> Optional[str]:
        if v in g.guards:
            s = signs.get(v)
            if s is None:
                s = signs[v] = sign_vector(g.guards[v], x)
            return g.routing.get(v, {}).get(s)
        out = g.out_arrows[v]
        return out[0] if len(out) == 1 else None

    terms = []
    live_label = None
    live = 0
    for path in enumerate_paths(g, cap):
        coeff = 1
        for aid in path:
            if chosen(g.arrows[aid].src) != aid:
                coeff = 0
                break
        label = g.target_labels[g.arrows[path[-1]].dst] if path else None
        terms.append(PathTerm(path, coeff, label))
        if coeff:
            live += 1
            live_label = label
    if live != 1:
        raise UnknownSignVectorError(
            f"expected exactly one live path, found {live} (unrouted sign vector)")
    return live_label, terms


# -- serialization ---------------------------------------------------------

def graph_to_dict(g: LogicalGraph) -> dict:
    return {
        "input_dim": g.input_dim,
        "vertices": [{"id": v, "kind": k} for v, k in g.vertices.items()],
        "arrows": [{"id": a.id, "src": a.src, "dst": a.dst} for a in g.arrows.values()],
        "guards": {
            v: {"matrix": gd.matrix.tolist(), "offset": gd.offset.tolist()}
            for v, gd in g.guards.items()
        },
        "routing": {v: dict(r) for v, r in g.routing.items()},
        "target_labels": {v: str(l) for v, l in g.target_labels.items()},
    }


def graph_from_dict(data: dict) -> LogicalGraph:
    vertices = {v["id"]: v["kind"] for v in data["vertices"]}
    arrows = [Arrow(a["id"], a["src"], a["dst"]) for a in data["arrows"]]
    guards = {
        v: AffineMap(np.asarray(gd["matrix"], dtype=float), np.asarray(gd["offset"], dtype=float))
        for v, gd in data.get("guards", {}).items()
    }
    return LogicalGraph(
        input_dim=data["input_dim"],
        vertices=vertices,
        arrows=arrows,
        guards=guards,
        routing=data.get("routing", {}),
        target_labels=data.get("target_labels", {}),
    )


def save_graph(g: LogicalGraph, path: str):
    with open(path, "w") as fh:
        json.dump(graph_to_dict(g), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_graph(path: str) -> LogicalGraph:
    with open(path) as fh:
        return graph_from_dict(json.load(fh))


def relabel(g: LogicalGraph, mapping) -> LogicalGraph:
    """New graph with target labels pushed through `mapping` (callable or dict).

    The mapping must stay injective on the label set; merging labels is the
    business of graph surgery, not relabeling.
    """
    f = mapping if callable(mapping) else (lambda l: mapping[l])
    new = {v: f(l) for v, l in g.target_labels.items()}
    if len(set(new.values())) != len(new):
        raise DanglingVertexError("relabeling collapses distinct target labels")
    return LogicalGraph(g.input_dim, g.vertices, list(g.arrows.values()),
                        g.guards, g.routing, new)

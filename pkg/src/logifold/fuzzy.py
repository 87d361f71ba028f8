"""Decision graphs whose states are probability vectors instead of labels.

Vertices carry state spaces (products of simplices, or raw blocks before any
soft activation has been applied) and arrows carry maps between them.  A walk
threads a concrete state through the graph, so the result at a target is a
joint distribution over that target's outcome corners rather than a single
label.  Network importers reproduce sigmoid chains and ReLU-softmax nets
exactly: the graph walk performs the same affine arithmetic as the forward
pass, just grouped by region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Dict, Optional, Tuple

import numpy as np

from . import feasibility
from .errors import (
    DimensionMismatchError,
    NotScalarOutputError,
    RegionExplosionError,
    StateSpaceMismatchError,
    StateSpaceViolationError,
    UnknownOutcomeError,
    UnsupportedActivationError,
)
from .graph import (
    INTERNAL,
    SOURCE,
    TARGET,
    AffineMap,
    Arrow,
    LogicalGraph,
    graph_from_dict,
    graph_to_dict,
    sign_vector,
)
from .networks import (
    CHAMBER_CAP,
    REGION_CAP,
    RELU,
    SIGMOID,
    SOFTMAX,
    NetworkSpec,
    _affine_rows,
    _compose_after_mask,
    _sigmoid,
    _softmax,
)

IDENTITY = "identity"
AFFINE_SIGMOID = "affine_sigmoid"
AFFINE_SOFTMAX = "affine_softmax"
PROJECT = "project"
DIAGONAL = "diagonal"
CONSTANT = "constant"
COORD_PRODUCT = "coord_product"
MIN = "min"
MAX = "max"

RAW = "R"

STATE_TOL = 1e-9


@dataclass(frozen=True)
class StateSpace:
    """Product of simplex factors; ("R", k) marks an unconstrained block.

    A factor m stands for the simplex of distributions over m outcomes and
    occupies m ambient coordinates.  Scalar truth values use the factor 2 via
    the embedding u -> (u, 1 - u), so the value is the first coordinate.
    """

    factors: Tuple = ()

    @classmethod
    def euclidean(cls, n: int) -> "StateSpace":
        return cls(((RAW, int(n)),))

    @classmethod
    def simplex(cls, *sizes: int) -> "StateSpace":
        return cls(tuple(int(m) for m in sizes))

    @classmethod
    def scalar_power(cls, k: int) -> "StateSpace":
        return cls((2,) * k)

    @property
    def dim(self) -> int:
        return sum(f[1] if isinstance(f, tuple) else f for f in self.factors)

    @property
    def is_distributional(self) -> bool:
        return all(not isinstance(f, tuple) for f in self.factors)

    def concat(self, other: "StateSpace") -> "StateSpace":
        return StateSpace(self.factors + other.factors)

    def blocks(self):
        at = 0
        for f in self.factors:
            width = f[1] if isinstance(f, tuple) else f
            yield f, at, at + width
            at += width

    def contains(self, x, tol: float = STATE_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            return False
        for f, lo, hi in self.blocks():
            if isinstance(f, tuple):
                continue
            block = x[lo:hi]
            if np.any(block < -tol) or abs(float(block.sum()) - 1.0) > tol:
                return False
        return True


def scalar_state(values) -> np.ndarray:
    """Embed truth values u as interleaved (u, 1 - u) pairs."""
    u = np.asarray(values, dtype=float)
    out = np.empty(2 * len(u))
    out[0::2] = u
    out[1::2] = 1.0 - u
    return out


def scalar_values(state) -> np.ndarray:
    return np.asarray(state, dtype=float)[0::2]


@dataclass(frozen=True, eq=False)
class ArrowMap:
    """Map applied while crossing an arrow.

    With a span (lo, hi) the map reads coordinates [lo, hi) and leaves the
    rest in place; without one it consumes the whole state.  The coordinate
    kinds (product, min, max) read the even coordinates of their input as
    scalar truth values.
    """

    kind: str
    matrix: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None
    indices: Optional[Tuple[int, ...]] = None
    const: Optional[np.ndarray] = None
    span: Optional[Tuple[int, int]] = None

    def _base(self, z: np.ndarray) -> np.ndarray:
        if self.kind == IDENTITY:
            return z
        if self.kind == AFFINE_SIGMOID:
            return scalar_state(_sigmoid(self.matrix @ z + self.offset))
        if self.kind == AFFINE_SOFTMAX:
            return _softmax(self.matrix @ z + self.offset)
        if self.kind == PROJECT:
            return z[list(self.indices)]
        if self.kind == DIAGONAL:
            return np.concatenate([z, z])
        if self.kind == CONSTANT:
            return np.array(self.const, dtype=float)
        if self.kind == COORD_PRODUCT:
            return scalar_state([float(np.prod(scalar_values(z)))])
        if self.kind == MIN:
            return scalar_state([float(np.min(scalar_values(z)))])
        if self.kind == MAX:
            return scalar_state([float(np.max(scalar_values(z)))])
        raise StateSpaceMismatchError(f"unknown arrow map kind {self.kind!r}")

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.span is None:
            return self._base(x)
        lo, hi = self.span
        return np.concatenate([x[:lo], self._base(x[lo:hi]), x[hi:]])

    def out_dim(self, src_dim: int) -> int:
        lo, hi = self.span if self.span is not None else (0, src_dim)
        width = hi - lo
        if self.kind == IDENTITY:
            base = width
        elif self.kind == AFFINE_SIGMOID:
            base = 2 * self.matrix.shape[0]
        elif self.kind == AFFINE_SOFTMAX:
            base = self.matrix.shape[0]
        elif self.kind == PROJECT:
            base = len(self.indices)
        elif self.kind == DIAGONAL:
            base = 2 * width
        elif self.kind == CONSTANT:
            base = len(self.const)
        else:
            base = 2
        return src_dim - width + base

    def shifted(self, by: int, src_dim: int) -> "ArrowMap":
        """Same map acting on a copy of its source embedded at offset `by`."""
        lo, hi = self.span if self.span is not None else (0, src_dim)
        return ArrowMap(self.kind, self.matrix, self.offset, self.indices,
                        self.const, (lo + by, hi + by))


@dataclass
class FuzzyLogicalGraph:
    skeleton: LogicalGraph
    state_spaces: Dict[str, StateSpace]
    arrow_maps: Dict[str, ArrowMap]

    @property
    def input_dim(self) -> int:
        return self.state_spaces[self.skeleton.source].dim

    def targets(self):
        return [v for v, k in self.skeleton.vertices.items() if k == TARGET]


def validate_fuzzy(fg: FuzzyLogicalGraph):
    """Static consistency: spaces everywhere, guard and map dims line up."""
    sk = fg.skeleton
    for v in sk.vertices:
        if v not in fg.state_spaces:
            raise StateSpaceMismatchError(f"vertex {v!r} has no state space")
    for v, guard in sk.guards.items():
        if guard.dim != fg.state_spaces[v].dim:
            raise StateSpaceMismatchError(
                f"guard at {v!r} reads {guard.dim} coordinates, state has "
                f"{fg.state_spaces[v].dim}")
    for aid, a in sk.arrows.items():
        amap = fg.arrow_maps.get(aid)
        if amap is None:
            raise StateSpaceMismatchError(f"arrow {aid!r} has no map")
        src_dim = fg.state_spaces[a.src].dim
        dst_dim = fg.state_spaces[a.dst].dim
        if amap.out_dim(src_dim) != dst_dim:
            raise StateSpaceMismatchError(
                f"arrow {aid!r} maps {src_dim} -> {amap.out_dim(src_dim)} "
                f"coordinates but {a.dst!r} expects {dst_dim}")


@dataclass
class FuzzyOutcome:
    label: object
    state: np.ndarray
    target: str


def evaluate_fuzzy(fg: FuzzyLogicalGraph, x, tol: float = STATE_TOL) -> FuzzyOutcome:
    """Thread a state along the walk; each visited space must contain it."""
    sk = fg.skeleton
    v = sk.source
    state = np.asarray(x, dtype=float)
    if not fg.state_spaces[v].contains(state, tol):
        raise StateSpaceViolationError(
            f"input of shape {state.shape} is not a state of {fg.state_spaces[v]}")
    while sk.vertices[v] != TARGET:
        a = sk.next_arrow(v, state)
        state = fg.arrow_maps[a.id].apply(state)
        v = a.dst
        if not fg.state_spaces[v].contains(state, tol):
            raise StateSpaceViolationError(
                f"state left {fg.state_spaces[v]} while crossing {a.id!r}")
    return FuzzyOutcome(sk.target_labels[v], state, v)


def evaluate_fuzzy_pathsum(fg: FuzzyLogicalGraph, x, tol: float = STATE_TOL) -> FuzzyOutcome:
    """Evaluate by expanding all source-to-target paths; exactly one survives
    its chamber indicators, and it reproduces the walk."""
    sk = fg.skeleton
    live = []

    def wander(v, state):
        if sk.vertices[v] == TARGET:
            live.append(FuzzyOutcome(sk.target_labels[v], state, v))
            return
        for aid in sk.out_arrows[v]:
            if v in sk.guards:
                routed = sk.routing[v].get(sign_vector(sk.guards[v], state))
                if routed != aid:
                    continue  # indicator term vanishes on this path
            wander(sk.arrows[aid].dst, fg.arrow_maps[aid].apply(state))

    wander(sk.source, np.asarray(x, dtype=float))
    if len(live) != 1:
        raise StateSpaceViolationError(
            f"path expansion produced {len(live)} surviving terms, expected 1")
    out = live[0]
    if not fg.state_spaces[out.target].contains(out.state, tol):
        raise StateSpaceViolationError("surviving path left its target space")
    return out


def outcome_distribution(fg: FuzzyLogicalGraph, x, tol: float = STATE_TOL) -> Dict:
    """Joint probabilities of every target corner; unreached targets get 0."""
    hit = evaluate_fuzzy(fg, x, tol)
    dist = {}
    for t in fg.targets():
        space = fg.state_spaces[t]
        if not space.is_distributional:
            raise StateSpaceViolationError(
                f"target {t!r} still has raw coordinates; no outcome corners")
        label = fg.skeleton.target_labels[t]
        sizes = [f for f in space.factors]
        for corner in iproduct(*(range(m) for m in sizes)):
            if t != hit.target:
                dist[(label, corner)] = 0.0
                continue
            prob = 1.0
            for (f, lo, hi), i in zip(space.blocks(), corner):
                prob *= float(hit.state[lo + i])
            dist[(label, corner)] = prob
    return dist


def characteristic(fg: FuzzyLogicalGraph, x, outcome) -> float:
    """Probability of one (label, corner) outcome."""
    dist = outcome_distribution(fg, x)
    if outcome not in dist:
        known = sorted(map(str, dist))
        raise UnknownOutcomeError(f"outcome {outcome!r} not among {known}")
    return dist[outcome]


def scalar_value(fg: FuzzyLogicalGraph, x) -> float:
    """Truth value of a graph with a single scalar target."""
    t = _single_scalar_target(fg)
    out = evaluate_fuzzy(fg, x)
    if out.target != t:
        raise NotScalarOutputError(f"walk ended at {out.target!r}")
    return float(out.state[0])


# -- network importers ------------------------------------------------------


def _values_matrix(w: np.ndarray) -> np.ndarray:
    """Absorb the (u, 1-u) layout into the weights: act on even coordinates."""
    out = np.zeros((w.shape[0], 2 * w.shape[1]))
    out[:, 0::2] = w
    return out


def from_sigmoid_net(net: NetworkSpec, label="out") -> FuzzyLogicalGraph:
    """Chain graph of a sigmoid network with a softmax head."""
    if net.hidden_activation != SIGMOID or net.final_activation != SOFTMAX:
        raise UnsupportedActivationError(
            "sigmoid importer expects sigmoid hidden layers and a softmax head")
    vertices = {"s": SOURCE}
    arrows = []
    spaces = {"s": StateSpace.euclidean(net.input_dim)}
    maps = {}
    prev = "s"
    for k, layer in enumerate(net.layers[:-1]):
        v = f"h{k + 1}"
        vertices[v] = INTERNAL
        spaces[v] = StateSpace.scalar_power(layer.rows)
        a = Arrow(f"e{k}", prev, v)
        arrows.append(a)
        w = layer.matrix if k == 0 else _values_matrix(layer.matrix)
        maps[a.id] = ArrowMap(AFFINE_SIGMOID, w, layer.offset)
        prev = v
    final = net.layers[-1]
    vertices["t"] = TARGET
    spaces["t"] = StateSpace.simplex(final.rows)
    a = Arrow("ef", prev, "t")
    arrows.append(a)
    w = final.matrix if net.depth == 1 else _values_matrix(final.matrix)
    maps[a.id] = ArrowMap(AFFINE_SOFTMAX, w, final.offset)
    sk = LogicalGraph(net.input_dim, vertices, arrows, {}, {}, {"t": label})
    return FuzzyLogicalGraph(sk, spaces, maps)


def from_relu_softmax_net(net: NetworkSpec, label="out",
                          chamber_cap: int = CHAMBER_CAP,
                          region_cap: int = REGION_CAP) -> FuzzyLogicalGraph:
    """Region tree of a ReLU network whose leaves apply softmax of the
    composed affine map; the state stays the raw input until a leaf arrow."""
    if net.hidden_activation != RELU or net.final_activation != SOFTMAX:
        raise UnsupportedActivationError(
            "relu importer expects relu hidden layers and a softmax head")
    n = net.input_dim
    vertices = {"s": SOURCE, "t": TARGET}
    arrows = []
    guards = {}
    routing = {}
    spaces = {"s": StateSpace.euclidean(n), "t": StateSpace.simplex(net.output_dim)}
    maps = {}
    regions = 1

    def leaf(vid, composed):
        a = Arrow(f"soft:{vid}", vid, "t")
        arrows.append(a)
        maps[a.id] = ArrowMap(AFFINE_SOFTMAX, composed.matrix, composed.offset)

    def descend(vid, depth, composed, region, witness):
        nonlocal regions
        if depth == net.depth - 1:
            leaf(vid, composed)
            return
        chambers = feasibility.enumerate_chambers(
            _affine_rows(composed), n, base=region,
            cap=chamber_cap, base_witness=witness)
        if len(chambers) == 1:
            ((signs, w),) = chambers.items()
            mask = np.array([1.0 if c == "+" else 0.0 for c in signs])
            descend(vid, depth + 1,
                    _compose_after_mask(net.layers[depth + 1], mask, composed),
                    region, witness)
            return
        guards[vid] = composed
        table = {}
        for signs, w in chambers.items():
            regions += 1
            if regions > region_cap:
                raise RegionExplosionError(
                    f"more than {region_cap} regions while importing")
            child = f"{vid}|{signs}" if vid != "s" else f"d1|{signs}"
            vertices[child] = INTERNAL
            spaces[child] = StateSpace.euclidean(n)
            a = Arrow(f"go:{child}", vid, child)
            arrows.append(a)
            maps[a.id] = ArrowMap(IDENTITY)
            table[signs] = a.id
            mask = np.array([1.0 if c == "+" else 0.0 for c in signs])
            sub = list(region) + [
                feasibility.signed_constraint(composed.matrix[i].tolist(),
                                              float(composed.offset[i]), c)
                for i, c in enumerate(signs)
            ]
            descend(child, depth + 1,
                    _compose_after_mask(net.layers[depth + 1], mask, composed),
                    sub, w)
        routing[vid] = table

    descend("s", 0, net.layers[0], [], None)
    sk = LogicalGraph(n, vertices, arrows, guards, routing, {"t": label})
    return FuzzyLogicalGraph(sk, spaces, maps)


# -- combinators ------------------------------------------------------------


def _pad_guard(guard: AffineMap, left: int, right: int) -> AffineMap:
    m = np.hstack([np.zeros((guard.rows, left)), guard.matrix,
                   np.zeros((guard.rows, right))])
    return AffineMap(m, guard.offset)


def fuzzy_product(fg1: FuzzyLogicalGraph, fg2: FuzzyLogicalGraph) -> FuzzyLogicalGraph:
    """Run both graphs on the same input; final factors concatenate.

    The state doubles up front, the first graph transforms the left block
    while the right block preserves the input, and copies of the second graph
    grafted at each target consume that preserved block.
    """
    n = fg1.input_dim
    if fg2.input_dim != n:
        raise DimensionMismatchError(
            f"product factors read {n} and {fg2.input_dim} coordinates")
    sk1, sk2 = fg1.skeleton, fg2.skeleton
    vertices = {"s*": SOURCE}
    arrows = []
    guards = {}
    routing = {}
    labels = {}
    spaces = {"s*": StateSpace.euclidean(n)}
    maps = {}

    def m1(v):
        return f"A:{v}"

    dup = Arrow("dup", "s*", m1(sk1.source))
    arrows.append(dup)
    maps[dup.id] = ArrowMap(DIAGONAL)

    for v, kind in sk1.vertices.items():
        vertices[m1(v)] = INTERNAL if kind in (TARGET, SOURCE) else kind
        spaces[m1(v)] = fg1.state_spaces[v].concat(StateSpace.euclidean(n))
    for aid, a in sk1.arrows.items():
        na = Arrow(f"A:{aid}", m1(a.src), m1(a.dst))
        arrows.append(na)
        maps[na.id] = fg1.arrow_maps[aid].shifted(0, fg1.state_spaces[a.src].dim)
    for v, guard in sk1.guards.items():
        guards[m1(v)] = _pad_guard(guard, 0, n)
        routing[m1(v)] = {s: f"A:{aid}" for s, aid in sk1.routing[v].items()}

    src2 = sk2.source
    for t, l1 in sk1.target_labels.items():
        left = fg1.state_spaces[t].dim
        frozen = fg1.state_spaces[t]

        def m2(w, t=t):
            return m1(t) if w == src2 else f"A:{t}|B:{w}"

        for w, kind in sk2.vertices.items():
            if w == src2:
                continue
            vertices[m2(w)] = kind if kind == TARGET else INTERNAL
            spaces[m2(w)] = frozen.concat(fg2.state_spaces[w])
        for aid, a in sk2.arrows.items():
            na = Arrow(f"A:{t}|B:{aid}", m2(a.src), m2(a.dst))
            arrows.append(na)
            maps[na.id] = fg2.arrow_maps[aid].shifted(left, fg2.state_spaces[a.src].dim)
        for w, guard in sk2.guards.items():
            guards[m2(w)] = _pad_guard(guard, left, 0)
            routing[m2(w)] = {s: f"A:{t}|B:{aid}" for s, aid in sk2.routing[w].items()}
        for w, l2 in sk2.target_labels.items():
            labels[m2(w)] = (l1, l2)

    sk = LogicalGraph(n, vertices, arrows, guards, routing, labels)
    return FuzzyLogicalGraph(sk, spaces, maps)


def _single_scalar_target(fg: FuzzyLogicalGraph) -> str:
    ts = fg.targets()
    if len(ts) != 1 or fg.state_spaces[ts[0]].factors != (2,):
        raise NotScalarOutputError(
            "operation needs exactly one target carrying a single truth value")
    return ts[0]


def _combine_scalar(fg1, fg2, kind) -> FuzzyLogicalGraph:
    _single_scalar_target(fg1)
    _single_scalar_target(fg2)
    p = fuzzy_product(fg1, fg2)
    (t,) = p.targets()
    sk = p.skeleton
    vertices = dict(sk.vertices)
    vertices[t] = INTERNAL
    vertices["t*"] = TARGET
    arrows = list(sk.arrows.values()) + [Arrow("merge", t, "t*")]
    labels = {"t*": sk.target_labels[t]}
    spaces = dict(p.state_spaces)
    spaces["t*"] = StateSpace.scalar_power(1)
    maps = dict(p.arrow_maps)
    maps["merge"] = ArrowMap(kind)
    merged = LogicalGraph(sk.input_dim, vertices, arrows, sk.guards,
                          sk.routing, labels)
    return FuzzyLogicalGraph(merged, spaces, maps)


def fuzzy_union(fg1: FuzzyLogicalGraph, fg2: FuzzyLogicalGraph) -> FuzzyLogicalGraph:
    """Pointwise max of two scalar-valued graphs."""
    return _combine_scalar(fg1, fg2, MAX)


def fuzzy_intersection(fg1: FuzzyLogicalGraph, fg2: FuzzyLogicalGraph) -> FuzzyLogicalGraph:
    """Pointwise min of two scalar-valued graphs."""
    return _combine_scalar(fg1, fg2, MIN)


# -- serialization ----------------------------------------------------------


def _space_to_list(space: StateSpace):
    return [list(f) if isinstance(f, tuple) else f for f in space.factors]


def _space_from_list(data) -> StateSpace:
    return StateSpace(tuple((f[0], int(f[1])) if isinstance(f, list) else int(f)
                            for f in data))


def _map_to_dict(m: ArrowMap) -> dict:
    out = {"kind": m.kind}
    if m.matrix is not None:
        out["matrix"] = np.asarray(m.matrix).tolist()
        out["offset"] = np.asarray(m.offset).tolist()
    if m.indices is not None:
        out["indices"] = list(m.indices)
    if m.const is not None:
        out["const"] = np.asarray(m.const).tolist()
    if m.span is not None:
        out["span"] = list(m.span)
    return out


def _map_from_dict(d: dict) -> ArrowMap:
    return ArrowMap(
        d["kind"],
        np.array(d["matrix"]) if "matrix" in d else None,
        np.array(d["offset"]) if "offset" in d else None,
        tuple(d["indices"]) if "indices" in d else None,
        np.array(d["const"]) if "const" in d else None,
        tuple(d["span"]) if "span" in d else None,
    )


def fuzzy_to_dict(fg: FuzzyLogicalGraph) -> dict:
    return {
        "graph": graph_to_dict(fg.skeleton),
        "state_spaces": {v: _space_to_list(s) for v, s in fg.state_spaces.items()},
        "arrow_maps": {aid: _map_to_dict(m) for aid, m in fg.arrow_maps.items()},
    }


def fuzzy_from_dict(data: dict) -> FuzzyLogicalGraph:
    sk = graph_from_dict(data["graph"])
    spaces = {v: _space_from_list(s) for v, s in data["state_spaces"].items()}
    maps = {aid: _map_from_dict(m) for aid, m in data["arrow_maps"].items()}
    return FuzzyLogicalGraph(sk, spaces, maps)


def save_fuzzy(fg: FuzzyLogicalGraph, path):
    with open(path, "w") as fh:
        json.dump(fuzzy_to_dict(fg), fh, indent=2, sort_keys=True)


def load_fuzzy(path) -> FuzzyLogicalGraph:
    with open(path) as fh:
        return fuzzy_from_dict(json.load(fh))

"""Model charts over a shared class set and the graph that organizes them.

Each chart predicts a distribution over its own ordered partition of some
subset of the classes.  Charts sharing a flattened target sit at one node of
the target graph; their partitions' common refinement records which block
combinations are compatible.  Nodes are ordered by strict inclusion of
flattened targets, so walking away from the root narrows the label set.
Accuracy curves measure each chart on the instances it is certain about.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    AssumptionViolationError,
    DimensionMismatchError,
    FlatteningMismatchError,
    NoRootModelError,
)

Partition = Tuple[FrozenSet, ...]


def as_partition(blocks) -> Partition:
    return tuple(frozenset(b) for b in blocks)


def _flatten(partition: Partition) -> FrozenSet:
    out = frozenset()
    for b in partition:
        out |= b
    return out


@dataclass(frozen=True)
class Embedding:
    """Feature transform applied before a chart's predictor.

    subset keeps the listed coordinates; resample mean-pools consecutive
    groups of `factor` coordinates.
    """

    kind: str = "identity"
    indices: Optional[Tuple[int, ...]] = None
    factor: Optional[int] = None

    def apply_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.kind == "identity":
            return X
        if self.kind == "subset":
            return X[:, list(self.indices)]
        if self.kind == "resample":
            m, n = X.shape
            if n % self.factor:
                raise DimensionMismatchError(
                    f"cannot pool {n} coordinates by {self.factor}")
            return X.reshape(m, n // self.factor, self.factor).mean(axis=2)
        raise ValueError(f"unknown embedding kind {self.kind!r}")


@dataclass
class ModelChart:
    id: str
    partition: Partition
    predict_batch: Callable[[np.ndarray], np.ndarray]
    embedding: Embedding = field(default_factory=Embedding)

    @property
    def flattened(self) -> FrozenSet:
        return _flatten(self.partition)

    def outputs(self, X: np.ndarray) -> np.ndarray:
        """Block distributions at the embedded features, one row per point."""
        p = np.asarray(self.predict_batch(self.embedding.apply_batch(np.atleast_2d(X))))
        if p.shape[1] != len(self.partition):
            raise DimensionMismatchError(
                f"chart {self.id!r} returned {p.shape[1]} components for "
                f"{len(self.partition)} blocks")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise FlatteningMismatchError(
                f"chart {self.id!r} outputs do not sum to 1")
        return p


@dataclass
class CertaintyRecord:
    certainty: float  # max component
    block: int        # argmax block index


def certainty_records(chart: ModelChart, X) -> List[CertaintyRecord]:
    p = chart.outputs(X)
    return [CertaintyRecord(float(row.max()), int(row.argmax())) for row in p]


def chart_from_net(cid: str, model, partition,
                   embedding: Embedding = Embedding()) -> ModelChart:
    """Chart backed by a softmax network with one output per block."""
    from .networks import forward_smooth_batch

    return ModelChart(cid, as_partition(partition),
                      lambda X: forward_smooth_batch(model, X), embedding)


# -- refinement -------------------------------------------------------------


@dataclass
class RefinementTable:
    """Common refinement of partitions with one shared flattened target.

    Combos index one block choice per partition.  Valid combos have nonempty
    intersection; blocks lists those intersections in combo order, and
    block_of links each valid combo to its position.
    """

    partitions: Tuple[Partition, ...]
    valid: List[Tuple[int, ...]]
    invalid: List[Tuple[int, ...]]
    blocks: List[FrozenSet]

    @property
    def block_of(self) -> Dict[Tuple[int, ...], int]:
        return {combo: s for s, combo in enumerate(self.valid)}

    @property
    def is_fine(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)

    def block_containing(self, label) -> int:
        for s, b in enumerate(self.blocks):
            if label in b:
                return s
        raise KeyError(f"label {label!r} in no refinement block")


def refinement(partitions: Sequence[Partition]) -> RefinementTable:
    """All block combinations across the partitions, split by realizability."""
    parts = tuple(as_partition(p) for p in partitions)
    if not parts:
        raise FlatteningMismatchError("refinement needs at least one partition")
    flat = _flatten(parts[0])
    for p in parts[1:]:
        if _flatten(p) != flat:
            raise FlatteningMismatchError(
                f"flattened targets differ: {sorted(map(str, flat))} vs "
                f"{sorted(map(str, _flatten(p)))}")
    for p in parts:
        if sum(len(b) for b in p) != len(flat):
            raise FlatteningMismatchError("blocks overlap within a partition")
    valid, invalid, blocks = [], [], []
    for combo in iproduct(*(range(len(p)) for p in parts)):
        meet = flat
        for p, j in zip(parts, combo):
            meet = meet & p[j]
        if meet:
            valid.append(combo)
            blocks.append(meet)
        else:
            invalid.append(combo)
    return RefinementTable(parts, valid, invalid, blocks)


# -- target graph -----------------------------------------------------------


@dataclass
class TargetNode:
    target: FrozenSet
    partitions: List[Partition]      # distinct partitions at this node
    groups: List[List[int]]          # chart indices per partition
    table: RefinementTable


@dataclass
class TargetGraph:
    charts: List[ModelChart]
    nodes: List[TargetNode]          # sorted by decreasing flattened size
    children: Dict[int, List[int]]   # strict-subset arrows, parent -> kids
    root: int

    def node_for(self, target: FrozenSet) -> Optional[int]:
        for i, node in enumerate(self.nodes):
            if node.target == target:
                return i
        return None


def _partition_key(p: Partition):
    return tuple(tuple(sorted(b, key=str)) for b in p)


def _target_key(t: FrozenSet):
    return tuple(sorted(t, key=str))


def build_target_graph(charts: Sequence[ModelChart], classes) -> TargetGraph:
    """Group charts by flattened target, refine per node, wire subset arrows.

    The root node must cover the full class set, and every minimal node's
    refinement must already be fine, otherwise voting cannot terminate there.
    """
    classes = frozenset(classes)
    by_target: Dict[FrozenSet, Dict[Partition, List[int]]] = {}
    for i, chart in enumerate(charts):
        if not chart.flattened <= classes:
            raise FlatteningMismatchError(
                f"chart {chart.id!r} predicts labels outside the class set")
        by_target.setdefault(chart.flattened, {}).setdefault(chart.partition, []).append(i)

    targets = sorted(by_target, key=lambda t: (-len(t), _target_key(t)))
    if not targets or targets[0] != classes:
        raise NoRootModelError(
            f"no chart has flattened target {sorted(map(str, classes))}")
    nodes = []
    for t in targets:
        parts = sorted(by_target[t], key=_partition_key)
        nodes.append(TargetNode(t, parts, [by_target[t][p] for p in parts],
                                refinement(parts)))
    children = {i: [] for i in range(len(nodes))}
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            if b.target < a.target:
                children[i].append(j)
    for i, node in enumerate(nodes):
        if not children[i] and not node.table.is_fine:
            raise AssumptionViolationError(
                f"minimal node {sorted(map(str, node.target))} has a coarse "
                "refinement; no finer charts exist below it")
    return TargetGraph(list(charts), nodes, children, 0)


# -- fuzzy accuracy ---------------------------------------------------------


@dataclass
class AccuracyCurve:
    alphas: List[float]
    values: List[float]
    sizes: List[int]  # certain-part sizes, one per threshold


def fuzzy_accuracy(chart: ModelChart, X, y, alpha: float):
    """(accuracy on the certain part, certain mask); 0 on an empty part."""
    p = chart.outputs(X)
    certain = p.max(axis=1) >= alpha
    if not certain.any():
        return 0.0, certain
    hit = np.array([label in chart.partition[block]
                    for label, block in zip(np.asarray(y)[certain],
                                            p.argmax(axis=1)[certain])])
    return float(hit.mean()), certain


def accuracy_curve(chart: ModelChart, X, y, alphas) -> AccuracyCurve:
    values, sizes = [], []
    for a in alphas:
        phi, certain = fuzzy_accuracy(chart, X, y, a)
        values.append(phi)
        sizes.append(int(certain.sum()))
    return AccuracyCurve(list(map(float, alphas)), values, sizes)

"""Accuracy-weighted voting across charts, nodes, and paths.

Charts that share a partition average their answers, weighted by accuracy on
the instances they are certain about.  At a node, groups with different
partitions combine multiplicatively over the common refinement; probability
landing on incompatible block combinations is pushed back onto compatible
ones in proportion to how much each group is trusted.  A vote walks a path of
shrinking targets, multiplying per-node masses for each surviving class, and
validation history picks the path and threshold that predicted each class
best in the past.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .ensemble import (
    AccuracyCurve,
    ModelChart,
    RefinementTable,
    TargetGraph,
    TargetNode,
    accuracy_curve,
    fuzzy_accuracy,
    refinement,
)
from .errors import (
    EmptyValidationError,
    NoValidPathError,
    UncoveredInstanceError,
)

# threshold grid for validation history; 1.0 would empty every certain part
DEFAULT_ALPHA_GRID = tuple(round(0.05 * i, 2) for i in range(20)) + (0.99,)

PhiFn = Callable[[ModelChart, float], float]


def make_phi(X, y) -> PhiFn:
    """Certain-part accuracy lookup backed by a validation set, memoized."""
    cache: Dict[Tuple[str, float], float] = {}

    def phi(chart: ModelChart, alpha: float) -> float:
        key = (chart.id, alpha)
        if key not in cache:
            cache[key] = fuzzy_accuracy(chart, X, y, alpha)[0]
        return cache[key]

    return phi


# -- shared-target and node votes ------------------------------------------


def _group_vote(rows, phis, alpha, uncertain_weight):
    """Weighted average over one group; (distribution, total weight)."""
    k = len(rows[0])
    total = 0.0
    acc = np.zeros(k)
    for row, phi in zip(rows, phis):
        w = phi if row.max() >= alpha else uncertain_weight * phi
        total += w
        acc += w * row
    if total <= 0.0:
        return np.zeros(k), 0.0
    return acc / total, total


def vote_shared_targets(group: Sequence[ModelChart], alpha: float, x,
                        phi_of: PhiFn, uncertain_weight: float = 0.0):
    """Combine charts with identical partitions at one instance."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rows = [chart.outputs(x)[0] for chart in group]
    phis = [phi_of(chart, alpha) for chart in group]
    p, _ = _group_vote(rows, phis, alpha, uncertain_weight)
    return p


@dataclass
class NodeVote:
    blocks: List[FrozenSet]
    values: np.ndarray
    uniform_fallback: bool = False   # redistribution hit a zero denominator
    dropped_groups: int = 0          # groups with no usable answer
    dead: bool = False               # nothing usable at this node

    def value_for(self, label) -> float:
        for b, v in zip(self.blocks, self.values):
            if label in b:
                return float(v)
        raise KeyError(f"label {label!r} not in node blocks")


def _node_vote_from_rows(node: TargetNode, rows_of, phis_of, alpha,
                         uncertain_weight) -> NodeVote:
    answers, weights, live = [], [], []
    for gi, idxs in enumerate(node.groups):
        rows = [rows_of[i] for i in idxs]
        phis = [phis_of[i] for i in idxs]
        p, w = _group_vote(rows, phis, alpha, uncertain_weight)
        if w > 0.0:
            answers.append(p)
            weights.append(w)
            live.append(gi)
    dropped = len(node.groups) - len(live)
    if not live:
        return NodeVote(list(node.table.blocks), np.zeros(len(node.table.blocks)),
                        dropped_groups=dropped, dead=True)
    if len(live) == len(node.groups):
        table = node.table
    else:
        table = refinement([node.partitions[gi] for gi in live])
    psi = np.asarray(weights) / sum(weights)

    mass = {combo: float(np.prod([answers[g][j] for g, j in enumerate(combo)]))
            for combo in iproduct(*(range(len(answers[g]))
                                    for g in range(len(answers))))}
    values = np.array([mass[combo] for combo in table.valid])
    fallback = False
    for combo in table.invalid:
        q = mass[combo]
        if q == 0.0:
            continue
        for g in range(len(answers)):
            # trusting group g keeps its block choice and spreads the mass
            # over compatible combos that agree with it
            family = [s for s, v in enumerate(table.valid) if v[g] == combo[g]]
            denom = sum(mass[table.valid[s]] for s in family)
            if denom > 0.0:
                for s in family:
                    values[s] += q * psi[g] * mass[table.valid[s]] / denom
            else:
                fallback = True
                for s in family:
                    values[s] += q * psi[g] / len(family)
    return NodeVote(list(table.blocks), values, fallback, dropped)


def vote_at_node(node: TargetNode, charts: Sequence[ModelChart], alpha: float,
                 x, phi_of: PhiFn, uncertain_weight: float = 0.0) -> NodeVote:
    """Blend all groups at a node into masses over its refinement blocks."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rows_of, phis_of = {}, {}
    for idxs in node.groups:
        for i in idxs:
            rows_of[i] = charts[i].outputs(x)[0]
            phis_of[i] = phi_of(charts[i], alpha)
    return _node_vote_from_rows(node, rows_of, phis_of, alpha, uncertain_weight)


# -- paths ------------------------------------------------------------------


def valid_paths(graph: TargetGraph, label) -> List[Tuple[int, ...]]:
    """Root-anchored node sequences keeping the label, ending on a fine node."""
    if label not in graph.nodes[graph.root].target:
        raise NoValidPathError(f"label {label!r} outside the root target")
    found: List[Tuple[int, ...]] = []

    def walk(path):
        node = graph.nodes[path[-1]]
        if node.table.is_fine:
            found.append(tuple(path))
        for child in graph.children[path[-1]]:
            if label in graph.nodes[child].target:
                walk(path + [child])

    walk([graph.root])
    if not found:
        raise NoValidPathError(
            f"no path for label {label!r} reaches a fine refinement")
    return found


@dataclass
class PathVote:
    classes: List
    values: np.ndarray
    prediction: object
    uniform_fallback: bool = False
    dropped_groups: int = 0
    dead_nodes: int = 0

    def value_for(self, label) -> float:
        return float(self.values[self.classes.index(label)])


def _path_vote_from_rows(graph, path, rows_of, phis_of, alpha,
                         uncertain_weight) -> PathVote:
    classes = sorted((next(iter(b)) for b in graph.nodes[path[-1]].table.blocks),
                     key=str)
    values = np.ones(len(classes))
    fallback, dropped, dead = False, 0, 0
    for vi in path:
        vote = _node_vote_from_rows(graph.nodes[vi], rows_of, phis_of, alpha,
                                    uncertain_weight)
        if vote.dead:
            dead += 1
            continue
        fallback |= vote.uniform_fallback
        dropped += vote.dropped_groups
        values *= np.array([vote.value_for(c) for c in classes])
    if dead == len(path):
        values = np.zeros(len(classes))
    pred = classes[int(np.argmax(values))]
    return PathVote(classes, values, pred, fallback, dropped, dead)


def _node_inputs(graph: TargetGraph, path, x, phi_of, alpha):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rows_of, phis_of = {}, {}
    for vi in path:
        for idxs in graph.nodes[vi].groups:
            for i in idxs:
                if i not in rows_of:
                    rows_of[i] = graph.charts[i].outputs(x)[0]
                    phis_of[i] = phi_of(graph.charts[i], alpha)
    return rows_of, phis_of


def vote_along_path(graph: TargetGraph, path: Sequence[int], alpha: float, x,
                    phi_of: PhiFn, uncertain_weight: float = 0.0) -> PathVote:
    """Per-class product of node masses down the path; argmax predicts."""
    rows_of, phis_of = _node_inputs(graph, path, x, phi_of, alpha)
    return _path_vote_from_rows(graph, tuple(path), rows_of, phis_of, alpha,
                                uncertain_weight)


# -- validation history -----------------------------------------------------


def _batch_rows(graph: TargetGraph, path, X, phi_of, alpha):
    outs, phis = {}, {}
    for vi in path:
        for idxs in graph.nodes[vi].groups:
            for i in idxs:
                if i not in outs:
                    outs[i] = graph.charts[i].outputs(X)
                    phis[i] = phi_of(graph.charts[i], alpha)
    return outs, phis


def path_predictions(graph: TargetGraph, path, alpha, X, phi_of,
                     uncertain_weight: float = 0.0):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    outs, phis_of = _batch_rows(graph, path, X, phi_of, alpha)
    preds = []
    for m in range(X.shape[0]):
        rows_of = {i: mat[m] for i, mat in outs.items()}
        preds.append(_path_vote_from_rows(graph, tuple(path), rows_of, phis_of,
                                          alpha, uncertain_weight).prediction)
    return preds


def expected_accuracy(graph: TargetGraph, path, alpha: float, label, Xval,
                      yval, phi_of: PhiFn,
                      uncertain_weight: float = 0.0) -> float:
    """How often the path vote got 'is it this label' right on validation."""
    yval = list(yval)
    if len(yval) == 0:
        raise EmptyValidationError("validation set is empty")
    preds = path_predictions(graph, path, alpha, Xval, phi_of, uncertain_weight)
    agree = sum(1 for p, t in zip(preds, yval) if (p == label) == (t == label))
    return agree / len(yval)


@dataclass
class HistoryEntry:
    path: Tuple[int, ...]
    alpha: float
    rate: float


@dataclass
class Calibration:
    entries: Dict[object, HistoryEntry]
    curves: Dict[str, AccuracyCurve] = field(default_factory=dict)
    alpha_grid: Tuple[float, ...] = DEFAULT_ALPHA_GRID


def calibrate(graph: TargetGraph, Xval, yval,
              alphas: Sequence[float] = DEFAULT_ALPHA_GRID,
              phi_of: Optional[PhiFn] = None,
              uncertain_weight: float = 0.0) -> Calibration:
    """Best (path, threshold) per class by past one-vs-rest accuracy.

    Ties prefer the smaller threshold, then the earlier path.
    """
    if len(list(yval)) == 0:
        raise EmptyValidationError("validation set is empty")
    if phi_of is None:
        phi_of = make_phi(Xval, yval)
    entries = {}
    for label in sorted(graph.nodes[graph.root].target, key=str):
        scored = []
        for pi, path in enumerate(valid_paths(graph, label)):
            for alpha in alphas:
                r = expected_accuracy(graph, path, alpha, label, Xval, yval,
                                      phi_of, uncertain_weight)
                scored.append((-r, alpha, pi, path))
        neg_r, alpha, _, path = min(scored)
        entries[label] = HistoryEntry(path, alpha, -neg_r)
    curves = {c.id: accuracy_curve(c, Xval, yval, alphas) for c in graph.charts}
    return Calibration(entries, curves, tuple(alphas))


@dataclass
class VoteResult:
    answer: Dict[object, float]
    prediction: object
    chosen: Dict[object, HistoryEntry]
    uniform_fallback: bool = False
    dropped_groups: int = 0
    dead_nodes: int = 0


def vote_with_validation_history(graph: TargetGraph, calibration: Calibration,
                                 x, phi_of: PhiFn,
                                 uncertain_weight: float = 0.0) -> VoteResult:
    """Answer each class along its calibrated best path and threshold."""
    answer, fallback, dropped, dead = {}, False, 0, 0
    for label, entry in calibration.entries.items():
        vote = vote_along_path(graph, entry.path, entry.alpha, x, phi_of,
                               uncertain_weight)
        answer[label] = vote.value_for(label)
        fallback |= vote.uniform_fallback
        dropped += vote.dropped_groups
        dead += vote.dead_nodes
    pred = max(sorted(answer, key=str), key=lambda c: answer[c])
    return VoteResult(answer, pred, dict(calibration.entries), fallback,
                      dropped, dead)


# -- fuzzy membership of instances in the ensemble's domain ----------------


@dataclass
class LogifoldBundle:
    charts: List[ModelChart]
    alphas: Dict[str, float]   # per-chart certainty threshold
    phis: Dict[str, float]     # per-chart accuracy at that threshold


def make_bundle(charts: Sequence[ModelChart], alpha: float, Xval, yval):
    phis = {c.id: fuzzy_accuracy(c, Xval, yval, alpha)[0] for c in charts}
    return LogifoldBundle(list(charts), {c.id: alpha for c in charts}, phis)


def fuzzy_belonging(bundle: LogifoldBundle, x) -> float:
    """Accuracy-weighted certainty of the charts willing to speak for x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    certainties, weights = [], []
    for chart in bundle.charts:
        c = float(chart.outputs(x)[0].max())
        certainties.append(c)
        weights.append(bundle.phis[chart.id]
                       if c >= bundle.alphas[chart.id] else 0.0)
    total = sum(weights)
    if total == 0.0:
        raise UncoveredInstanceError("no chart is certain about this instance")
    scale = max(1.0, total)
    return sum(w / scale * c for w, c in zip(weights, certainties))


# -- reports ----------------------------------------------------------------


def write_prediction_matrix(path, chart: ModelChart, X, ids=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = chart.outputs(X)
    if ids is None:
        ids = list(range(len(p)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id"] + [f"p_block_{j + 1}" for j in range(p.shape[1])])
        for i, row in zip(ids, p):
            w.writerow([i] + [repr(float(v)) for v in row])


def _path_targets(graph: TargetGraph, path):
    return [sorted(map(str, graph.nodes[vi].target)) for vi in path]


def calibration_to_dict(graph: TargetGraph, calibration: Calibration) -> dict:
    return {
        "alpha_grid": list(calibration.alpha_grid),
        "charts": {
            cid: {"alphas": curve.alphas, "phi": curve.values,
                  "certain_sizes": curve.sizes}
            for cid, curve in sorted(calibration.curves.items())
        },
        "classes": {
            str(label): {"path": _path_targets(graph, entry.path),
                         "path_nodes": list(entry.path),
                         "alpha": entry.alpha, "rate": entry.rate}
            for label, entry in sorted(calibration.entries.items(),
                                       key=lambda kv: str(kv[0]))
        },
    }


def save_calibration(path, graph: TargetGraph, calibration: Calibration):
    with open(path, "w") as fh:
        json.dump(calibration_to_dict(graph, calibration), fh, indent=2,
                  sort_keys=True)


def load_calibration(path, graph: TargetGraph, labels=None) -> Calibration:
    """Labels in JSON are strings; pass `labels` to map them back."""
    with open(path) as fh:
        doc = json.load(fh)
    named = {str(l): l for l in (labels if labels is not None
                                 else graph.nodes[graph.root].target)}
    entries = {
        named[key]: HistoryEntry(tuple(rec["path_nodes"]), rec["alpha"],
                                 rec["rate"])
        for key, rec in doc["classes"].items()
    }
    curves = {cid: AccuracyCurve(rec["alphas"], rec["phi"], rec["certain_sizes"])
              for cid, rec in doc["charts"].items()}
    return Calibration(entries, curves, tuple(doc["alpha_grid"]))


def vote_report(graph: TargetGraph, calibration: Calibration, X, phi_of: PhiFn,
                ids=None, uncertain_weight: float = 0.0) -> dict:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if ids is None:
        ids = list(range(X.shape[0]))
    instances = []
    for i, x in zip(ids, X):
        res = vote_with_validation_history(graph, calibration, x, phi_of,
                                           uncertain_weight)
        flags = []
        if res.uniform_fallback:
            flags.append("uniform_fallback")
        if res.dropped_groups:
            flags.append(f"dropped_groups:{res.dropped_groups}")
        if res.dead_nodes:
            flags.append(f"dead_nodes:{res.dead_nodes}")
        instances.append({
            "id": i,
            "answer": {str(c): res.answer[c]
                       for c in sorted(res.answer, key=str)},
            "prediction": str(res.prediction),
            "paths": {str(c): list(e.path)
                      for c, e in sorted(res.chosen.items(),
                                         key=lambda kv: str(kv[0]))},
            "flags": flags,
        })
    return {"instances": instances}


def save_vote_report(path, graph, calibration, X, phi_of, ids=None,
                     uncertain_weight: float = 0.0):
    with open(path, "w") as fh:
        json.dump(vote_report(graph, calibration, X, phi_of, ids,
                              uncertain_weight), fh, indent=2, sort_keys=True)

"""Rectangle covers of grid-labeled functions, compiled to decision graphs.

A target function is given as labels on a regular grid.  The builder greedily
extracts the largest single-label rectangle still uncovered, stopping once the
uncovered labeled measure drops below a prescribed bound, and emits a chain
graph that tests the rectangles in selection order.  Inside the selected
rectangles the graph reproduces the grid exactly; everything else routes to a
fallback label.  A chart family repeats the construction on the leftover cells
with the bound halved each round.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BudgetCapError, DimensionMismatchError
from .graph import INTERNAL, SOURCE, TARGET, AffineMap, Arrow, LogicalGraph, evaluate

FALLBACK = "*"

BUDGET_START = 8
BUDGET_CAP = 4096


@dataclass
class LabeledGrid:
    """Axis-aligned box split into equal cells, each cell labeled or outside.

    Cells are half open: cell (i1..in) covers [lo + i*w, lo + (i+1)*w) per
    axis.  A label of None marks cells outside the domain.
    """

    lo: np.ndarray
    hi: np.ndarray
    labels: np.ndarray  # object ndarray, shape = resolution

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise DimensionMismatchError("lo and hi must be matching vectors")
        if self.labels.ndim != len(self.lo):
            raise DimensionMismatchError(
                f"label array is {self.labels.ndim}d, box is {len(self.lo)}d")
        if np.any(self.hi <= self.lo):
            raise DimensionMismatchError("box must have positive extent")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def resolution(self) -> Tuple[int, ...]:
        return self.labels.shape

    @property
    def cell_width(self) -> np.ndarray:
        return (self.hi - self.lo) / np.array(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_width))

    def labeled_mask(self) -> np.ndarray:
        return self.labels != None  # noqa: E711  elementwise on object array

    def labeled_measure(self) -> float:
        return int(self.labeled_mask().sum()) * self.cell_volume

    def cell_of(self, x) -> Optional[Tuple[int, ...]]:
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.lo) / self.cell_width).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.resolution)):
            return None
        return tuple(idx)

    def label_at(self, x):
        idx = self.cell_of(x)
        return None if idx is None else self.labels[idx]

    def center(self, idx) -> np.ndarray:
        return self.lo + (np.array(idx) + 0.5) * self.cell_width

    def distinct_labels(self) -> list:
        seen = {}
        for v in self.labels.flat:
            if v is not None and v not in seen:
                seen[v] = True
        return sorted(seen, key=str)


def grid_from_function(fn, lo, hi, resolution) -> LabeledGrid:
    """Sample fn at cell centers; fn returning None leaves the cell outside."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    res = tuple(int(r) for r in np.atleast_1d(resolution))
    if len(res) == 1 and len(lo) > 1:
        res = res * len(lo)
    labels = np.empty(res, dtype=object)
    width = (hi - lo) / np.array(res)
    for idx in np.ndindex(*res):
        labels[idx] = fn(lo + (np.array(idx) + 0.5) * width)
    return LabeledGrid(lo, hi, labels)


@dataclass(frozen=True)
class Rectangle:
    """Cell-index block [cell_lo, cell_hi) and its float box [lo, hi)."""

    label: object
    cell_lo: Tuple[int, ...]
    cell_hi: Tuple[int, ...]
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    @property
    def cells(self) -> int:
        return int(np.prod(np.array(self.cell_hi) - np.array(self.cell_lo)))

    def contains(self, x) -> bool:
        return all(l <= v < h for l, v, h in zip(self.lo, x, self.hi))


def _longest_run(mask: np.ndarray):
    best_len, best_start, run, start = 0, 0, 0, 0
    for i, v in enumerate(mask):
        if v:
            if run == 0:
                start = i
            run += 1
            if run > best_len:
                best_len, best_start = run, start
        else:
            run = 0
    return best_len, ((best_start,), (best_start + best_len,))


def _largest_rect_2d(mask: np.ndarray):
    """Exact maximal-area rectangle via the skyline of column heights."""
    rows, cols = mask.shape
    heights = np.zeros(cols, dtype=int)
    best = (0, ((0, 0), (0, 0)))
    for r in range(rows):
        heights = np.where(mask[r], heights + 1, 0)
        stack: List[Tuple[int, int]] = []
        for c in range(cols + 1):
            h = int(heights[c]) if c < cols else 0
            start = c
            while stack and stack[-1][1] >= h:
                s, sh = stack.pop()
                area = sh * (c - s)
                if area > best[0]:
                    best = (area, ((r - sh + 1, s), (r + 1, c)))
                start = s
            if h > 0:
                stack.append((start, h))
    return best


def _grown_block(mask: np.ndarray):
    """Greedy seed-and-grow block for three or more axes; not maximal."""
    idx = np.argwhere(mask)
    if len(idx) == 0:
        return 0, (tuple(0 for _ in mask.shape), tuple(0 for _ in mask.shape))
    lo = list(idx[0])
    hi = [v + 1 for v in lo]
    for axis in range(mask.ndim):
        while hi[axis] < mask.shape[axis]:
            slab = tuple(slice(l, h) for l, h in zip(lo, hi))
            slab = slab[:axis] + (hi[axis],) + slab[axis + 1:]
            if not bool(mask[slab].all()):
                break
            hi[axis] += 1
        while lo[axis] > 0:
            slab = tuple(slice(l, h) for l, h in zip(lo, hi))
            slab = slab[:axis] + (lo[axis] - 1,) + slab[axis + 1:]
            if not bool(mask[slab].all()):
                break
            lo[axis] -= 1
    size = int(np.prod(np.array(hi) - np.array(lo)))
    return size, (tuple(lo), tuple(hi))


def largest_rectangle(mask: np.ndarray):
    """(cell count, (cell_lo, cell_hi)) of the chosen uncovered block."""
    if mask.ndim == 1:
        return _longest_run(mask)
    if mask.ndim == 2:
        return _largest_rect_2d(mask)
    return _grown_block(mask)


@dataclass
class Approximation:
    graph: LogicalGraph
    rectangles: List[Rectangle]
    residual_measure: float
    covered_measure: float
    rounds: List[Tuple[int, float]] = field(default_factory=list)  # (budget, residual)

    def region_label(self, x):
        for rect in self.rectangles:
            if rect.contains(x):
                return rect.label
        return None


def _box_signs(dim: int):
    """Realizable sign strings of the rows (x - lo, x - hi) per axis."""
    per_axis = ["+-", "++", "--"]  # inside, above, below; "-+" is impossible
    for combo in iproduct(per_axis, repeat=dim):
        lows = "".join(c[0] for c in combo)
        highs = "".join(c[1] for c in combo)
        yield lows + highs, all(c == "+-" for c in combo)


def _chain_graph(dim: int, rectangles: Sequence[Rectangle]) -> LogicalGraph:
    if not rectangles:
        return LogicalGraph(dim, {"s": SOURCE, "t": TARGET},
                            [Arrow("a", "s", "t")], {}, {}, {"t": FALLBACK})
    vertices = {}
    arrows = []
    guards = {}
    routing = {}
    labels = {}
    target_of = {}

    def target(label):
        if label not in target_of:
            t = f"t{len(target_of)}"
            vertices[t] = TARGET
            labels[t] = label
            target_of[label] = t
        return target_of[label]

    fallback = target(FALLBACK)
    for k, rect in enumerate(rectangles):
        v = f"q{k}"
        vertices[v] = SOURCE if k == 0 else INTERNAL
        rows = np.vstack([np.eye(dim), np.eye(dim)])
        offs = np.concatenate([-np.array(rect.lo), -np.array(rect.hi)])
        guards[v] = AffineMap(rows, offs)
        nxt = f"q{k + 1}" if k + 1 < len(rectangles) else fallback
        hit = Arrow(f"hit{k}", v, target(rect.label))
        miss = Arrow(f"miss{k}", v, nxt)
        arrows += [hit, miss]
        routing[v] = {signs: (hit.id if inside else miss.id)
                      for signs, inside in _box_signs(dim)}
    return LogicalGraph(dim, vertices, arrows, guards, routing, labels)


def approximate(grid: LabeledGrid, epsilon: float,
                budget: int = BUDGET_START, budget_cap: int = BUDGET_CAP) -> Approximation:
    """Cover labeled cells by rectangles until the leftover measure is below
    epsilon, doubling the rectangle budget as needed up to a hard cap."""
    remaining = {label: (grid.labels == label) & grid.labeled_mask()
                 for label in grid.distinct_labels()}
    cellvol = grid.cell_volume
    width = grid.cell_width
    chosen: List[Rectangle] = []
    rounds: List[Tuple[int, float]] = []

    def residual():
        return sum(int(m.sum()) for m in remaining.values()) * cellvol

    while residual() >= epsilon and residual() > 0:
        if len(chosen) >= budget:
            rounds.append((budget, residual()))
            budget *= 2
            if budget > budget_cap:
                raise BudgetCapError(
                    f"rectangle budget exceeded {budget_cap} with residual {residual():.3g}")
        best = None
        for label in sorted(remaining, key=str):
            size, (clo, chi) = largest_rectangle(remaining[label])
            if size > 0 and (best is None or size > best[0]):
                best = (size, label, clo, chi)
        if best is None:
            break
        _, label, clo, chi = best
        lo = tuple(float(v) for v in grid.lo + np.array(clo) * width)
        hi = tuple(float(v) for v in grid.lo + np.array(chi) * width)
        chosen.append(Rectangle(label, clo, chi, lo, hi))
        block = tuple(slice(a, b) for a, b in zip(clo, chi))
        remaining[label][block] = False

    res = residual()
    rounds.append((budget, res))
    covered = sum(r.cells for r in chosen) * cellvol
    return Approximation(_chain_graph(grid.dim, chosen), chosen, res, covered, rounds)


@dataclass
class ChartRound:
    index: int
    epsilon: float
    chart: Approximation


@dataclass
class ChartFamily:
    grid: LabeledGrid
    charts: List[ChartRound]
    final_residual: float

    def label_at(self, x):
        for r in self.charts:
            found = r.chart.region_label(x)
            if found is not None:
                return found
        return None


def chart_family(grid: LabeledGrid, eps0: float, depth: int,
                 budget: int = BUDGET_START, budget_cap: int = BUDGET_CAP) -> ChartFamily:
    """Repeat the cover on leftover cells with the bound halved each round."""
    working = LabeledGrid(grid.lo.copy(), grid.hi.copy(), grid.labels.copy())
    charts = []
    residual = working.labeled_measure()
    for k in range(depth):
        if residual == 0:
            break
        eps = eps0 / 2 ** k
        chart = approximate(working, eps, budget=budget, budget_cap=budget_cap)
        charts.append(ChartRound(k, eps, chart))
        for rect in chart.rectangles:
            block = tuple(slice(a, b) for a, b in zip(rect.cell_lo, rect.cell_hi))
            working.labels[block] = None
        residual = working.labeled_measure()
    return ChartFamily(grid, charts, residual)


def mismatch_measure(result: Approximation, grid: LabeledGrid) -> Tuple[float, float]:
    """(wrongly labeled, fallback) measures over labeled cells, by centers."""
    wrong = 0
    star = 0
    for idx in np.ndindex(*grid.resolution):
        truth = grid.labels[idx]
        if truth is None:
            continue
        got = evaluate(result.graph, grid.center(idx))
        if got == FALLBACK:
            star += 1
        elif got != truth:
            wrong += 1
    return wrong * grid.cell_volume, star * grid.cell_volume


def regions_to_semilinear(result: Approximation, dim: int):
    """Half-open boxes as semilinear fibers; each box expands into the pieces
    that fix which lower faces are met with equality."""
    from .semilinear import BasicSemilinearSet, SemilinearFunction, SemilinearSet

    fibers: Dict[object, list] = {}
    for rect in result.rectangles:
        rows_lo = [tuple(1.0 if j == i else 0.0 for j in range(dim)) + (-rect.lo[i],)
                   for i in range(dim)]
        rows_hi = [tuple(-1.0 if j == i else 0.0 for j in range(dim)) + (rect.hi[i],)
                   for i in range(dim)]
        for mask in range(2 ** dim):
            eq = tuple(rows_lo[i] for i in range(dim) if mask >> i & 1)
            gt = tuple(rows_lo[i] for i in range(dim) if not mask >> i & 1)
            fibers.setdefault(rect.label, []).append(
                BasicSemilinearSet(dim, eq, gt + tuple(rows_hi)))
    return SemilinearFunction(dim, {l: SemilinearSet(dim, tuple(ps))
                                    for l, ps in fibers.items()})


# -- serialization ----------------------------------------------------------


def save_grid(grid: LabeledGrid, manifest_path):
    manifest_path = os.fspath(manifest_path)
    stem, _ = os.path.splitext(manifest_path)
    csv_path = stem + ".csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"i{k}" for k in range(grid.dim)] + ["label"])
        for idx in sorted(np.ndindex(*grid.resolution)):
            if grid.labels[idx] is not None:
                writer.writerow(list(idx) + [grid.labels[idx]])
    manifest = {
        "lo": grid.lo.tolist(),
        "hi": grid.hi.tolist(),
        "resolution": list(grid.resolution),
        "labels_file": os.path.basename(csv_path),
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_grid(manifest_path) -> LabeledGrid:
    manifest_path = os.fspath(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    labels = np.empty(tuple(manifest["resolution"]), dtype=object)
    labels[...] = None
    csv_path = os.path.join(os.path.dirname(manifest_path), manifest["labels_file"])
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            idx = tuple(int(v) for v in row[:-1])
            labels[idx] = row[-1]
    return LabeledGrid(np.array(manifest["lo"]), np.array(manifest["hi"]), labels)

"""Semilinear sets: finite unions of basic pieces cut out by affine rows.

A basic piece is an intersection of equalities ``c . x + b = 0`` and strict
inequalities ``c . x + b > 0``.  Emptiness is decided exactly over the
rationals, so every verdict carries either a witness point or a contradiction
certificate.  Decision graphs translate back and forth: graph regions expand
into disjoint pieces, and a piecewise-constant fiber family compiles into a
single-guard graph routed by the sign pattern of the deduplicated rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import feasibility
from .errors import AmbiguousFiberError, BudgetCapError
from .feasibility import (
    Constraint,
    Verdict,
    evaluate_constraint,
    find_witness,
    make_constraint,
    signed_constraint,
)
from .graph import SOURCE, TARGET, AffineMap, Arrow, LogicalGraph

UNCOVERED = "⊥"

PIECE_CAP = 4096
CHAMBER_CAP = 4096

Row = Tuple[float, ...]  # (c1, ..., cn, b)


@dataclass(frozen=True)
class BasicSemilinearSet:
    """{x : c.x + b = 0 for eq rows, c.x + b > 0 for gt rows}."""

    dim: int
    eq: Tuple[Row, ...]
    gt: Tuple[Row, ...]

    def constraints(self) -> list:
        out = []
        for row in self.eq:
            c, b = row[:-1], row[-1]
            out.append(make_constraint(c, b, strict=False))
            out.append(make_constraint([-v for v in c], -b, strict=False))
        for row in self.gt:
            out.append(make_constraint(row[:-1], row[-1], strict=True))
        return out

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = list(x)
        if all(isinstance(v, Fraction) for v in x):
            return all(feasibility.satisfies(c, x) for c in self.constraints())
        xf = np.asarray(x, dtype=float)
        for row in self.eq:
            if abs(float(np.dot(row[:-1], xf)) + row[-1]) > tol:
                return False
        for row in self.gt:
            if float(np.dot(row[:-1], xf)) + row[-1] <= 0:
                return False
        return True

    def emptiness(self, dim_budget: int = feasibility.DIM_BUDGET) -> Verdict:
        return feasibility.check_system(self.constraints(), self.dim, dim_budget)

    def is_empty(self, dim_budget: int = feasibility.DIM_BUDGET) -> bool:
        return not self.emptiness(dim_budget).feasible


@dataclass(frozen=True)
class SemilinearSet:
    dim: int
    pieces: Tuple[BasicSemilinearSet, ...]

    def contains(self, x, tol: float = 1e-12) -> bool:
        return any(p.contains(x, tol) for p in self.pieces)

    def is_empty(self, dim_budget: int = feasibility.DIM_BUDGET) -> bool:
        return all(p.is_empty(dim_budget) for p in self.pieces)

    def pruned(self, dim_budget: int = feasibility.DIM_BUDGET) -> "SemilinearSet":
        return SemilinearSet(
            self.dim, tuple(p for p in self.pieces if not p.is_empty(dim_budget)))


@dataclass(frozen=True)
class SemilinearFunction:
    """Finitely many labeled fibers, each a semilinear set."""

    dim: int
    fibers: Dict[object, SemilinearSet]

    def label_of(self, x, tol: float = 1e-12):
        hits = [l for l, s in self.fibers.items() if s.contains(x, tol)]
        if len(hits) > 1:
            raise AmbiguousFiberError(f"point lies in fibers {hits}")
        return hits[0] if hits else None


def _as_row(coeffs, offset) -> Row:
    return tuple(float(v) for v in coeffs) + (float(offset),)


def from_llgraph(g: LogicalGraph, piece_cap: int = PIECE_CAP,
                 dim_budget: int = feasibility.DIM_BUDGET) -> SemilinearFunction:
    """Expand each routed region of g into disjoint basic pieces per label.

    A weak chamber row splits into an equality piece and a strict piece, so
    the resulting fibers partition the input space.
    """
    n = g.input_dim
    fibers: Dict[object, list] = {}
    examined = 0

    def emit(label, plus, minus):
        nonlocal examined
        examined += 2 ** len(plus)
        if examined > piece_cap:
            raise BudgetCapError(
                f"region expansion exceeded {piece_cap} candidate pieces")
        for mask in range(2 ** len(plus)):
            eq = tuple(row for i, row in enumerate(plus) if mask >> i & 1)
            gt = tuple(row for i, row in enumerate(plus) if not mask >> i & 1)
            piece = BasicSemilinearSet(n, eq, gt + tuple(minus))
            if not piece.is_empty(dim_budget):
                fibers.setdefault(label, []).append(piece)

    def walk(v, system, witness, plus, minus):
        if g.vertices[v] == TARGET:
            emit(g.target_labels[v], plus, minus)
            return
        if v not in g.guards:
            walk(g.arrows[g.out_arrows[v][0]].dst, system, witness, plus, minus)
            return
        guard = g.guards[v]
        for signs, aid in sorted(g.routing[v].items()):
            ext = list(system)
            p2, m2 = list(plus), list(minus)
            for i, s in enumerate(signs):
                coeffs, off = guard.row(i)
                ext.append(signed_constraint(coeffs, off, s))
                if s == "+":
                    p2.append(_as_row(coeffs, off))
                else:
                    m2.append(_as_row([-c for c in coeffs], -off))
            w = find_witness(ext, n, dim_budget, hint=witness)
            if w is not None:
                walk(g.arrows[aid].dst, ext, w, p2, m2)

    walk(g.source, [], None, [], [])
    return SemilinearFunction(n, {l: SemilinearSet(n, tuple(ps))
                                  for l, ps in fibers.items()})


def _row_key(row: Row):
    """Scale-and-sign normalized integer form; positive multiples collide."""
    fr = [Fraction(v) for v in row]
    den = 1
    for f in fr:
        den = den * f.denominator // gcd(den, f.denominator)
    ints = [int(f * den) for f in fr]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
    lead = next((v for v in ints[:-1] if v), 0)
    if lead < 0:
        ints = [-v for v in ints]
    return tuple(ints)


def to_llgraph(f: SemilinearFunction, chamber_cap: int = CHAMBER_CAP,
               dim_budget: int = feasibility.DIM_BUDGET,
               prune: bool = True) -> LogicalGraph:
    """Single-guard graph whose walk reproduces f.label_of.

    Every distinct hyperplane appears as a (row, -row) pair, so each chamber
    fixes the full =/>/< status of every row and fibers are constant on it.
    Chambers outside every fiber route to an UNCOVERED target.
    """
    n = f.dim
    reps: Dict[tuple, Row] = {}
    live_fibers: Dict[object, SemilinearSet] = {}
    for label, fiber in f.fibers.items():
        kept = []
        for piece in fiber.pieces:
            if prune and piece.is_empty(dim_budget):
                continue
            kept.append(piece)
            for row in piece.eq + piece.gt:
                if any(row[:-1]):
                    reps.setdefault(_row_key(row), row)
        if kept:
            live_fibers[label] = SemilinearSet(n, tuple(kept))

    rows = []
    for rep in reps.values():
        rows.append((list(rep[:-1]), rep[-1]))
        rows.append(([-c for c in rep[:-1]], -rep[-1]))
    chambers = feasibility.enumerate_chambers(rows, n, cap=chamber_cap,
                                              dim_budget=dim_budget)

    vertices = {"s": SOURCE}
    arrows = []
    routing: Dict[str, str] = {}
    labels = {}
    arrow_of: Dict[object, str] = {}

    def route_to(label):
        if label not in arrow_of:
            t = f"t{len(arrow_of)}"
            vertices[t] = TARGET
            labels[t] = label
            a = Arrow(f"a{len(arrow_of)}", "s", t)
            arrows.append(a)
            arrow_of[label] = a.id
        return arrow_of[label]

    for signs, witness in sorted(chambers.items()):
        hits = [l for l, fiber in live_fibers.items()
                if fiber.contains(list(witness))]
        if len(hits) > 1:
            raise AmbiguousFiberError(
                f"chamber {signs} lies in fibers {sorted(map(str, hits))}")
        routing[signs] = route_to(hits[0] if hits else UNCOVERED)

    if not rows:
        only = next(iter(arrow_of)) if arrow_of else UNCOVERED
        return LogicalGraph(n, {"s": SOURCE, "t": TARGET},
                            [Arrow("a", "s", "t")], {}, {}, {"t": only})
    matrix = np.array([c for c, _ in rows])
    offset = np.array([b for _, b in rows])
    return LogicalGraph(n, vertices, arrows, {"s": AffineMap(matrix, offset)},
                        {"s": routing}, labels)


# -- serialization ----------------------------------------------------------


def semilinear_to_dict(f: SemilinearFunction) -> dict:
    return {
        "dim": f.dim,
        "fibers": {
            str(label): [{"eq": [list(r) for r in p.eq],
                          "gt": [list(r) for r in p.gt]}
                         for p in fiber.pieces]
            for label, fiber in f.fibers.items()
        },
    }


def semilinear_from_dict(d: dict) -> SemilinearFunction:
    dim = int(d["dim"])
    fibers = {}
    for label, pieces in d["fibers"].items():
        fibers[label] = SemilinearSet(dim, tuple(
            BasicSemilinearSet(dim,
                               tuple(tuple(map(float, r)) for r in p.get("eq", [])),
                               tuple(tuple(map(float, r)) for r in p.get("gt", [])))
            for p in pieces))
    return SemilinearFunction(dim, fibers)


def save_semilinear(f: SemilinearFunction, path):
    with open(path, "w") as fh:
        json.dump(semilinear_to_dict(f), fh, indent=2, sort_keys=True)


def load_semilinear(path) -> SemilinearFunction:
    with open(path) as fh:
        return semilinear_from_dict(json.load(fh))

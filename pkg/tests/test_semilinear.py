from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logifold import evaluate
from logifold.errors import AmbiguousFiberError, BudgetCapError
from logifold.feasibility import check_system
from logifold.semilinear import (
    UNCOVERED,
    BasicSemilinearSet,
    SemilinearFunction,
    SemilinearSet,
    from_llgraph,
    load_semilinear,
    save_semilinear,
    semilinear_from_dict,
    semilinear_to_dict,
    to_llgraph,
)

from conftest import make_diamond_graph, make_step_graph


def halfline() -> BasicSemilinearSet:
    # x + y - 1 = 0, x > 0
    return BasicSemilinearSet(2, ((1.0, 1.0, -1.0),), ((1.0, 0.0, 0.0),))


def test_contains_float_mode():
    s = halfline()
    assert s.contains([0.25, 0.75])
    assert not s.contains([0.25, 0.5])   # off the line
    assert not s.contains([0.0, 1.0])    # x not strictly positive
    assert not s.contains([-1.0, 2.0])


def test_contains_exact_mode_ignores_tolerance():
    s = halfline()
    x = [Fraction(1, 3), Fraction(2, 3)]
    assert s.contains(x)
    assert not s.contains([Fraction(1, 3), Fraction(2, 3) + Fraction(1, 10**18)])


def test_emptiness_verdicts_carry_certificates():
    wedge = BasicSemilinearSet(2, (), ((1.0, 0.0, 0.0), (0.0, 1.0, -2.0)))
    v = wedge.emptiness()
    assert v.feasible
    assert all(c.strict is not None for c in wedge.constraints())
    assert wedge.contains(list(v.witness))

    void = BasicSemilinearSet(1, (), ((1.0, 0.0), (-1.0, 0.0)))
    v = void.emptiness()
    assert not v.feasible and v.contradiction is not None


def test_semilinear_set_union_semantics():
    s = SemilinearSet(1, (
        BasicSemilinearSet(1, (), ((1.0, -1.0),)),    # x > 1
        BasicSemilinearSet(1, ((1.0, 1.0),), ()),     # x = -1
    ))
    assert s.contains([2.0]) and s.contains([-1.0])
    assert not s.contains([0.0])
    assert not s.is_empty()
    empty = SemilinearSet(1, (BasicSemilinearSet(1, ((0.0, 1.0),), ()),))
    assert empty.is_empty()
    assert empty.pruned().pieces == ()


def test_from_llgraph_splits_weak_rows():
    g = make_step_graph(labels=("lo", "hi"), threshold=2.0)
    f = from_llgraph(g)
    assert set(f.fibers) == {"lo", "hi"}
    # weak side x >= 2 splits into the boundary slice and the open ray
    assert len(f.fibers["hi"].pieces) == 2
    assert len(f.fibers["lo"].pieces) == 1
    assert f.label_of([2.0]) == "hi"
    assert f.label_of([1.99]) == "lo"
    assert f.label_of([5.0]) == "hi"


def test_from_llgraph_matches_walks(rng):
    g = make_diamond_graph()
    f = from_llgraph(g)
    for x in rng.normal(scale=2.0, size=(60, 2)):
        assert f.label_of(x) == evaluate(g, x)


def test_from_llgraph_pieces_are_pairwise_disjoint():
    f = from_llgraph(make_diamond_graph())
    pieces = [p for fiber in f.fibers.values() for p in fiber.pieces]
    for p, q in combinations(pieces, 2):
        verdict = check_system(p.constraints() + q.constraints(), 2)
        assert not verdict.feasible


def test_from_llgraph_piece_cap():
    with pytest.raises(BudgetCapError):
        from_llgraph(make_diamond_graph(), piece_cap=2)


def test_round_trip_through_graph(rng):
    g = make_diamond_graph()
    f = from_llgraph(g)
    g2 = to_llgraph(f)
    for x in rng.normal(scale=2.0, size=(60, 2)):
        assert evaluate(g2, x) == evaluate(g, x)
    for x in ([0.0, 0.0], [0.0, -1.0], [1.0, 0.0], [-1e-9, 3.0]):
        assert evaluate(g2, np.array(x)) == evaluate(g, np.array(x))


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5, allow_nan=False), st.floats(-8, 8, allow_nan=False))
def test_round_trip_on_random_thresholds(t, x):
    g = make_step_graph(labels=("lo", "hi"), threshold=t)
    f = from_llgraph(g)
    pt = np.array([x])
    assert evaluate(to_llgraph(f), pt) == evaluate(g, pt)


def test_to_llgraph_deduplicates_scaled_rows():
    f = SemilinearFunction(2, {
        "a": SemilinearSet(2, (BasicSemilinearSet(2, (), ((2.0, 2.0, -2.0),)),)),
        "b": SemilinearSet(2, (BasicSemilinearSet(2, (), ((-1.0, -1.0, 1.0),)),)),
    })
    g = to_llgraph(f)
    # one hyperplane, stored as a (row, -row) pair
    assert g.guards[g.source].rows == 2
    assert evaluate(g, np.array([1.0, 1.0])) == "a"
    assert evaluate(g, np.array([0.0, 0.0])) == "b"
    assert evaluate(g, np.array([0.5, 0.5])) == UNCOVERED


def test_to_llgraph_flags_overlap():
    ray = SemilinearSet(1, (BasicSemilinearSet(1, (), ((1.0, 0.0),)),))
    f = SemilinearFunction(1, {"a": ray, "b": ray})
    with pytest.raises(AmbiguousFiberError):
        to_llgraph(f)


def test_to_llgraph_uncovered_chamber():
    f = SemilinearFunction(1, {"a": SemilinearSet(1, (
        BasicSemilinearSet(1, (), ((1.0, 0.0),)),))})
    g = to_llgraph(f)
    assert evaluate(g, np.array([3.0])) == "a"
    assert evaluate(g, np.array([-3.0])) == UNCOVERED
    assert evaluate(g, np.array([0.0])) == UNCOVERED  # boundary is not x > 0


def test_to_llgraph_whole_space_fiber():
    f = SemilinearFunction(3, {"all": SemilinearSet(3, (
        BasicSemilinearSet(3, (), ()),))})
    g = to_llgraph(f)
    assert evaluate(g, np.zeros(3)) == "all"
    assert not g.guards


def test_json_round_trip(tmp_path):
    f = from_llgraph(make_diamond_graph())
    path = tmp_path / "fibers.json"
    save_semilinear(f, path)
    f2 = load_semilinear(path)
    assert semilinear_to_dict(f2) == semilinear_to_dict(f)
    assert f2.label_of([1.0, 1.0]) == "A"


def test_dict_round_trip_preserves_rows():
    f = SemilinearFunction(2, {"z": SemilinearSet(2, (halfline(),))})
    d = semilinear_to_dict(f)
    f2 = semilinear_from_dict(d)
    assert f2.fibers["z"].pieces == f.fibers["z"].pieces

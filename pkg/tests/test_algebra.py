import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logifold import evaluate, require_valid, validate_graph
from logifold.algebra import (
    F2_ADD,
    F2_MUL,
    boolean_combine,
    constant_graph,
    identity_graph,
    parametrize,
    product,
    zero_locus_lift,
)
from logifold.errors import (
    DimensionMismatchError,
    NotF2LabeledError,
    SeparationFailureError,
)

from conftest import make_diamond_graph, make_step_graph


def test_constant_graph_ignores_input():
    g = constant_graph("only", 3)
    require_valid(g)
    assert evaluate(g, np.array([1.0, -2.0, 0.5])) == "only"
    assert evaluate(g, np.zeros(3)) == "only"


def test_product_pairs_labels_pointwise(rng):
    gx = make_step_graph(labels=("neg", "pos"))
    gy = make_step_graph(labels=("lo", "hi"), threshold=1.0)
    p = product([gx, gy])
    require_valid(p)
    for x in rng.normal(scale=2.0, size=(50, 1)):
        assert evaluate(p, x) == (evaluate(gx, x), evaluate(gy, x))


def test_product_three_factors_keeps_flat_tuples(rng):
    g = make_step_graph()
    p = product([g, g, g])
    x = rng.normal(size=1)
    v = evaluate(g, x)
    assert evaluate(p, x) == (v, v, v)


def test_product_single_factor_wraps_label():
    g = make_step_graph(labels=("a", "b"))
    p = product([g])
    assert evaluate(p, np.array([2.0])) == ("b",)


def test_product_rejects_mixed_dimensions():
    with pytest.raises(DimensionMismatchError):
        product([make_step_graph(), make_diamond_graph()])


def test_product_of_branching_graphs_validates():
    p = product([make_diamond_graph(), make_diamond_graph()])
    report = validate_graph(p)
    assert report.ok and report.realizability_checked


@settings(max_examples=40, deadline=None)
@given(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False))
def test_boolean_ring_matches_f2_arithmetic(x, t):
    g1 = make_step_graph(labels=(0, 1))
    g2 = make_step_graph(labels=(0, 1), threshold=t)
    pt = np.array([x])
    a, b = evaluate(g1, pt), evaluate(g2, pt)
    assert evaluate(boolean_combine(g1, g2, F2_ADD), pt) == (a + b) % 2
    assert evaluate(boolean_combine(g1, g2, F2_MUL), pt) == a * b


def test_boolean_combine_is_commutative_on_samples(rng):
    g1 = make_step_graph(labels=(0, 1), threshold=-0.5)
    g2 = make_step_graph(labels=(0, 1), threshold=0.5)
    for op in (F2_ADD, F2_MUL):
        lhs = boolean_combine(g1, g2, op)
        rhs = boolean_combine(g2, g1, op)
        for x in rng.normal(size=(25, 1)):
            assert evaluate(lhs, x) == evaluate(rhs, x)


def test_boolean_combine_distributes(rng):
    gs = [make_step_graph(labels=(0, 1), threshold=t) for t in (-1.0, 0.0, 1.0)]
    a, b, c = gs
    lhs = boolean_combine(a, boolean_combine(b, c, F2_ADD), F2_MUL)
    rhs = boolean_combine(boolean_combine(a, b, F2_MUL),
                          boolean_combine(a, c, F2_MUL), F2_ADD)
    for x in rng.normal(scale=2.0, size=(40, 1)):
        assert evaluate(lhs, x) == evaluate(rhs, x)


def test_boolean_combine_rejects_other_labels():
    with pytest.raises(NotF2LabeledError):
        boolean_combine(make_step_graph(labels=("a", "b")),
                        make_step_graph(labels=(0, 1)), F2_ADD)


def test_boolean_combine_rejects_unknown_op():
    g = make_step_graph(labels=(0, 1))
    with pytest.raises(ValueError):
        boolean_combine(g, g, "xor")


def test_zero_locus_vanishes_exactly_on_graph_of_g(rng):
    g = make_step_graph(labels=(1, 2))
    lifted = zero_locus_lift(g)
    require_valid(lifted)
    assert lifted.input_dim == 2
    for x in rng.normal(scale=2.0, size=(30, 1)):
        k = evaluate(g, x)
        for y in (1, 2):
            expected = 0 if y == k else 1
            assert evaluate(lifted, np.array([x[0], float(y)])) == expected


def test_zero_locus_window_edges():
    g = make_step_graph(labels=(1, 2))
    # label of x=1.0 is 2; the window around 2 is [1.5, 2.5]
    assert evaluate(zero_locus_lift(g), np.array([1.0, 1.5])) == 0
    assert evaluate(zero_locus_lift(g), np.array([1.0, 2.5])) == 0
    assert evaluate(zero_locus_lift(g), np.array([1.0, 2.51])) == 1
    assert evaluate(zero_locus_lift(g), np.array([1.0, 1.49])) == 1


def test_zero_locus_requires_consecutive_labels():
    with pytest.raises(ValueError):
        zero_locus_lift(make_step_graph(labels=(0, 1)))
    with pytest.raises(ValueError):
        zero_locus_lift(make_step_graph(labels=(1, 3)))


def test_identity_graph_recovers_every_point(rng):
    pts = rng.normal(size=(7, 3))
    g = identity_graph(pts, seed=5)
    require_valid(g)
    for p in pts:
        assert evaluate(g, p) == tuple(p)
    assert len(g.labels) == 7


def test_identity_graph_single_point():
    g = identity_graph([[2.0, 3.0]])
    assert evaluate(g, np.array([9.0, -9.0])) == (2.0, 3.0)


def test_identity_graph_rejects_duplicates():
    with pytest.raises(SeparationFailureError):
        identity_graph([[1.0, 2.0], [1.0, 2.0]])


def test_identity_graph_exhausts_retry_budget():
    with pytest.raises(SeparationFailureError):
        identity_graph([[0.0], [1.0]], max_tries=0)


def test_parametrize_labels_are_point_value_pairs(rng):
    g = make_step_graph(labels=("lo", "hi"))
    pts = rng.normal(scale=2.0, size=(5, 1))
    fam = parametrize(g, pts, seed=3)
    for p in pts:
        assert evaluate(fam, p) == (tuple(p), evaluate(g, p))

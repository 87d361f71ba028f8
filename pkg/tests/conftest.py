import numpy as np
import pytest

from logifold.graph import AffineMap, Arrow, LogicalGraph


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_step_graph(labels=(0, 1), threshold=0.0):
    """Smallest branching graph on R^1: sign of (x - threshold) picks a target."""
    return LogicalGraph(
        input_dim=1,
        vertices={"s": "source", "t0": "target", "t1": "target"},
        arrows=[Arrow("a0", "s", "t0"), Arrow("a1", "s", "t1")],
        guards={"s": AffineMap(np.array([[1.0]]), np.array([-threshold]))},
        routing={"s": {"+": "a1", "-": "a0"}},
        target_labels={"t0": labels[0], "t1": labels[1]},
    )


def make_diamond_graph():
    """Two-level graph on R^2: x-sign at the source, y-sign on the + branch."""
    return LogicalGraph(
        input_dim=2,
        vertices={"s": "source", "m1": "internal", "m2": "internal",
                  "ta": "target", "tb": "target", "tc": "target"},
        arrows=[Arrow("a1", "s", "m1"), Arrow("a2", "s", "m2"),
                Arrow("b1", "m1", "ta"), Arrow("b2", "m1", "tb"),
                Arrow("c1", "m2", "tc")],
        guards={"s": AffineMap(np.array([[1.0, 0.0]]), np.array([0.0])),
                "m1": AffineMap(np.array([[0.0, 1.0]]), np.array([0.0]))},
        routing={"s": {"+": "a1", "-": "a2"},
                 "m1": {"+": "b1", "-": "b2"}},
        target_labels={"ta": "A", "tb": "B", "tc": "C"},
    )

"""Network forward passes and the step/ReLU compilers against oracles."""

import numpy as np
import pytest

from logifold.errors import (
    DegenerateHyperplaneWarning,
    GuardExplosionError,
    RegionExplosionError,
    UnsupportedActivationError,
)
from logifold.graph import AffineMap, evaluate, evaluate_batch, require_valid
from logifold.networks import (
    NetworkSpec,
    compile_relu_net,
    compile_step_net,
    forward_classical,
    forward_classical_batch,
    forward_smooth,
    model_from_dict,
    model_to_dict,
    random_network,
)


def _net(mats, offs, hidden="step", final="indexmax"):
    layers = [AffineMap(np.asarray(m, dtype=float), np.asarray(o, dtype=float))
              for m, o in zip(mats, offs)]
    return NetworkSpec(layers, hidden, final)


def test_forward_classical_lowest_index_tie():
    net = _net([[[1.0, 0.0], [1.0, 0.0]]], [[0.0, 0.0]])
    assert forward_classical(net, [2.0, 1.0]) == 0  # identical logits: lowest index


def test_forward_classical_step_hidden():
    net = _net([[[1.0]], [[1.0], [0.0]]], [[0.0], [0.0, 0.5]])
    # x >= 0: hidden 1 -> logits (1, 0.5) -> 0 ; x < 0: logits (0, 0.5) -> 1
    assert forward_classical(net, [0.3]) == 0
    assert forward_classical(net, [0.0]) == 0  # step(0) = 1
    assert forward_classical(net, [-0.3]) == 1


def test_forward_rejects_smooth_activations():
    net = _net([[[1.0]]], [[0.0]], hidden="sigmoid", final="softmax")
    with pytest.raises(UnsupportedActivationError):
        forward_classical(net, [1.0])


def test_compile_step_tiny_net_matches_forward():
    net = _net([[[1.0]], [[1.0], [0.0]]], [[0.0], [0.0, 0.5]])
    g = compile_step_net(net)
    require_valid(g)
    for x in (-1.0, 0.0, 1.0):
        assert evaluate(g, [x]) == forward_classical(net, [x])


def test_compile_step_boundary_follows_plus_side():
    net = _net([[[1.0]], [[1.0], [0.0]]], [[-2.0], [0.0, 0.5]])
    g = compile_step_net(net)
    assert evaluate(g, [2.0]) == forward_classical(net, [2.0]) == 0


def test_compile_step_random_agreement(rng):
    for trial in range(8):
        n = int(rng.integers(1, 4))
        dims = [n] + [int(rng.integers(1, 5)) for _ in range(int(rng.integers(1, 3)))] \
            + [int(rng.integers(2, 5))]
        net = random_network(rng, dims, "step")
        g = compile_step_net(net)
        require_valid(g)
        X = rng.uniform(-2, 2, size=(300, n))
        for x in X:
            assert evaluate(g, x) == forward_classical(net, x)


def test_compile_step_degenerate_hyperplane_warns():
    # second layer sends the Boolean outcome 1 exactly onto its hyperplane
    net = _net([[[1.0]], [[1.0]], [[1.0], [0.0]]], [[0.0], [-1.0], [0.0, 0.5]])
    with pytest.warns(DegenerateHyperplaneWarning):
        g = compile_step_net(net)
    for x in (-1.0, 0.5):
        assert evaluate(g, [x]) == forward_classical(net, [x])


def test_compile_step_chamber_cap():
    net = random_network(np.random.default_rng(3), [3, 4, 2], "step")
    with pytest.raises(GuardExplosionError):
        compile_step_net(net, chamber_cap=2)


def test_compile_relu_single_layer_is_difference_guard():
    net = _net([[[1.0, 0.0], [0.0, 1.0]]], [[0.0, 0.0]], hidden="relu")
    g = compile_relu_net(net)
    require_valid(g)
    assert g.guards["s"].rows == 1  # one i<j pair
    assert evaluate(g, [2.0, 1.0]) == 0
    assert evaluate(g, [1.0, 2.0]) == 1
    assert evaluate(g, [1.0, 1.0]) == 0  # tie routed to the lower index


def test_compile_relu_random_agreement(rng):
    for trial in range(6):
        n = int(rng.integers(1, 4))
        dims = [n] + [int(rng.integers(1, 5)) for _ in range(int(rng.integers(0, 3)))] \
            + [int(rng.integers(1, 5))]
        net = random_network(rng, dims, "relu")
        g = compile_relu_net(net)
        require_valid(g)
        X = rng.uniform(-2, 2, size=(400, n))
        want = forward_classical_batch(net, X)
        got = evaluate_batch(g, X)
        assert list(got) == list(want)


def test_compile_relu_region_cap():
    net = random_network(np.random.default_rng(11), [2, 4, 4, 3], "relu")
    with pytest.raises(RegionExplosionError):
        compile_relu_net(net, region_cap=3)


def test_forward_smooth_is_a_distribution(rng):
    net = random_network(rng, [2, 8, 3], "sigmoid", "softmax")
    p = forward_smooth(net, rng.normal(size=2))
    assert p.shape == (3,) and abs(p.sum() - 1.0) < 1e-12 and (p > 0).all()


def test_model_dict_roundtrip(rng):
    net = random_network(rng, [2, 3, 4], "relu")
    back = model_from_dict(model_to_dict(net))
    x = rng.normal(size=2)
    assert forward_classical(back, x) == forward_classical(net, x)
    assert back.hidden_activation == "relu"

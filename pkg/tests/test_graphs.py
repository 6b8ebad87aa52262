"""Model/graph containers, forward pass, and serialization."""

import json

import numpy as np
import pytest

from relwalk import (
    GnnModel,
    Graph,
    LayerSpec,
    ModelFormatError,
    ReadoutSpec,
    ShapeError,
    forward,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    load_model,
    model_from_dict,
    model_to_dict,
    modified_adjacency,
    save_graph,
    save_model,
)
from relwalk.datasets import gen_ba2motif


def single_node_model(w=1.0):
    return GnnModel((LayerSpec(np.array([[w]])),), ReadoutSpec(task="graph"))


def test_forward_identity_weight_sums_to_logit():
    graph = Graph(np.array([[1.0]]), np.array([[2.0]]))
    acts = forward(single_node_model(), graph)
    np.testing.assert_allclose(acts.hidden[-1], [[2.0]])
    assert acts.logits == pytest.approx([2.0])


def test_forward_relu_kills_negative():
    graph = Graph(np.array([[1.0]]), np.array([[-3.0]]))
    acts = forward(single_node_model(), graph)
    np.testing.assert_allclose(acts.hidden[-1], [[0.0]])


def test_forward_matches_straight_line_evaluation():
    # independent re-implementation of the two-layer forward chain
    rng = np.random.default_rng(7)
    a = (rng.random((5, 5)) < 0.5).astype(float)
    a = np.maximum(a, a.T)
    np.fill_diagonal(a, 0)
    lam = modified_adjacency(a)
    feats = rng.random((5, 3))
    w1 = rng.normal(size=(3, 4))
    w2 = rng.normal(size=(4, 2))
    model = GnnModel((LayerSpec(w1), LayerSpec(w2)), ReadoutSpec(task="graph"))
    acts = forward(model, Graph(lam, feats))

    h = feats
    for w in (w1, w2):
        z = np.zeros((5, h.shape[1]))
        for v in range(5):
            for u in range(5):
                z[v] += lam[u, v] * h[u]
        h = np.maximum(z @ w, 0)
    expected_logits = h.sum(axis=0)
    np.testing.assert_allclose(acts.logits, expected_logits, atol=1e-12)


def test_forward_deterministic_and_nonnegative():
    rng = np.random.default_rng(0)
    graph = Graph(modified_adjacency(np.ones((4, 4)) - np.eye(4)), rng.random((4, 2)))
    model = GnnModel(
        (LayerSpec(rng.normal(size=(2, 3))), LayerSpec(rng.normal(size=(3, 2)))),
        ReadoutSpec(task="graph"),
    )
    a1 = forward(model, graph)
    a2 = forward(model, graph)
    for h1, h2 in zip(a1.hidden, a2.hidden):
        assert np.array_equal(h1, h2)
    for h in a1.hidden[1:]:
        assert np.all(h >= 0)


def test_preactivation_linear_in_features():
    rng = np.random.default_rng(1)
    lam = modified_adjacency(np.ones((3, 3)) - np.eye(3))
    feats = rng.random((3, 2))
    model = GnnModel((LayerSpec(rng.normal(size=(2, 2))),), ReadoutSpec(task="graph"))
    z1 = forward(model, Graph(lam, feats)).aggregated[0]
    z2 = forward(model, Graph(lam, 2 * feats)).aggregated[0]
    np.testing.assert_allclose(z2, 2 * z1, atol=0)


def test_gin_layer_expands_to_two_steps():
    layer = LayerSpec(np.ones((1, 20)), hidden_weight=np.ones((20, 20)))
    model = GnnModel(
        (layer, LayerSpec(np.ones((20, 20)), hidden_weight=np.ones((20, 20))),
         LayerSpec(np.ones((20, 2)), hidden_weight=np.ones((2, 2)))),
        ReadoutSpec(task="graph"),
    )
    assert model.depth == 3
    assert model.num_steps == 6
    assert [s.uses_adjacency for s in model.steps] == [True, False] * 3


def test_dimension_chain_validation():
    with pytest.raises(ShapeError):
        GnnModel((LayerSpec(np.ones((3, 4))), LayerSpec(np.ones((5, 2)))))


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    model = GnnModel(
        (LayerSpec(rng.normal(size=(1, 20)), hidden_weight=rng.normal(size=(20, 20))),
         LayerSpec(rng.normal(size=(20, 20))),
         LayerSpec(rng.normal(size=(20, 2)))),
        ReadoutSpec(task="graph", head=rng.normal(size=(2, 2))),
    )
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.depth == 3
    for a, b in zip(model.layers, loaded.layers):
        assert np.array_equal(a.weight, b.weight)
    assert np.array_equal(model.readout.head, loaded.readout.head)
    # byte-stable second round trip
    assert model_to_dict(loaded) == model_to_dict(model)


def test_model_from_dict_errors():
    with pytest.raises(ModelFormatError):
        model_from_dict({})
    with pytest.raises(ModelFormatError):
        model_from_dict({"layers": [{"w": "not a matrix"}]})
    # dimension inconsistency surfaces as a format error with the layer index
    bad = {"layers": [{"w": [[1.0] * 4] * 3}, {"w": [[1.0] * 2] * 5}]}
    with pytest.raises(ModelFormatError):
        model_from_dict(bad)


def test_graph_round_trip_single_node(tmp_path):
    g = Graph(np.array([[1.0]]), np.array([[1.0]]), label=1)
    path = tmp_path / "g.json"
    save_graph(g, path)
    loaded = load_graph(path)
    assert np.array_equal(loaded.adjacency, g.adjacency)
    assert np.array_equal(loaded.features, g.features)
    assert loaded.label == 1


def test_edge_list_and_dense_forms_agree():
    a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    g = Graph(modified_adjacency(a), np.ones((3, 1)))
    via_edges = graph_from_dict(graph_to_dict(g))
    via_dense = graph_from_dict(graph_to_dict(g, dense=True))
    assert np.array_equal(via_edges.adjacency, via_dense.adjacency)


def test_normalized_adjacency_round_trips_via_dense():
    a = np.array([[0, 1], [1, 0]], dtype=float)
    g = Graph(modified_adjacency(a, normalize=True), np.ones((2, 1)))
    loaded = graph_from_dict(graph_to_dict(g))
    np.testing.assert_allclose(loaded.adjacency, g.adjacency, atol=0)


def test_graph_validation_errors():
    with pytest.raises(ShapeError):
        Graph(np.ones((2, 3)), np.ones((2, 1)))
    with pytest.raises(ShapeError):
        Graph(np.ones((2, 2)), np.ones((3, 1)))
    with pytest.raises(ShapeError):
        Graph(-np.ones((2, 2)), np.ones((2, 1)))
    with pytest.raises(ModelFormatError):
        graph_from_dict({"num_nodes": 2, "features": [[1], [1]]})


def test_ba2motif_sample_has_25_nodes():
    g = gen_ba2motif(1, seed=0)[0]
    assert g.num_nodes == 25

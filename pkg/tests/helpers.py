"""Shared test utilities: random instance builders and tie-aware top-K
list comparison.

Mathematically tied walks are common (symmetric motifs, activation and
denominator cancellations).  The enumeration oracle and the message
passing searches accumulate their float products in different orders, so
tied relevances can differ in the last few ulps and the lexicographic
tie-break sees them as distinct.  Top-K lists are therefore compared per
value-tie group: values must agree within tolerance position by
position, and the walks inside each group must form the same set (the
group cut at the list boundary is checked by inclusion).
"""

from __future__ import annotations

import numpy as np

from relwalk import (
    GammaSchedule,
    Graph,
    GnnModel,
    LayerSpec,
    ReadoutSpec,
    build_propagation,
    forward,
    modified_adjacency,
    predicted_target,
)


def random_instance(
    m: int = 6,
    dims: tuple[int, ...] = (3, 3, 3, 3),
    seed: int = 0,
    gamma: float = 1.0,
    task: str = "graph",
    target: int | None = None,
    materialize: bool = True,
    edge_prob: float = 0.6,
    schedule: GammaSchedule | None = None,
    positive_weights: bool = False,
):
    """Seeded random GCN + graph + propagation stack for search tests.

    Weights and features are shifted positive-ward so the network is not
    dead and relevances carry both signs.
    """
    rng = np.random.default_rng(seed)
    a = (rng.random((m, m)) < edge_prob).astype(float)
    a = np.maximum(a, a.T)
    np.fill_diagonal(a, 0.0)
    graph = Graph(modified_adjacency(a), rng.random((m, dims[0])) + 0.1, 0)
    def weight(shape):
        w = rng.normal(size=shape) * 0.8 + 0.3
        return np.abs(w) if positive_weights else w

    layers = tuple(
        LayerSpec(weight((dims[i], dims[i + 1]))) for i in range(len(dims) - 1)
    )
    model = GnnModel(layers, ReadoutSpec(task=task))
    acts = forward(model, graph)
    if schedule is None:
        schedule = GammaSchedule.constant(gamma, model.num_steps)
    if target is None:
        target = predicted_target(model, acts) if task == "graph" else 0
    stack = build_propagation(model, graph, acts, schedule, target,
                              materialize=materialize)
    return model, graph, acts, stack


def tie_groups(walks, tol: float, key=lambda w: abs(w.relevance)):
    """Split a descending-sorted walk list into runs of equal-within-tol values."""
    groups = []
    for w in walks:
        if groups and abs(key(w) - key(groups[-1][0])) <= tol:
            groups[-1].append(w)
        else:
            groups.append([w])
    return groups


def assert_topk_equivalent(found, expected, tol=1e-10, absolute=True):
    """found and expected are top-K lists of ScoredWalk, same length.

    Checks per-position value agreement (signed and in magnitude),
    distinctness, and per-tie-group set equality.  The final group is cut
    by the K boundary, so set equality cannot be demanded there; since
    both lists report exact per-walk relevances, the per-position value
    check already certifies every boundary member belongs to the tie.
    """
    assert len(found) == len(expected), (len(found), len(expected))
    key = (lambda w: abs(w.relevance)) if absolute else (lambda w: w.relevance)
    for f, e in zip(found, expected):
        assert abs(key(f) - key(e)) <= tol, (f, e)
        # signed values must agree too, not only magnitudes
        assert abs(f.relevance - e.relevance) <= tol, (f, e)
    assert len({w.sort_key() for w in found}) == len(found), "duplicate walks"
    fg = tie_groups(found, tol, key)
    eg = tie_groups(expected, tol, key)
    assert [len(g) for g in fg] == [len(g) for g in eg]
    for i, (group_f, group_e) in enumerate(zip(fg[:-1], eg[:-1])):
        ids_f = {w.sort_key() for w in group_f}
        ids_e = {w.sort_key() for w in group_e}
        assert ids_f == ids_e, (i, ids_f ^ ids_e)

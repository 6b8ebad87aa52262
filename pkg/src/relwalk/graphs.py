"""Graph and GNN model containers, forward pass, and JSON (de)serialization.

Conventions used throughout the package:

* ``Lambda`` is the modified adjacency matrix (self-loops included).
  ``Lambda[u, v] != 0`` means node ``u`` sends messages to node ``v``;
  for undirected graphs the matrix is symmetric and the distinction is
  irrelevant.
* A GIN-style block with a two-layer MLP combine is expanded into two
  propagation steps: the first mixes over ``Lambda``, the second is an
  intra-node (identity adjacency) step.
* All arrays are float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Dimension mismatch between model, graph, or weights."""


class ModelFormatError(ValueError):
    """Malformed model or graph file."""


@dataclass(frozen=True)
class Graph:
    """A graph instance to be explained.

    adjacency is the modified adjacency Lambda (self-loops included),
    features is the M x N0 initial node feature matrix.
    """

    adjacency: np.ndarray
    features: np.ndarray
    label: int | np.ndarray | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        feats = np.asarray(self.features, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ShapeError(f"adjacency must be square, got {adj.shape}")
        if feats.ndim != 2 or feats.shape[0] != adj.shape[0]:
            raise ShapeError(
                f"features rows ({feats.shape}) must match adjacency dim {adj.shape[0]}"
            )
        if np.any(adj < 0):
            raise ShapeError("adjacency entries must be nonnegative")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "features", feats)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Directed edge list excluding self-loops."""
        rows, cols = np.nonzero(self.adjacency)
        return [(int(i), int(j)) for i, j in zip(rows, cols) if i != j]


def modified_adjacency(a: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Build Lambda = A + I, optionally with symmetric degree normalization."""
    a = np.asarray(a, dtype=float)
    lam = a + np.eye(a.shape[0])
    if normalize:
        deg = lam.sum(axis=1)
        dinv = np.where(deg > 0, deg ** -0.5, 0.0)
        lam = dinv[:, None] * lam * dinv[None, :]
    return lam


@dataclass(frozen=True)
class LayerSpec:
    """One GNN block.

    weight maps the incoming feature dimension to the block output; an
    optional hidden_weight turns the combine step into a two-layer MLP
    (GIN style).  adjacency_mode is "lambda" (mix over the graph) or
    "identity" (node-local transform).
    """

    weight: np.ndarray
    hidden_weight: np.ndarray | None = None
    adjacency_mode: str = "lambda"

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        if w.ndim != 2:
            raise ShapeError(f"weight must be 2-D, got {w.shape}")
        object.__setattr__(self, "weight", w)
        if self.hidden_weight is not None:
            w2 = np.asarray(self.hidden_weight, dtype=float)
            if w2.ndim != 2 or w2.shape[0] != w.shape[1]:
                raise ShapeError(
                    f"hidden_weight {w2.shape} does not chain after weight {w.shape}"
                )
            object.__setattr__(self, "hidden_weight", w2)
        if self.adjacency_mode not in ("lambda", "identity"):
            raise ModelFormatError(f"unknown adjacency_mode {self.adjacency_mode!r}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        w2 = self.hidden_weight
        return self.weight.shape[1] if w2 is None else w2.shape[1]


@dataclass(frozen=True)
class ReadoutSpec:
    """Sum pooling (graph task) or per-node logits (node task).

    head, when present, is a linear map from the final feature dimension
    to class logits.
    """

    task: str = "graph"
    head: np.ndarray | None = None

    def __post_init__(self):
        if self.task not in ("graph", "node"):
            raise ModelFormatError(f"unknown task {self.task!r}")
        if self.head is not None:
            h = np.asarray(self.head, dtype=float)
            if h.ndim != 2:
                raise ShapeError(f"head must be 2-D, got {h.shape}")
            object.__setattr__(self, "head", h)


@dataclass(frozen=True)
class Step:
    """A single propagation step (one weight application)."""

    weight: np.ndarray
    uses_adjacency: bool
    layer_index: int  # which LayerSpec this step came from


@dataclass(frozen=True)
class GnnModel:
    layers: tuple[LayerSpec, ...]
    readout: ReadoutSpec = field(default_factory=ReadoutSpec)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("model needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].in_dim != layers[i - 1].out_dim:
                raise ShapeError(
                    f"layer {i} expects input dim {layers[i].in_dim}, "
                    f"layer {i - 1} outputs {layers[i - 1].out_dim}"
                )
        head = self.readout.head
        if head is not None and head.shape[0] != layers[-1].out_dim:
            raise ShapeError(
                f"head input dim {head.shape[0]} != final feature dim {layers[-1].out_dim}"
            )
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        """Number of LayerSpec blocks."""
        return len(self.layers)

    @property
    def steps(self) -> tuple[Step, ...]:
        """Per-weight propagation steps; GIN MLP blocks expand into two."""
        out = []
        for i, layer in enumerate(self.layers):
            out.append(Step(layer.weight, layer.adjacency_mode == "lambda", i))
            if layer.hidden_weight is not None:
                out.append(Step(layer.hidden_weight, False, i))
        return tuple(out)

    @property
    def num_steps(self) -> int:
        return len(self.steps)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def num_classes(self) -> int:
        head = self.readout.head
        return self.out_dim if head is None else head.shape[1]


@dataclass(frozen=True)
class Activations:
    """Retained forward-pass state for LRP.

    hidden[s] is H after s propagation steps (hidden[0] = input features),
    aggregated[s] is the adjacency-mixed input of step s (before the weight),
    logits is the readout output.
    """

    hidden: tuple[np.ndarray, ...]
    aggregated: tuple[np.ndarray, ...]
    pooled: np.ndarray | None
    logits: np.ndarray


def step_lambda(graph: Graph, step: Step) -> np.ndarray:
    return graph.adjacency if step.uses_adjacency else np.eye(graph.num_nodes)


def forward(model: GnnModel, graph: Graph) -> Activations:
    """Deterministic forward pass retaining every intermediate activation.

    Aggregation sends along edges: node v receives sum_u Lambda[u, v] * H[u].
    """
    if graph.features.shape[1] != model.in_dim:
        raise ShapeError(
            f"graph features dim {graph.features.shape[1]} != model input {model.in_dim}"
        )
    h = graph.features
    hidden = [h]
    aggregated = []
    for s, step in enumerate(model.steps):
        z = step_lambda(graph, step).T @ h if step.uses_adjacency else h
        pre = z @ step.weight
        if pre.shape[1] != step.weight.shape[1]:  # pragma: no cover - defensive
            raise ShapeError(f"step {s} produced shape {pre.shape}")
        h = np.maximum(pre, 0.0)
        aggregated.append(z)
        hidden.append(h)

    head = model.readout.head
    if model.readout.task == "graph":
        pooled = h.sum(axis=0)
        logits = pooled if head is None else pooled @ head
        return Activations(tuple(hidden), tuple(aggregated), pooled, logits)
    logits = h if head is None else h @ head
    return Activations(tuple(hidden), tuple(aggregated), None, logits)


def predicted_target(model: GnnModel, acts: Activations, node: int | None = None) -> int:
    """Predicted class for the graph task, or for one node in the node task."""
    if model.readout.task == "graph":
        return int(np.argmax(acts.logits))
    if node is None:
        raise ValueError("node index required for node-classification models")
    return int(np.argmax(acts.logits[node]))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def _matrix(obj, path: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: not a numeric matrix") from exc
    if arr.ndim != 2:
        raise ModelFormatError(f"{path}: expected a 2-D matrix, got shape {arr.shape}")
    return arr


def model_to_dict(model: GnnModel) -> dict:
    return {
        "layers": [
            {
                "w": layer.weight.tolist(),
                "w2": None if layer.hidden_weight is None else layer.hidden_weight.tolist(),
                "adjacency_mode": layer.adjacency_mode,
            }
            for layer in model.layers
        ],
        "readout": {
            "head": None if model.readout.head is None else model.readout.head.tolist(),
            "task": model.readout.task,
        },
    }


def model_from_dict(data: dict) -> GnnModel:
    if "layers" not in data or not isinstance(data["layers"], list):
        raise ModelFormatError("layers: missing or not a list")
    layers = []
    for i, entry in enumerate(data["layers"]):
        if "w" not in entry:
            raise ModelFormatError(f"layers[{i}].w: missing")
        w = _matrix(entry["w"], f"layers[{i}].w")
        w2 = entry.get("w2")
        layers.append(
            LayerSpec(
                weight=w,
                hidden_weight=None if w2 is None else _matrix(w2, f"layers[{i}].w2"),
                adjacency_mode=entry.get("adjacency_mode", "lambda"),
            )
        )
    ro = data.get("readout", {})
    head = ro.get("head")
    readout = ReadoutSpec(
        task=ro.get("task", "graph"),
        head=None if head is None else _matrix(head, "readout.head"),
    )
    try:
        return GnnModel(tuple(layers), readout)
    except ShapeError as exc:
        raise ModelFormatError(str(exc)) from exc


def save_model(model: GnnModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> GnnModel:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: {exc}") from exc
    return model_from_dict(data)


def graph_to_dict(graph: Graph, dense: bool = False) -> dict:
    label = graph.label
    if isinstance(label, np.ndarray):
        label = label.tolist()
    out: dict = {"num_nodes": graph.num_nodes, "features": graph.features.tolist(), "label": label}
    # The edge-list form can only represent unweighted A + I adjacencies;
    # anything else (e.g. degree-normalized) must round-trip densely.
    a = graph.adjacency
    binary_with_loops = np.all(np.diag(a) == 1.0) and set(np.unique(a)) <= {0.0, 1.0}
    if dense or not binary_with_loops:
        out["dense"] = a.tolist()
    else:
        out["edges"] = [[i, j] for i, j in graph.edges]
    return out


def graph_from_dict(data: dict, normalize: bool = False) -> Graph:
    if "num_nodes" not in data:
        raise ModelFormatError("num_nodes: missing")
    m = int(data["num_nodes"])
    if "dense" in data:
        # dense form stores the modified adjacency Lambda verbatim
        lam = _matrix(data["dense"], "dense")
        if lam.shape != (m, m):
            raise ModelFormatError(f"dense: shape {lam.shape} != ({m}, {m})")
    elif "edges" in data:
        a = np.zeros((m, m))
        for k, edge in enumerate(data["edges"]):
            i, j = int(edge[0]), int(edge[1])
            if not (0 <= i < m and 0 <= j < m):
                raise ModelFormatError(f"edges[{k}]: node index out of range")
            a[i, j] = 1.0
        lam = modified_adjacency(a, normalize=normalize)
    else:
        raise ModelFormatError("graph needs either 'edges' or 'dense'")
    if "features" not in data:
        raise ModelFormatError("features: missing")
    feats = _matrix(data["features"], "features")
    label = data.get("label")
    if isinstance(label, list):
        label = np.asarray(label)
    return Graph(lam, feats, label)


def save_graph(graph: Graph, path, dense: bool = False) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_dict(graph, dense=dense), fh)


def load_graph(path, normalize: bool = False) -> Graph:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: {exc}") from exc
    return graph_from_dict(data, normalize=normalize)

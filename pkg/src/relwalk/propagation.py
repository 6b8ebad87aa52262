"""LRP-gamma relevance propagation tensors and output-layer initialization.

For each propagation step l the relevance transition tensor is

    T[m, n, m', n'] = Lam[m, m'] * H[m, n] * Wup[n, n']
                      / sum_{m'', n''} Lam[m'', m'] * H[m'', n''] * Wup[n'', n']

with Wup = W + gamma * relu(W).  Columns (fixed m', n') sum to one by
construction; columns whose denominator is below a stability threshold
are zeroed so the column sum stays exactly in {0, 1}.

The stack can be materialized (full 4-index tensors) or kept factorized
as {Lam, H, Wup} with entries computed on demand, which cuts the memory
cost from O(L M^2 N^2) to O(M^2 + L N (M + N)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Activations, GnnModel, Graph, ShapeError, step_lambda

EPS_STAB = 1e-9
DEFAULT_TENSOR_BUDGET = 10 ** 8


class ParameterError(ValueError):
    pass


class BudgetError(RuntimeError):
    """A requested computation exceeds the configured size budget."""


@dataclass(frozen=True)
class GammaSchedule:
    """Per-step LRP-gamma values, one per propagation step."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise ParameterError("gamma values must be >= 0")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, gamma: float, depth: int) -> "GammaSchedule":
        return cls((float(gamma),) * depth)

    @classmethod
    def linear_decay(cls, gamma_max: float, depth: int) -> "GammaSchedule":
        """gamma_l = gamma_max * (1 - l / (L - 1)), from gamma_max down to 0."""
        if depth == 1:
            return cls((float(gamma_max),))
        return cls(tuple(gamma_max * (1.0 - l / (depth - 1)) for l in range(depth)))

    def __len__(self) -> int:
        return len(self.values)


def parse_gamma(spec: str, depth: int) -> GammaSchedule:
    """Parse 'const:X' or 'linear:X' into a schedule of the given depth."""
    kind, _, value = spec.partition(":")
    if not value:
        raise ParameterError(f"gamma spec {spec!r} must look like 'const:X' or 'linear:X'")
    gamma = float(value)
    if kind == "const":
        return GammaSchedule.constant(gamma, depth)
    if kind == "linear":
        return GammaSchedule.linear_decay(gamma, depth)
    raise ParameterError(f"unknown gamma schedule kind {kind!r}")


def modified_weight(w: np.ndarray, gamma: float) -> np.ndarray:
    """LRP-gamma weight: W + gamma * relu(W), entry-wise."""
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma}")
    w = np.asarray(w, dtype=float)
    return w + gamma * np.maximum(w, 0.0)


def column_average(t_slice: np.ndarray) -> np.ndarray:
    """Replace every column of an N x N' matrix by the average column."""
    avg = t_slice.mean(axis=1)
    return np.repeat(avg[:, None], t_slice.shape[1], axis=1)


class PropagationStack:
    """Per-step transition tensors plus output-layer relevance.

    Holds the factorized pieces always; materialized tensors only when
    requested and within the entry budget.  Immutable after build.
    """

    def __init__(
        self,
        lambdas: list[np.ndarray],
        hidden: list[np.ndarray],
        wups: list[np.ndarray],
        output_relevance: np.ndarray,
        materialize: bool,
        eps_stab: float = EPS_STAB,
        stabilize: bool = False,
    ):
        self.lambdas = lambdas            # Lam used by step l (adjacency or identity)
        self.hidden = hidden              # H^(0) .. H^(L-1): inputs of each step
        self.wups = wups                  # modified weights per step
        self.output_relevance = output_relevance  # M x N^(L)
        self.eps_stab = eps_stab
        self.stabilize = stabilize
        # Denominators are O(M N) per step; cache them in both modes.
        self.denominators = [
            (lam.T @ h) @ w for lam, h, w in zip(lambdas, hidden, wups)
        ]
        self.materialized: list[np.ndarray] | None = None
        if materialize:
            self.materialized = [self._build_tensor(l) for l in range(self.num_steps)]

    # -- shape info ---------------------------------------------------------

    @property
    def num_steps(self) -> int:
        return len(self.wups)

    @property
    def num_nodes(self) -> int:
        return self.hidden[0].shape[0]

    @property
    def dims(self) -> list[int]:
        """Feature dimension per layer, length num_steps + 1."""
        return [h.shape[1] for h in self.hidden] + [self.wups[-1].shape[1]]

    @property
    def is_factorized(self) -> bool:
        return self.materialized is None

    def tensor_entries(self) -> int:
        m = self.num_nodes
        dims = self.dims
        return sum(m * m * dims[l] * dims[l + 1] for l in range(self.num_steps))

    # -- entry access -------------------------------------------------------

    def _safe_denominator(self, l: int) -> np.ndarray:
        den = self.denominators[l]
        if self.stabilize:
            return den + self.eps_stab * np.where(den >= 0, 1.0, -1.0)
        return np.where(np.abs(den) < self.eps_stab, np.inf, den)

    def _build_tensor(self, l: int) -> np.ndarray:
        lam, h, w = self.lambdas[l], self.hidden[l], self.wups[l]
        num = np.einsum("ma,mn,nb->mnab", lam, h, w)
        return num / self._safe_denominator(l)[None, None, :, :]

    def tensor(self, l: int) -> np.ndarray:
        """Full 4-index tensor T^(l), shape (M, N_l, M, N_{l+1})."""
        if self.materialized is not None:
            return self.materialized[l]
        return self._build_tensor(l)

    def entry(self, l: int, m: int, n: int, mp: int, np_: int) -> float:
        """Single on-demand entry T^(l)[m, n, m', n']."""
        if self.materialized is not None:
            return float(self.materialized[l][m, n, mp, np_])
        den = self.denominators[l][mp, np_]
        if not self.stabilize and abs(den) < self.eps_stab:
            return 0.0
        if self.stabilize:
            den = den + self.eps_stab * (1.0 if den >= 0 else -1.0)
        return float(self.lambdas[l][m, mp] * self.hidden[l][m, n] * self.wups[l][n, np_] / den)

    def slice(self, l: int, m: int, mp: int) -> np.ndarray:
        """T^(l)[m, :, m', :] as an N_l x N_{l+1} matrix."""
        if self.materialized is not None:
            return self.materialized[l][m, :, mp, :]
        return (
            self.lambdas[l][m, mp]
            * self.hidden[l][m][:, None]
            * self.wups[l]
            / self._safe_denominator(l)[mp][None, :]
        )

    def dump_slice_csv(self, l: int, m: int, mp: int, path) -> None:
        np.savetxt(path, self.slice(l, m, mp), delimiter=",")


def build_propagation(
    model: GnnModel,
    graph: Graph,
    acts: Activations,
    schedule: GammaSchedule,
    target: int,
    materialize: bool = True,
    eps_stab: float = EPS_STAB,
    stabilize: bool = False,
    tensor_budget: int = DEFAULT_TENSOR_BUDGET,
    target_class: int | None = None,
) -> PropagationStack:
    """Assemble the propagation stack for one explanation target.

    target is a class index (graph task) or a node index (node task).
    materialize=True is silently downgraded to factorized mode when the
    total tensor entry count exceeds tensor_budget.
    """
    steps = model.steps
    if len(acts.hidden) != len(steps) + 1:
        raise ShapeError("activations do not match the model depth")
    if acts.hidden[0].shape != graph.features.shape:
        raise ShapeError("activations were computed on a different graph")
    if len(schedule) != len(steps):
        raise ParameterError(
            f"gamma schedule length {len(schedule)} != propagation depth {len(steps)}"
        )
    lambdas = [step_lambda(graph, s) for s in steps]
    hidden = [acts.hidden[l] for l in range(len(steps))]
    wups = [modified_weight(s.weight, g) for s, g in zip(steps, schedule.values)]
    out_rel = init_output_relevance(model, acts, target, target_class=target_class)

    stack = PropagationStack(
        lambdas, hidden, wups, out_rel,
        materialize=False, eps_stab=eps_stab, stabilize=stabilize,
    )
    if materialize and stack.tensor_entries() <= tensor_budget:
        stack.materialized = [stack._build_tensor(l) for l in range(stack.num_steps)]
    return stack


def init_output_relevance(
    model: GnnModel, acts: Activations, target: int, target_class: int | None = None
) -> np.ndarray:
    """Relevance at the output layer, as an M x N^(L) matrix.

    Graph task: the target class channel of H^(L) (LRP-0 through the
    linear head when present).  Node task: only the target node's row is
    nonzero; target_class picks the explained class (default: the
    predicted class at the target node).
    """
    h_last = acts.hidden[-1]
    head = model.readout.head
    m, n_last = h_last.shape
    if model.readout.task == "graph":
        if not 0 <= target < model.num_classes:
            raise ParameterError(f"target class {target} out of range")
        if head is None:
            rel = np.zeros_like(h_last)
            rel[:, target] = h_last[:, target]
            return rel
        return h_last * head[:, target][None, :]
    # node task: target is a node index
    if not 0 <= target < m:
        raise ParameterError(f"target node {target} out of range")
    rel = np.zeros_like(h_last)
    if head is None:
        rel[target, :] = h_last[target, :]
    else:
        cls = int(np.argmax(acts.logits[target])) if target_class is None else int(target_class)
        if not 0 <= cls < head.shape[1]:
            raise ParameterError(f"target class {cls} out of range")
        rel[target, :] = h_last[target, :] * head[:, cls]
    return rel

"""Approximate top-K node-level walk search by averaging (AMP-ave).

The node-level argmax marginalizes over neurons, which breaks the
max-product decomposition; the averaging approximation picks, at each
layer, the node maximizing the neuron-marginalized step objective.  No
absolute values are applied to the transition matrices, only to the
output-layer initialization.  Reported relevances are always exact
node-level values of the returned walks.

The step objective factorizes over {Lambda, H, Wup} (the transition
tensors never need to be materialized), which is what makes the search
feasible at large graph sizes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .oracle import ScoredWalk, node_walk_relevance
from .propagation import PropagationStack


@dataclass(frozen=True)
class NodeMessageTable:
    """Node-level messages, argmax steps, and per-step objective matrices.

    mu[l] has shape (M, N_l); step[l] maps each node at layer l to its
    chosen node at layer l + 1; objective[l][m, m'] is the
    neuron-marginalized step value from node m at layer l to m' at l + 1.
    greedy_suffix[l][m] is the exact relevance vector of the greedy
    argmax-step completion starting at node m in layer l, so
    greedy_suffix[0][m].sum() is the exact relevance of the walk
    backtracked from m.
    """

    mu: tuple[np.ndarray, ...]
    step: tuple[np.ndarray, ...]
    objective: tuple[np.ndarray, ...]
    greedy_suffix: tuple[np.ndarray, ...]


def _step_pieces(stack: PropagationStack, l: int):
    """num = H W_up and the zero-masked inverse denominator for step l."""
    num = stack.hidden[l] @ stack.wups[l]
    den = stack.denominators[l]
    inv = np.where(np.abs(den) < stack.eps_stab, 0.0, 1.0 / np.where(den == 0, 1.0, den))
    if stack.stabilize:
        stab = den + stack.eps_stab * np.where(den >= 0, 1.0, -1.0)
        inv = 1.0 / stab
    return num, inv


def step_objective_matrix(stack: PropagationStack, l: int, mu_next: np.ndarray) -> np.ndarray:
    """All-pairs step objective sum_{n_l, n_{l+1}} T^(l)[m,:,m',:] mu_next[m'].

    Computed from the factorized pieces; identical to contracting the
    materialized tensor.
    """
    num, inv = _step_pieces(stack, l)
    q = mu_next * inv  # (M, N_{l+1})
    return stack.lambdas[l] * (num @ q.T)


def step_objective(stack: PropagationStack, l: int, m_prev: int, m_next: int,
                   mu_next: np.ndarray) -> float:
    """Single-pair step objective; mu_next is the message vector at m_next."""
    num, inv = _step_pieces(stack, l)
    return float(stack.lambdas[l][m_prev, m_next] * num[m_prev] @ (mu_next * inv[m_next]))


def build_node_message_table(stack: PropagationStack) -> NodeMessageTable:
    m = stack.num_nodes
    mu = [None] * (stack.num_steps + 1)
    step = [None] * stack.num_steps
    objective = [None] * stack.num_steps
    mu[-1] = np.abs(stack.output_relevance)
    for l in range(stack.num_steps - 1, -1, -1):
        obj = step_objective_matrix(stack, l, mu[l + 1])
        objective[l] = obj
        # first maximizer = smallest node index
        step[l] = np.argmax(obj, axis=1)
        num, inv = _step_pieces(stack, l)
        chosen = step[l]
        q = mu[l + 1] * inv                         # (M, N_{l+1})
        wq = q @ stack.wups[l].T                    # (M, N_l)
        lam_sel = stack.lambdas[l][np.arange(m), chosen]
        mu[l] = lam_sel[:, None] * stack.hidden[l] * wq[chosen]
    suffix = [None] * (stack.num_steps + 1)
    suffix[-1] = stack.output_relevance
    for l in range(stack.num_steps - 1, -1, -1):
        chosen = step[l]
        den = stack._safe_denominator(l)
        v = (suffix[l + 1] / den) @ stack.wups[l].T      # (M, N_l)
        lam_sel = stack.lambdas[l][np.arange(m), chosen]
        suffix[l] = lam_sel[:, None] * stack.hidden[l] * v[chosen]
    return NodeMessageTable(tuple(mu), tuple(step), tuple(objective), tuple(suffix))


def _backtrack(table: NodeMessageTable, layer: int, node: int) -> list[int]:
    nodes = [node]
    for l in range(layer, len(table.step)):
        node = int(table.step[l][node])
        nodes.append(node)
    return nodes


def amp_ave_basic(stack: PropagationStack) -> ScoredWalk | None:
    """Approximately most relevant node-level walk (exact reported relevance)."""
    table = build_node_message_table(stack)
    start_scores = table.mu[0].sum(axis=1)
    if not np.any(start_scores != 0):
        return None
    m0 = int(np.argmax(start_scores))
    nodes = tuple(_backtrack(table, 0, m0))
    return ScoredWalk(nodes, node_walk_relevance(stack, nodes))


@dataclass
class NodeSubset:
    prefix: tuple[int, ...]
    excluded: frozenset[int]
    best: tuple[int, ...] | None = None
    best_relevance: float = 0.0


def _constrained_best(stack: PropagationStack, table: NodeMessageTable,
                      subset: NodeSubset) -> None:
    """Representative walk of a subset: for every allowed node at the free
    position, complete the walk greedily along the message-table argmax
    steps, score each completion exactly, and keep the best.

    Scoring all free-position candidates (rather than only the single
    surrogate-argmax one) keeps the approximate search from burying
    high-relevance walks behind weak representatives.
    """
    i = len(subset.prefix)
    suffix = table.greedy_suffix[i]                       # (M, N_i)
    if i == 0:
        scores = suffix.sum(axis=1)
    else:
        # fold the prefix chain into a single row vector, then score all
        # candidates at the free position in one vectorized step
        row = np.ones(stack.dims[0])
        for l in range(i - 1):
            row = row @ stack.slice(l, subset.prefix[l], subset.prefix[l + 1])
        p = subset.prefix[-1]
        contrib = (row * stack.hidden[i - 1][p]) @ stack.wups[i - 1]  # (N_i,)
        den = stack._safe_denominator(i - 1)                          # (M, N_i)
        scores = stack.lambdas[i - 1][p] * ((suffix / den) @ contrib)
    if subset.excluded:
        scores = scores.copy()
        scores[list(subset.excluded)] = -np.inf
    j = int(np.argmax(scores))
    if scores[j] == -np.inf:
        subset.best = None
        subset.best_relevance = 0.0
        return
    nodes = tuple(subset.prefix) + tuple(_backtrack(table, i, j))
    subset.best = nodes
    subset.best_relevance = node_walk_relevance(stack, nodes)


@dataclass
class NodeTopKResult:
    positive: list[ScoredWalk]
    extracted: list[ScoredWalk]            # top-K-tilde in extraction order
    k_tilde: int
    exhausted: bool
    subsets_created: int

    @property
    def negatives_skipped(self) -> int:
        return self.k_tilde - len(self.positive)

    def summary(self) -> dict:
        return {
            "k": len(self.positive),
            "k_tilde": self.k_tilde,
            "negatives_skipped": self.negatives_skipped,
            "subsets_created": self.subsets_created,
            "exhausted": self.exhausted,
        }


def amp_ave_topk(
    stack: PropagationStack,
    k: int,
    max_k_tilde: int | None = None,
) -> NodeTopKResult:
    """Top-k positive node-level walks via splitting search.

    Subset bests are ranked by their exact recomputed relevance; K-tilde
    grows one extraction at a time until k positive walks are collected
    or the space is exhausted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    table = build_node_message_table(stack)
    m = stack.num_nodes
    space_size = m ** (stack.num_steps + 1)

    extracted: list[ScoredWalk] = []
    positive: list[ScoredWalk] = []
    subsets_created = 0
    heap: list = []

    root = NodeSubset(prefix=(), excluded=frozenset())
    _constrained_best(stack, table, root)
    if root.best is not None:
        heapq.heappush(heap, (-root.best_relevance, root.best, root))
        subsets_created += 1

    while heap and len(positive) < k and len(extracted) < space_size:
        if max_k_tilde is not None and len(extracted) >= max_k_tilde:
            break
        _, _, subset = heapq.heappop(heap)
        found = subset.best
        scored = ScoredWalk(found, subset.best_relevance)
        extracted.append(scored)
        if scored.relevance > 0:
            positive.append(scored)
        i = len(subset.prefix)
        for j in range(i, len(found)):
            excluded = subset.excluded | {found[j]} if j == i else frozenset({found[j]})
            child = NodeSubset(prefix=tuple(found[:j]), excluded=excluded)
            _constrained_best(stack, table, child)
            subsets_created += 1
            if child.best is not None:
                heapq.heappush(heap, (-child.best_relevance, child.best, child))

    return NodeTopKResult(
        positive=positive,
        extracted=extracted,
        k_tilde=len(extracted),
        exhausted=len(positive) < k,
        subsets_created=subsets_created,
    )


def walks_to_edge_scores(walks: list[ScoredWalk]) -> dict[tuple[int, int], float]:
    """Edge score = highest relevance among walks traversing the edge."""
    if not walks:
        raise ValueError("walks must be nonempty")
    scores: dict[tuple[int, int], float] = {}
    for w in walks:
        for a, b in zip(w.nodes, w.nodes[1:]):
            edge = (a, b)
            if edge not in scores or w.relevance > scores[edge]:
                scores[edge] = w.relevance
    return scores

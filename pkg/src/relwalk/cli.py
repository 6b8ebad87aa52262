"""Command-line interface.

Subcommands: gen (synthetic data), train, explain (walk search), eval
(metrics), bench (timings).  Exit codes: 0 success, 2 validation error,
3 budget refusal.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ampave import amp_ave_basic, amp_ave_topk, walks_to_edge_scores
from .datasets import (
    InfectionScenario,
    gen_ba2motif,
    gen_infection,
    motif_edges,
    oracle_estimate,
)
from .empneu import emp_neu_basic, emp_neu_topk
from .graphs import (
    Graph,
    ModelFormatError,
    ShapeError,
    forward,
    load_graph,
    load_model,
    predicted_target,
    save_graph,
    save_model,
)
from .metrics import (
    BenchRow,
    bench_rows_to_csv,
    column_similarity_histogram,
    edge_recall,
    infection_chain_recall,
    precision_recall,
    time_callable,
)
from .oracle import (
    DEFAULT_ENUM_BUDGET,
    exhaustive_topk_neuron,
    exhaustive_topk_node,
)
from .propagation import (
    BudgetError,
    DEFAULT_TENSOR_BUDGET,
    ParameterError,
    build_propagation,
    parse_gamma,
)
from .training import TrainConfig, accuracy, init_model, train

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gamma", default="linear:3",
                        help="LRP-gamma schedule, 'const:X' or 'linear:X'")
    parser.add_argument("--low-mem", action="store_true",
                        help="force factorized transition evaluation")
    parser.add_argument("--budget", type=int, default=None,
                        help="entry/enumeration budget override")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="relwalk",
                                  description="Relevant walk search for GNN predictions")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate synthetic datasets")
    gen_sub = gen.add_subparsers(dest="dataset", required=True)

    ba = gen_sub.add_parser("ba2motif")
    ba.add_argument("--n", type=int, default=100)
    ba.add_argument("--base-size", type=int, default=20)
    ba.add_argument("--features", choices=("ones", "degree"), default="ones")
    ba.add_argument("--normalize", action="store_true")
    ba.add_argument("--out", required=True, help="output directory")
    _add_common(ba)

    inf = gen_sub.add_parser("infection")
    inf.add_argument("--m", type=int, default=200)
    inf.add_argument("--steps", type=int, default=3)
    inf.add_argument("--lam", "--lambda", dest="lam", type=float, default=0.6)
    inf.add_argument("--carrier-frac", type=float, default=0.02)
    inf.add_argument("--mean-out-degree", type=float, default=4.0)
    inf.add_argument("--out", required=True, help="output scenario file")
    _add_common(inf)

    tr = sub.add_parser("train", help="train a model on a generated dataset")
    tr.add_argument("--data", required=True, help="dataset directory or scenario file")
    tr.add_argument("--arch", choices=("gcn", "gin"), default="gcn")
    tr.add_argument("--layers", type=int, default=3)
    tr.add_argument("--hidden", type=int, default=8)
    tr.add_argument("--epochs", type=int, default=500)
    tr.add_argument("--lr", type=float, default=0.05)
    tr.add_argument("--lr-schedule", choices=("decay", "constant"), default="decay")
    tr.add_argument("--normalize", action="store_true",
                    help="degree-normalize the adjacency before training")
    tr.add_argument("--out", required=True, help="output model file")
    _add_common(tr)

    ex = sub.add_parser("explain", help="search relevant walks for one prediction")
    ex.add_argument("--model", required=True)
    ex.add_argument("--graph", required=True)
    ex.add_argument("--method", choices=("emp-neu", "amp-ave"), default="amp-ave")
    ex.add_argument("--topk", type=int, default=10)
    ex.add_argument("--target", type=int, default=None,
                    help="class index (graph task) or node index (node task); "
                         "default: predicted class")
    ex.add_argument("--report-abs", action="store_true",
                    help="emit the full top-K-tilde absolute list (emp-neu)")
    ex.add_argument("--out", default=None, help="output file (default stdout)")
    _add_common(ex)

    ev = sub.add_parser("eval", help="evaluation metrics, CSV plot data")
    ev_sub = ev.add_subparsers(dest="metric", required=True)

    pr = ev_sub.add_parser("pr")
    pr.add_argument("--model", required=True)
    pr.add_argument("--graph", required=True)
    pr.add_argument("--ks", default="1,5,10,20")
    pr.add_argument("--kstars", default="10")
    pr.add_argument("--target", type=int, default=None)
    _add_common(pr)

    cs = ev_sub.add_parser("colsim")
    cs.add_argument("--model", required=True)
    cs.add_argument("--graph", required=True)
    cs.add_argument("--bins", type=int, default=20)
    cs.add_argument("--target", type=int, default=None)
    _add_common(cs)

    ir = ev_sub.add_parser("infection-recall")
    ir.add_argument("--model", required=True)
    ir.add_argument("--scenario", required=True)
    ir.add_argument("--topk", type=int, default=5)
    ir.add_argument("--max-targets", type=int, default=None)
    _add_common(ir)

    er = ev_sub.add_parser("edge-recall")
    er.add_argument("--model", required=True)
    er.add_argument("--graph", required=True)
    er.add_argument("--base-size", type=int, default=20)
    er.add_argument("--topk", type=int, default=20)
    er.add_argument("--target", type=int, default=None)
    _add_common(er)

    posr = ev_sub.add_parser("positive-ratio")
    posr.add_argument("--model", required=True)
    posr.add_argument("--graph", required=True)
    posr.add_argument("--method", choices=("emp-neu", "amp-ave"), default="emp-neu")
    posr.add_argument("--topk", type=int, default=20)
    posr.add_argument("--target", type=int, default=None)
    _add_common(posr)

    be = sub.add_parser("bench", help="timing grid, CSV output")
    be.add_argument("--methods", default="amp-ave,exhaustive-node")
    be.add_argument("--m-values", default="25")
    be.add_argument("--l-values", default="3")
    be.add_argument("--topk", type=int, default=1)
    be.add_argument("--repetitions", type=int, default=5)
    be.add_argument("--hidden", type=int, default=8)
    be.add_argument("--out", default=None)
    _add_common(be)

    return top


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _budgets(args) -> tuple[int, int]:
    tensor = args.budget if args.budget is not None else DEFAULT_TENSOR_BUDGET
    enum = args.budget if args.budget is not None else DEFAULT_ENUM_BUDGET
    return tensor, enum


def _build_stack(args, model, graph, target=None):
    acts = forward(model, graph)
    if target is None:
        if model.readout.task == "node":
            raise ParameterError("--target (node index) is required for node-task models")
        target = predicted_target(model, acts)
    schedule = parse_gamma(args.gamma, model.num_steps)
    tensor_budget, _ = _budgets(args)
    return build_propagation(
        model, graph, acts, schedule, target,
        materialize=not args.low_mem, tensor_budget=tensor_budget,
    )


def _emit(lines: list[str], out_path: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------


def _cmd_gen(args) -> int:
    if args.dataset == "ba2motif":
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        graphs = gen_ba2motif(args.n, base_size=args.base_size, seed=args.seed,
                              normalize=args.normalize, feature_mode=args.features)
        for i, g in enumerate(graphs):
            save_graph(g, out / f"graph_{i:04d}.json")
        manifest = {
            "dataset": "ba2motif",
            "n": args.n,
            "base_size": args.base_size,
            "seed": args.seed,
            "normalize": args.normalize,
            "features": args.features,
            "files": [f"graph_{i:04d}.json" for i in range(args.n)],
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
        print(f"wrote {args.n} graphs to {out}")
        return EXIT_OK
    scenario = gen_infection(
        args.m, args.steps, args.lam, carrier_frac=args.carrier_frac,
        mean_out_degree=args.mean_out_degree, seed=args.seed,
    )
    scenario.save(args.out)
    print(f"wrote scenario ({int(scenario.labels.sum())} infected of {args.m}) to {args.out}")
    return EXIT_OK


def _load_dataset(path: str) -> tuple[list[Graph], str]:
    p = Path(path)
    if p.is_dir():
        manifest = json.loads((p / "manifest.json").read_text())
        return [load_graph(p / f) for f in manifest["files"]], "graph"
    scenario = InfectionScenario.load(p)
    return [scenario.graph], "node"


def _cmd_train(args) -> int:
    graphs, task = _load_dataset(args.data)
    if args.normalize:
        from .graphs import modified_adjacency
        graphs = [
            Graph(modified_adjacency(g.adjacency - np.eye(g.num_nodes), normalize=True),
                  g.features, g.label)
            for g in graphs
        ]
    in_dim = graphs[0].features.shape[1]
    dims = [in_dim] + [args.hidden] * args.layers
    model = init_model(dims, 2, task=task, seed=args.seed, gin=args.arch == "gin")
    config = TrainConfig(epochs=args.epochs, lr=args.lr,
                         lr_schedule=args.lr_schedule, seed=args.seed)
    result = train(model, graphs, config)
    save_model(result.model, args.out)
    print(f"final loss {result.final_loss:.4f}, accuracy {result.final_accuracy:.3f}")
    return EXIT_OK


def _run_search(args, stack, method: str, k: int):
    if method == "emp-neu":
        return emp_neu_topk(stack, k)
    # the enumeration budget also caps extractions, so targets with fewer
    # than k positive walks yield a partial result instead of sweeping the
    # whole walk space
    _, enum_budget = _budgets(args)
    return amp_ave_topk(stack, k, max_k_tilde=enum_budget)


def _cmd_explain(args) -> int:
    model = load_model(args.model)
    graph = load_graph(args.graph)
    stack = _build_stack(args, model, graph, args.target)
    result = _run_search(args, stack, args.method, args.topk)
    walks = result.absolute if (args.report_abs and args.method == "emp-neu") \
        else result.positive
    lines = [json.dumps(w.to_record()) for w in walks]
    lines.append(json.dumps({"summary": result.summary()}))
    _emit(lines, args.out)
    return EXIT_OK


def _cmd_eval(args) -> int:
    if args.metric == "infection-recall":
        return _eval_infection_recall(args)
    model = load_model(args.model)
    graph = load_graph(args.graph)
    stack = _build_stack(args, model, graph, args.target)

    if args.metric == "pr":
        ks = [int(x) for x in args.ks.split(",")]
        kstars = [int(x) for x in args.kstars.split(",")]
        _, enum_budget = _budgets(args)
        oracle = exhaustive_topk_node(stack, max(max(ks), max(kstars)) + 64,
                                      budget=enum_budget)
        approx = amp_ave_topk(stack, max(ks), max_k_tilde=enum_budget).positive
        print("K,K_star,precision,recall")
        for p in precision_recall(approx, oracle, ks, kstars):
            print(f"{p.k},{p.k_star},{p.precision},{p.recall}")
        return EXIT_OK

    if args.metric == "colsim":
        hist = column_similarity_histogram(stack)
        counts, edges = hist.histogram(args.bins)
        print("bin_left,bin_right,count")
        for c, lo, hi in zip(counts, edges, edges[1:]):
            print(f"{lo},{hi},{c}")
        print(f"# mean={hist.mean} zero_columns={hist.zero_columns} "
              f"degenerate_slices={hist.degenerate_slices}")
        return EXIT_OK

    if args.metric == "edge-recall":
        _, enum_budget = _budgets(args)
        walks = amp_ave_topk(stack, args.topk, max_k_tilde=enum_budget).positive
        if not walks:
            raise ParameterError("no positive walks found; cannot score edges")
        scores = walks_to_edge_scores(walks)
        true_edges = motif_edges(graph, base_size=args.base_size)
        print("cutoff,recall")
        for cutoff in range(1, len(scores) + 1):
            print(f"{cutoff},{edge_recall(scores, true_edges, cutoff)}")
        return EXIT_OK

    # positive-ratio
    result = _run_search(args, stack, args.method, args.topk)
    summary = result.summary()
    summary["positive_ratio"] = (
        summary["k"] / summary["k_tilde"] if summary["k_tilde"] else 0.0
    )
    print(json.dumps(summary))
    return EXIT_OK


def _eval_infection_recall(args) -> int:
    model = load_model(args.model)
    scenario = InfectionScenario.load(args.scenario)
    graph = scenario.graph
    acts = forward(model, graph)
    schedule = parse_gamma(args.gamma, model.num_steps)
    targets = [t for t in sorted(scenario.chains) if len(scenario.chains[t]) > 1]
    if args.max_targets:
        targets = targets[: args.max_targets]
    _, enum_budget = _budgets(args)
    walks_per_target = {}
    for t in targets:
        stack = build_propagation(model, graph, acts, schedule, t,
                                  materialize=not args.low_mem, target_class=1)
        walks_per_target[t] = amp_ave_topk(stack, args.topk,
                                           max_k_tilde=enum_budget).positive
    recall = infection_chain_recall(
        walks_per_target, scenario.chains, args.topk, model.num_steps + 1
    )
    print(json.dumps({
        "recall_padded": recall.padded,
        "recall_subsequence": recall.subsequence,
        "targets": recall.targets,
        "k": args.topk,
    }))
    return EXIT_OK


def _cmd_bench(args) -> int:
    methods = args.methods.split(",")
    rng_seed = args.seed
    rows = []
    _, enum_budget = _budgets(args)
    for m in (int(x) for x in args.m_values.split(",")):
        for l in (int(x) for x in args.l_values.split(",")):
            rng = np.random.default_rng(rng_seed)
            a = (rng.random((m, m)) < min(4.0 / max(m - 1, 1), 1.0)).astype(float)
            a = np.maximum(a, a.T)
            from .graphs import modified_adjacency
            graph = Graph(modified_adjacency(a), rng.random((m, args.hidden)) + 0.1)
            model = init_model([args.hidden] * (l + 1), 2, seed=rng_seed)
            acts = forward(model, graph)
            schedule = parse_gamma(args.gamma, model.num_steps)
            stack = build_propagation(model, graph, acts, schedule, 0,
                                      materialize=not args.low_mem)
            for method in methods:
                estimated = False
                if method == "amp-ave":
                    fn = lambda: amp_ave_topk(stack, args.topk,
                                              max_k_tilde=enum_budget)
                elif method == "emp-neu":
                    fn = lambda: emp_neu_topk(stack, args.topk)
                elif method == "exhaustive-node":
                    total = m ** (l + 1)
                    if total > enum_budget:
                        # time a partial enumeration on a budget-sized
                        # sub-problem and scale by the walk-count ratio
                        sub_l = l
                        while m ** (sub_l + 1) > enum_budget and sub_l > 1:
                            sub_l -= 1
                        sub_model = init_model([args.hidden] * (sub_l + 1), 2, seed=rng_seed)
                        sub_acts = forward(sub_model, graph)
                        sub_sched = parse_gamma(args.gamma, sub_model.num_steps)
                        sub_stack = build_propagation(sub_model, graph, sub_acts,
                                                      sub_sched, 0)
                        scale = total / m ** (sub_l + 1)
                        fn = lambda: exhaustive_topk_node(sub_stack, args.topk)
                        estimated = True
                    else:
                        fn = lambda: exhaustive_topk_node(stack, args.topk)
                elif method == "exhaustive-neuron":
                    fn = lambda: exhaustive_topk_neuron(stack, args.topk)
                else:
                    raise ParameterError(f"unknown bench method {method!r}")
                median, var = time_callable(fn, args.repetitions)
                if estimated:
                    median *= scale
                rows.append(BenchRow(method, m, l, args.topk, median,
                                     args.repetitions, var, estimated))
    csv_text = bench_rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "gen": _cmd_gen,
        "train": _cmd_train,
        "explain": _cmd_explain,
        "eval": _cmd_eval,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except BudgetError as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ParameterError, ShapeError, ModelFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

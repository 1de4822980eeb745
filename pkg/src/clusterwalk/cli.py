"""Command-line entry points.

Subcommands: build-graph, cluster, sweep-density, sweep-k, simulate.
Exit codes: 0 success, 1 I/O error, 2 input error, 3 configuration error
(including rejected remote credentials).  All commands are deterministic
given their flags and seeds, and outputs are written atomically.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .exceptions import ConfigurationError, InputError, ParseError, RunAborted
from .graph import DEFAULT_BETA, DEFAULT_TAU, build_graph
from .metrics import nmi, rand_index, NMI_NORMALIZATIONS
from .oracles import EmbeddingOracle, EnsembleNoisyOracle, ExactOracle
from .remote import RemoteOracle
from .synth import PlantedSpec, generate_dataset, graph_noise_report
from .traversal import MERGE_STRATEGIES, TraversalConfig, run_clustering

ORACLE_KINDS = ("exact", "noisy", "embedding", "remote")


def _oracle_factory(args, records):
    """Return a seed -> oracle callable for the requested oracle kind."""
    kind = args.oracle
    if kind == "exact":
        labels = io.label_map(_require_records(records, "exact"))
        return lambda seed: ExactOracle(labels)
    if kind == "noisy":
        labels = io.label_map(_require_records(records, "noisy"))
        if args.p is None:
            raise InputError("--p is required for the noisy oracle")
        return lambda seed: EnsembleNoisyOracle(labels, args.p, seed)
    if kind == "embedding":
        recs = _require_records(records, "embedding")
        if args.threshold is None:
            raise InputError("--threshold is required for the embedding oracle")
        vectors = {r.id: r.vector for r in recs}
        beta = getattr(args, "beta", DEFAULT_BETA)
        return lambda seed: EmbeddingOracle(vectors, args.threshold, beta)
    if kind == "remote":
        if not args.endpoint or not args.model:
            raise InputError("--endpoint and --model are required for the remote oracle")
        if not args.aspect:
            raise InputError("--aspect is required for the remote oracle")
        return lambda seed: RemoteOracle(args.endpoint, args.model, cache_path=args.cache)
    raise InputError(f"unknown oracle kind {kind!r}")


def _require_records(records, kind):
    if records is None:
        raise InputError(f"--embeddings is required for the {kind} oracle")
    return records


def _traversal_config(args, seed):
    return TraversalConfig(
        k=args.k,
        num_candidates=args.num_candidates,
        unknown_retries=args.unknown_retries,
        seed=seed,
        aspect=args.aspect,
        log_steps=getattr(args, "log_steps", False),
        merge_strategy=args.merge_strategy,
    )


def _config_snapshot(graph, config, oracle):
    return {
        "tau": graph.tau,
        "beta": graph.beta,
        "k": config.k,
        "oracle": oracle.descriptor,
        "seed": config.seed,
        "num_candidates": config.num_candidates,
        "unknown_retries": config.unknown_retries,
        "aspect": config.aspect,
        "merge_strategy": config.merge_strategy,
    }


def _score(partition, labels, norm):
    return {
        "nmi": nmi(partition, labels, norm),
        "ri": rand_index(partition, labels),
        "nmi_normalization": norm,
    }


# ---------------------------------------------------------------------------
# Subcommands


def cmd_build_graph(args) -> int:
    records = io.load_embeddings(args.embeddings)
    graph = build_graph(records, beta=args.beta, tau=args.tau)
    io.save_graph(graph, args.out)
    print(f"nodes={graph.node_count} edges={graph.edge_count} density={graph.density():.6f}")
    return 0


def cmd_cluster(args) -> int:
    graph = io.load_graph(args.graph)
    records = io.load_embeddings(args.embeddings) if args.embeddings else None
    make_oracle = _oracle_factory(args, records)
    oracle = make_oracle(args.seed)
    config = _traversal_config(args, args.seed)
    on_step = None
    if args.log_steps:
        on_step = lambda record: print(json.dumps(record, sort_keys=True), file=sys.stderr)
    try:
        clusters, trace = run_clustering(graph, oracle, config, on_step)
    except RunAborted as exc:
        if args.out:
            io._atomic_write_text(
                str(args.out) + ".partial.json",
                io._dump_document({"trace": io._trace_to_doc(exc.trace)}),
            )
        raise
    partition = [c.members for c in clusters]
    metrics = None
    if records is not None:
        labels = io.label_map(records, require=False)
        if labels and all(node in labels for cluster in partition for node in cluster):
            metrics = _score(partition, labels, args.nmi_norm)
    result = io.RunResult(
        partition=partition,
        trace=trace,
        config=_config_snapshot(graph, config, oracle),
        metrics=metrics,
    )
    if args.out:
        io.save_result(result, args.out)
    t = trace
    print(
        f"clusters={len(partition)} membership_assessments={t.membership_assessments} "
        f"merge_assessments={t.merge_assessments} accepts={t.accepts} rejects={t.rejects} "
        f"unknowns={t.unknowns} edges_removed={t.edges_removed} merges_performed={t.merges_performed}"
    )
    if metrics is not None:
        print(f"NMI {metrics['nmi']:.4f}, RI {metrics['ri']:.4f}")
    return 0


def run_density_sweep(records, taus, make_oracle, args, seeds) -> io.SweepResult:
    """One row per tau: build the graph, run per seed, average the scores."""
    labels = io.label_map(records, require=False)
    sweep = io.SweepResult(parameter="tau")
    for tau in taus:
        try:
            graph = build_graph(records, beta=args.beta, tau=tau)
            nmis, ris, assessments = [], [], []
            for seed in seeds:
                config = _traversal_config(args, seed)
                clusters, trace = run_clustering(graph, make_oracle(seed), config)
                partition = [c.members for c in clusters]
                assessments.append(trace.membership_assessments)
                if labels:
                    nmis.append(nmi(partition, labels, args.nmi_norm))
                    ris.append(rand_index(partition, labels))
            row = {
                "value": tau,
                "density": graph.density(),
                "edge_count": graph.edge_count,
                "membership_assessments": sum(assessments) / len(assessments),
            }
            if nmis:
                row["nmi"] = sum(nmis) / len(nmis)
                row["ri"] = sum(ris) / len(ris)
            sweep.rows.append(row)
        except (InputError, ConfigurationError, RunAborted) as exc:
            sweep.rows.append({"value": tau, "error": str(exc)})
    return sweep


def run_k_sweep(graph, labels, ks, make_oracle, args, seeds) -> io.SweepResult:
    """One row per k on a fixed graph, averaged over seeds."""
    sweep = io.SweepResult(parameter="k")
    for k in ks:
        try:
            nmis, ris, assessments = [], [], []
            for seed in seeds:
                config = TraversalConfig(
                    k=k,
                    num_candidates=args.num_candidates,
                    unknown_retries=args.unknown_retries,
                    seed=seed,
                    aspect=args.aspect,
                    merge_strategy=args.merge_strategy,
                )
                clusters, trace = run_clustering(graph, make_oracle(seed), config)
                partition = [c.members for c in clusters]
                assessments.append(trace.membership_assessments)
                nmis.append(nmi(partition, labels, args.nmi_norm))
                ris.append(rand_index(partition, labels))
            sweep.rows.append({
                "value": k,
                "edge_count": graph.edge_count,
                "membership_assessments": sum(assessments) / len(assessments),
                "nmi": sum(nmis) / len(nmis),
                "ri": sum(ris) / len(ris),
            })
        except (InputError, ConfigurationError, RunAborted) as exc:
            sweep.rows.append({"value": k, "error": str(exc)})
    return sweep


def _print_sweep(sweep: io.SweepResult) -> None:
    columns = ["value", "density", "edge_count", "membership_assessments", "nmi", "ri", "error"]
    present = [c for c in columns if any(c in row for row in sweep.rows)]
    print("\t".join([sweep.parameter] + present[1:]))
    for row in sweep.rows:
        cells = []
        for c in present:
            v = row.get(c, "")
            cells.append(f"{v:.6f}" if isinstance(v, float) else str(v))
        print("\t".join(cells))


def _sweep_exit(sweep: io.SweepResult) -> int:
    return 0 if any("error" not in row for row in sweep.rows) else 1


def cmd_sweep_density(args) -> int:
    records = io.load_embeddings(args.embeddings)
    make_oracle = _oracle_factory(args, records)
    sweep = run_density_sweep(records, args.tau_list, make_oracle, args, args.seeds)
    if args.out:
        io.save_sweep(sweep, args.out)
    _print_sweep(sweep)
    return _sweep_exit(sweep)


def cmd_sweep_k(args) -> int:
    graph = io.load_graph(args.graph)
    records = io.load_embeddings(args.embeddings)
    labels = io.label_map(records)
    make_oracle = _oracle_factory(args, records)
    sweep = run_k_sweep(graph, labels, args.k_list, make_oracle, args, args.seeds)
    if args.out:
        io.save_sweep(sweep, args.out)
    _print_sweep(sweep)
    return _sweep_exit(sweep)


def cmd_simulate(args) -> int:
    spec = PlantedSpec(
        n_nodes=args.n_nodes,
        n_classes=args.n_classes,
        dimension=args.dimension,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        class_balance=tuple(args.class_balance) if args.class_balance else None,
        min_prototype_separation=args.min_separation,
    )
    records, manifest = generate_dataset(spec, name=args.name, aspect=args.aspect)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.save_embeddings(records, out / manifest.embeddings_path)
    io.save_manifest(manifest, out / "manifest.json")
    graph = build_graph(records, beta=args.beta, tau=args.tau)
    labels = io.label_map(records)
    report = graph_noise_report(graph, labels)
    io.save_noise_report(report, out / "noise_report.json")
    print(
        f"nodes={len(records)} classes={spec.n_classes} dimension={spec.dimension} "
        f"edges={graph.edge_count} wrong_edge_fraction={report['wrong_edge_fraction']:.4f} "
        f"missing_intra_pairs={report['missing_intra_pairs']}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_oracle_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--oracle", choices=ORACLE_KINDS, required=True)
    p.add_argument("--embeddings", help="embedding records (labels and/or vectors for the oracle)")
    p.add_argument("--p", type=float, help="flip probability for the noisy oracle")
    p.add_argument("--threshold", type=float, help="mean-weight threshold for the embedding oracle")
    p.add_argument("--endpoint", help="chat-completion URL for the remote oracle")
    p.add_argument("--model", help="model name for the remote oracle")
    p.add_argument("--cache", help="append-only decision cache path for the remote oracle")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=3, help="representatives per cluster")
    p.add_argument("--num-candidates", type=int, default=1)
    p.add_argument("--unknown-retries", type=int, default=2)
    p.add_argument("--aspect", default="", help="clustering aspect used in oracle queries")
    p.add_argument("--merge-strategy", choices=MERGE_STRATEGIES, default="pairs")
    p.add_argument("--nmi-norm", choices=NMI_NORMALIZATIONS, default="arithmetic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterwalk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="build a thresholded similarity graph")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("cluster", help="cluster a saved graph with an oracle")
    p.add_argument("--graph", required=True)
    _add_oracle_flags(p)
    _add_run_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-steps", action="store_true", help="stream per-assessment records to stderr")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep-density", help="sweep tau over one dataset")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--tau-list", type=float, nargs="+", required=True)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    _add_oracle_flags_no_embeddings(p)
    _add_run_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_density)

    p = sub.add_parser("sweep-k", help="sweep representative count over one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k-list", type=int, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", required=True)
    _add_oracle_flags_no_embeddings(p)
    _add_run_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("simulate", help="generate a planted dataset with a noise report")
    p.add_argument("--n-nodes", type=int, required=True)
    p.add_argument("--n-classes", type=int, required=True)
    p.add_argument("--dimension", type=int, required=True)
    p.add_argument("--noise-sigma", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--class-balance", type=float, nargs="+")
    p.add_argument("--min-separation", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--name", default="planted")
    p.add_argument("--aspect", default="synthetic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    return parser


def _add_oracle_flags_no_embeddings(p: argparse.ArgumentParser) -> None:
    # sweep subcommands already declare --embeddings themselves
    p.add_argument("--oracle", choices=ORACLE_KINDS, required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--cache")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RunAborted as exc:
        cause = exc.__cause__
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(cause, ConfigurationError):
            return 3
        if isinstance(cause, (ParseError, InputError)):
            return 2
        return 1
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

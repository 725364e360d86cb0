"""
Command-line entry point for swarmrec
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .core import benchfns, centrality, dynamics, embedding, evaluation, hypergraph, oracles, preprocess
from .core import propagation, recommender
from .core.pipeline import RecommendationPipeline
from .core.sweep import parse_grid, sweep, write_sweep
from .data.fetch import DATASETS, fetch_dataset
from .data.loaders import load_features, load_interactions, load_social, save_features, save_interactions
from .database.connection import ResultsStore
from .exceptions import ConfigurationError, InputError, ParseError, SwarmRecError, exit_code_for
from .models.config import Metric, RunConfig, Variant
from .models.dynamics import LayeredGraph
from .models.graph import DedupRule, FeatureMatrix, SimpleGraph
from .settings import log_level_from_env

logger = logging.getLogger(__name__)

VISIBLE_COMMANDS = (
    "preprocess", "hypergraph", "centrality", "embed", "propagate", "recommend", "evaluate",
    "sweep", "simulate-dcse", "simulate-cehs", "bench-fns", "run", "fetch",
)


def _option(parser: argparse.ArgumentParser, flag: str, **kwargs) -> None:
    """Add a flag whose unset value (None) leaves lower-precedence sources alone"""
    kwargs.setdefault("default", None)
    parser.add_argument(flag, **kwargs)


def _config(args: argparse.Namespace) -> RunConfig:
    """RunConfig from environment, --config file and every flag that was given"""
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key in RunConfig.model_fields and value is not None
    }
    return RunConfig.from_sources(overrides=overrides, config_path=args.config)


def _out(cfg: RunConfig, name: str) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def _write_json(path: Path, payload: Any) -> Path:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _require(cfg: RunConfig, key: str) -> Path:
    value = getattr(cfg, key)
    if value is None:
        raise ConfigurationError(f"--{key.replace('_path', '').replace('_', '-')} is required")
    return value


def _ratings_graph(cfg: RunConfig) -> SimpleGraph:
    """Co-interaction projection of the ratings, united with the social graph when given"""
    store = load_interactions(_require(cfg, "ratings_path"), cfg.dedup)
    cleaned, _, _ = preprocess.clean(store, cfg)
    h, _ = preprocess.remove_isolated(hypergraph.build_co_interaction(cleaned, cfg.time_window))
    g = centrality.project_hypergraph(h)
    if cfg.social_path is not None and cfg.use_social:
        g = g.union(load_social(cfg.social_path).to_simple_graph(g.node_ids))
    return g


def _graph(args: argparse.Namespace, cfg: RunConfig) -> SimpleGraph:
    """Graph from --graph (edge list) or, failing that, from the ratings"""
    if getattr(args, "graph", None):
        return load_social(args.graph).to_simple_graph(directed=args.directed)
    return _ratings_graph(cfg)


def _read_values(path: Path) -> Dict[str, float]:
    """``node value`` lines"""
    values = {}
    features = load_features(path)
    if features.dimension != 1:
        raise InputError(f"{path}: expected one value per node")
    for node, row in zip(features.node_ids, features.values):
        values[node] = float(row[0])
    return values


def _initial(args: argparse.Namespace, node_ids: Sequence[str]) -> Optional[np.ndarray]:
    if not args.initial:
        return None
    values = _read_values(Path(args.initial))
    missing = [v for v in node_ids if v not in values]
    if missing:
        raise InputError(f"no initial preference for nodes {', '.join(missing[:5])}")
    return np.array([values[v] for v in node_ids])


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _config(args)
    store = load_interactions(_require(cfg, "ratings_path"), cfg.dedup)
    cleaned, report, trust = preprocess.clean(store, cfg)
    save_interactions(cleaned, _out(cfg, "cleaned.txt"))
    _write_json(_out(cfg, "clean_report.json"), report.model_dump(mode="json"))
    with _out(cfg, "trust.txt").open("w", encoding="utf-8") as handle:
        for (u, v), value in sorted(trust.pairs().items()):
            if u < v:
                handle.write(f"{u} {v} {value!r}\n")
    print(json.dumps(report.model_dump(mode="json"), sort_keys=True))
    return 0


def cmd_hypergraph(args: argparse.Namespace) -> int:
    cfg = _config(args)
    store = load_interactions(_require(cfg, "ratings_path"), cfg.dedup)
    cleaned, _, _ = preprocess.clean(store, cfg)
    h = hypergraph.build_co_interaction(cleaned, cfg.time_window)
    if args.features:
        features = load_features(args.features)
        known = [v for v in h.node_ids if v in features.node_index]
        if len(known) != h.n_nodes:
            raise InputError("the feature file must cover every user of the ratings")
        h = h.merge(hypergraph.build_co_preference(features.take(h.node_ids), cfg.gamma))
    hypergraph.save_hypergraph(h, _out(cfg, "hyperedges.txt"))
    print(json.dumps({"nodes": h.n_nodes, "hyperedges": h.counts_by_kind()}, sort_keys=True))
    return 0


def cmd_centrality(args: argparse.Namespace) -> int:
    cfg = _config(args)
    cent = centrality.compute_centrality(_graph(args, cfg), workers=cfg.workers)
    path = centrality.save_centrality(cent, _out(cfg, "centrality.csv"))
    logger.info(f"Wrote {path}")
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    cfg = _config(args)
    _, table = embedding.embed(_graph(args, cfg), cfg.embedding_config())
    embedding.save_embeddings(table, _out(cfg, "embeddings.txt"))
    return 0


def cmd_propagate(args: argparse.Namespace) -> int:
    cfg = _config(args)
    g = _graph(args, cfg)
    features = load_features(args.features)
    missing = [v for v in g.node_ids if v not in features.node_index]
    if missing:
        raise InputError(f"no features for nodes {', '.join(missing[:5])}")
    states = propagation.propagate(features.take(g.node_ids), g, cfg.propagation_config())
    save_features(states[-1].features, _out(cfg, "propagated.txt"))
    return 0


def cmd_recommend(args: argparse.Namespace) -> int:
    cfg = _config(args)
    store = load_interactions(_require(cfg, "ratings_path"), cfg.dedup)
    if args.features:
        features = load_features(args.features)
    else:
        features = FeatureMatrix(node_ids=store.user_ids, values=store.matrix().toarray())
    social = load_social(cfg.social_path) if cfg.social_path is not None and cfg.use_social else None
    k = args.topk or max(cfg.k_list)
    recs = recommender.recommend_all(features, store, cfg.similarity_config(), k, social=social)
    path = recommender.write_recommendations(recs, _out(cfg, "recommendations.txt"))
    logger.info(f"Wrote {path}")
    return 0


def _read_rankings(path: Path) -> Dict[str, List[str]]:
    """``user item score rank`` lines back into ranked item lists"""
    ranked: Dict[str, List[tuple]] = {}
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 4:
                raise ParseError("expected 'user item score rank'", line_number, str(path))
            try:
                rank = int(fields[3])
            except ValueError:
                raise ParseError(f"rank is not an integer: {fields[3]!r}", line_number, str(path))
            ranked.setdefault(fields[0], []).append((rank, fields[1]))
    return {user: [item for _, item in sorted(items)] for user, items in ranked.items()}


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config(args)
    rankings = _read_rankings(Path(args.rankings))
    test = load_interactions(args.test)
    relevant = {user: test.lookup(user) for user in test.user_ids}
    report = evaluation.compute_metrics(
        rankings,
        relevant,
        cfg.k_list,
        graded=cfg.graded_relevance,
        config=cfg.echo(),
        protocol=cfg.eval_protocol().model_dump(mode="json"),
        seed=cfg.seed,
    )
    _out(cfg, "metrics.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_json())
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config(args)
    grid = parse_grid(args.axis or [])
    store_url = args.store or cfg.results_db
    store = ResultsStore(store_url) if store_url else None
    try:
        rows = sweep(cfg, grid, results=store, progress=not args.quiet)
    finally:
        if store is not None:
            store.close()
    path = write_sweep(rows, _out(cfg, "sweep.csv"))
    logger.info(f"Wrote {len(rows)} sweep rows to {path}")
    return 0


def _write_simulation(cfg: RunConfig, result) -> None:
    result.trajectory.to_csv(_out(cfg, "trajectory.csv"), index=False, float_format="%.17g")
    _write_json(_out(cfg, "verdict.json"), result.verdict.model_dump(mode="json"))
    print(result.verdict.model_dump_json())


def cmd_simulate_dcse(args: argparse.Namespace) -> int:
    cfg = _config(args)
    g = _graph(args, cfg)
    cent = None if args.uniform else centrality.compute_centrality(g, workers=cfg.workers)
    result = dynamics.simulate_dcse(
        g,
        cent,
        lambdas=cfg.lambdas,
        eta=cfg.eta,
        initial=_initial(args, g.node_ids),
        t_max=args.t_max,
        tol=args.tol,
        seed=cfg.seed,
    )
    _write_simulation(cfg, result)
    return 0


def _read_layers(path: Path) -> List[List[str]]:
    """``node layer`` lines grouped by layer label, layers in label order"""
    groups: Dict[str, List[str]] = {}
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            if len(fields) != 2:
                raise ParseError("expected 'node layer'", line_number, str(path))
            groups.setdefault(fields[1], []).append(fields[0])
    try:
        labels = sorted(groups, key=float)
    except ValueError:
        labels = sorted(groups)
    return [groups[label] for label in labels]


def cmd_simulate_cehs(args: argparse.Namespace) -> int:
    cfg = _config(args)
    layers = _read_layers(Path(args.layers_file))
    layer_of = {node: k for k, layer in enumerate(layers) for node in layer}
    edges = load_social(args.graph)
    horizontal, vertical = [], []
    for s, t, _ in edges.edges():
        if s not in layer_of or t not in layer_of:
            raise InputError(f"edge {s}-{t} touches a node without a layer")
        (horizontal if layer_of[s] == layer_of[t] else vertical).append((s, t))
    try:
        lg = LayeredGraph.from_layers(layers, horizontal, vertical, directed=args.directed, rho_v=args.rho_v)
    except ValueError as e:
        raise InputError(str(e)) from e
    cent = None if args.uniform else centrality.compute_centrality(lg.graph, workers=cfg.workers)
    result = dynamics.simulate_cehs(
        lg,
        cent,
        lambdas=cfg.lambdas,
        eta=cfg.eta,
        initial=_initial(args, lg.graph.node_ids),
        t_max=args.t_max,
        tol=args.tol,
        seed=cfg.seed,
    )
    _write_simulation(cfg, result)
    return 0


def cmd_bench_fns(args: argparse.Namespace) -> int:
    cfg = _config(args)
    names = sorted(benchfns.OBJECTIVES) if args.fn == "all" else [args.fn]
    rows = []
    for name in names:
        obj = benchfns.get_objective(name)
        if args.verify:
            for check in benchfns.verify_minima(obj):
                logger.info(f"{name} at {check.point}: {check.actual!r} ({'ok' if check.passed else 'FAILED'})")
        result = benchfns.multistart_optimize(
            obj,
            restarts=args.restarts,
            budget=args.budget,
            seed=cfg.seed,
            dimension=args.dimension,
            workers=cfg.workers,
        )
        rows.append(result.row())
    text = "\n".join(["name,best_value,best_point,evals"] + rows) + "\n"
    _out(cfg, "bench.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config(args)
    store_url = args.store or cfg.results_db
    store = ResultsStore(store_url) if store_url else None
    try:
        report = RecommendationPipeline(cfg, results=store).run()
    finally:
        if store is not None:
            store.close()
    if report.metrics is not None:
        print(report.metrics.to_json())
    return 0


def cmd_fetch(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dest = Path(args.dest) if args.dest else (cfg.data_dir or Path("data"))
    for name, path in sorted(fetch_dataset(args.name, dest).items()):
        print(f"{name} {path}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if args.kind == "centrality":
        result = oracles.centrality_result(_graph(args, cfg))
    elif args.kind == "equilibrium":
        result = oracles.oracle_equilibrium(dynamics.build_weights(_graph(args, cfg), None, cfg.lambdas, cfg.eta))
    else:
        if not args.fn:
            raise ConfigurationError("--fn is required for grid minima")
        obj = benchfns.get_objective(args.fn)
        lower, upper = obj.bounds(2)
        result = oracles.oracle_grid_minima(args.fn, lower, upper)
    _write_json(_out(cfg, f"oracle-{args.kind}.json"), result.model_dump(mode="json"))
    return 0


def _data_flags(parser: argparse.ArgumentParser, social: bool = True) -> None:
    _option(parser, "--ratings", dest="ratings_path", help="ratings file (user item rating [timestamp])")
    if social:
        _option(parser, "--social", dest="social_path", help="trust file (source target [weight])")
    _option(parser, "--threshold", type=float, help="minimum rating kept")
    _option(parser, "--phi", type=float, help="anomaly score cutoff")
    _option(parser, "--time-window", dest="time_window", type=float)


def _graph_flags(parser: argparse.ArgumentParser) -> None:
    _data_flags(parser)
    parser.add_argument("--graph", help="edge list (source target [weight]) used instead of the ratings")
    parser.add_argument("--directed", action="store_true", help="read --graph as directed")


def _embedding_flags(parser: argparse.ArgumentParser) -> None:
    _option(parser, "--dim", type=int)
    _option(parser, "--walk-len", dest="walk_len", type=int)
    _option(parser, "--walks-per-node", dest="walks_per_node", type=int)
    _option(parser, "--p", type=float)
    _option(parser, "--q", type=float)
    _option(parser, "--window", dest="context_window", type=int)
    _option(parser, "--negatives", dest="sg_negatives", type=int)
    _option(parser, "--epochs", type=int)


def _recommend_flags(parser: argparse.ArgumentParser) -> None:
    _option(parser, "--metric", choices=[m.value for m in Metric])
    _option(parser, "--neighbors", type=int)


def _dynamics_flags(parser: argparse.ArgumentParser) -> None:
    _option(parser, "--eta", type=float)
    _option(parser, "--lambdas", help="degree,closeness,betweenness weights")
    parser.add_argument("--initial", help="node value lines for P(0); seeded draws when omitted")
    parser.add_argument("--t-max", dest="t_max", type=int, default=10 ** 5)
    parser.add_argument("--tol", type=float, default=1e-8)
    parser.add_argument("--uniform", action="store_true", help="ignore centralities (uniform influence)")
    parser.add_argument("--directed", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    _option(common, "--seed", type=int)
    _option(common, "--workers", type=int)
    _option(common, "--out", dest="out_dir", type=Path, help="output directory")
    common.add_argument("--log-level", dest="log_level", default=None)

    parser = argparse.ArgumentParser(
        prog="swarmrec",
        description="Hypergraph social recommendation and consensus-dynamics toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(VISIBLE_COMMANDS) + "}")
    sub.required = True

    p = sub.add_parser("preprocess", parents=[common], help="threshold, anomaly and degree cleaning")
    _data_flags(p, social=False)
    _option(p, "--dedup", choices=[r.value for r in DedupRule])
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("hypergraph", parents=[common], help="build hyperedges")
    _data_flags(p, social=False)
    _option(p, "--gamma", type=float)
    p.add_argument("--features", help="feature file enabling co-preference hyperedges")
    p.set_defaults(handler=cmd_hypergraph)

    p = sub.add_parser("centrality", parents=[common], help="degree, closeness and betweenness CSV")
    _graph_flags(p)
    p.set_defaults(handler=cmd_centrality)

    p = sub.add_parser("embed", parents=[common], help="random-walk skip-gram embeddings")
    _graph_flags(p)
    _embedding_flags(p)
    p.set_defaults(handler=cmd_embed)

    p = sub.add_parser("propagate", parents=[common], help="message passing over a feature file")
    _graph_flags(p)
    p.add_argument("--features", required=True)
    _option(p, "--variant", choices=[v.value for v in Variant])
    _option(p, "--layers", type=int)
    p.set_defaults(handler=cmd_propagate)

    p = sub.add_parser("recommend", parents=[common], help="top-K lists from peer similarity")
    _data_flags(p)
    _recommend_flags(p)
    p.add_argument("--features", help="feature file; rating rows are compared when omitted")
    p.add_argument("--topk", type=int)
    p.set_defaults(handler=cmd_recommend)

    p = sub.add_parser("evaluate", parents=[common], help="ranking metrics of a recommendations file")
    p.add_argument("--rankings", required=True, help="user item score rank lines")
    p.add_argument("--test", required=True, help="held-out user item [rating] lines")
    _option(p, "--k", dest="k_list", help="cutoffs, comma separated")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="full-factorial pipeline sweep")
    _data_flags(p)
    p.add_argument("--axis", action="append", help="name=v1,v2 (repeatable)")
    p.add_argument("--store", help="results database URL")
    p.add_argument("--quiet", action="store_true", help="no progress bar")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("simulate-dcse", parents=[common], help="flat-graph consensus simulation")
    _data_flags(p)
    p.add_argument("--graph", help="edge list used instead of the ratings")
    _dynamics_flags(p)
    p.set_defaults(handler=cmd_simulate_dcse)

    p = sub.add_parser("simulate-cehs", parents=[common], help="layered consensus simulation")
    p.add_argument("--graph", required=True, help="edge list")
    p.add_argument("--layers", dest="layers_file", required=True, help="node layer lines")
    p.add_argument("--rho-v", dest="rho_v", type=float, default=0.2)
    _dynamics_flags(p)
    p.set_defaults(handler=cmd_simulate_cehs)

    p = sub.add_parser("bench-fns", parents=[common], help="benchmark objectives")
    p.add_argument("--fn", default="all", choices=["all"] + sorted(benchfns.OBJECTIVES))
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--dimension", type=int, default=2)
    p.add_argument("--verify", action="store_true", help="log catalogued minima checks")
    p.set_defaults(handler=cmd_bench_fns)

    p = sub.add_parser("run", parents=[common], help="full pipeline")
    _data_flags(p)
    _embedding_flags(p)
    _recommend_flags(p)
    _option(p, "--variant", choices=[v.value for v in Variant])
    _option(p, "--batch-size", dest="batch_size", type=int)
    _option(p, "--max-iter", dest="max_iter", type=int)
    _option(p, "--k", dest="k_list")
    p.add_argument("--store", help="results database URL")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("fetch", parents=[common], help="download a public dataset")
    p.add_argument("name", choices=sorted(DATASETS))
    p.add_argument("--dest")
    p.set_defaults(handler=cmd_fetch)

    p = sub.add_parser("oracle", parents=[common])
    p.add_argument("kind", choices=["centrality", "equilibrium", "grid"])
    _graph_flags(p)
    p.add_argument("--fn")
    p.set_defaults(handler=cmd_oracle)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or log_level_from_env()).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except SwarmRecError as e:
        logger.error(str(e))
        return exit_code_for(e)
    except Exception:
        logger.exception("Internal error")
        return 3


if __name__ == "__main__":
    sys.exit(main())

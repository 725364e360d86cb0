"""
End-to-end recommendation pipeline

Stages run in a fixed order: load, split, clean, hypergraph, isolated-node
removal, batch partition, centrality, embedding, feature assembly,
propagation, preference dynamics, recommendation and evaluation.
"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..data.loaders import load_interactions, load_social, save_features
from ..database.connection import ResultsStore
from ..exceptions import ConfigurationError, StageError
from ..models.config import RunConfig
from ..models.dynamics import PropagationMatrix
from ..models.features import CentralityVector, EmbeddingTable
from ..models.graph import FeatureMatrix, Hypergraph, InteractionStore, SimpleGraph, SocialGraph
from ..models.reports import BatchPlan, CleanReport, MetricsReport, RunReport, SplitResult, TrustTable
from . import centrality as centrality_ops
from . import dynamics, embedding, evaluation, hypergraph, preprocess, propagation, recommender
from .utils.decorators import pipeline_stage, skip_stage

logger = logging.getLogger(__name__)

# published FilmTrust figure kept for comparison only; the evaluation protocol differs
REFERENCE_VALUES = {"filmtrust": {"hr@10": 0.8604}, "binding": False}


def batch_partition(
    h: Hypergraph,
    n_batches: int,
    max_iter: int = 1,
    epsilon: float = 1e-4,
) -> BatchPlan:
    """
    Hash every node into one of ``n_batches`` disjoint batches

    The batch of a node depends only on its id (blake2b), so plans are stable
    across runs and processes.

    Raises:
        ConfigurationError: n_batches < 1
    """
    if n_batches < 1:
        raise ConfigurationError("at least one batch is required")
    assignment = [
        int.from_bytes(hashlib.blake2b(v.encode("utf-8"), digest_size=8).digest(), "big") % n_batches
        for v in h.node_ids
    ]
    return BatchPlan(
        node_ids=h.node_ids,
        assignment=assignment,
        n_batches=n_batches,
        max_iter=max_iter,
        epsilon=epsilon,
    )


def apply_dynamics(
    features: FeatureMatrix,
    w: PropagationMatrix,
    plan: BatchPlan,
) -> Tuple[FeatureMatrix, int, float]:
    """
    Sweep P <- W P batch by batch for up to ``plan.max_iter`` rounds

    Batches are updated in order and each sees the rows already updated in
    the same round. Stops once the largest per-node change of a round drops
    below ``plan.epsilon``.

    Returns:
        Updated features, rounds run and the last round's largest change
    """
    if features.node_ids != w.node_ids or plan.node_ids != w.node_ids:
        raise ConfigurationError("features, weights and batch plan must share the node order")
    values = np.array(features.values, dtype=np.float64)
    matrix = w.matrix
    batches = [b for b in plan.batches() if len(b)]
    delta = 0.0
    rounds = 0
    for rounds in range(1, plan.max_iter + 1):
        previous = values.copy()
        for rows in batches:
            values[rows] = matrix[rows] @ values
        delta = float(np.abs(values - previous).max()) if values.size else 0.0
        if delta < plan.epsilon:
            break
    return FeatureMatrix(node_ids=features.node_ids, values=values), rounds, delta


def expand_store(store: InteractionStore, universe: InteractionStore) -> InteractionStore:
    """Re-index a (compacted) store onto a larger user and item universe"""
    users = np.array([universe.user_index[store.user_ids[u]] for u in store.users], dtype=np.int64)
    items = np.array([universe.item_index[store.item_ids[i]] for i in store.items], dtype=np.int64)
    order = np.lexsort((items, users))
    return InteractionStore(
        user_ids=universe.user_ids,
        item_ids=universe.item_ids,
        users=users[order],
        items=items[order],
        ratings=store.ratings[order],
        timestamps=None if store.timestamps is None else store.timestamps[order],
        duplicates_resolved=store.duplicates_resolved,
    )


class RecommendationPipeline:
    """
    Runs every stage for one RunConfig and assembles the RunReport

    Each stage method is wrapped with ``pipeline_stage``; a failure aborts
    the run with a StageError after the partial report has been written.
    """

    def __init__(self, cfg: RunConfig, results: Optional[ResultsStore] = None):
        if cfg.ratings_path is None:
            raise ConfigurationError("ratings_path is required to run the pipeline")
        self.cfg = cfg
        self.results = results
        self.out_dir = Path(cfg.out_dir)
        self.timings: Dict[str, float] = {}
        self.stages: Dict[str, Any] = {}
        self.artifacts: Dict[str, str] = {}
        self.graph_stats: Dict[str, Any] = {}
        self.dynamics_stats: Dict[str, Any] = {}
        self.clean_report: Optional[CleanReport] = None
        self._table: Optional[EmbeddingTable] = None

    def _artifact(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        self.artifacts[name] = name
        return path

    @pipeline_stage("load")
    def load(self) -> Tuple[InteractionStore, Optional[SocialGraph]]:
        store = load_interactions(self.cfg.ratings_path, self.cfg.dedup)
        social = None
        if self.cfg.social_path is not None and self.cfg.use_social:
            social = load_social(self.cfg.social_path)
        return store, social

    @pipeline_stage("split")
    def split(self, store: InteractionStore) -> SplitResult:
        return evaluation.split(store, self.cfg.eval_protocol())

    @pipeline_stage("clean")
    def clean(self, train: InteractionStore) -> Tuple[InteractionStore, TrustTable]:
        cleaned, report, trust = preprocess.clean(train, self.cfg)
        self.clean_report = report
        return cleaned, trust

    @pipeline_stage("hypergraph")
    def build_hypergraph(self, store: InteractionStore) -> Hypergraph:
        h = hypergraph.build_co_interaction(store, self.cfg.time_window)
        self.graph_stats["hyperedges"] = h.counts_by_kind()
        return h

    @pipeline_stage("remove_isolated")
    def remove_isolated(self, h: Hypergraph) -> Hypergraph:
        kept, report = preprocess.remove_isolated(h)
        self.clean_report = self.clean_report.combine(report) if self.clean_report else report
        return kept

    @pipeline_stage("batch_partition")
    def partition(self, h: Hypergraph) -> BatchPlan:
        n_batches = self.cfg.n_batches or max(1, math.ceil(h.n_nodes / self.cfg.batch_size))
        plan = batch_partition(h, n_batches, self.cfg.max_iter, self.cfg.epsilon)
        self.graph_stats["batches"] = plan.sizes()
        return plan

    def _graph(self, h: Hypergraph, social: Optional[SocialGraph]) -> SimpleGraph:
        g = centrality_ops.project_hypergraph(h)
        if social is not None:
            g = g.union(social.to_simple_graph(h.node_ids, directed=False))
        return g

    @pipeline_stage("centrality")
    def centrality(self, g: SimpleGraph) -> CentralityVector:
        cent = centrality_ops.compute_centrality(g, workers=self.cfg.workers)
        centrality_ops.save_centrality(cent, self._artifact("centrality.csv"))
        return cent

    @pipeline_stage("embed")
    def embed(self, g: SimpleGraph) -> FeatureMatrix:
        _, table = embedding.embed(g, self.cfg.embedding_config())
        if table.missing:
            logger.warning(f"{len(table.missing)} nodes appear in no walk and keep zero embeddings")
        embedding.save_embeddings(table, self._artifact("embeddings.txt"))
        self._table = table
        return table.to_feature_matrix()

    @pipeline_stage("features")
    def assemble_features(
        self,
        h: Hypergraph,
        cent: Optional[CentralityVector],
        social: Optional[SocialGraph],
    ) -> Tuple[FeatureMatrix, SimpleGraph]:
        if cent is not None:
            features = embedding.concat_features(
                self._table, cent, self.cfg.concat_weights, normalize=self.cfg.normalize_centrality
            )
        else:
            features = self._table.to_feature_matrix()
        merged = h
        if self.cfg.co_preference:
            merged = h.merge(hypergraph.build_co_preference(features, self.cfg.gamma))
        self.graph_stats["hyperedges"] = merged.counts_by_kind()
        g = self._graph(merged, social)
        self.graph_stats["nodes"] = g.n_nodes
        self.graph_stats["edges"] = g.n_edges
        return features, g

    @pipeline_stage("propagate")
    def propagate(self, features: FeatureMatrix, g: SimpleGraph, trust: TrustTable) -> FeatureMatrix:
        cfg = self.cfg.propagation_config()
        aligned = trust.aligned(g.node_ids) if cfg.use_trust else None
        states = propagation.propagate(features, g, cfg, trust=aligned)
        return states[-1].features

    @pipeline_stage("dynamics")
    def preference_dynamics(
        self,
        features: FeatureMatrix,
        g: SimpleGraph,
        cent: Optional[CentralityVector],
        plan: BatchPlan,
    ) -> FeatureMatrix:
        w = dynamics.build_weights(g, cent, self.cfg.lambdas, self.cfg.eta)
        updated, rounds, delta = apply_dynamics(features, w, plan)
        self.dynamics_stats = {
            "rounds": rounds,
            "final_delta": delta,
            "converged": delta < self.cfg.epsilon,
            "primitivity": dynamics.check_primitive(w).value,
            "fallback_rows": len(w.fallback_rows),
            "isolated_rows": len(w.isolated_rows),
        }
        save_features(updated, self._artifact("features.txt"))
        return updated

    @pipeline_stage("recommend")
    def recommend(
        self,
        features: FeatureMatrix,
        store: InteractionStore,
        social: Optional[SocialGraph],
    ) -> recommender.UserScorer:
        cfg = self.cfg.similarity_config()
        scorer = recommender.UserScorer(store, cfg, features=features, social=social)
        recs = recommender.recommend_all(
            features, store, cfg, max(self.cfg.k_list), social=social
        )
        recommender.write_recommendations(recs, self._artifact("recommendations.txt"))
        self.graph_stats["cold_start"] = {
            "social": len(recs.social_fallback),
            "popularity": len(recs.popularity_fallback),
        }
        return scorer

    @pipeline_stage("evaluate")
    def evaluate(
        self,
        split_result: SplitResult,
        scorer: recommender.UserScorer,
    ) -> Tuple[MetricsReport, MetricsReport]:
        protocol = self.cfg.eval_protocol()
        echo = self.cfg.echo()
        metrics = evaluation.evaluate_scores(split_result, scorer.scores, protocol, config=echo)
        popularity = recommender.popularity_scores(split_result.train)
        baseline = evaluation.evaluate_scores(
            split_result,
            lambda users: np.tile(popularity, (len(users), 1)),
            protocol,
            config={"model": "popularity"},
        )
        return metrics, baseline

    def run(self) -> RunReport:
        """
        Execute every stage and write ``report.json`` (deterministic content)
        and ``timings.json`` into the output directory

        Raises:
            StageError: A stage failed; the partial report is still written
        """
        try:
            store, social = self.load()
            split_result = self.split(store)
            cleaned, trust = self.clean(split_result.train)
            h = self.build_hypergraph(cleaned)
            h = self.remove_isolated(h)
            if h.n_nodes == 0:
                raise StageError("remove_isolated", ConfigurationError("no node shares a hyperedge"))
            plan = self.partition(h)
            g = self._graph(h, social)
            if self.cfg.use_centrality:
                cent = self.centrality(g)
            else:
                skip_stage(self, "centrality", "use_centrality is off")
                cent = None
            self.embed(g)
            features, g = self.assemble_features(h, cent, social)
            features = self.propagate(features, g, trust)
            if self.cfg.max_iter > 0:
                features = self.preference_dynamics(features, g, cent, plan)
            else:
                skip_stage(self, "dynamics", "max_iter is 0")
            scoring_store = expand_store(cleaned, split_result.train)
            scorer = self.recommend(features, scoring_store, social)
            metrics, baseline = self.evaluate(split_result, scorer)
            report = self._report(metrics=metrics, baseline=baseline)
        except StageError as e:
            report = self._report(error=str(e))
            self._write(report)
            raise
        self._write(report)
        return report

    def _report(self, **fields) -> RunReport:
        return RunReport(
            config=self.cfg.echo(),
            stages=dict(self.stages),
            preprocess=self.clean_report,
            graph=self.graph_stats,
            dynamics=self.dynamics_stats,
            references=REFERENCE_VALUES,
            artifacts=dict(sorted(self.artifacts.items())),
            timings=dict(self.timings),
            **fields,
        )

    def _write(self, report: RunReport) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "report.json").write_text(report.primary_json() + "\n", encoding="utf-8")
        (self.out_dir / "timings.json").write_text(
            json.dumps(report.timings, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        if self.results is not None:
            self.results.save_run(report)


def run_pipeline(cfg: RunConfig, results: Optional[ResultsStore] = None) -> RunReport:
    """Run the full pipeline for one configuration"""
    return RecommendationPipeline(cfg, results=results).run()

"""Re-ranking of knowledge-graph explanation paths for recency, popularity and diversity."""

from .candidates import CandidateSet, ScoredPath, baseline_relevance, enumerate_paths, score_path
from .evaluation import GroupSpec, build_report, group_delta, kruskal_wallis, list_explanation_metrics, ndcg_at_k
from .kg import InteractionLog, KnowledgeGraph, Path, PathDecomposition, decompose_path, load_graph
from .props import EtdContext, LirTable, SepTable, compute_lir_table, compute_sep_table, etd, path_property_values, sen
from .rerank import (
    ExplainedList,
    PropertyTables,
    RerankConfig,
    brute_force_rerank,
    property_objective,
    soft_rerank,
    weighted_rerank,
)

__version__ = "0.1.0"

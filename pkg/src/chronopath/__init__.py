"""Time-aware metapath mining and feature augmentation for account graphs."""

from .aggregate import (AugmentedFeatures, NormalizedSuper, NormalizedSupers,
                        TopKConfig, aggregate, build_augmented, combine,
                        normalize, top_k_filter)
from .errors import (ChronopathError, ConfigError, ParseError,
                     TypeConflictError, UnknownAccountError)
from .evaluate import (EvalConfig, EvalReport, FoldScore, cross_validate,
                       micro_f1, sample_negatives, train_predict_logreg)
from .features import FEATURE_NAMES, FeatureMatrix, compute_features, \
    feature_matrix, gini
from .graph import (GraphStats, HeterogeneousGraph, HomogeneousGraph, LabelSet,
                    TemporalEdge, graphs_equal, ingest_edges, load_graph,
                    load_labels, project_homogeneous, save_graph, stats,
                    validate_labels)
from .metapaths import (PATTERNS, TIME_AWARE, TIMELESS, MetapathStats,
                        SuperMetapath, SuperSet, brute_force_supers,
                        enumerate_p1, enumerate_p2, enumerate_pattern,
                        metapath_stats, refine, write_supers_csv)
from .pipeline import PipelineConfig, StageError, compare_runs, run_pipeline
from .synth import SynthConfig, generate, write_synth

__version__ = "0.1.0"

__all__ = [
    "AugmentedFeatures", "ChronopathError", "ConfigError", "EvalConfig",
    "EvalReport", "FEATURE_NAMES", "FeatureMatrix", "FoldScore", "GraphStats",
    "HeterogeneousGraph", "HomogeneousGraph", "LabelSet", "MetapathStats",
    "NormalizedSuper", "NormalizedSupers", "PATTERNS", "ParseError",
    "PipelineConfig", "StageError", "SuperMetapath", "SuperSet", "SynthConfig",
    "TIME_AWARE", "TIMELESS", "TemporalEdge", "TopKConfig",
    "TypeConflictError", "UnknownAccountError", "aggregate",
    "brute_force_supers", "build_augmented", "combine", "compare_runs",
    "compute_features", "cross_validate", "enumerate_p1", "enumerate_p2",
    "enumerate_pattern", "feature_matrix", "generate", "gini", "graphs_equal",
    "ingest_edges", "load_graph", "load_labels", "metapath_stats", "micro_f1",
    "normalize", "project_homogeneous", "refine", "run_pipeline",
    "sample_negatives", "save_graph", "stats", "top_k_filter",
    "train_predict_logreg", "validate_labels", "write_supers_csv", "write_synth",
]

"""Integrity auditing and repair for labeled image datasets.

The package audits a dataset along four axes - near-duplicate structure
in embedding space, group leakage across train/valid/test, label
conflicts between near-duplicates, and embedding-space outliers - then
repairs what it found: consolidating leaky groups, removing duplicate
and conflicted images with a fully accounted ledger, and re-splitting
the cleaned release stratified by class. A small review service routes
candidate pairs to human annotators and scores their agreement.
"""

from .cleaner import (
    CleaningConfig,
    RemovalLedger,
    RemovalRecord,
    apportion,
    build_extended,
    clean,
    resize_export,
    stratified_split,
    validate_ratios,
)
from .duplicates import (
    VERDICTS,
    DuplicateCluster,
    IntervalCounts,
    PairConfusion,
    UnionFind,
    classify_pairs,
    coalesce,
    detect_clusters,
    interval_analysis,
    least_similar_within_groups,
)
from .embeddings import (
    EmbeddingMatrix,
    SimilarityPair,
    baseline_features,
    cosine,
    knn,
    load_embeddings,
    make_pair,
    save_embeddings,
    scan_pairs,
)
from .errors import (
    AuditError,
    ConfigError,
    EmbeddingFormatError,
    IntegrityError,
    ManifestError,
    NotFittedError,
    VerdictConflictError,
)
from .estimators import CosineNeighbors, DuplicateDetector, NeighborOutlierScorer
from .labels import ConflictSets, conflict_matrix, conflict_sets
from .leakage import MoveRecord, OverlapEntry, OverlapReport, detect_overlap, repair
from .manifest import (
    DatasetManifest,
    ImageRecord,
    apply_split_lists,
    group_histogram,
    interpretable_name,
    load_manifest,
    save_manifest,
)
from .outliers import outlier_scores
from .reporting import audit_report, render_html, write_report
from .review import (
    AgreementStats,
    ReviewSession,
    Verdict,
    VerdictLog,
    cohen_kappa,
    confirmed_duplicates,
    create_app,
)

__version__ = "0.1.0"

__all__ = [
    "AgreementStats",
    "AuditError",
    "CleaningConfig",
    "ConfigError",
    "ConflictSets",
    "CosineNeighbors",
    "DatasetManifest",
    "DuplicateCluster",
    "DuplicateDetector",
    "EmbeddingFormatError",
    "EmbeddingMatrix",
    "ImageRecord",
    "IntegrityError",
    "IntervalCounts",
    "ManifestError",
    "MoveRecord",
    "NeighborOutlierScorer",
    "NotFittedError",
    "OverlapEntry",
    "OverlapReport",
    "PairConfusion",
    "RemovalLedger",
    "RemovalRecord",
    "ReviewSession",
    "SimilarityPair",
    "UnionFind",
    "VERDICTS",
    "Verdict",
    "VerdictConflictError",
    "VerdictLog",
    "apply_split_lists",
    "apportion",
    "audit_report",
    "baseline_features",
    "build_extended",
    "classify_pairs",
    "clean",
    "coalesce",
    "cohen_kappa",
    "confirmed_duplicates",
    "conflict_matrix",
    "conflict_sets",
    "cosine",
    "create_app",
    "detect_clusters",
    "detect_overlap",
    "group_histogram",
    "interpretable_name",
    "interval_analysis",
    "knn",
    "least_similar_within_groups",
    "load_embeddings",
    "load_manifest",
    "make_pair",
    "outlier_scores",
    "render_html",
    "repair",
    "resize_export",
    "save_embeddings",
    "save_manifest",
    "scan_pairs",
    "stratified_split",
    "validate_ratios",
    "write_report",
]

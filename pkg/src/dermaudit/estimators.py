"""Estimator-style wrappers over the embedding-space analyses.

These follow the fit/predict convention: constructor takes hyperparameters
only, fit() learns from data and sets trailing-underscore attributes,
get_params/set_params allow grid-style composition. They wrap the
functional core (scan_pairs, detect_clusters, knn, outlier_scores) so
pipelines that expect that shape can use the audit machinery directly.
Inputs are raw row-major arrays; ids are optional and default to row
indices rendered as strings.
"""

from __future__ import annotations

import inspect

import numpy as np

from ._validation import check_array, check_ids, check_is_fitted, check_row_norms
from .duplicates import detect_clusters
from .embeddings import EmbeddingMatrix, knn, scan_pairs
from .outliers import outlier_scores


class BaseEstimator:
    """get_params/set_params over constructor arguments."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for {type(self).__name__}; "
                    f"valid: {sorted(valid)}"
                )
            setattr(self, key, value)
        return self

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v!r}" for k, v in sorted(self.get_params().items()))
        return f"{type(self).__name__}({params})"


def _as_matrix(X, ids) -> EmbeddingMatrix:
    arr = check_array(X)
    check_row_norms(arr)
    return EmbeddingMatrix(check_ids(ids, arr.shape[0]), arr)


class DuplicateDetector(BaseEstimator):
    """Find near-duplicate pairs and clusters by cosine similarity.

    fit() scans all pairs at or above `threshold` and groups them into
    clusters of at least `min_cluster_size` members whose mean pairwise
    similarity strictly exceeds the threshold. fit_predict() returns one
    integer label per row: cluster index, or -1 for unclustered rows.
    """

    def __init__(self, threshold: float = 0.90, min_cluster_size: int = 3):
        self.threshold = threshold
        self.min_cluster_size = min_cluster_size

    def fit(self, X, ids=None):
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        emb = _as_matrix(X, ids)
        self.n_features_in_ = emb.dim
        self.ids_ = list(emb.ids)
        self.pairs_ = scan_pairs(emb, self.threshold)
        self.clusters_ = detect_clusters(
            emb, self.threshold, min_size=self.min_cluster_size, pairs=self.pairs_
        )
        return self

    def fit_predict(self, X, ids=None) -> np.ndarray:
        self.fit(X, ids)
        check_is_fitted(self, ("clusters_",))
        index = {image_id: i for i, image_id in enumerate(self.ids_)}
        labels = np.full(len(self.ids_), -1, dtype=np.int64)
        for label, cluster in enumerate(self.clusters_):
            for member in cluster.members:
                labels[index[member]] = label
        return labels


class CosineNeighbors(BaseEstimator):
    """Exact k-nearest-neighbor lookup under cosine similarity."""

    def __init__(self, n_neighbors: int = 5):
        self.n_neighbors = n_neighbors

    def fit(self, X, ids=None):
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        emb = _as_matrix(X, ids)
        if self.n_neighbors > len(emb.ids) - 1:
            raise ValueError(
                f"n_neighbors={self.n_neighbors} needs at least "
                f"{self.n_neighbors + 1} rows, got {len(emb.ids)}"
            )
        self.embedding_ = emb
        self.n_features_in_ = emb.dim
        self.ids_ = list(emb.ids)
        return self

    def kneighbors(self, ids=None) -> dict[str, list[tuple[str, float]]]:
        """Neighbor lists for the given fitted ids (default: all rows)."""
        check_is_fitted(self, ("embedding_",))
        table = knn(self.embedding_, self.n_neighbors)
        if ids is None:
            return table
        missing = [i for i in ids if i not in table]
        if missing:
            raise ValueError(f"unknown ids: {missing[:5]}")
        return {i: table[i] for i in ids}


class NeighborOutlierScorer(BaseEstimator):
    """Rank rows by similarity to their n-th nearest neighbor.

    Low scores mean the row sits far from everything else. scores_ is
    sorted ascending, most isolated first.
    """

    def __init__(self, n_neighbors: int = 5):
        self.n_neighbors = n_neighbors

    def fit(self, X, ids=None):
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        emb = _as_matrix(X, ids)
        if self.n_neighbors > len(emb.ids) - 1:
            raise ValueError(
                f"n_neighbors={self.n_neighbors} needs at least "
                f"{self.n_neighbors + 1} rows, got {len(emb.ids)}"
            )
        self.n_features_in_ = emb.dim
        self.ids_ = list(emb.ids)
        self.scores_ = outlier_scores(emb, n_neighbors=self.n_neighbors)
        return self

    def score_map(self) -> dict[str, float]:
        check_is_fitted(self, ("scores_",))
        return dict(self.scores_)

"""Input checks shared by the estimator-style classes."""

from __future__ import annotations

import numpy as np

from .errors import NotFittedError


def check_array(X, *, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array of finite values."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} is empty (shape {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_row_norms(X: np.ndarray, *, name: str = "X") -> np.ndarray:
    """Return per-row L2 norms, rejecting zero rows (cosine undefined)."""
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"{name} row {bad} has zero norm")
    return norms


def check_is_fitted(estimator, attributes: tuple[str, ...]) -> None:
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )


def check_ids(ids, n_rows: int) -> list[str]:
    """Row ids must be unique strings matching the row count; default 0..n-1."""
    if ids is None:
        return [str(i) for i in range(n_rows)]
    ids = [str(i) for i in ids]
    if len(ids) != n_rows:
        raise ValueError(f"got {len(ids)} ids for {n_rows} rows")
    if len(set(ids)) != len(ids):
        raise ValueError("ids are not unique")
    return ids

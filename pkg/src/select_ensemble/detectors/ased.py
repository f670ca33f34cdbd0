"""Anomalous-subspace event detection.

PCA splits the space of node series into a normal subspace (the leading
components holding ``variance_threshold`` of the variance) and its
orthogonal complement. A tick is scored by the squared norm of its
residual in the complement (the squared prediction error, SPE).
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, ValidationError
from ..ingestion import FeatureMatrix
from ..lists import ScoreList


def anomalous_residuals(F: FeatureMatrix, variance_threshold: float = 0.9) -> np.ndarray:
    """``n x T`` residuals of the centred columns after removing the normal subspace."""
    if not 0 < variance_threshold < 1:
        raise ConfigurationError("variance_threshold must lie in (0, 1)")
    if F.T < 3:
        raise ValidationError(f"ASED needs at least 3 ticks, got {F.T}")
    X = F.values - F.values.mean(axis=1, keepdims=True)
    # rows of Y are ticks, columns nodes
    Y = X.T
    _, s, Vt = np.linalg.svd(Y, full_matrices=False)
    var = s * s
    total = var.sum()
    if total <= 0:
        return np.zeros_like(X)
    ratio = np.cumsum(var) / total
    # smallest k whose cumulative share reaches the threshold
    k = int(np.searchsorted(ratio, variance_threshold - 1e-12)) + 1
    k = min(k, len(s))
    P = Vt[:k].T
    resid = Y - (Y @ P) @ P.T
    return resid.T


def ased(F: FeatureMatrix, variance_threshold: float = 0.9, detector_id: str | None = None) -> ScoreList:
    R = anomalous_residuals(F, variance_threshold)
    return ScoreList(detector_id or f"ASED({F.feature_name})", np.einsum("ij,ij->j", R, R), valid_from=0)

"""Moving-average event detection over an expanding window."""

from __future__ import annotations

import numpy as np

from ..ingestion import FeatureMatrix
from ..lists import ScoreList

WARMUP = 2


def node_excess(F: FeatureMatrix, k_sigma: float = 3.0) -> np.ndarray:
    """Per-node excess over ``mu_t + 3 sigma_t`` where the moments use ticks ``< t``."""
    X = F.values
    T = F.T
    counts = np.arange(T, dtype=float)
    # shifting by the first value keeps constant rows exact in the cumulative sums
    shift = X[:, :1]
    D = X - shift
    csum = np.cumsum(D, axis=1)
    csq = np.cumsum(D * D, axis=1)
    excess = np.zeros_like(X)
    if T <= WARMUP:
        return excess
    c = counts[WARMUP:]
    dmu = csum[:, WARMUP - 1 : T - 1] / c
    var = csq[:, WARMUP - 1 : T - 1] / c - dmu * dmu
    sigma = np.sqrt(np.maximum(var, 0.0))
    mu = dmu + shift
    excess[:, WARMUP:] = np.maximum(0.0, X[:, WARMUP:] - (mu + k_sigma * sigma))
    return excess


def maed(F: FeatureMatrix, detector_id: str | None = None) -> ScoreList:
    scores = node_excess(F).sum(axis=0)
    return ScoreList(detector_id or f"MAED({F.feature_name})", scores, valid_from=min(WARMUP, F.T))

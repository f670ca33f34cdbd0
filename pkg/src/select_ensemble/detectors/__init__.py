"""The five base detectors and node attribution.

Every detector maps a :class:`~select_ensemble.ingestion.FeatureMatrix` to a
:class:`~select_ensemble.lists.ScoreList` with one score per tick.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ConfigurationError, ValidationError
from ..ingestion import FeatureMatrix
from ..lists import ScoreList
from .ased import anomalous_residuals, ased
from .base import Attribution, rank_nodes
from .ebed import ebed, ebed_responsibility
from .maed import node_excess, maed
from .ptsad import node_pvalues, ptsad
from .spirit import spirit, spirit_trace

DETECTORS: dict[str, Callable[..., ScoreList]] = {
    "EBED": ebed,
    "PTSAD": ptsad,
    "SPIRIT": spirit,
    "ASED": ased,
    "MAED": maed,
}

_WARMUP: dict[str, Callable[[FeatureMatrix, dict], int]] = {
    "EBED": lambda F, p: min(int(p.get("w", 5)), F.T),
    "SPIRIT": lambda F, p: min(max(5, F.n // 10), F.T),
    "MAED": lambda F, p: min(2, F.T),
    "ASED": lambda F, p: 0,
    "PTSAD": lambda F, p: 0,
}


def detector_name(detector_id: str) -> str:
    """``"EBED(weighted-out-degree)"`` -> ``"EBED"``."""
    name = detector_id.split("(", 1)[0].strip().upper()
    if name not in DETECTORS:
        raise ConfigurationError(f"unknown detector {detector_id!r}; choose from {sorted(DETECTORS)}")
    return name


def run_detector(name: str, F: FeatureMatrix, params: dict | None = None) -> ScoreList:
    params = dict(params or {})
    name = detector_name(name)
    if name == "SPIRIT" and "energy_bounds" in params:
        params["energy_bounds"] = tuple(params["energy_bounds"])
    try:
        return DETECTORS[name](F, **params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {name}: {exc}") from None


def attribute(detector_id: str, F: FeatureMatrix, tick: int, params: dict | None = None) -> Attribution:
    """Rank nodes by their responsibility for the score at ``tick``.

    The measure is detector specific: relative eigen-change (EBED), one minus
    the tail p-value (PTSAD), absolute participation-weight change (SPIRIT),
    squared residual (ASED) and excess over the moving threshold (MAED).
    """
    params = dict(params or {})
    name = detector_name(detector_id)
    if not 0 <= tick < F.T:
        raise ValidationError(f"tick {tick} outside [0, {F.T})")
    if tick < _WARMUP[name](F, params):
        raise ValidationError(f"tick {tick} is inside the {name} warm-up period")

    if name == "EBED":
        resp = ebed_responsibility(F, tick, int(params.get("w", 5)))
    elif name == "PTSAD":
        resp = 1.0 - node_pvalues(F, bool(params.get("round_counts", False))).pvalues[:, tick]
    elif name == "SPIRIT":
        kw = {k: params[k] for k in ("energy_bounds", "lam") if k in params}
        resp = spirit_trace(F, **kw).weight_change[:, tick]
    elif name == "ASED":
        R = anomalous_residuals(F, float(params.get("variance_threshold", 0.9)))
        resp = R[:, tick] ** 2
    else:
        resp = node_excess(F)[:, tick]
    return rank_nodes(F.node_ids, np.maximum(resp, 0.0), tick)


__all__ = [
    "DETECTORS",
    "Attribution",
    "attribute",
    "ased",
    "detector_name",
    "ebed",
    "maed",
    "ptsad",
    "run_detector",
    "spirit",
]

"""Choosing which score lists enter an ensemble.

Strategies
----------
full
    Keep everything.
vertical
    Greedy, correlation driven. Unified probabilities are averaged into a
    pseudo ground truth; lists are added one at a time while they raise the
    weighted Pearson correlation of the ensemble's average to that target.
diverse
    The same loop, but after the seed, candidates are visited
    least-correlated first.
horizontal
    Element driven. Mixture-model labels are majority-voted into a set of
    target anomalies; lists that rank those anomalies implausibly low under a
    uniform order-statistics null collect votes, and the high-vote cluster is
    dropped.
random
    A seeded uniform subset of a given size (the random-ensemble baseline).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .consensus import CalibrationCache
from .errors import ConfigurationError, UndefinedCorrelationError, ValidationError
from .lists import ScoreList, check_aligned, descending_order, ranks_from_order
from .orderstats import binomial_order_prob, order_stat_pvalues

logger = logging.getLogger(__name__)

STRATEGIES = ("full", "vertical", "horizontal", "diverse", "random")
KMEANS_MAX_ITER = 100

__all__ = [
    "STRATEGIES",
    "SelectionResult",
    "binomial_order_prob",
    "select",
    "select_all",
    "select_diverse",
    "select_horizontal",
    "select_random",
    "select_vertical",
    "two_means_high",
    "weighted_pearson",
]


@dataclass
class SelectionResult:
    strategy: str
    selected: list[str]
    target: list[float] | list[int] | None = None
    diagnostics: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "selected": list(self.selected),
            "target": self.target,
            "diagnostics": self.diagnostics,
            "warnings": list(self.warnings),
        }


def weighted_pearson(x, y, w) -> float:
    """Weighted Pearson correlation using weighted means and variances.

    Raises
    ------
    UndefinedCorrelationError
        If ``x`` or ``y`` has zero weighted variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (x.shape == y.shape == w.shape) or x.ndim != 1 or len(x) < 2:
        raise ValidationError("x, y and w must be equal-length vectors of length >= 2")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValidationError("weights must be non-negative with a positive sum")
    wn = w / w.sum()
    dx = x - wn @ x
    dy = y - wn @ y
    vx = wn @ (dx * dx)
    vy = wn @ (dy * dy)
    scale_x = max(1.0, float(np.abs(x).max()))
    scale_y = max(1.0, float(np.abs(y).max()))
    if vx <= (1e-12 * scale_x) ** 2 or vy <= (1e-12 * scale_y) ** 2:
        raise UndefinedCorrelationError("zero weighted variance")
    r = (wn @ (dx * dy)) / math.sqrt(vx * vy)
    return float(min(1.0, max(-1.0, r)))


def _corr(x, y, w) -> float:
    try:
        return weighted_pearson(x, y, w)
    except UndefinedCorrelationError:
        return -math.inf


def _require(S: Sequence[ScoreList], at_least: int) -> None:
    if len(S) < at_least:
        raise ValidationError(f"selection needs at least {at_least} list(s), got {len(S)}")
    check_aligned([s.T for s in S])
    ids = [s.detector_id for s in S]
    if len(set(ids)) != len(ids):
        raise ValidationError("score list ids must be unique")


def _sorted_candidates(cands: list[int], corr: dict[int, float], ascending: bool) -> list[int]:
    """Order candidates by correlation; undefined ones always go last."""
    defined = [c for c in cands if corr[c] != -math.inf]
    undefined = [c for c in cands if corr[c] == -math.inf]
    defined.sort(key=lambda c: corr[c] if ascending else -corr[c])
    return defined + undefined


def _greedy(S: Sequence[ScoreList], ascending: bool, strategy: str, cache: CalibrationCache | None) -> SelectionResult:
    _require(S, 1)
    cache = cache or CalibrationCache()
    P = np.vstack([cache.unify(s).probs for s in S])
    target = P.mean(axis=0)
    weights = 1.0 / ranks_from_order(descending_order(target))

    corr_target = {i: _corr(P[i], target, weights) for i in range(len(S))}
    # both variants seed with the list closest to the target
    ordered = _sorted_candidates(list(range(len(S))), corr_target, ascending=False)
    seed = ordered[0]
    ensemble = [seed]
    remaining = ordered[1:]
    trace = []
    while remaining:
        pred = P[ensemble].mean(axis=0)
        corr_pred = {i: _corr(P[i], pred, weights) for i in remaining}
        remaining = _sorted_candidates(remaining, corr_pred, ascending)
        cand = remaining.pop(0)
        before = _corr(pred, target, weights)
        after = _corr(P[ensemble + [cand]].mean(axis=0), target, weights)
        accepted = after > before
        if accepted:
            ensemble.append(cand)
        trace.append(
            {"candidate": S[cand].detector_id, "before": before, "after": after, "accepted": bool(accepted)}
        )

    diagnostics = {
        "correlation_to_target": {S[i].detector_id: corr_target[i] for i in range(len(S))},
        "seed": S[seed].detector_id,
        "trace": trace,
        "final_correlation": _corr(P[ensemble].mean(axis=0), target, weights),
    }
    return SelectionResult(
        strategy,
        [S[i].detector_id for i in ensemble],
        [float(v) for v in target],
        _json_safe(diagnostics),
    )


def select_vertical(S: Sequence[ScoreList], cache: CalibrationCache | None = None) -> SelectionResult:
    """Correlation-favoured greedy selection toward the averaged unified target."""
    return _greedy(S, ascending=False, strategy="vertical", cache=cache)


def select_diverse(S: Sequence[ScoreList], cache: CalibrationCache | None = None) -> SelectionResult:
    """Diversity-favoured variant: after seeding, candidates are examined least-correlated first."""
    return _greedy(S, ascending=True, strategy="diverse", cache=cache)


def two_means_high(values: Sequence[float], max_iter: int = KMEANS_MAX_ITER) -> np.ndarray:
    """Boolean mask of the high cluster from 1-d 2-means.

    Centroids start at the smallest and largest value. Equal values, or a
    cluster that empties out, put everything in the low cluster.
    """
    v = np.asarray(values, dtype=float)
    high = np.zeros(len(v), dtype=bool)
    if len(v) < 2 or v.min() == v.max():
        return high
    lo, hi = float(v.min()), float(v.max())
    for _ in range(max_iter):
        new_high = np.abs(v - hi) < np.abs(v - lo)
        if not new_high.any() or new_high.all():
            return np.zeros(len(v), dtype=bool)
        lo_new, hi_new = float(v[~new_high].mean()), float(v[new_high].mean())
        if np.array_equal(new_high, high) and lo_new == lo and hi_new == hi:
            break
        high, lo, hi = new_high, lo_new, hi_new
    return high


def select_horizontal(S: Sequence[ScoreList], cache: CalibrationCache | None = None) -> SelectionResult:
    """Order-statistics driven selection.

    For every majority-voted anomaly the lists are sorted by the anomaly's
    normalized rank (ties by input position); lists sorted after the position
    of minimum ``p_{l,m}`` get one vote. Vote counts above zero are split by
    2-means and the high cluster is discarded.
    """
    _require(S, 2)
    cache = cache or CalibrationCache()
    m = len(S)
    T = S[0].T
    ids = [s.detector_id for s in S]
    labels = np.vstack([cache.mixture(s).labels for s in S])
    votes = labels.sum(axis=0)
    anomalies = np.flatnonzero(votes * 2 > m)
    if anomalies.size == 0:
        msg = "no tick is labelled an outlier by a strict majority; keeping all lists"
        logger.warning(msg)
        return SelectionResult("horizontal", ids, [], {"counts": {i: 0 for i in ids}}, [msg])

    ranks = np.vstack([ranks_from_order(descending_order(s.scores)) for s in S])
    norm = ranks[:, anomalies].T / T  # one row per anomaly
    list_pos = np.arange(m)
    order = np.vstack([np.lexsort((list_pos, row)) for row in norm])
    r_sorted = np.take_along_axis(norm, order, axis=1)
    pvals = order_stat_pvalues(r_sorted)
    m_ind = pvals.argmin(axis=1)  # 0-based position of the minimum

    counts = np.zeros(m, dtype=np.int64)
    for row, k in zip(order, m_ind):
        counts[row[k + 1 :]] += 1

    nonzero = counts > 0
    discard = np.zeros(m, dtype=bool)
    clustered = "none"
    if nonzero.any():
        nz = counts[nonzero]
        if nz.min() != nz.max():
            discard[nonzero] = two_means_high(nz)
            clustered = "nonzero"
        elif not nonzero.all():
            # every flagged list has the same count: compare against the
            # never-flagged lists instead
            discard = two_means_high(counts)
            clustered = "all"
    selected = [ids[i] for i in range(m) if not discard[i]]
    diagnostics = {
        "counts": {ids[i]: int(counts[i]) for i in range(m)},
        "discarded": [ids[i] for i in range(m) if discard[i]],
        "min_p_index": {int(o): int(k) + 1 for o, k in zip(anomalies, m_ind)},
        "clustered": clustered,
    }
    return SelectionResult("horizontal", selected, [int(o) for o in anomalies], diagnostics)


def select_all(S: Sequence[ScoreList]) -> SelectionResult:
    _require(S, 1)
    return SelectionResult("full", [s.detector_id for s in S])


def select_random(S: Sequence[ScoreList], k: int, seed: int | None) -> SelectionResult:
    """Uniform random ``k``-subset, reported in input order."""
    _require(S, 1)
    if not 1 <= k <= len(S):
        raise ValidationError(f"random selection size k={k} must lie in [1, {len(S)}]")
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(S), size=k, replace=False))
    return SelectionResult("random", [S[i].detector_id for i in picked], diagnostics={"k": k, "seed": seed})


def select(
    strategy: str,
    S: Sequence[ScoreList],
    k: int | None = None,
    seed: int | None = None,
    cache: CalibrationCache | None = None,
) -> SelectionResult:
    if strategy == "full":
        return select_all(S)
    if strategy == "vertical":
        return select_vertical(S, cache)
    if strategy == "diverse":
        return select_diverse(S, cache)
    if strategy == "horizontal":
        return select_horizontal(S, cache)
    if strategy == "random":
        if k is None:
            raise ConfigurationError("random selection needs k")
        return select_random(S, min(k, len(S)), seed)
    raise ConfigurationError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj

"""The seven consensus methods.

Rank based: inverse rank, Kemeny-Young and robust rank aggregation (RRA).
Score based: unification or mixture-model probabilities combined by mean or
maximum. Every method returns a :class:`ConsensusResult` whose ``scores``
are oriented so that higher means more anomalous; that is what the
second-phase selection consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calibration import mixture_model, unify
from .errors import CapacityError, ConfigurationError, ValidationError
from .lists import ProbList, RankList, ScoreList, check_aligned, descending_order
from .orderstats import order_stat_pvalues

KEMENY_EXACT_MAX = 12
KEMENY_INSERTION_MAX = 2000

METHODS = ("inverse_rank", "kemeny_young", "rra", "uni_avg", "uni_max", "mm_avg", "mm_max")
METHOD_LABELS = {
    "inverse_rank": "Inverse Rank",
    "kemeny_young": "Kemeny-Young",
    "rra": "RRA",
    "uni_avg": "Uni (avg)",
    "uni_max": "Uni (max)",
    "mm_avg": "MM (avg)",
    "mm_max": "MM (max)",
}


@dataclass(frozen=True)
class ConsensusResult:
    method: str
    scores: ScoreList
    ranklist: RankList
    raw: np.ndarray | None = None  # e.g. RRA's rho before orientation


def _rank_matrix(lists: Sequence[RankList]) -> np.ndarray:
    """``m x T`` matrix of 1-based ranks."""
    check_aligned([len(r) for r in lists])
    return np.vstack([r.ranks for r in lists])


def inverse_rank_scores(lists: Sequence[RankList]) -> np.ndarray:
    return (1.0 / _rank_matrix(lists)).mean(axis=0)


def _order(primary: np.ndarray, tiebreak: np.ndarray | None) -> np.ndarray:
    """Descending by ``primary``, then descending ``tiebreak``, then tick index."""
    if tiebreak is None:
        return descending_order(primary)
    idx = np.arange(len(primary))
    return np.lexsort((idx, -np.asarray(tiebreak), -np.asarray(primary)))


def inverse_rank(lists: Sequence[RankList], method: str = "inverse_rank") -> ConsensusResult:
    """Average of ``1 / rank`` over lists; sorted descending."""
    scores = inverse_rank_scores(lists)
    return ConsensusResult(method, ScoreList(method, scores), RankList(descending_order(scores)))


# -- Kemeny-Young ---------------------------------------------------------


def preference_matrix(R: np.ndarray) -> np.ndarray:
    """``P[i, j]`` = number of voters ranking ``i`` above ``j``."""
    return (R[:, :, None] < R[:, None, :]).sum(axis=0)


def kemeny_cost(order: Sequence[int], P: np.ndarray) -> int:
    """Total pairwise disagreements between ``order`` and the profile."""
    order = np.asarray(order)
    pos = np.empty(len(order), dtype=np.int64)
    pos[order] = np.arange(len(order))
    before = pos[:, None] < pos[None, :]
    return int(P.T[before].sum())


def kemeny_exact(P: np.ndarray) -> np.ndarray:
    """Optimal order by dynamic programming over subsets of placed items.

    ``best[S]`` is the cheapest cost of ordering the items outside ``S`` once
    the items in ``S`` already fill the top positions. Reconstruction picks
    the smallest feasible tick at each step, which yields the
    lexicographically smallest optimal order.
    """
    T = P.shape[0]
    if T > KEMENY_EXACT_MAX:
        raise CapacityError(f"exact Kemeny-Young supports T <= {KEMENY_EXACT_MAX}, got {T}; use heuristic mode")
    full = (1 << T) - 1
    P = P.astype(np.int64)
    col_total = P.sum(axis=0)
    # placed_against[S][j] = sum_{i in S} P[i, j]
    placed_against = np.zeros((1 << T, T), dtype=np.int64)
    for mask in range(1, 1 << T):
        low = (mask & -mask).bit_length() - 1
        placed_against[mask] = placed_against[mask & (mask - 1)] + P[low]
    # placing j next costs the voters who prefer some still-unplaced i over j
    best = np.zeros(1 << T, dtype=np.int64)
    for mask in range(full - 1, -1, -1):
        cands = [j for j in range(T) if not mask >> j & 1]
        costs = [col_total[j] - placed_against[mask, j] + best[mask | 1 << j] for j in cands]
        best[mask] = min(costs)
    order = []
    mask = 0
    while mask != full:
        for j in range(T):
            if mask >> j & 1:
                continue
            if col_total[j] - placed_against[mask, j] + best[mask | 1 << j] == best[mask]:
                order.append(j)
                mask |= 1 << j
                break
    return np.array(order, dtype=np.int64)


def kemeny_heuristic(R: np.ndarray) -> np.ndarray:
    """Borda start, then adjacent swaps while a majority prefers the reverse.

    Swaps run as alternating even/odd sweeps over disjoint adjacent pairs.
    Every swap strictly lowers the Kemeny cost, so the loop ends in a locally
    Kemeny-optimal order.
    """
    m, T = R.shape
    borda = (T - R).sum(axis=0)
    order = descending_order(borda).copy()
    changed = True
    while changed:
        changed = False
        for start in (0, 1):
            a = order[start : T - 1 : 2]
            b = order[start + 1 : T : 2]
            k = min(len(a), len(b))
            a, b = a[:k], b[:k]
            if not k:
                continue
            prefer_b = (R[:, b] < R[:, a]).sum(axis=0)
            swap = prefer_b * 2 > m
            if swap.any():
                idx = start + 2 * np.flatnonzero(swap)
                order[idx], order[idx + 1] = order[idx + 1].copy(), order[idx].copy()
                changed = True
    if T <= KEMENY_INSERTION_MAX:
        order = _insertion_refine(order, preference_matrix(R))
    return order


def _insertion_refine(order: np.ndarray, P: np.ndarray, max_sweeps: int = 100) -> np.ndarray:
    """Move single items to their cheapest position until no move helps.

    Adjacent swaps are insertions by one slot, so this only ever improves on
    the swap phase.
    """
    order = list(order)
    D = (P - P.T).astype(np.int64)  # D[a, b] > 0: majority wants a above b
    for _ in range(max_sweeps):
        improved = False
        for item in list(order):
            i = order.index(item)
            rest = order[:i] + order[i + 1 :]
            # gain of placing item at slot k relative to slot 0: items it jumps
            # below contribute D[other, item]
            gains = np.concatenate([[0], np.cumsum(D[rest, item])])
            current = gains[i]
            k = int(np.argmax(gains))
            if gains[k] > current:
                rest.insert(k, item)
                order = rest
                improved = True
        if not improved:
            break
    return np.array(order, dtype=np.int64)


def kemeny_young(lists: Sequence[RankList], mode: str = "auto", method: str = "kemeny_young") -> ConsensusResult:
    """Kemeny-Young consensus.

    ``mode`` is ``"exact"`` (T <= 12), ``"heuristic"`` or ``"auto"`` (exact
    when it fits). The oriented score of a tick is ``T - rank``.
    """
    R = _rank_matrix(lists)
    T = R.shape[1]
    if mode == "auto":
        mode = "exact" if T <= KEMENY_EXACT_MAX else "heuristic"
    if mode == "exact":
        order = kemeny_exact(preference_matrix(R))
    elif mode == "heuristic":
        order = kemeny_heuristic(R)
    else:
        raise ConfigurationError(f"unknown Kemeny mode {mode!r}")
    rl = RankList(order)
    return ConsensusResult(method, ScoreList(method, (T - rl.ranks).astype(float)), rl)


# -- robust rank aggregation ---------------------------------------------


def rra_rho(lists: Sequence[RankList], correct: bool = True) -> np.ndarray:
    """Per-tick ``rho = min_l p_{l,m}(r)``, Bonferroni-corrected (x m, capped at 1) by default."""
    R = _rank_matrix(lists)
    m, T = R.shape
    r_sorted = np.sort(R.T / T, axis=1)
    rho = order_stat_pvalues(r_sorted).min(axis=1)
    if correct:
        rho = np.minimum(1.0, rho * m)
    return rho


def rra(lists: Sequence[RankList], correct: bool = True, method: str = "rra") -> ConsensusResult:
    """Ascending ``rho`` order; oriented score ``1 - rho``.

    Equal rho (common once the correction caps at 1) falls back to the
    inverse-rank consensus of the same lists.
    """
    rho = rra_rho(lists, correct)
    order = _order(-rho, inverse_rank_scores(lists))
    return ConsensusResult(method, ScoreList(method, 1.0 - rho), RankList(order), raw=rho)


# -- score based ------------------------------------------------------------


def prob_aggregate(
    probs: Sequence[ProbList],
    combiner: str = "avg",
    method: str | None = None,
    tiebreak: np.ndarray | None = None,
) -> ConsensusResult:
    """Combine calibrated probabilities by mean (``"avg"``) or maximum (``"max"``).

    Ticks with equal combined probability are ordered by ``tiebreak``
    (descending) when given, else by tick index.
    """
    check_aligned([len(p.probs) for p in probs])
    M = np.vstack([p.probs for p in probs])
    if combiner == "avg":
        scores = M.mean(axis=0)
    elif combiner == "max":
        scores = M.max(axis=0)
    else:
        raise ConfigurationError(f"unknown combiner {combiner!r}")
    method = method or f"prob_{combiner}"
    return ConsensusResult(method, ScoreList(method, scores), RankList(_order(scores, tiebreak)))


class CalibrationCache:
    """Memoises calibrations of score lists within one analysis.

    Keys combine the list id with its contents, so equal ids with different
    scores never collide.
    """

    def __init__(self):
        self._store: dict[tuple, ProbList] = {}

    def _get(self, kind: str, s: ScoreList, fn) -> ProbList:
        key = (kind, s.detector_id, s.valid_from, s.scores.tobytes())
        hit = self._store.get(key)
        if hit is None:
            hit = self._store[key] = fn(s)
        return hit

    def unify(self, s: ScoreList) -> ProbList:
        return self._get("uni", s, unify)

    def mixture(self, s: ScoreList) -> ProbList:
        return self._get("mm", s, mixture_model)


def run_consensus(
    method: str,
    lists: Sequence[ScoreList],
    kemeny_mode: str = "auto",
    rra_correct: bool = True,
    cache: CalibrationCache | None = None,
) -> ConsensusResult:
    """Apply one of :data:`METHODS` to a set of score lists."""
    if not lists:
        raise ValidationError("consensus needs at least one list")
    check_aligned([s.T for s in lists])
    cache = cache or CalibrationCache()
    if method == "inverse_rank":
        return inverse_rank([s.ranklist() for s in lists])
    if method == "kemeny_young":
        return kemeny_young([s.ranklist() for s in lists], kemeny_mode)
    if method == "rra":
        return rra([s.ranklist() for s in lists], rra_correct)
    tiebreak = inverse_rank_scores([s.ranklist() for s in lists])
    if method in ("uni_avg", "uni_max"):
        return prob_aggregate([cache.unify(s) for s in lists], method[4:], method, tiebreak)
    if method in ("mm_avg", "mm_max"):
        return prob_aggregate([cache.mixture(s) for s in lists], method[3:], method, tiebreak)
    raise ConfigurationError(f"unknown consensus method {method!r}; choose from {METHODS}")

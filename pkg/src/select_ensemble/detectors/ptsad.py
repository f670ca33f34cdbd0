"""Probabilistic time-series anomaly detection on count series.

Every node series is fitted by four count models (Poisson, zero-inflated
Poisson, Bernoulli hurdle + zero-truncated Poisson, first-order Markov hurdle
+ zero-truncated Poisson). Vuong's non-nested likelihood-ratio test picks one
model per series, and each observation gets the one-sided p-value
``P(X >= x)`` under that model. A tick's score is one minus the mean p-value
over the non-skipped nodes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from ..errors import ValidationError
from ..ingestion import FeatureMatrix
from ..lists import ScoreList

logger = logging.getLogger(__name__)

ZIP_MAX_ITER = 200
ZIP_TOL = 1e-8
VUONG_CRITICAL = stats.norm.ppf(0.975)  # two-sided 5%
_TINY = 1e-300


def _poisson_logpmf(x: np.ndarray, lam: float) -> np.ndarray:
    if lam <= 0:
        return np.where(x == 0, 0.0, -np.inf)
    return x * math.log(lam) - lam - gammaln(x + 1)


def _poisson_sf_ge(x: np.ndarray, lam: float) -> np.ndarray:
    """``P(X >= x)`` for a Poisson(lam) variable."""
    return stats.poisson.sf(np.asarray(x) - 1, lam)


def ztp_rate(mean_positive: float) -> float:
    """MLE rate of a zero-truncated Poisson: solve ``lam / (1 - e^-lam) = mean``."""
    if mean_positive <= 1.0:
        return 0.0
    lam = mean_positive
    for _ in range(100):
        e = math.exp(-lam)
        g = lam / (1.0 - e) - mean_positive
        dg = (1.0 - e - lam * e) / (1.0 - e) ** 2
        step = g / dg
        lam = max(lam - step, lam / 2)
        if abs(step) < 1e-12 * max(1.0, lam):
            break
    return lam


def _ztp_logpmf(x: np.ndarray, lam: float) -> np.ndarray:
    """Log-pmf of the zero-truncated Poisson at positive ``x``."""
    if lam <= 0:
        return np.where(x == 1, 0.0, -np.inf)
    return _poisson_logpmf(x, lam) - math.log(-math.expm1(-lam))


def _ztp_sf_ge(x: np.ndarray, lam: float) -> np.ndarray:
    """``P(X >= x)`` for a zero-truncated Poisson, valid for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    if lam <= 0:
        return np.where(x <= 1, 1.0, 0.0)
    return np.minimum(1.0, _poisson_sf_ge(x, lam) / -math.expm1(-lam))


@dataclass
class CountModel:
    """A fitted model that yields per-observation log-likelihoods and tail p-values."""

    name: str
    n_params: int
    params: dict = field(default_factory=dict)

    def loglik(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tail_prob(self, x: np.ndarray) -> np.ndarray:
        """``P(X_t >= x_t)`` for every observation (``1 - cdf + pmf``)."""
        raise NotImplementedError


class PoissonModel(CountModel):
    def __init__(self, lam: float):
        super().__init__("poisson", 1, {"lam": lam})

    @classmethod
    def fit(cls, x: np.ndarray) -> "PoissonModel":
        return cls(float(np.mean(x)))

    def loglik(self, x):
        return _poisson_logpmf(x, self.params["lam"])

    def tail_prob(self, x):
        return _poisson_sf_ge(x, self.params["lam"])


class ZIPModel(CountModel):
    def __init__(self, pi: float, lam: float, converged: bool = True):
        super().__init__("zip", 2, {"pi": pi, "lam": lam})
        self.converged = converged

    @classmethod
    def fit(cls, x: np.ndarray) -> "ZIPModel":
        n = len(x)
        zeros = x == 0
        n0 = int(zeros.sum())
        total = float(x.sum())
        if n0 == 0:
            return cls(0.0, total / n)
        if total == 0:
            return cls(1.0, 0.0)
        lam = total / (n - n0)
        pi = max(0.0, (n0 - n * math.exp(-lam)) / n)
        prev = -np.inf
        converged = False
        for _ in range(ZIP_MAX_ITER):
            p0 = pi + (1 - pi) * math.exp(-lam)
            z = pi / p0
            pi = n0 * z / n
            lam = total / (n - n0 * z)
            ll = n0 * math.log(pi + (1 - pi) * math.exp(-lam)) + float(
                np.sum(_poisson_logpmf(x[~zeros], lam))
            ) + (n - n0) * math.log(max(1 - pi, _TINY))
            if abs(ll - prev) < ZIP_TOL * max(1.0, abs(ll)):
                converged = True
                break
            prev = ll
        return cls(pi, lam, converged)

    def loglik(self, x):
        pi, lam = self.params["pi"], self.params["lam"]
        out = np.empty(len(x))
        zeros = x == 0
        out[zeros] = math.log(max(pi + (1 - pi) * math.exp(-lam), _TINY))
        out[~zeros] = math.log(max(1 - pi, _TINY)) + _poisson_logpmf(x[~zeros], lam)
        return out

    def tail_prob(self, x):
        pi, lam = self.params["pi"], self.params["lam"]
        return np.where(x <= 0, 1.0, (1 - pi) * _poisson_sf_ge(x, lam))


class BernoulliZTPModel(CountModel):
    def __init__(self, p: float, lam: float):
        super().__init__("bernoulli+ztp", 2, {"p": p, "lam": lam})

    @classmethod
    def fit(cls, x: np.ndarray) -> "BernoulliZTPModel":
        pos = x[x > 0]
        p = len(pos) / len(x)
        return cls(p, ztp_rate(float(pos.mean())) if len(pos) else 0.0)

    def loglik(self, x):
        p, lam = self.params["p"], self.params["lam"]
        out = np.empty(len(x))
        zeros = x == 0
        out[zeros] = math.log(max(1 - p, _TINY))
        out[~zeros] = math.log(max(p, _TINY)) + _ztp_logpmf(x[~zeros], lam)
        return out

    def tail_prob(self, x):
        p, lam = self.params["p"], self.params["lam"]
        return np.where(x <= 0, 1.0, p * _ztp_sf_ge(np.maximum(x, 1), lam))


class MarkovZTPModel(CountModel):
    """Activity follows a two-state Markov chain; the first tick uses the marginal rate."""

    def __init__(self, p: float, p01: float, p11: float, lam: float):
        super().__init__("markov+ztp", 3, {"p": p, "p01": p01, "p11": p11, "lam": lam})

    @classmethod
    def fit(cls, x: np.ndarray) -> "MarkovZTPModel":
        active = x > 0
        p = float(active.mean())
        prev, cur = active[:-1], active[1:]
        from0 = int((~prev).sum())
        from1 = int(prev.sum())
        p01 = float((cur & ~prev).sum()) / from0 if from0 else p
        p11 = float((cur & prev).sum()) / from1 if from1 else p
        pos = x[active]
        return cls(p, p01, p11, ztp_rate(float(pos.mean())) if len(pos) else 0.0)

    def _activity_prob(self, x: np.ndarray) -> np.ndarray:
        q = np.empty(len(x))
        q[0] = self.params["p"]
        q[1:] = np.where(x[:-1] > 0, self.params["p11"], self.params["p01"])
        return q

    def loglik(self, x):
        q = self._activity_prob(x)
        lam = self.params["lam"]
        out = np.empty(len(x))
        zeros = x == 0
        out[zeros] = np.log(np.maximum(1 - q[zeros], _TINY))
        out[~zeros] = np.log(np.maximum(q[~zeros], _TINY)) + _ztp_logpmf(x[~zeros], lam)
        return out

    def tail_prob(self, x):
        q = self._activity_prob(x)
        return np.where(x <= 0, 1.0, q * _ztp_sf_ge(np.maximum(x, 1), self.params["lam"]))


def vuong_statistic(ll1: np.ndarray, ll2: np.ndarray) -> float:
    """Uncorrected Vuong z-statistic; positive favours the first model."""
    m = ll1 - ll2
    n = len(m)
    mean = float(m.mean())
    sd = float(m.std(ddof=1)) if n > 1 else 0.0
    if sd <= 1e-12 * max(1.0, abs(mean)):
        if abs(mean) <= 1e-12:
            return 0.0
        return math.copysign(math.inf, mean)
    return math.sqrt(n) * mean / sd


def vuong_winner(a: CountModel, b: CountModel, x: np.ndarray) -> CountModel:
    """Winner of a Vuong test at 5%; a non-significant result keeps the simpler model.

    With equal parameter counts, a tie keeps ``a`` (the incumbent).
    """
    v = vuong_statistic(a.loglik(x), b.loglik(x))
    if v > VUONG_CRITICAL:
        return a
    if v < -VUONG_CRITICAL:
        return b
    return b if b.n_params < a.n_params else a


def select_count_model(x: np.ndarray) -> CountModel:
    """Tournament: Poisson vs ZIP, winner vs Bernoulli+ZTP, winner vs Markov+ZTP."""
    best = vuong_winner(PoissonModel.fit(x), ZIPModel.fit(x), x)
    best = vuong_winner(best, BernoulliZTPModel.fit(x), x)
    return vuong_winner(best, MarkovZTPModel.fit(x), x)


def _as_counts(F: FeatureMatrix, round_counts: bool) -> np.ndarray:
    X = F.values
    rounded = np.rint(X)
    if not np.array_equal(rounded, X):
        if not round_counts:
            raise ValidationError(
                f"PTSAD needs integer counts; {F.feature_name} is non-integer (enable round_counts)"
            )
    return rounded


@dataclass(frozen=True)
class PTSADResult:
    pvalues: np.ndarray  # n x T, 1.0 for skipped nodes
    models: tuple[str | None, ...]
    skipped: int


def node_pvalues(F: FeatureMatrix, round_counts: bool = False) -> PTSADResult:
    X = _as_counts(F, round_counts)
    P = np.ones_like(X)
    names: list[str | None] = []
    skipped = 0
    for i, x in enumerate(X):
        if not np.any(x):
            names.append(None)
            skipped += 1
            continue
        model = select_count_model(x)
        P[i] = np.clip(model.tail_prob(x), 0.0, 1.0)
        names.append(model.name)
    if skipped:
        logger.debug("PTSAD skipped %d all-zero series of %s", skipped, F.feature_name)
    return PTSADResult(P, tuple(names), skipped)


def ptsad(F: FeatureMatrix, round_counts: bool = False, detector_id: str | None = None) -> ScoreList:
    res = node_pvalues(F, round_counts)
    active = np.array([m is not None for m in res.models])
    scores = np.zeros(F.T)
    if active.any():
        scores = 1.0 - res.pvalues[active].sum(axis=0) / active.sum()
    return ScoreList(detector_id or f"PTSAD({F.feature_name})", np.clip(scores, 0.0, 1.0), valid_from=0)

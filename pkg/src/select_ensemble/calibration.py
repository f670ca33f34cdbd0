"""Turning raw score lists into comparable outlier probabilities.

Two calibrations are provided:

* :func:`unify` regularises scores against their mean, then maps them
  through a Gaussian error function.
* :func:`mixture_model` fits an exponential (inliers) plus Gaussian
  (outliers) mixture by EM and reports the posterior of the Gaussian.

Ticks inside a detector's warm-up take no part in fitting and get
probability 0.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.special import erf, logsumexp

from .errors import ValidationError
from .lists import ProbList, ScoreList

logger = logging.getLogger(__name__)

EM_MAX_ITER = 500
EM_TOL = 1e-8
MIN_FIT_TICKS = 10


def unify(s: ScoreList) -> ProbList:
    """Unification: ``max(0, erf((s' - mu') / (sigma' sqrt 2)))`` with ``s' = max(0, s - mean)``."""
    probs = np.zeros(s.T)
    valid = s.scores[s.valid_from :]
    if valid.size:
        reg = np.maximum(0.0, valid - valid.mean())
        mu = reg.mean()
        sigma = reg.std()
        if sigma > 1e-12 * max(1.0, float(np.abs(valid).max())):
            probs[s.valid_from :] = np.maximum(0.0, erf((reg - mu) / (sigma * math.sqrt(2.0))))
    return ProbList(s.detector_id, probs)


def _monotone_envelope(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Running maximum of ``p`` along ascending ``x`` so larger scores never lose probability."""
    order = np.argsort(x, kind="stable")
    out = np.empty_like(p)
    out[order] = np.maximum.accumulate(p[order])
    return out


def _em_exp_gauss(x: np.ndarray) -> tuple[np.ndarray, bool, dict]:
    """EM for ``pi_e Exp(rate) + pi_g N(mu, sigma^2)`` on non-negative ``x``.

    Returns the Gaussian posterior of the best iterate, a convergence flag and
    the fitted parameters.
    """
    n = len(x)
    span = float(x.max())
    mean_floor = 1e-9 * span
    var_floor = (1e-3 * span) ** 2

    xs = np.sort(x)
    k = min(max(int(round(0.9 * n)), 1), n - 1)
    rate = 1.0 / max(float(xs[:k].mean()), mean_floor)
    mu = float(xs[k:].mean())
    var = max(float(xs[k:].var()), var_floor)
    w_e, w_g = 0.9, 0.1

    best_ll, best_post, best_params = -np.inf, None, {}
    prev = -np.inf
    converged = False
    for _ in range(EM_MAX_ITER):
        log_e = math.log(w_e) + math.log(rate) - rate * x
        log_g = math.log(w_g) - 0.5 * math.log(2 * math.pi * var) - (x - mu) ** 2 / (2 * var)
        joint = np.stack([log_e, log_g])
        norm = logsumexp(joint, axis=0)
        ll = float(norm.sum())
        post = np.exp(log_g - norm)
        if ll > best_ll:
            best_ll, best_post = ll, post
            best_params = {"w_gauss": w_g, "rate": rate, "mu": mu, "sigma": math.sqrt(var), "loglik": ll}
        if abs(ll - prev) < EM_TOL * max(1.0, abs(ll)):
            converged = True
            break
        prev = ll

        r_g = post.sum()
        r_e = n - r_g
        if r_g < 1e-12 or r_e < 1e-12:
            converged = True
            break
        w_g = min(max(r_g / n, 1e-12), 1 - 1e-12)
        w_e = 1.0 - w_g
        rate = 1.0 / max(float(((1 - post) * x).sum() / r_e), mean_floor)
        mu = float((post * x).sum() / r_g)
        var = max(float((post * (x - mu) ** 2).sum() / r_g), var_floor)

    return best_post, converged, best_params


def mixture_model(s: ScoreList) -> ProbList:
    """Exponential + Gaussian mixture calibration with binary outlier labels.

    Raises
    ------
    ValidationError
        If fewer than 10 ticks lie outside the warm-up.
    """
    valid = s.scores[s.valid_from :]
    if valid.size < MIN_FIT_TICKS:
        raise ValidationError(
            f"{s.detector_id}: mixture modelling needs >= {MIN_FIT_TICKS} valid ticks, got {valid.size}"
        )
    probs = np.zeros(s.T)
    x = valid - valid.min()
    converged = True
    if x.max() > 0:
        post, converged, _ = _em_exp_gauss(x)
        if not converged:
            logger.warning("%s: mixture EM did not converge; using best iterate", s.detector_id)
        probs[s.valid_from :] = np.clip(_monotone_envelope(x, post), 0.0, 1.0)
    labels = (probs > 0.5).astype(np.int8)
    return ProbList(s.detector_id, probs, labels, converged)

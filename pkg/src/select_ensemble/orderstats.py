"""Order statistics of uniform normalized ranks.

For ``m`` normalized ranks drawn independently from U(0, 1), the probability
that the ``l``-th smallest is at most ``r`` equals the binomial tail

    p_{l,m}(r) = sum_{t=l}^{m} C(m, t) r^t (1 - r)^(m - t)

since at least ``l`` of the draws must land in ``[0, r]``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ValidationError

LOG_DOMAIN_ABOVE = 30


def _tail_direct(r: np.ndarray, l: int, m: int) -> np.ndarray:
    out = np.zeros_like(r, dtype=float)
    q = 1.0 - r
    for t in range(l, m + 1):
        out += math.comb(m, t) * r**t * q ** (m - t)
    return out


def _tail_log(r: np.ndarray, l: int, m: int) -> np.ndarray:
    t = np.arange(l, m + 1, dtype=float)
    log_c = gammaln(m + 1) - gammaln(t + 1) - gammaln(m - t + 1)
    rr = r[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(rr)
        log_q = np.log1p(-rr)
        # 0 * log(0) terms must vanish, not become nan
        term_r = np.where(t == 0, 0.0, t * log_r)
        term_q = np.where(m - t == 0, 0.0, (m - t) * log_q)
    return np.exp(logsumexp(log_c + term_r + term_q, axis=-1))


def binomial_tail(r, l: int, m: int) -> np.ndarray:
    """``p_{l,m}(r)`` evaluated elementwise on ``r``."""
    if not 1 <= l <= m:
        raise ValidationError(f"order index l={l} must satisfy 1 <= l <= m={m}")
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    if m > LOG_DOMAIN_ABOVE:
        p = _tail_log(r, l, m)
    else:
        p = _tail_direct(r, l, m)
    return np.clip(p, 0.0, 1.0)


def binomial_order_prob(r_sorted, l: int, m: int) -> float:
    """Probability that the ``l``-th smallest of ``m`` uniforms is ``<= r_sorted[l-1]``.

    Parameters
    ----------
    r_sorted : sequence of float
        Non-decreasing normalized ranks in [0, 1]. Only entry ``l - 1`` is used.
    l : int
        1-based order index.
    m : int
        Number of ranks.
    """
    r_sorted = np.asarray(r_sorted, dtype=float)
    if not 1 <= l <= m:
        raise ValidationError(f"order index l={l} must satisfy 1 <= l <= m={m}")
    if r_sorted.shape[-1] < l:
        raise ValidationError("r_sorted is shorter than l")
    return float(binomial_tail(r_sorted[..., l - 1], l, m))


def order_stat_pvalues(r_sorted: np.ndarray) -> np.ndarray:
    """All ``p_{l,m}`` for rows of sorted normalized ranks.

    ``r_sorted`` has shape ``(N, m)``; the result has the same shape with
    column ``l - 1`` holding ``p_{l,m}(r_(l))``.
    """
    r_sorted = np.atleast_2d(np.asarray(r_sorted, dtype=float))
    m = r_sorted.shape[1]
    out = np.empty_like(r_sorted)
    for l in range(1, m + 1):
        out[:, l - 1] = binomial_tail(r_sorted[:, l - 1], l, m)
    return out

"""Streaming pattern discovery (SPIRIT) turned into a per-tick change score.

Participation weights are tracked with SPIRIT's incremental update: for each
hidden variable, project the stream, update its energy and nudge the weight
vector toward the residual, then deflate. The number of hidden variables
``k`` adapts so the energy captured by the current weights stays inside
``energy_bounds`` of the total. Both energies are exponentially discounted
by ``lam``.

A tick scores ``|delta k|`` plus the rise in relative reconstruction error
from the previous tick, so both "a new trend appeared" and "the current
trends stopped explaining the data" register.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..ingestion import FeatureMatrix
from ..lists import ScoreList

DEFAULT_LAMBDA = 0.96
DEFAULT_ENERGY = (0.95, 0.98)


@dataclass(frozen=True)
class SpiritTrace:
    k: np.ndarray  # hidden-variable count after each tick
    rel_error: np.ndarray  # reconstruction error / ||x_t|| before the update
    weight_change: np.ndarray  # n x T absolute participation-weight change
    valid_from: int


def warmup_length(n: int) -> int:
    return max(5, n // 10)


def _orthonormalize(W: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(W)
    # keep each column's orientation
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _new_direction(residual: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Unit vector for a new hidden variable, orthogonal to ``W``."""
    n = len(residual)
    candidates = [residual] + [np.eye(n)[i] for i in range(n)]
    for c in candidates:
        v = c - W @ (W.T @ c) if W.shape[1] else c.copy()
        norm = np.linalg.norm(v)
        if norm > 1e-9 * max(1.0, np.linalg.norm(c)):
            return v / norm
    return np.eye(n)[0]


def spirit_trace(
    F: FeatureMatrix,
    energy_bounds: tuple[float, float] = DEFAULT_ENERGY,
    lam: float = DEFAULT_LAMBDA,
) -> SpiritTrace:
    low, high = energy_bounds
    if not 0 < lam <= 1:
        raise ConfigurationError("forgetting factor must lie in (0, 1]")
    if not 0 < low < high < 1:
        raise ConfigurationError("energy bounds must satisfy 0 < low < high < 1")

    X = F.values
    n, T = X.shape
    W = np.zeros((n, 0))
    d = np.zeros(0)  # per-variable discounted projection energy (step sizes)
    C = np.zeros((n, n))  # discounted second-moment matrix of the streams
    k_hist = np.zeros(T, dtype=np.int64)
    rel_err = np.zeros(T)
    change = np.zeros((n, T))

    for t in range(T):
        x = X[:, t]
        xnorm = np.linalg.norm(x)
        W_prev = W.copy()
        if W.shape[1]:
            recon = W @ (W.T @ x)
            rel_err[t] = np.linalg.norm(x - recon) / xnorm if xnorm > 0 else 0.0
        elif xnorm > 0:
            rel_err[t] = 1.0
        C = lam * C + np.outer(x, x)

        if W.shape[1] == 0:
            if xnorm > 0:
                # first non-zero observation seeds the first participation vector
                W = (x / xnorm)[:, None]
                d = np.array([xnorm**2])
            k_hist[t] = W.shape[1]
            continue

        resid = x.copy()
        for i in range(W.shape[1]):
            w = W[:, i]
            y = w @ resid
            d[i] = lam * d[i] + y * y
            e = resid - y * w
            if d[i] > 0:
                w = w + (y / d[i]) * e
            nw = np.linalg.norm(w)
            W[:, i] = w / nw if nw > 0 else W_prev[:, i]
            resid = resid - (W[:, i] @ resid) * W[:, i]
        W = _orthonormalize(W)

        total = np.trace(C)
        if total > 0:
            captured = np.einsum("ij,ij->j", W, C @ W)
            k = W.shape[1]
            if captured.sum() < low * total and k < n:
                r = x - W @ (W.T @ x)
                w_new = _new_direction(r, W)
                W = np.column_stack([W, w_new])
                d = np.append(d, max(float(w_new @ C @ w_new), 1e-12))
            elif k > 1 and captured[:-1].sum() > high * total:
                W = W[:, :-1]
                d = d[:-1]

        common = min(W.shape[1], W_prev.shape[1])
        if common:
            change[:, t] = np.abs(W[:, :common] - W_prev[:, :common]).sum(axis=1)
        k_hist[t] = W.shape[1]

    return SpiritTrace(k_hist, rel_err, change, min(warmup_length(n), T))


def spirit(
    F: FeatureMatrix,
    energy_bounds: tuple[float, float] = DEFAULT_ENERGY,
    lam: float = DEFAULT_LAMBDA,
    detector_id: str | None = None,
) -> ScoreList:
    tr = spirit_trace(F, energy_bounds, lam)
    T = F.T
    scores = np.zeros(T)
    if T > 1:
        dk = np.abs(np.diff(tr.k)).astype(float)
        rise = np.maximum(0.0, np.diff(tr.rel_error))
        scores[1:] = dk + rise
    scores[: tr.valid_from] = 0.0
    return ScoreList(detector_id or f"SPIRIT({F.feature_name})", scores, valid_from=tr.valid_from)

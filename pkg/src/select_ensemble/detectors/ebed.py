"""Eigen-behavior based event detection.

Each length-``w`` window of the node x time matrix is summarised by its
principal left singular vector (the "eigen-behavior"). A window is scored by
how far its eigen-behavior points away from the normalised average of all
earlier ones.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..ingestion import FeatureMatrix
from ..lists import ScoreList


def principal_vector(W: np.ndarray) -> np.ndarray:
    """Non-negative unit principal left singular vector of ``W``.

    An all-zero window has no principal direction; the uniform unit vector is
    returned instead.
    """
    n = W.shape[0]
    if not np.any(W):
        return np.full(n, 1.0 / np.sqrt(n))
    u, _, _ = np.linalg.svd(W, full_matrices=False)
    u = u[:, 0]
    # Perron-Frobenius: the principal vector of a non-negative matrix can be
    # taken non-negative; abs() also absorbs round-off sign noise.
    if u.sum() < 0:
        u = -u
    u = np.abs(u)
    return u / np.linalg.norm(u)


def eigen_behaviors(F: FeatureMatrix, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(U, R)``: per-window eigen-behaviors and past summaries.

    Column ``j`` of ``U`` belongs to the window ending at tick ``j + w - 1``.
    ``R[:, j]`` is the unit-normalised mean of ``U[:, :j]`` (zero for j=0).
    """
    if not 2 <= w <= F.T:
        raise ConfigurationError(f"EBED window length must satisfy 2 <= w <= T={F.T}, got {w}")
    X = F.values
    n_win = F.T - w + 1
    U = np.empty((F.n, n_win))
    for j in range(n_win):
        U[:, j] = principal_vector(X[:, j : j + w])
    R = np.zeros_like(U)
    running = np.zeros(F.n)
    for j in range(n_win):
        if j:
            norm = np.linalg.norm(running)
            R[:, j] = running / norm if norm > 0 else running
        running += U[:, j]
    return U, R


def ebed(F: FeatureMatrix, w: int = 5, detector_id: str | None = None) -> ScoreList:
    """Score each window end-tick by ``Z = 1 - u(t) . r(t)``, clamped to [0, 1]."""
    U, R = eigen_behaviors(F, w)
    scores = np.zeros(F.T)
    z = 1.0 - np.einsum("ij,ij->j", U[:, 1:], R[:, 1:])
    scores[w:] = np.clip(z, 0.0, 1.0)
    return ScoreList(detector_id or f"EBED({F.feature_name})", scores, valid_from=min(w, F.T))


def ebed_responsibility(F: FeatureMatrix, tick: int, w: int = 5) -> np.ndarray:
    """Relative eigen-change ``|u_i - r_i| / u_i``; zero where ``u_i = 0``."""
    U, R = eigen_behaviors(F, w)
    j = tick - w + 1
    u, r = U[:, j], R[:, j]
    out = np.zeros(F.n)
    nz = u > 0
    out[nz] = np.abs(u[nz] - r[nz]) / u[nz]
    return out

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class Attribution:
    """Nodes ordered by how much they contributed to the score at ``tick``."""

    tick: int
    ranked_nodes: tuple[str, ...]
    responsibility: np.ndarray

    def __post_init__(self):
        if len(set(self.ranked_nodes)) != len(self.ranked_nodes):
            raise ValidationError("ranked_nodes must be duplicate-free")
        r = np.asarray(self.responsibility, dtype=float)
        if np.any(r < 0) or np.any(np.diff(r) > 0):
            raise ValidationError("responsibility must be non-negative and non-increasing")
        object.__setattr__(self, "responsibility", r)


def rank_nodes(node_ids, responsibility: np.ndarray, tick: int) -> Attribution:
    """Sort nodes by descending responsibility; ties keep node order."""
    resp = np.asarray(responsibility, dtype=float)
    order = np.argsort(-resp, kind="stable")
    return Attribution(tick, tuple(node_ids[i] for i in order), resp[order])

"""Score, probability and rank lists over the time axis.

All three are indexed by tick ``0..T-1``. A single tie rule is used
everywhere a score becomes a ranking: descending score, ties broken by
ascending tick index.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError


def descending_order(scores: np.ndarray) -> np.ndarray:
    """Ticks sorted by descending score, ties by ascending tick."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def ranks_from_order(order: np.ndarray) -> np.ndarray:
    """1-based rank of every tick given an order (most anomalous first)."""
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(1, len(order) + 1)
    return ranks


@dataclass(frozen=True)
class ScoreList:
    """Per-tick anomaly scores, higher means more anomalous.

    Entries before ``valid_from`` belong to a detector's warm-up and are
    exactly zero.
    """

    detector_id: str
    scores: np.ndarray
    valid_from: int = 0

    def __post_init__(self):
        s = np.array(self.scores, dtype=float)
        if s.ndim != 1:
            raise ValidationError("scores must be one-dimensional")
        if not np.all(np.isfinite(s)):
            raise ValidationError(f"{self.detector_id}: scores must be finite")
        if not 0 <= self.valid_from <= len(s):
            raise ValidationError(f"{self.detector_id}: valid_from out of range")
        if np.any(s[: self.valid_from] != 0):
            raise ValidationError(f"{self.detector_id}: warm-up scores must be zero")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def T(self) -> int:
        return len(self.scores)

    def ranklist(self) -> "RankList":
        return RankList(descending_order(self.scores))

    def to_dict(self) -> dict:
        return {
            "detector_id": self.detector_id,
            "valid_from": int(self.valid_from),
            "scores": [float(x) for x in self.scores],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreList":
        return cls(d["detector_id"], np.asarray(d["scores"], dtype=float), int(d.get("valid_from", 0)))

    def to_csv(self, path: str | Path | None = None, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tick", "score"])
        for t, s in enumerate(self.scores):
            w.writerow([t, repr(float(s))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


@dataclass(frozen=True)
class ProbList:
    """Calibrated per-tick outlier probabilities derived from a :class:`ScoreList`."""

    source_id: str
    probs: np.ndarray
    labels: np.ndarray | None = None
    converged: bool = True

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValidationError(f"{self.source_id}: probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if self.labels is not None:
            lab = np.array(self.labels, dtype=np.int8)
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)


@dataclass(frozen=True, eq=False)
class RankList:
    """Permutation of ticks ordered from most to least anomalous."""

    order: np.ndarray
    tie_groups: tuple[tuple[int, ...], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        o = np.array(self.order, dtype=np.int64)
        if o.ndim != 1 or not np.array_equal(np.sort(o), np.arange(len(o))):
            raise ValidationError("order must be a permutation of 0..T-1")
        o.setflags(write=False)
        object.__setattr__(self, "order", o)

    def __len__(self) -> int:
        return len(self.order)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RankList):
            return NotImplemented
        return np.array_equal(self.order, other.order)

    __hash__ = None

    @property
    def ranks(self) -> np.ndarray:
        """1-based rank of each tick."""
        return ranks_from_order(self.order)

    def to_csv(
        self,
        scores: np.ndarray | None = None,
        path: str | Path | None = None,
        header_lines: Sequence[str] = (),
    ) -> str:
        """Rows of ``rank,tick,score`` (score column empty when unknown)."""
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "tick", "score"])
        for rank, tick in enumerate(self.order, start=1):
            w.writerow([rank, int(tick), "" if scores is None else repr(float(scores[tick]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def check_aligned(lengths: Sequence[int]) -> int:
    """Common length of a collection of lists, or a validation error."""
    if not lengths:
        raise ValidationError("at least one list is required")
    if len(set(lengths)) != 1:
        raise ValidationError(f"lists cover different tick sets (lengths {sorted(set(lengths))})")
    return lengths[0]

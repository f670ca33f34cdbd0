"""Edge-stream loading and node-level degree features.

Edge lists are plain CSV files with rows ``time,src,dst[,weight]``. Lines
starting with ``#`` are comments and a leading ``time,...`` header row is
optional. Raw times are either numbers or ISO-8601 timestamps (converted to
POSIX seconds) and are bucketed into consecutive integer ticks by a
:class:`TickSpec`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, ParseError, ValidationError

FEATURE_NAMES = (
    "weighted-in-degree",
    "weighted-out-degree",
    "unweighted-in-degree",
    "unweighted-out-degree",
    "weighted-degree",
    "unweighted-degree",
)

DAY = 86400.0


@dataclass(frozen=True)
class Snapshot:
    """Edges of one tick as parallel arrays of node indices and weights."""

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray

    def __len__(self) -> int:
        return int(self.src.shape[0])


@dataclass(frozen=True)
class TemporalGraphSequence:
    """Ordered graph snapshots over a fixed node universe.

    ``node_ids`` is the global id space; snapshot edges store indices into it.
    Undirected sequences keep each edge once with ``src <= dst``.
    """

    timestamps: np.ndarray
    snapshots: tuple[Snapshot, ...]
    node_ids: tuple[str, ...]
    directed: bool = True

    def __post_init__(self):
        ts = np.asarray(self.timestamps)
        if ts.ndim != 1 or ts.shape[0] != len(self.snapshots):
            raise ValidationError("one timestamp per snapshot is required")
        if ts.shape[0] < 2:
            raise ValidationError(f"need at least 2 ticks, got {ts.shape[0]}")
        if np.any(np.diff(ts) <= 0):
            raise ValidationError("timestamps must be strictly increasing")
        n = len(self.node_ids)
        for snap in self.snapshots:
            if len(snap) and (snap.weight.min() < 0):
                raise ValidationError("edge weights must be non-negative")
            if len(snap) and (max(snap.src.max(), snap.dst.max()) >= n or min(snap.src.min(), snap.dst.min()) < 0):
                raise ValidationError("edge endpoint outside the node universe")
            if not self.directed and len(snap) and np.any(snap.src > snap.dst):
                raise ValidationError("undirected edges must satisfy src <= dst")

    @property
    def T(self) -> int:
        return len(self.snapshots)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[int, object, object, float]],
        T: int | None = None,
        directed: bool = True,
        node_ids: Sequence[object] | None = None,
    ) -> "TemporalGraphSequence":
        """Build a sequence from ``(tick, src, dst, weight)`` tuples.

        Ticks are taken as given (0-based); every tick in ``range(T)`` gets a
        snapshot, empty if no edge falls in it.
        """
        edges = list(edges)
        ids = _sorted_ids(
            [str(v) for v in node_ids] if node_ids is not None
            else [str(e[1]) for e in edges] + [str(e[2]) for e in edges]
        )
        index = {v: i for i, v in enumerate(ids)}
        if T is None:
            T = (max(int(e[0]) for e in edges) + 1) if edges else 0
        buckets: list[list[tuple[int, int, float]]] = [[] for _ in range(T)]
        for tick, s, d, w in edges:
            tick = int(tick)
            if not 0 <= tick < T:
                raise ValidationError(f"tick {tick} outside [0, {T})")
            buckets[tick].append((index[str(s)], index[str(d)], float(w)))
        snaps = tuple(_make_snapshot(b, directed) for b in buckets)
        return cls(np.arange(T, dtype=np.int64), snaps, tuple(ids), directed)


@dataclass(frozen=True)
class FeatureMatrix:
    """``n x T`` grid of one node feature over time."""

    node_ids: tuple[str, ...]
    feature_name: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != len(self.node_ids):
            raise ValidationError("values must be an n x T matrix matching node_ids")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError("feature values must be finite and non-negative")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path: str | Path | None = None, header_lines: Sequence[str] = ()) -> str:
        """Serialize with node ids as row labels and ticks as column labels."""
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_id"] + [str(t) for t in range(self.T)])
        for node, row in zip(self.node_ids, self.values):
            w.writerow([node] + [repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


@dataclass(frozen=True)
class TickSpec:
    """Maps raw edge times onto consecutive integer ticks.

    Parameters
    ----------
    width : float
        Bucket width in raw time units (seconds for ISO timestamps).
    origin : float, optional
        Start of bucket 0. Defaults to the smallest time in the file.
    skip : callable, optional
        ``skip(bucket_start) -> bool``; skipped buckets and their edges are
        dropped and the remaining buckets renumbered.
    """

    width: float = 1.0
    origin: float | None = None
    skip: Callable[[float], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError("tick width must be positive")


def skip_weekends(bucket_start: float) -> bool:
    """Skip predicate for daily buckets of POSIX-second times (UTC)."""
    return datetime.fromtimestamp(bucket_start, tz=timezone.utc).weekday() >= 5


def daily_skipping_weekends(origin: float | None = None) -> TickSpec:
    return TickSpec(width=DAY, origin=origin, skip=skip_weekends)


def _parse_time(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        pass
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _id_key(v: str):
    try:
        return (0, int(v), "")
    except ValueError:
        return (1, 0, v)


def _sorted_ids(ids: Iterable[str]) -> list[str]:
    return sorted(set(ids), key=_id_key)


def _make_snapshot(rows: list[tuple[int, int, float]], directed: bool) -> Snapshot:
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return Snapshot(empty, empty.copy(), np.zeros(0))
    arr = np.array(rows, dtype=float)
    src = arr[:, 0].astype(np.int64)
    dst = arr[:, 1].astype(np.int64)
    if not directed:
        src, dst = np.minimum(src, dst), np.maximum(src, dst)
    return Snapshot(src, dst, arr[:, 2].copy())


def parse_edge_rows(lines: Iterable[str]) -> list[tuple[float, str, str, float]]:
    """Parse CSV edge rows, reporting the 1-based line number of any bad row."""
    rows = []
    seen_data = False
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([stripped]))]
        if not seen_data and fields and fields[0].lower() == "time":
            seen_data = True
            continue
        seen_data = True
        if len(fields) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(fields)}", lineno)
        try:
            t = _parse_time(fields[0])
        except ValueError:
            raise ParseError(f"unparseable time {fields[0]!r}", lineno) from None
        if not math.isfinite(t):
            raise ParseError("time must be finite", lineno)
        if not fields[1] or not fields[2]:
            raise ParseError("empty node id", lineno)
        weight = 1.0
        if len(fields) == 4:
            try:
                weight = float(fields[3])
            except ValueError:
                raise ParseError(f"unparseable weight {fields[3]!r}", lineno) from None
            if not math.isfinite(weight):
                raise ParseError("weight must be finite", lineno)
            if weight < 0:
                raise ValidationError(f"line {lineno}: negative weight {weight}")
        rows.append((t, fields[1], fields[2], weight))
    return rows


def load_edge_stream(
    path: str | Path,
    directed: bool = True,
    tick_spec: TickSpec | None = None,
) -> TemporalGraphSequence:
    """Load a CSV edge list and bucket it into a :class:`TemporalGraphSequence`.

    Empty buckets between the first and last edge are kept as empty
    snapshots so the time axis stays regular.
    """
    tick_spec = tick_spec or TickSpec()
    with open(path, encoding="utf-8") as fh:
        rows = parse_edge_rows(fh)
    if not rows:
        raise ValidationError(f"{path}: no edges, need at least 2 ticks")

    times = np.array([r[0] for r in rows])
    origin = float(times.min()) if tick_spec.origin is None else float(tick_spec.origin)
    if np.any(times < origin):
        raise ValidationError("edge time earlier than tick origin")
    bucket = np.floor((times - origin) / tick_spec.width).astype(np.int64)
    n_buckets = int(bucket.max()) + 1

    keep = np.ones(n_buckets, dtype=bool)
    if tick_spec.skip is not None:
        keep = np.array([not tick_spec.skip(origin + b * tick_spec.width) for b in range(n_buckets)])
    tick_of_bucket = np.cumsum(keep) - 1
    T = int(keep.sum())
    if T < 2:
        raise ValidationError(f"{path}: only {T} tick(s) after bucketing, need at least 2")

    ids = _sorted_ids([r[1] for r in rows] + [r[2] for r in rows])
    index = {v: i for i, v in enumerate(ids)}
    per_tick: list[list[tuple[int, int, float]]] = [[] for _ in range(T)]
    for (t, s, d, w), b in zip(rows, bucket):
        if keep[b]:
            per_tick[tick_of_bucket[b]].append((index[s], index[d], w))
    snaps = tuple(_make_snapshot(r, directed) for r in per_tick)
    return TemporalGraphSequence(np.flatnonzero(keep).astype(np.int64), snaps, tuple(ids), directed)


def extract_features(g: TemporalGraphSequence, feature_name: str) -> FeatureMatrix:
    """Per-node degree series for one feature.

    Weighted variants sum incident edge weights, unweighted variants count
    incident edges (parallel edges count separately).
    """
    if feature_name not in FEATURE_NAMES:
        raise ConfigurationError(f"unknown feature {feature_name!r}; choose from {FEATURE_NAMES}")
    directional = "-in-" in feature_name or "-out-" in feature_name
    if directional and not g.directed:
        raise ConfigurationError(f"{feature_name} requires a directed graph sequence")
    weighted = feature_name.startswith("weighted")

    out = np.zeros((g.n_nodes, g.T))
    for t, snap in enumerate(g.snapshots):
        if not len(snap):
            continue
        w = snap.weight if weighted else np.ones(len(snap))
        if feature_name.endswith("in-degree"):
            out[:, t] = np.bincount(snap.dst, weights=w, minlength=g.n_nodes)
        elif feature_name.endswith("out-degree"):
            out[:, t] = np.bincount(snap.src, weights=w, minlength=g.n_nodes)
        else:
            out[:, t] = np.bincount(snap.src, weights=w, minlength=g.n_nodes) + np.bincount(
                snap.dst, weights=w, minlength=g.n_nodes
            )
    return FeatureMatrix(g.node_ids, feature_name, out)

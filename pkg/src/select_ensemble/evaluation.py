"""Accuracy measurement, random-ensemble significance and noise experiments."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .consensus import CalibrationCache
from .errors import ValidationError
from .ingestion import TemporalGraphSequence
from .lists import RankList, ScoreList
from .pipeline import PipelineConfig, Strategy, run_detectors, run_ensemble


def derive_seed(master: int, *counter: int) -> int:
    """Child seed for position ``counter`` under ``master``.

    Uses numpy's ``SeedSequence(master, spawn_key=counter)``, so every
    (master, counter) pair maps to an independent, reproducible stream.
    """
    return int(np.random.SeedSequence(int(master), spawn_key=tuple(int(c) for c in counter)).generate_state(1)[0])


@dataclass(frozen=True)
class EventTruth:
    event_ticks: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def check(self, T: int) -> None:
        if not self.event_ticks:
            raise ValidationError("ground truth is empty")
        bad = [t for t in self.event_ticks if not 0 <= t < T]
        if bad:
            raise ValidationError(f"event ticks outside [0, {T}): {bad}")

    def expanded(self, T: int, delay: int) -> np.ndarray:
        """Boolean mask of ticks within ``delay`` of some event."""
        if delay < 0:
            raise ValidationError("delay must be non-negative")
        self.check(T)
        mask = np.zeros(T, dtype=bool)
        for t in self.event_ticks:
            mask[max(0, t - delay) : min(T, t + delay + 1)] = True
        return mask

    @classmethod
    def read(cls, path) -> "EventTruth":
        """One tick per line; text after the tick becomes its label; ``#`` comments allowed."""
        ticks, labels = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                head, _, rest = line.replace(",", " ", 1).partition(" ")
                try:
                    ticks.append(int(head))
                except ValueError:
                    raise ValidationError(f"{path}: line {lineno}: not an integer tick: {head!r}") from None
                labels.append(rest.strip())
        if not ticks:
            raise ValidationError(f"{path}: ground truth is empty")
        return cls(tuple(ticks), tuple(labels) if any(labels) else None)

    def write(self, path) -> None:
        lines = []
        for i, t in enumerate(self.event_ticks):
            label = self.labels[i] if self.labels else ""
            lines.append(f"{t} {label}".rstrip())
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def _order_of(r: RankList | Sequence[int] | np.ndarray) -> np.ndarray:
    return np.asarray(r.order if isinstance(r, RankList) else r, dtype=np.int64)


def average_precision(r: RankList | Sequence[int], truth: EventTruth, delay: int = 0) -> float:
    """Mean precision at the rank of every positive, over all positives.

    Ticks within ``delay`` of a ground-truth event are positives.
    """
    order = _order_of(r)
    positives = truth.expanded(len(order), delay)
    hits = positives[order]
    n_pos = int(positives.sum())
    cum = np.cumsum(hits)
    k = np.arange(1, len(order) + 1)
    return float((cum[hits] / k[hits]).sum() / n_pos)


def pr_curve(r: RankList | Sequence[int], truth: EventTruth, delay: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall after each cutoff of the ranking."""
    order = _order_of(r)
    positives = truth.expanded(len(order), delay)
    cum = np.cumsum(positives[order])
    k = np.arange(1, len(order) + 1)
    return cum / k, cum / positives.sum()


def inject_noise(S: Sequence[ScoreList], k: int, seed: int | None) -> list[ScoreList]:
    """Append ``k`` lists, each a random permutation of a random source list's scores."""
    if not S:
        raise ValidationError("need at least one source list")
    if k < 0:
        raise ValidationError("k must be non-negative")
    rng = np.random.default_rng(seed)
    out = list(S)
    for i in range(k):
        src = S[int(rng.integers(len(S)))]
        out.append(ScoreList(f"noise-{i + 1}", src.scores[rng.permutation(src.T)]))
    return out


@dataclass
class EvalReport:
    ap_by_delay: dict[int, float]
    rand_mu: float | None = None
    rand_sigma: float | None = None
    z_gain: float | None = None
    z_gain_applicable: bool = False
    k1: int | None = None
    k2: int | None = None
    trials: int = 0
    random_aps: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ap_by_delay": {str(d): v for d, v in sorted(self.ap_by_delay.items())},
            "rand_mu": self.rand_mu,
            "rand_sigma": self.rand_sigma,
            "z_gain": self.z_gain,
            "z_gain_applicable": self.z_gain_applicable,
            "k1": self.k1,
            "k2": self.k2,
            "trials": self.trials,
            "random_aps": list(self.random_aps),
        }

    def to_json(self, extra: dict | None = None) -> str:
        payload = dict(extra or {})
        payload.update(self.to_dict())
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def ap_by_delay(r: RankList, truth: EventTruth, delay_max: int) -> dict[int, float]:
    return {d: average_precision(r, truth, d) for d in range(delay_max + 1)}


def random_ensemble_stats(
    scores: Sequence[ScoreList],
    cfg: PipelineConfig,
    truth: EventTruth,
    k1: int,
    k2: int,
    trials: int,
    seed: int,
    delay: int = 0,
    cache: CalibrationCache | None = None,
) -> list[float]:
    """APs of ``trials`` ensembles that pick ``k1`` detectors and ``k2`` consensus results at random."""
    cache = cache or CalibrationCache()
    aps = []
    for i in range(trials):
        s = derive_seed(seed, i)
        rcfg = PipelineConfig(
            detectors=cfg.detectors,
            features=cfg.features,
            strategy=Strategy("random", k1, s),
            phase2_strategy=Strategy("random", k2, s),
            consensus_set=cfg.consensus_set,
            kemeny_mode=cfg.kemeny_mode,
            rra_correct=cfg.rra_correct,
            round_counts=cfg.round_counts,
        )
        aps.append(average_precision(run_ensemble(scores, rcfg, cache).final, truth, delay))
    return aps


def significance_vs_random(
    g: TemporalGraphSequence | None,
    cfg: PipelineConfig,
    truth: EventTruth,
    trials: int = 100,
    seed: int = 0,
    delay: int = 0,
    delay_max: int = 0,
    scores: Sequence[ScoreList] | None = None,
) -> EvalReport:
    """Compare the selective ensemble with random ensembles of equal size.

    Either ``g`` or precomputed component ``scores`` must be given.
    """
    if trials < 2:
        raise ValidationError("need at least 2 random trials")
    if scores is None:
        if g is None:
            raise ValidationError("pass a graph sequence or component scores")
        scores = run_detectors(g, cfg)
    cache = CalibrationCache()
    report = run_ensemble(scores, cfg, cache)
    k1, k2 = len(report.phase1.selected), len(report.phase2.selected)
    ap_sel = average_precision(report.final, truth, delay)
    aps = random_ensemble_stats(scores, cfg, truth, k1, k2, trials, seed, delay, cache)
    mu = float(np.mean(aps))
    sigma = float(np.std(aps, ddof=1))
    applicable = sigma > 0
    curve = ap_by_delay(report.final, truth, max(delay_max, delay))
    return EvalReport(
        curve,
        mu,
        sigma,
        (ap_sel - mu) / sigma if applicable else None,
        applicable,
        k1,
        k2,
        trials,
        aps,
    )


def noise_sweep(
    scores: Sequence[ScoreList],
    truth: EventTruth,
    cfg: PipelineConfig,
    strategies: Iterable[str] = ("full", "diverse", "vertical", "horizontal"),
    k_max: int = 10,
    repeats: int = 10,
    seed: int = 0,
    delay: int = 0,
) -> list[tuple[str, int, float]]:
    """Mean AP per (strategy, number of noisy lists).

    For every (k, repeat) pair the same noisy lists are shown to every
    strategy, so the comparison between strategies is paired.
    """
    strategies = list(strategies)
    sums = {(s, k): 0.0 for s in strategies for k in range(k_max + 1)}
    for k in range(k_max + 1):
        reps = 1 if k == 0 else repeats
        for rep in range(reps):
            noisy = inject_noise(scores, k, derive_seed(seed, k, rep))
            cache = CalibrationCache()
            for name in strategies:
                scfg = PipelineConfig(
                    detectors=cfg.detectors,
                    features=cfg.features,
                    strategy=Strategy(name),
                    consensus_set=cfg.consensus_set,
                    kemeny_mode=cfg.kemeny_mode,
                    rra_correct=cfg.rra_correct,
                    round_counts=cfg.round_counts,
                )
                ap = average_precision(run_ensemble(noisy, scfg, cache).final, truth, delay)
                sums[(name, k)] += ap / reps
    return [(s, k, sums[(s, k)]) for s in strategies for k in range(k_max + 1)]


# -- synthetic benchmark ---------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs of the synthetic benchmark; defaults give a sub-second run."""

    n_nodes: int = 100
    T: int = 200
    p_edge: float = 0.02
    clique_size: int = 10
    clique_weight: float = 3.0
    min_gap: int = 4
    warmup: int = 10


def _event_ticks(events, spec: SyntheticSpec, rng: np.random.Generator) -> list[int]:
    if isinstance(events, (int, np.integer)):
        count = int(events)
        if count < 1:
            raise ValidationError("at least one planted event is required")
        lo, hi = spec.warmup, spec.T - 1
        if count * spec.min_gap > hi - lo:
            raise ValidationError("too many events for the time range")
        for _ in range(10_000):
            ticks = np.sort(rng.choice(np.arange(lo, hi), size=count, replace=False))
            if count == 1 or np.diff(ticks).min() >= spec.min_gap:
                return [int(t) for t in ticks]
        raise ValidationError("could not place events with the requested spacing")
    ticks = sorted(int(t) for t in events)
    if not ticks:
        raise ValidationError("at least one planted event is required")
    bad = [t for t in ticks if not 0 <= t < spec.T]
    if bad:
        raise ValidationError(f"event ticks outside [0, {spec.T}): {bad}")
    return ticks


def make_synthetic(
    n_nodes: int = 100,
    T: int = 200,
    events: int | Sequence[int] = 10,
    seed: int | None = 0,
    **overrides,
) -> tuple[TemporalGraphSequence, EventTruth]:
    """Directed weighted graph stream with planted clique events.

    Background: every ordered pair links independently per tick with
    probability proportional to the product of the two nodes' activity
    levels (mean ``p_edge``), weight ``1 + Poisson(1)``. At each event tick a
    random subset of ``clique_size`` nodes forms a dense clique whose edges
    weigh ``1 + Poisson(clique_weight)``.
    """
    spec = SyntheticSpec(n_nodes=n_nodes, T=T, **overrides)
    rng = np.random.default_rng(seed)
    ticks = _event_ticks(events, spec, rng)

    activity = rng.lognormal(0.0, 0.5, size=n_nodes)
    activity /= activity.mean()
    prob = np.clip(spec.p_edge * np.outer(activity, activity), 0.0, 1.0)
    np.fill_diagonal(prob, 0.0)

    edges = []
    for t in range(T):
        src, dst = np.nonzero(rng.random((n_nodes, n_nodes)) < prob)
        w = 1 + rng.poisson(1.0, size=len(src))
        edges.extend(zip([t] * len(src), src.tolist(), dst.tolist(), w.tolist()))
    for t in ticks:
        members = rng.choice(n_nodes, size=min(spec.clique_size, n_nodes), replace=False)
        for a in members:
            for b in members:
                if a != b:
                    edges.append((t, int(a), int(b), int(1 + rng.poisson(spec.clique_weight))))
    g = TemporalGraphSequence.from_edges(edges, T=T, directed=True, node_ids=range(n_nodes))
    return g, EventTruth(tuple(ticks))


def write_edge_csv(g: TemporalGraphSequence, path, header_lines: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("time,src,dst,weight\n")
        for tick, snap in zip(g.timestamps, g.snapshots):
            for s, d, w in zip(snap.src, snap.dst, snap.weight):
                fh.write(f"{int(tick)},{g.node_ids[s]},{g.node_ids[d]},{_fmt(w)}\n")


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def mean_base_ap(scores: Sequence[ScoreList], truth: EventTruth, delay: int = 0) -> float:
    return float(np.mean([average_precision(s.ranklist(), truth, delay) for s in scores]))


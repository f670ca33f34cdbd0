"""Two-phase selective ensemble.

1. run every detector x feature combination,
2. select detector results,
3. combine the selection with each consensus method,
4. select consensus results,
5. merge the chosen consensus rankings by inverse rank.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .consensus import METHODS, CalibrationCache, ConsensusResult, inverse_rank, run_consensus
from .detectors import DETECTORS, run_detector
from .errors import ConfigurationError, SelectEnsembleError
from .ingestion import FEATURE_NAMES, TemporalGraphSequence, extract_features
from .lists import RankList, ScoreList
from .selection import STRATEGIES, SelectionResult, select

DEFAULT_DETECTORS = ("EBED", "PTSAD", "SPIRIT", "ASED", "MAED")


@dataclass(frozen=True)
class Strategy:
    """A selection strategy; ``k`` and ``seed`` only matter for ``random``."""

    name: str = "full"
    k: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.name not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.name!r}; choose from {STRATEGIES}")
        if self.name == "random" and (self.k is None or self.k < 1):
            raise ConfigurationError("random strategy needs k >= 1")

    @classmethod
    def parse(cls, spec: "str | dict | Strategy") -> "Strategy":
        """Accept ``"horizontal"``, ``"random(3,7)"`` or a mapping."""
        if isinstance(spec, Strategy):
            return spec
        if isinstance(spec, dict):
            return cls(spec.get("name", "full"), spec.get("k"), spec.get("seed"))
        spec = spec.strip()
        if spec.startswith("random"):
            inner = spec[len("random") :].strip("() ")
            parts = [p.strip() for p in inner.split(",") if p.strip()]
            if not parts:
                raise ConfigurationError("random strategy needs k, e.g. random(3,42)")
            return cls("random", int(parts[0]), int(parts[1]) if len(parts) > 1 else None)
        return cls(spec)

    def to_dict(self) -> dict:
        return {"name": self.name, "k": self.k, "seed": self.seed}


@dataclass(frozen=True)
class DetectorSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineConfig:
    detectors: tuple[DetectorSpec, ...] = tuple(DetectorSpec(d) for d in DEFAULT_DETECTORS)
    features: tuple[str, ...] = ("weighted-in-degree", "weighted-out-degree")
    strategy: Strategy = Strategy("horizontal")
    phase2_strategy: Strategy | None = None
    consensus_set: tuple[str, ...] = METHODS
    kemeny_mode: str = "auto"
    rra_correct: bool = True
    round_counts: bool = True

    def __post_init__(self):
        if not self.detectors or not self.features:
            raise ConfigurationError("need at least one detector and one feature")
        for d in self.detectors:
            if d.name.upper() not in DETECTORS:
                raise ConfigurationError(f"unknown detector {d.name!r}")
        for f in self.features:
            if f not in FEATURE_NAMES:
                raise ConfigurationError(f"unknown feature {f!r}")
        if not self.consensus_set:
            raise ConfigurationError("consensus_set must not be empty")
        for c in self.consensus_set:
            if c not in METHODS:
                raise ConfigurationError(f"unknown consensus method {c!r}")

    @property
    def phase2(self) -> Strategy:
        return self.phase2_strategy or self.strategy

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        kwargs = {}
        if "detectors" in d:
            specs = []
            for item in d["detectors"]:
                if isinstance(item, str):
                    specs.append(DetectorSpec(item.upper()))
                else:
                    specs.append(DetectorSpec(str(item["name"]).upper(), dict(item.get("params") or {})))
            kwargs["detectors"] = tuple(specs)
        if "features" in d:
            kwargs["features"] = tuple(d["features"])
        if "strategy" in d:
            kwargs["strategy"] = Strategy.parse(d["strategy"])
        if d.get("phase2_strategy") is not None:
            kwargs["phase2_strategy"] = Strategy.parse(d["phase2_strategy"])
        if "consensus_set" in d:
            kwargs["consensus_set"] = tuple(d["consensus_set"])
        for key in ("kemeny_mode", "rra_correct", "round_counts"):
            if key in d:
                kwargs[key] = d[key]
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "detectors": [{"name": d.name, "params": dict(d.params)} for d in self.detectors],
            "features": list(self.features),
            "strategy": self.strategy.to_dict(),
            "phase2_strategy": self.phase2_strategy.to_dict() if self.phase2_strategy else None,
            "consensus_set": list(self.consensus_set),
            "kemeny_mode": self.kemeny_mode,
            "rra_correct": self.rra_correct,
            "round_counts": self.round_counts,
        }


@dataclass
class PipelineReport:
    component_scores: list[ScoreList]
    phase1: SelectionResult
    consensus: list[ConsensusResult]
    phase2: SelectionResult
    final_scores: np.ndarray
    final: RankList
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "components": [s.to_dict() for s in self.component_scores],
            "phase1": self.phase1.to_dict(),
            "consensus": [
                {
                    "method": c.method,
                    "scores": c.scores.to_dict(),
                    "order": [int(t) for t in c.ranklist.order],
                }
                for c in self.consensus
            ],
            "phase2": self.phase2.to_dict(),
            "final": {
                "order": [int(t) for t in self.final.order],
                "scores": [float(x) for x in self.final_scores],
            },
        }
        if include_timing:
            out["timing"] = dict(self.timing)
        return out

    def to_json(self, include_timing: bool = False, extra: dict | None = None) -> str:
        payload = dict(extra or {})
        payload.update(self.to_dict(include_timing))
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def final_ranklist_from_json(text: str) -> RankList:
        return RankList(json.loads(text)["final"]["order"])


def run_detectors(g: TemporalGraphSequence, cfg: PipelineConfig) -> list[ScoreList]:
    """Every detector x feature combination, in config order (features outer)."""
    out = []
    for feature in cfg.features:
        F = extract_features(g, feature)
        for spec in cfg.detectors:
            params = dict(spec.params)
            name = spec.name.upper()
            if name == "PTSAD":
                params.setdefault("round_counts", cfg.round_counts)
            params["detector_id"] = f"{name}({feature})"
            try:
                out.append(run_detector(name, F, params))
            except SelectEnsembleError as exc:
                raise type(exc)(f"detector {name}({feature}) failed: {exc}") from exc
    return out


def _apply(strategy: Strategy, lists: Sequence[ScoreList], cache: CalibrationCache, salt: int) -> SelectionResult:
    seed = strategy.seed
    if strategy.name == "random" and seed is not None:
        seed = int(np.random.SeedSequence(seed, spawn_key=(salt,)).generate_state(1)[0])
    return select(strategy.name, lists, k=strategy.k, seed=seed, cache=cache)


def run_ensemble(
    component_scores: Sequence[ScoreList],
    cfg: PipelineConfig,
    cache: CalibrationCache | None = None,
) -> PipelineReport:
    """Phases 2-5 on precomputed component score lists."""
    cache = cache or CalibrationCache()
    timing = {}
    t0 = time.perf_counter()
    by_id = {s.detector_id: s for s in component_scores}
    if len(by_id) != len(component_scores):
        raise ConfigurationError("component ids must be unique")

    phase1 = _apply(cfg.strategy, component_scores, cache, salt=1)
    chosen = [by_id[i] for i in phase1.selected]
    timing["phase1"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    consensus = [
        run_consensus(m, chosen, kemeny_mode=cfg.kemeny_mode, rra_correct=cfg.rra_correct, cache=cache)
        for m in cfg.consensus_set
    ]
    timing["consensus"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    c_scores = [c.scores for c in consensus]
    if len(c_scores) < 2 and cfg.phase2.name == "horizontal":
        phase2 = SelectionResult("horizontal", [c.method for c in consensus], warnings=["single consensus list"])
    else:
        phase2 = _apply(cfg.phase2, c_scores, cache, salt=2)
    kept = [c for c in consensus if c.method in set(phase2.selected)]
    final = inverse_rank([c.ranklist for c in kept], method="final")
    timing["phase2"] = time.perf_counter() - t0
    return PipelineReport(
        list(component_scores), phase1, consensus, phase2, np.asarray(final.scores.scores), final.ranklist, timing
    )


def run_pipeline(g: TemporalGraphSequence, cfg: PipelineConfig) -> PipelineReport:
    t0 = time.perf_counter()
    scores = run_detectors(g, cfg)
    detect_time = time.perf_counter() - t0
    report = run_ensemble(scores, cfg)
    report.timing["detectors"] = detect_time
    return report


def load_config(path: str | Path) -> PipelineConfig:
    import yaml

    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: config must be a mapping")
    return PipelineConfig.from_dict(data.get("pipeline", data))

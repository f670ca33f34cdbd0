"""Selective two-phase anomaly ensembles for event detection in temporal graphs."""

from .consensus import METHODS, inverse_rank, kemeny_young, prob_aggregate, rra
from .calibration import mixture_model, unify
from .detectors import ased, attribute, ebed, maed, ptsad, spirit
from .evaluation import (
    EvalReport,
    EventTruth,
    average_precision,
    inject_noise,
    make_synthetic,
    noise_sweep,
    significance_vs_random,
)
from .ingestion import FeatureMatrix, TemporalGraphSequence, TickSpec, extract_features, load_edge_stream
from .lists import ProbList, RankList, ScoreList
from .orderstats import binomial_order_prob
from .pipeline import PipelineConfig, PipelineReport, Strategy, run_ensemble, run_pipeline
from .selection import (
    SelectionResult,
    select_all,
    select_diverse,
    select_horizontal,
    select_random,
    select_vertical,
    weighted_pearson,
)

__version__ = "0.1.0"

"""Joint rating of benchmark test-case difficulty and agent competency."""

from .analysis import (
    competency_gap,
    consistency_report,
    gap_report,
    hard_set,
    oracle_rating,
    percentile_curve,
    predict_metric,
    spearman,
)
from .engine import RunConfig, ScoreMatrix, build_schedule, load_score_matrix, run_ratings
from .estimator import AgiEloRater
from .exceptions import AgiEloError, ArgumentError, DomainError, FormatError
from .rating import (
    Rating,
    RatingConstants,
    Variant,
    elo_expected_score,
    elo_update,
    expected_outcome,
    glicko_update,
    impact_factor,
    play_match,
)

__version__ = "0.1.0"

"""Post-run analytics: prediction, hard sets, oracle gaps and reliability."""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import MatchRecord, RatingSnapshot, RunResult, ScoreMatrix
from .exceptions import ArgumentError, DomainError
from .scoring import IDENTITY, ScoringFunction, get_scoring, invert_scoring

DEFAULT_THRESHOLDS = (0.5, 0.9, 0.99)
DEFAULT_BIN_WIDTH = 25.0


def expected_score(r_a: float, r_t: float) -> float:
    """Probability-scale expected score of an agent rated ``r_a`` on a case rated ``r_t``."""
    if not (math.isfinite(r_a) and math.isfinite(r_t)):
        raise DomainError(f"ratings must be finite, got {r_a!r}, {r_t!r}")
    return 1.0 / (1.0 + 10.0 ** ((r_t - r_a) / 400.0))


def predict_metric(r_a: float, r_t: float, fn: ScoringFunction | str = IDENTITY) -> float:
    return invert_scoring(fn, expected_score(r_a, r_t))


def hard_set(case_ratings: Mapping[str, float], r_a: float, m_theta: float,
             fn: ScoringFunction | str = IDENTITY) -> set[str]:
    """Cases on which the agent's predicted metric falls below ``m_theta``."""
    fn = get_scoring(fn)
    return {cid for cid, r_t in case_ratings.items() if predict_metric(r_a, r_t, fn) < m_theta}


def oracle_rating(r_t_max: float, s_theta: float) -> float:
    """Rating needed to score at least ``s_theta`` against the hardest case."""
    if not (0.0 < s_theta < 1.0):
        raise DomainError(f"confidence must lie in (0, 1), got {s_theta!r}")
    return r_t_max - 400.0 * math.log10((1.0 - s_theta) / s_theta)


def competency_gap(oracle_r: float, r_a: float) -> float:
    return oracle_r - r_a


@dataclass(frozen=True)
class OracleSpec:
    s_theta: float
    m_theta: float

    @classmethod
    def from_confidence(cls, s_theta: float, fn: ScoringFunction | str = IDENTITY) -> "OracleSpec":
        if not (0.0 < s_theta < 1.0):
            raise DomainError(f"confidence must lie in (0, 1), got {s_theta!r}")
        return cls(s_theta, invert_scoring(fn, s_theta))


@dataclass
class GapReport:
    r_t_max: float
    r_a_max: float
    expected_metric: float
    gaps: dict[float, float]
    hardest_case: str | None = None
    best_agent: str | None = None

    def to_dict(self) -> dict:
        return {
            "r_t_max": round(self.r_t_max, 1),
            "r_a_max": round(self.r_a_max, 1),
            "hardest_case": self.hardest_case,
            "best_agent": self.best_agent,
            "expected_metric": round(self.expected_metric, 6),
            "gaps": {f"{100 * s:g}%": round(g, 6) for s, g in sorted(self.gaps.items())},
        }


def gap_report(r_t_max: float, r_a_max: float, thresholds: Iterable[float] = DEFAULT_THRESHOLDS,
               fn: ScoringFunction | str = IDENTITY, hardest_case: str | None = None,
               best_agent: str | None = None) -> GapReport:
    """Best agent's expected metric on the hardest case and its gaps to each oracle."""
    gaps = {float(s): competency_gap(oracle_rating(r_t_max, s), r_a_max) for s in thresholds}
    return GapReport(r_t_max, r_a_max, predict_metric(r_a_max, r_t_max, fn), gaps, hardest_case, best_agent)


def gap_report_from_ratings(agent_ratings: Mapping[str, float], case_ratings: Mapping[str, float],
                            thresholds: Iterable[float] = DEFAULT_THRESHOLDS,
                            fn: ScoringFunction | str = IDENTITY) -> GapReport:
    if not agent_ratings or not case_ratings:
        raise ArgumentError("gap report needs at least one agent and one case")
    best = max(agent_ratings, key=agent_ratings.__getitem__)
    hardest = max(case_ratings, key=case_ratings.__getitem__)
    return gap_report(case_ratings[hardest], agent_ratings[best], thresholds, fn, hardest, best)


class PercentileCurve:
    """Empirical CDF of case ratings: F(x) = #{r_t <= x} / N."""

    def __init__(self, case_ratings: Iterable[float]):
        self.ratings = sorted(float(r) for r in case_ratings)
        if not self.ratings:
            raise ArgumentError("percentile curve needs at least one rating")

    def __call__(self, x: float) -> float:
        return bisect_right(self.ratings, x) / len(self.ratings)

    def points(self) -> list[tuple[float, float]]:
        """Step corners: each distinct rating with the cumulative fraction at it."""
        n = len(self.ratings)
        out = []
        for i, r in enumerate(self.ratings):
            if i + 1 < n and self.ratings[i + 1] == r:
                continue
            out.append((r, (i + 1) / n))
        return out


def percentile_curve(case_ratings: Iterable[float]) -> PercentileCurve:
    return PercentileCurve(case_ratings)


def histogram(case_ratings: Mapping[str, float], agent_ratings: Mapping[str, float],
              bin_width: float = DEFAULT_BIN_WIDTH) -> list[dict]:
    """Case counts per rating bin, with the agents whose rating falls in each bin."""
    if bin_width <= 0:
        raise DomainError(f"bin width must be > 0, got {bin_width!r}")
    values = list(case_ratings.values()) + list(agent_ratings.values())
    if not values:
        raise ArgumentError("histogram needs ratings")
    lo_bin = math.floor(min(values) / bin_width)
    hi_bin = math.floor(max(values) / bin_width)
    counts: dict[int, int] = defaultdict(int)
    for r in case_ratings.values():
        counts[math.floor(r / bin_width)] += 1
    agents: dict[int, list[str]] = defaultdict(list)
    for aid, r in sorted(agent_ratings.items(), key=lambda kv: (kv[1], kv[0])):
        agents[math.floor(r / bin_width)].append(aid)
    return [{"bin_lo": b * bin_width, "bin_hi": (b + 1) * bin_width, "case_count": counts.get(b, 0),
             "agent_ids_in_bin": agents.get(b, [])}
            for b in range(lo_bin, hi_bin + 1)]


def _rank(x: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties share the mean of their positions."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties.

    Returns NaN when either sample is constant.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ArgumentError(f"spearman needs two equal-length 1-d samples, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ArgumentError("spearman needs at least 2 pairs")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise DomainError("spearman got non-finite values")
    rx = _rank(x) - (len(x) + 1) / 2.0
    ry = _rank(y) - (len(y) + 1) / 2.0
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        return math.nan
    return max(-1.0, min(1.0, float(rx @ ry) / denom))


@dataclass
class BinnedErrors:
    mae: float
    mse: float
    bin_width: float
    table: list[dict] = field(default_factory=list)


def binned_errors(records: Iterable[MatchRecord], agent_ratings: Mapping[str, float],
                  case_ratings: Mapping[str, float], fn: ScoringFunction | str = IDENTITY,
                  bin_width: float = DEFAULT_BIN_WIDTH) -> BinnedErrors:
    """Compare each agent's mean metric per case-rating bin with the prediction at the bin centre."""
    if not bin_width > 0:
        raise DomainError(f"bin width must be > 0, got {bin_width!r}")
    fn = get_scoring(fn)
    sums: dict[tuple[str, int], list[float]] = {}
    n = 0
    for rec in records:
        n += 1
        b = math.floor(case_ratings[rec.case_id] / bin_width)
        cell = sums.setdefault((rec.agent_id, b), [0.0, 0])
        cell[0] += rec.raw_metric
        cell[1] += 1
    if n == 0:
        raise ArgumentError("binned_errors needs at least one record")
    table = []
    abs_err = sq_err = 0.0
    for (aid, b), (total, count) in sorted(sums.items()):
        center = (b + 0.5) * bin_width
        predicted = predict_metric(agent_ratings[aid], center, fn)
        empirical = total / count
        err = empirical - predicted
        abs_err += abs(err)
        sq_err += err * err
        table.append({"agent_id": aid, "bin_lo": b * bin_width, "bin_hi": (b + 1) * bin_width,
                      "count": count, "empirical": empirical, "predicted": predicted})
    k = len(table)
    return BinnedErrors(abs_err / k, sq_err / k, bin_width, table)


def binned_errors_matrix(matrix: ScoreMatrix, agent_mu: np.ndarray, case_mu: np.ndarray,
                         bin_width: float = DEFAULT_BIN_WIDTH) -> tuple[float, float]:
    """Vectorised MAE/MSE for a whole matrix; same definition as :func:`binned_errors`."""
    if not bin_width > 0:
        raise DomainError(f"bin width must be > 0, got {bin_width!r}")
    fn = get_scoring(matrix.scoring_fn_id)
    rows, cols = matrix.cells()
    if len(rows) == 0:
        raise ArgumentError("binned errors need at least one present cell")
    bins = np.floor(np.asarray(case_mu)[rows] / bin_width).astype(np.int64)
    key_bins, inverse = np.unique(np.stack([cols, bins]), axis=1, return_inverse=True)
    inverse = inverse.ravel()
    totals = np.bincount(inverse, weights=matrix.values[rows, cols])
    counts = np.bincount(inverse)
    empirical = totals / counts
    centers = (key_bins[1] + 0.5) * bin_width
    p = 1.0 / (1.0 + 10.0 ** ((centers - np.asarray(agent_mu)[key_bins[0]]) / 400.0))
    predicted = np.array([fn.inverse(float(v)) for v in p])
    err = empirical - predicted
    return float(np.mean(np.abs(err))), float(np.mean(err * err))


@dataclass
class CheckpointMetrics:
    match_percentage: float
    rho_t: float
    rho_a: float
    mae: float
    mse: float


@dataclass
class ReliabilityReport:
    rho_t: float
    rho_a: float
    mae: float
    mse: float
    bin_width: float
    series: list[CheckpointMetrics] = field(default_factory=list)
    table: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        def _f(x):
            return None if math.isnan(x) else round(x, 6)

        return {
            "rho_t": _f(self.rho_t), "rho_a": _f(self.rho_a),
            "mae": _f(self.mae), "mse": _f(self.mse), "bin_width": self.bin_width,
            "series": [{"match_percentage": c.match_percentage, "rho_t": _f(c.rho_t), "rho_a": _f(c.rho_a),
                        "mae": _f(c.mae), "mse": _f(c.mse)} for c in self.series],
        }


def _mean_performance(matrix: ScoreMatrix) -> tuple[np.ndarray, np.ndarray]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # rows with no observed cell
        per_case = np.nanmean(matrix.values, axis=1)
        per_agent = np.nanmean(matrix.values, axis=0)
    return per_case, per_agent


def _observed_prefix(matrix: ScoreMatrix, rows, cols, seen) -> ScoreMatrix:
    """The matrix restricted to cells played within a schedule prefix."""
    values = np.full(matrix.values.shape, np.nan)
    values[rows[seen], cols[seen]] = matrix.values[rows[seen], cols[seen]]
    return ScoreMatrix(matrix.agent_ids, matrix.case_ids, values, matrix.scoring_fn_id)


def _consistency(matrix: ScoreMatrix, agent_mu, case_mu, per_case, per_agent) -> tuple[float, float]:
    def _rho(ratings, means):
        mask = np.isfinite(means)
        return spearman(np.asarray(ratings)[mask], means[mask]) if mask.sum() >= 2 else math.nan

    return _rho(case_mu, per_case), _rho(agent_mu, per_agent)


def consistency_report(matrix: ScoreMatrix, result: RunResult | tuple[Mapping[str, float], Mapping[str, float]],
                       bin_width: float = DEFAULT_BIN_WIDTH) -> ReliabilityReport:
    """Spearman consistency and binned predictive error of a run against its matrix.

    ``result`` is a :class:`RunResult` (checkpoint series included) or an
    ``(agent_ratings, case_ratings)`` pair. Checkpoint metrics are computed
    on the matches played up to each checkpoint, scored with the ratings held
    at that point.
    """
    if matrix.n_agents < 2 or matrix.n_cases < 2:
        raise ArgumentError("consistency report needs at least 2 agents and 2 cases")
    if isinstance(result, RunResult):
        agent_ratings, case_ratings = result.agent_ratings(), result.case_ratings()
        snapshots: list[RatingSnapshot] = result.snapshots
    else:
        agent_ratings, case_ratings = result
        snapshots = []
    try:
        agent_mu = np.array([agent_ratings[a] for a in matrix.agent_ids])
        case_mu = np.array([case_ratings[c] for c in matrix.case_ids])
    except KeyError as exc:
        raise ArgumentError(f"no rating for player {exc.args[0]!r}") from None
    per_case, per_agent = _mean_performance(matrix)
    rho_t, rho_a = _consistency(matrix, agent_mu, case_mu, per_case, per_agent)
    errs = binned_errors(matrix.records(), agent_ratings, case_ratings, matrix.scoring_fn_id, bin_width)
    series = []
    if snapshots and result.order is not None:
        rows, cols = matrix.cells()
        if len(rows) != len(result.order) // result.config.passes:
            raise ArgumentError("run schedule does not match this score matrix")
        for snap in snapshots:
            observed = _observed_prefix(matrix, rows, cols, result.order[:snap.matches])
            pc, pa = _mean_performance(observed)
            st, sa = _consistency(observed, snap.agent_mu, snap.case_mu, pc, pa)
            mae, mse = binned_errors_matrix(observed, snap.agent_mu, snap.case_mu, bin_width)
            series.append(CheckpointMetrics(snap.match_percentage, st, sa, mae, mse))
    return ReliabilityReport(rho_t, rho_a, errs.mae, errs.mse, bin_width, series, errs.table)

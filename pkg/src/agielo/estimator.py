"""scikit-learn style front end for the rating engine."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import analysis
from .engine import DEFAULT_CHECKPOINTS, RunConfig, ScoreMatrix, run_ratings
from .exceptions import ArgumentError
from .rating import RatingConstants, Variant
from .scoring import get_scoring


class AgiEloRater(BaseEstimator):
    """Jointly rate agents and test cases from a benchmark score matrix.

    ``X`` has one row per test case and one column per agent, holding the raw
    metric of that agent on that case; NaN marks a missing result. A
    :class:`~agielo.engine.ScoreMatrix` is accepted too and keeps its ids.

    Parameters
    ----------
    seed : int
        Seed of the match-order shuffle.
    passes : int
        Number of independently shuffled passes over all present cells.
    variant : {"standard", "unscaled"}
        Precision term of the Glicko update.
    scoring : str
        Scoring-function registry id mapping raw metrics to match scores.
    checkpoints : sequence of float
        Match percentages at which rating snapshots are kept.

    Attributes
    ----------
    agent_mu_, agent_sigma_ : ndarray of shape (n_agents,)
    case_mu_, case_sigma_ : ndarray of shape (n_cases,)
    agent_ids_, case_ids_ : list of str
    run_ : RunResult
    """

    def __init__(self, seed=0, passes=1, variant="standard", scoring="identity",
                 checkpoints=DEFAULT_CHECKPOINTS, initial_mu=1500.0, initial_sigma=350.0):
        self.seed = seed
        self.passes = passes
        self.variant = variant
        self.scoring = scoring
        self.checkpoints = checkpoints
        self.initial_mu = initial_mu
        self.initial_sigma = initial_sigma

    def _as_matrix(self, X) -> ScoreMatrix:
        if isinstance(X, ScoreMatrix):
            return ScoreMatrix(X.agent_ids, X.case_ids, X.values, self.scoring)
        values = check_array(X, ensure_all_finite="allow-nan", ensure_min_samples=1, ensure_min_features=1)
        n_cases, n_agents = values.shape
        return ScoreMatrix([f"agent_{j}" for j in range(n_agents)], [f"case_{i}" for i in range(n_cases)],
                           values, self.scoring)

    def fit(self, X, y=None):
        matrix = self._as_matrix(X)
        if matrix.n_matches == 0:
            raise ArgumentError("score matrix has no present cells")
        constants = RatingConstants(initial_mu=self.initial_mu, initial_sigma=self.initial_sigma,
                                    variant=Variant.parse(self.variant))
        config = RunConfig(seed=self.seed, passes=self.passes, checkpoints=tuple(self.checkpoints),
                           constants=constants)
        self.run_ = run_ratings(matrix, config)
        self.matrix_ = matrix
        self.agent_ids_ = list(matrix.agent_ids)
        self.case_ids_ = list(matrix.case_ids)
        self.agent_mu_ = np.array([p.rating.mu for p in self.run_.agents])
        self.agent_sigma_ = np.array([p.rating.sigma for p in self.run_.agents])
        self.case_mu_ = np.array([p.rating.mu for p in self.run_.cases])
        self.case_sigma_ = np.array([p.rating.sigma for p in self.run_.cases])
        self.n_features_in_ = matrix.n_agents
        return self

    def predict(self, X=None):
        """Expected metric of every agent on every case, shape (n_cases, n_agents).

        ``X`` is only checked for shape; predictions come from fitted ratings.
        """
        check_is_fitted(self, "agent_mu_")
        if X is not None:
            shape = self._as_matrix(X).values.shape
            if shape != (len(self.case_ids_), len(self.agent_ids_)):
                raise ArgumentError(f"X has shape {shape}, fitted on {(len(self.case_ids_), len(self.agent_ids_))}")
        fn = get_scoring(self.scoring)
        p = 1.0 / (1.0 + 10.0 ** ((self.case_mu_[:, None] - self.agent_mu_[None, :]) / 400.0))
        return np.vectorize(fn.inverse, otypes=[float])(p)

    def transform(self, X=None):
        """Case ratings and deviations as an (n_cases, 2) array."""
        check_is_fitted(self, "case_mu_")
        return np.column_stack([self.case_mu_, self.case_sigma_])

    def hard_set(self, agent_id: str, m_theta: float) -> set[str]:
        check_is_fitted(self, "agent_mu_")
        r_a = self.agent_mu_[self.agent_ids_.index(agent_id)]
        return analysis.hard_set(dict(zip(self.case_ids_, self.case_mu_)), r_a, m_theta, self.scoring)

    def gap_report(self, thresholds=analysis.DEFAULT_THRESHOLDS) -> analysis.GapReport:
        check_is_fitted(self, "agent_mu_")
        return analysis.gap_report_from_ratings(self.run_.agent_ratings(), self.run_.case_ratings(),
                                                thresholds, self.scoring)

    def reliability(self, bin_width: float = analysis.DEFAULT_BIN_WIDTH) -> analysis.ReliabilityReport:
        check_is_fitted(self, "run_")
        return analysis.consistency_report(self.matrix_, self.run_, bin_width)

    def score(self, X=None, y=None) -> float:
        """Agent consistency: Spearman of agent ratings against mean agent metric."""
        return self.reliability().rho_a

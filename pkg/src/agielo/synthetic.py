"""Ground-truth simulator used to check that ratings recover known strengths.

True ratings are drawn from the rating prior, outcomes are generated through
the logistic link, and the resulting matrix goes through the same CSV path as
real benchmark data.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .engine import Category, Player, ScoreMatrix
from .exceptions import ArgumentError, DomainError


class OutcomeMode(str, enum.Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class PopulationSpec:
    n_agents: int
    n_cases: int
    prior_mu: float = 1500.0
    prior_sigma: float = 350.0
    outcome_mode: OutcomeMode = OutcomeMode.BINARY
    seed: int = 0

    def __post_init__(self):
        if self.n_agents < 2 or self.n_cases < 2:
            raise ArgumentError(f"need at least 2 agents and 2 cases, got {self.n_agents} and {self.n_cases}")
        if not self.prior_sigma >= 0:
            raise DomainError(f"prior_sigma must be >= 0, got {self.prior_sigma!r}")
        object.__setattr__(self, "outcome_mode", OutcomeMode(self.outcome_mode))


@dataclass(frozen=True)
class Population:
    agent_ids: list[str]
    case_ids: list[str]
    agent_ratings: np.ndarray
    case_ratings: np.ndarray

    def truth(self) -> dict[str, float]:
        out = dict(zip(self.agent_ids, self.agent_ratings.tolist()))
        out.update(zip(self.case_ids, self.case_ratings.tolist()))
        return out

    def truth_records(self) -> list[dict]:
        return ([{"id": i, "category": Category.AGENT.value, "true_rating": float(r)}
                 for i, r in zip(self.agent_ids, self.agent_ratings)]
                + [{"id": i, "category": Category.TEST_CASE.value, "true_rating": float(r)}
                   for i, r in zip(self.case_ids, self.case_ratings)])


def _ids(prefix: str, n: int) -> list[str]:
    width = len(str(n - 1))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def sample_population(spec: PopulationSpec) -> Population:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    agents = rng.normal(spec.prior_mu, spec.prior_sigma, spec.n_agents)
    cases = rng.normal(spec.prior_mu, spec.prior_sigma, spec.n_cases)
    return Population(_ids("agent_", spec.n_agents), _ids("case_", spec.n_cases), agents, cases)


def win_probability(r_agent: float | np.ndarray, r_case: float | np.ndarray):
    return 1.0 / (1.0 + 10.0 ** ((np.asarray(r_case) - np.asarray(r_agent)) / 400.0))


def simulate_outcome(r_agent_true: float, r_case_true: float, mode: OutcomeMode | str,
                     rng: np.random.Generator | None = None) -> float:
    """Score of one simulated match: a Bernoulli draw, or the probability itself."""
    if not (math.isfinite(r_agent_true) and math.isfinite(r_case_true)):
        raise DomainError("true ratings must be finite")
    p = float(win_probability(r_agent_true, r_case_true))
    if OutcomeMode(mode) is OutcomeMode.CONTINUOUS:
        return p
    if rng is None:
        raise ArgumentError("binary outcomes need a random generator")
    return float(rng.random() < p)


def simulate_matrix(spec: PopulationSpec, population: Population | None = None) -> tuple[Population, ScoreMatrix]:
    """Dense case x agent score matrix for a sampled population.

    Binary draws use a Philox stream keyed by the seed; cell ``(case, agent)``
    consumes draw number ``case * n_agents + agent``, so each cell's value is
    fixed by its position rather than by generation order.
    """
    pop = population or sample_population(spec)
    p = win_probability(pop.agent_ratings[None, :], pop.case_ratings[:, None])
    if spec.outcome_mode is OutcomeMode.CONTINUOUS:
        values = p
    else:
        stream = np.random.Generator(np.random.Philox(key=spec.seed))
        u = stream.random(p.size).reshape(p.shape)
        values = (u < p).astype(float)
    return pop, ScoreMatrix(pop.agent_ids, pop.case_ids, values, "identity")


def write_truth(population: Population, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(population.truth_records(), fh, indent=2)
        fh.write("\n")


@dataclass
class RecoveryReport:
    rho_agents: float
    rho_cases: float
    mean_abs_mu_error: float

    def to_dict(self) -> dict:
        return {"rho_agents": round(self.rho_agents, 6), "rho_cases": round(self.rho_cases, 6),
                "mean_abs_mu_error": round(self.mean_abs_mu_error, 6)}


def recovery_report(true_ratings: Mapping[str, float], players: list[Player]) -> RecoveryReport:
    """How well estimated means recover true ratings, per player category.

    Both sets are median-centred within each category before the absolute
    error is averaged, since ratings are only defined up to a shift.
    """
    from .analysis import spearman

    est = {p.id: p for p in players}
    if set(est) != set(true_ratings):
        missing = sorted(set(true_ratings) ^ set(est))[:5]
        raise ArgumentError(f"true and estimated id sets differ (e.g. {missing})")
    rhos = {}
    errors = []
    for cat in (Category.AGENT, Category.TEST_CASE):
        ids = [p.id for p in players if p.category is cat]
        if len(ids) < 2:
            raise ArgumentError(f"need at least 2 players of category {cat.value!r}")
        t = np.array([true_ratings[i] for i in ids])
        e = np.array([est[i].rating.mu for i in ids])
        rhos[cat] = spearman(t, e)
        errors.append(np.abs((e - np.median(e)) - (t - np.median(t))))
    return RecoveryReport(rhos[Category.AGENT], rhos[Category.TEST_CASE], float(np.mean(np.concatenate(errors))))

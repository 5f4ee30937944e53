"""Rating beliefs and update rules.

Ratings live on the chess scale: a 400 point gap means 10:1 odds. Two update
rules are provided: plain Elo as a baseline, and the Glicko-style Gaussian
update used for agent/test-case matches.

Expected score of A against B::

    E_A = 1 / (1 + 10 ** ((R_B - R_A) / 400))

Glicko update for player i against opponents j::

    g(s)  = 1 / sqrt(1 + 3 q^2 s^2 / pi^2),   q = ln(10) / 400
    E_ij  = 1 / (1 + 10 ** (-g(s_j) (mu_i - mu_j) / 400))
    prec  = 1/sigma_i^2 + c * sum_j g(s_j)^2 E_ij (1 - E_ij)
    mu_i += q / prec * sum_j g(s_j) (S_ij - E_ij)
    sigma_i = prec ** -0.5

with ``c = q^2`` for :attr:`Variant.STANDARD` and ``c = 1`` for
:attr:`Variant.UNSCALED`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

from .exceptions import ArgumentError, DomainError

Q = math.log(10) / 400
_PI2 = math.pi**2


class Variant(str, enum.Enum):
    STANDARD = "standard"
    UNSCALED = "unscaled"

    @classmethod
    def parse(cls, value: "Variant | str") -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"standard": cls.STANDARD, "standardglicko": cls.STANDARD,
                   "unscaled": cls.UNSCALED, "literal": cls.UNSCALED}
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown variant {value!r}; expected 'standard' or 'unscaled'") from None


@dataclass(frozen=True)
class Rating:
    """Gaussian belief over a player's strength."""

    mu: float = 1500.0
    sigma: float = 350.0

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"rating mean must be finite, got {self.mu!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"rating deviation must be finite and > 0, got {self.sigma!r}")


@dataclass(frozen=True)
class RatingConstants:
    base: float = 10.0
    spread: float = 400.0
    initial_mu: float = 1500.0
    initial_sigma: float = 350.0
    k_factor: float = 32.0
    variant: Variant = Variant.STANDARD

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))

    @property
    def q(self) -> float:
        return math.log(self.base) / self.spread

    def initial_rating(self) -> Rating:
        return Rating(self.initial_mu, self.initial_sigma)


DEFAULT_CONSTANTS = RatingConstants()


@dataclass(frozen=True)
class OpponentObservation:
    opponent_mu: float
    opponent_sigma: float
    score: float

    def __post_init__(self):
        _check_score(self.score, "score")


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"expected a finite value, got {v!r}")


def _check_score(s: float, name: str = "score") -> None:
    if not (0.0 <= s <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {s!r}")


def elo_expected_score(r_a: float, r_b: float, constants: RatingConstants = DEFAULT_CONSTANTS) -> float:
    """Expected score of a player rated ``r_a`` against one rated ``r_b``."""
    _check_finite(r_a, r_b)
    return 1.0 / (1.0 + constants.base ** ((r_b - r_a) / constants.spread))


def elo_update(r: float, s: float, e: float, k: float) -> float:
    _check_finite(r, k)
    _check_score(s, "score")
    _check_score(e, "expected score")
    if not k > 0:
        raise DomainError(f"k must be > 0, got {k!r}")
    return r + k * (s - e)


def impact_factor(sigma: float, constants: RatingConstants = DEFAULT_CONSTANTS) -> float:
    """Down-weighting of an opponent with deviation ``sigma``; 1 at sigma=0."""
    if not sigma >= 0 or not math.isfinite(sigma):
        raise DomainError(f"sigma must be finite and >= 0, got {sigma!r}")
    q = constants.q
    return 1.0 / math.sqrt(1.0 + 3.0 * q * q * sigma * sigma / _PI2)


def expected_outcome(mu_i: float, mu_j: float, sigma_j: float,
                     constants: RatingConstants = DEFAULT_CONSTANTS) -> float:
    _check_finite(mu_i, mu_j)
    g = impact_factor(sigma_j, constants)
    return 1.0 / (1.0 + constants.base ** (-g * (mu_i - mu_j) / constants.spread))


def glicko_update(player: Rating, observations: Iterable[OpponentObservation],
                  constants: RatingConstants = DEFAULT_CONSTANTS) -> Rating:
    """Apply one rating period of observations to ``player``.

    A single-element list is the per-match update; longer lists batch several
    results against opponents' current beliefs.
    """
    observations = list(observations)
    if not observations:
        raise ArgumentError("glicko_update needs at least one observation")
    q = constants.q
    scale = q * q if constants.variant is Variant.STANDARD else 1.0
    info = 0.0
    drive = 0.0
    for obs in observations:
        _check_score(obs.score)
        g = impact_factor(obs.opponent_sigma, constants)
        e = expected_outcome(player.mu, obs.opponent_mu, obs.opponent_sigma, constants)
        info += g * g * e * (1.0 - e)
        drive += g * (obs.score - e)
    precision = 1.0 / (player.sigma * player.sigma) + scale * info
    return Rating(player.mu + q / precision * drive, precision**-0.5)


def play_match(agent: Rating, case: Rating, score: float,
               constants: RatingConstants = DEFAULT_CONSTANTS) -> tuple[Rating, Rating]:
    """Update both sides of one agent/test-case match.

    The agent scores ``score``; the test case is credited ``1 - score``.
    Each side is updated against the other's pre-match belief.
    """
    _check_score(score)
    new_agent = glicko_update(agent, [OpponentObservation(case.mu, case.sigma, score)], constants)
    new_case = glicko_update(case, [OpponentObservation(agent.mu, agent.sigma, 1.0 - score)], constants)
    return new_agent, new_case

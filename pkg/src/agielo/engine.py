"""Score-matrix ingestion and the randomized rating loop.

Every present cell of a score matrix is one match between an agent and a test
case. Matches are played in a uniformly shuffled order (one independent
shuffle per pass), both players are updated from each other's pre-match
belief, and rating snapshots are captured at configured match percentages.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .exceptions import ArgumentError, DomainError, FormatError
from .rating import Rating, RatingConstants, Variant
from .scoring import CLAMP_TOLERANCE, apply_scoring, get_scoring

log = logging.getLogger(__name__)

GENERATOR_NAME = "numpy.random.PCG64"
SHUFFLE_NAME = "Generator.permutation"
DEFAULT_CHECKPOINTS = tuple(range(10, 101, 10))


class ConfigError(ArgumentError):
    """Bad key or value in a run configuration."""


class Category(str, enum.Enum):
    AGENT = "agent"
    TEST_CASE = "test_case"


@dataclass
class Player:
    id: str
    category: Category
    rating: Rating
    matches_played: int = 0


@dataclass(frozen=True)
class MatchRecord:
    agent_id: str
    case_id: str
    raw_metric: float
    score: float


@dataclass
class ScoreMatrix:
    """Raw metric values, one row per test case and one column per agent.

    ``values`` has shape ``(n_cases, n_agents)``; NaN marks an absent match.
    """

    agent_ids: list[str]
    case_ids: list[str]
    values: np.ndarray
    scoring_fn_id: str = "identity"

    def __post_init__(self):
        self.agent_ids = [str(a) for a in self.agent_ids]
        self.case_ids = [str(c) for c in self.case_ids]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.case_ids), len(self.agent_ids)):
            raise FormatError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.case_ids)} cases x {len(self.agent_ids)} agents")
        for kind, ids in (("agent", self.agent_ids), ("case", self.case_ids)):
            seen = set()
            for i in ids:
                if i in seen:
                    raise FormatError(f"duplicate {kind} id {i!r}")
                seen.add(i)
        if np.isinf(self.values).any():
            r, c = np.argwhere(np.isinf(self.values))[0]
            raise FormatError(f"non-finite value at case {self.case_ids[r]!r}, agent {self.agent_ids[c]!r}")

    @property
    def n_agents(self) -> int:
        return len(self.agent_ids)

    @property
    def n_cases(self) -> int:
        return len(self.case_ids)

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def n_matches(self) -> int:
        return int(self.present.sum())

    def cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Row-major (case index, agent index) arrays of present cells."""
        return np.nonzero(self.present)

    def scores(self) -> np.ndarray:
        """Match scores for every present cell, NaN elsewhere."""
        fn = get_scoring(self.scoring_fn_id)
        with np.errstate(invalid="ignore"):
            raw = np.asarray(fn.forward(self.values), dtype=float)
            bad = self.present & ((raw < -CLAMP_TOLERANCE) | (raw > 1 + CLAMP_TOLERANCE) | ~np.isfinite(raw))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            try:
                apply_scoring(fn, float(self.values[r, c]))
            except DomainError as exc:
                raise DomainError(f"case {self.case_ids[r]!r}, agent {self.agent_ids[c]!r}: {exc}") from None
        return np.where(self.present, np.clip(raw, 0.0, 1.0), np.nan)

    def records(self) -> list[MatchRecord]:
        scores = self.scores()
        return [MatchRecord(self.agent_ids[c], self.case_ids[r], float(self.values[r, c]), float(scores[r, c]))
                for r, c in zip(*self.cells())]

    def to_csv(self, dest: str | os.PathLike | TextIO) -> None:
        def _write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case_id", *self.agent_ids])
            for cid, row in zip(self.case_ids, self.values):
                w.writerow([cid, *("" if math.isnan(v) else repr(float(v)) for v in row)])

        if hasattr(dest, "write"):
            _write(dest)
        else:
            with open(dest, "w", newline="") as fh:
                _write(fh)


def load_score_matrix(source: str | os.PathLike | TextIO, scoring_fn_id: str = "identity") -> ScoreMatrix:
    """Read a ``case_id,<agent_1>,...`` CSV into a :class:`ScoreMatrix`."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source, newline="") as fh:
                text = fh.read()
        except UnicodeDecodeError as exc:
            raise FormatError(f"{source}: not valid text ({exc.reason})") from None
    try:
        rows = list(csv.reader(io.StringIO(text)))
    except csv.Error as exc:
        raise FormatError(f"malformed CSV: {exc}") from None
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise FormatError("empty score matrix")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "case_id":
        raise FormatError("header must be 'case_id,<agent_id_1>,...'")
    agent_ids = header[1:]
    if any(not a for a in agent_ids):
        raise FormatError("empty agent id in header")
    if len(set(agent_ids)) != len(agent_ids):
        dup = next(a for a in agent_ids if agent_ids.count(a) > 1)
        raise FormatError(f"duplicate agent id {dup!r} in header")
    case_ids: list[str] = []
    seen: set[str] = set()
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        cid = row[0].strip()
        if not cid:
            raise FormatError(f"line {lineno}: empty case_id")
        if cid in seen:
            raise FormatError(f"line {lineno}: duplicate case_id {cid!r}")
        seen.add(cid)
        case_ids.append(cid)
        vals = []
        for agent, cell in zip(agent_ids, row[1:]):
            cell = cell.strip()
            if cell == "":
                vals.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise FormatError(f"line {lineno}: non-numeric value {cell!r} at case {cid!r}, agent {agent!r}") from None
            if not math.isfinite(v):
                raise FormatError(f"line {lineno}: non-finite value {cell!r} at case {cid!r}, agent {agent!r}")
            vals.append(v)
        values.append(vals)
    if not case_ids:
        raise FormatError("score matrix has no test-case rows")
    matrix = ScoreMatrix(agent_ids, case_ids, np.array(values, dtype=float).reshape(len(case_ids), len(agent_ids)),
                         scoring_fn_id)
    if matrix.n_matches == 0:
        raise FormatError("score matrix has no present cells")
    return matrix


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    passes: int = 1
    checkpoints: tuple[float, ...] = DEFAULT_CHECKPOINTS
    constants: RatingConstants = field(default_factory=RatingConstants)
    scoring: str | None = None

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if not isinstance(self.passes, (int, np.integer)) or self.passes < 1:
            raise ConfigError(f"passes must be a positive integer, got {self.passes!r}")
        cps = tuple(float(c) for c in self.checkpoints)
        if any(not (0 < c <= 100) for c in cps):
            raise ConfigError(f"checkpoints must lie in (0, 100], got {cps!r}")
        object.__setattr__(self, "checkpoints", tuple(sorted(set(cps))))

    @property
    def variant(self) -> Variant:
        return self.constants.variant


_CONFIG_KEYS = {"seed", "passes", "variant", "scoring", "checkpoints"}


def parse_checkpoints(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"checkpoints must be a comma-separated list of numbers, got {text!r}") from None


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into RunConfig keyword overrides."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split(sep, 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            if key in ("seed", "passes"):
                out[key] = int(value)
            elif key == "checkpoints":
                out[key] = parse_checkpoints(value)
            elif key == "variant":
                out[key] = Variant.parse(value)
            else:
                get_scoring(value)
                out[key] = value
        except (ValueError, DomainError) as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key!r}: {exc}") from None
    return out


def load_config(path: str | os.PathLike | None = None, **overrides) -> RunConfig:
    """Build a RunConfig from an optional sidecar file plus explicit overrides."""
    opts: dict = {}
    if path is not None:
        with open(path) as fh:
            opts.update(parse_config(fh.read()))
    opts.update({k: v for k, v in overrides.items() if v is not None})
    variant = Variant.parse(opts.pop("variant", Variant.STANDARD))
    return RunConfig(constants=RatingConstants(variant=variant), **opts)


def _schedule_indices(n_present: int, config: RunConfig) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    return np.concatenate([rng.permutation(n_present) for _ in range(config.passes)])


def build_schedule(matrix: ScoreMatrix, config: RunConfig) -> list[tuple[str, str]]:
    """Shuffled (agent_id, case_id) order, ``config.passes`` independent shuffles long."""
    rows, cols = matrix.cells()
    if len(rows) == 0:
        raise ArgumentError("cannot schedule an empty matrix")
    order = _schedule_indices(len(rows), config)
    return [(matrix.agent_ids[cols[k]], matrix.case_ids[rows[k]]) for k in order]


@dataclass(frozen=True)
class RatingSnapshot:
    match_percentage: float
    matches: int
    agent_mu: np.ndarray
    agent_sigma: np.ndarray
    case_mu: np.ndarray
    case_sigma: np.ndarray


@dataclass
class RunResult:
    agents: list[Player]
    cases: list[Player]
    snapshots: list[RatingSnapshot]
    config: RunConfig
    scoring_fn_id: str
    n_matches: int
    source: str | None = None
    # schedule as indices into ScoreMatrix.cells(); not serialised
    order: np.ndarray | None = field(default=None, repr=False)

    @property
    def players(self) -> list[Player]:
        return self.agents + self.cases

    def agent_ratings(self) -> dict[str, float]:
        return {p.id: p.rating.mu for p in self.agents}

    def case_ratings(self) -> dict[str, float]:
        return {p.id: p.rating.mu for p in self.cases}

    def to_dict(self) -> dict:
        agent_ids = [p.id for p in self.agents]
        case_ids = [p.id for p in self.cases]

        def _snap(s: RatingSnapshot) -> dict:
            return {
                "match_percentage": s.match_percentage,
                "matches": s.matches,
                "players": [
                    {"id": i, "mu": _r1(m), "sigma": _r1(sd)}
                    for ids, mus, sds in ((agent_ids, s.agent_mu, s.agent_sigma), (case_ids, s.case_mu, s.case_sigma))
                    for i, m, sd in zip(ids, mus, sds)
                ],
            }

        return {
            "metadata": {
                "seed": int(self.config.seed),
                "passes": int(self.config.passes),
                "variant": self.config.variant.value,
                "generator": GENERATOR_NAME,
                "shuffle": SHUFFLE_NAME,
                "scoring": self.scoring_fn_id,
                "checkpoints": list(self.config.checkpoints),
                "n_agents": len(self.agents),
                "n_cases": len(self.cases),
                "n_matches": self.n_matches,
                "source": self.source,
            },
            "players": [
                {"id": p.id, "category": p.category.value, "mu": _r1(p.rating.mu),
                 "sigma": _r1(p.rating.sigma), "matches_played": p.matches_played}
                for p in self.players
            ],
            "snapshots": [_snap(s) for s in self.snapshots],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _r1(x: float) -> float:
    return round(float(x), 1)


def run_ratings(matrix: ScoreMatrix, config: RunConfig | None = None, source: str | None = None) -> RunResult:
    """Play every scheduled match and return final players plus snapshots."""
    config = config or RunConfig()
    scoring = config.scoring or matrix.scoring_fn_id
    if scoring != matrix.scoring_fn_id:
        matrix = ScoreMatrix(matrix.agent_ids, matrix.case_ids, matrix.values, scoring)
    rows, cols = matrix.cells()
    if len(rows) == 0:
        raise ArgumentError("cannot rate an empty matrix")
    scores = matrix.scores()[rows, cols]
    order = _schedule_indices(len(rows), config)
    n_total = len(order)

    consts = config.constants
    q = consts.q
    base, spread = consts.base, consts.spread
    scale = q * q if consts.variant is Variant.STANDARD else 1.0
    g_coef = 3.0 * q * q / math.pi**2
    a_mu = [consts.initial_mu] * matrix.n_agents
    a_sd = [consts.initial_sigma] * matrix.n_agents
    c_mu = [consts.initial_mu] * matrix.n_cases
    c_sd = [consts.initial_sigma] * matrix.n_cases
    a_n = [0] * matrix.n_agents
    c_n = [0] * matrix.n_cases

    stops = {}
    for pct in config.checkpoints:
        stops.setdefault(max(1, math.ceil(pct / 100.0 * n_total - 1e-9)), []).append(pct)
    snapshots: list[RatingSnapshot] = []

    rows_l, cols_l, scores_l = rows.tolist(), cols.tolist(), scores.tolist()
    sqrt = math.sqrt
    for step, k in enumerate(order.tolist(), start=1):
        a, c, s = cols_l[k], rows_l[k], scores_l[k]
        mu_a, sd_a, mu_c, sd_c = a_mu[a], a_sd[a], c_mu[c], c_sd[c]
        # agent against the case's pre-match belief
        g = 1.0 / sqrt(1.0 + g_coef * sd_c * sd_c)
        e = 1.0 / (1.0 + base ** (-g * (mu_a - mu_c) / spread))
        prec = 1.0 / (sd_a * sd_a) + scale * g * g * e * (1.0 - e)
        new_mu_a = mu_a + q / prec * g * (s - e)
        new_sd_a = prec**-0.5
        # case against the agent's pre-match belief, credited 1 - s
        g = 1.0 / sqrt(1.0 + g_coef * sd_a * sd_a)
        e = 1.0 / (1.0 + base ** (-g * (mu_c - mu_a) / spread))
        prec = 1.0 / (sd_c * sd_c) + scale * g * g * e * (1.0 - e)
        c_mu[c] = mu_c + q / prec * g * ((1.0 - s) - e)
        c_sd[c] = prec**-0.5
        a_mu[a], a_sd[a] = new_mu_a, new_sd_a
        a_n[a] += 1
        c_n[c] += 1
        if step in stops:
            for pct in stops[step]:
                snapshots.append(RatingSnapshot(pct, step, np.array(a_mu), np.array(a_sd),
                                                np.array(c_mu), np.array(c_sd)))
    log.info("rated %d matches (%d agents, %d cases)", n_total, matrix.n_agents, matrix.n_cases)

    agents = [Player(i, Category.AGENT, Rating(m, s), n)
              for i, m, s, n in zip(matrix.agent_ids, a_mu, a_sd, a_n)]
    cases = [Player(i, Category.TEST_CASE, Rating(m, s), n)
             for i, m, s, n in zip(matrix.case_ids, c_mu, c_sd, c_n)]
    return RunResult(agents, cases, snapshots, config, scoring, n_total, source, order)


def load_run(source: str | os.PathLike | TextIO) -> dict:
    """Read a run JSON produced by :meth:`RunResult.to_json`."""
    try:
        if hasattr(source, "read"):
            data = json.load(source)
        else:
            with open(source) as fh:
                data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"run JSON is malformed: {exc}") from None
    if not isinstance(data, dict) or not isinstance(data.get("players"), list):
        raise FormatError("run JSON must contain a 'players' array")
    for p in data["players"]:
        if not isinstance(p, dict) or not {"id", "category", "mu"} <= p.keys():
            raise FormatError(f"run JSON player entry missing id/category/mu: {p!r}")
        if p["category"] not in (Category.AGENT.value, Category.TEST_CASE.value):
            raise FormatError(f"unknown player category {p['category']!r}")
        if not isinstance(p["mu"], (int, float)) or not math.isfinite(p["mu"]):
            raise FormatError(f"player {p['id']!r} has non-numeric mu")
    return data


def run_from_dict(data: dict, matrix: ScoreMatrix) -> RunResult:
    """Rebuild a RunResult (snapshots and schedule included) from run JSON.

    The schedule is regenerated from the recorded seed and passes, so
    ``matrix`` must be the one the run was produced from.
    """
    meta = data.get("metadata") or {}
    try:
        config = RunConfig(seed=int(meta["seed"]), passes=int(meta.get("passes", 1)),
                           checkpoints=tuple(meta.get("checkpoints") or DEFAULT_CHECKPOINTS),
                           constants=RatingConstants(variant=Variant.parse(meta.get("variant", "standard"))))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"run metadata incomplete: {exc}") from None
    by_cat: dict[Category, list[Player]] = {Category.AGENT: [], Category.TEST_CASE: []}
    for p in data["players"]:
        by_cat[Category(p["category"])].append(
            Player(str(p["id"]), Category(p["category"]), Rating(float(p["mu"]), float(p.get("sigma") or 1e-9)),
                   int(p.get("matches_played", 0))))
    agents = {p.id: p for p in by_cat[Category.AGENT]}
    cases = {p.id: p for p in by_cat[Category.TEST_CASE]}
    if set(agents) != set(matrix.agent_ids) or set(cases) != set(matrix.case_ids):
        raise FormatError("run players do not match the score matrix")
    snapshots = []
    for snap in data.get("snapshots") or []:
        table = {str(p["id"]): p for p in snap["players"]}
        snapshots.append(RatingSnapshot(
            float(snap["match_percentage"]), int(snap["matches"]),
            np.array([table[a]["mu"] for a in matrix.agent_ids], dtype=float),
            np.array([table[a]["sigma"] for a in matrix.agent_ids], dtype=float),
            np.array([table[c]["mu"] for c in matrix.case_ids], dtype=float),
            np.array([table[c]["sigma"] for c in matrix.case_ids], dtype=float)))
    order = _schedule_indices(matrix.n_matches, config)
    return RunResult([agents[a] for a in matrix.agent_ids], [cases[c] for c in matrix.case_ids], snapshots,
                     config, meta.get("scoring", matrix.scoring_fn_id), len(order), meta.get("source"), order)


def ratings_from_run(data: dict) -> tuple[dict[str, float], dict[str, float]]:
    agents = {str(p["id"]): float(p["mu"]) for p in data["players"] if p["category"] == Category.AGENT.value}
    cases = {str(p["id"]): float(p["mu"]) for p in data["players"] if p["category"] == Category.TEST_CASE.value}
    return agents, cases


def matrix_from_rows(agent_ids: Sequence[str], rows: Iterable[tuple[str, Sequence[float | None]]],
                     scoring_fn_id: str = "identity") -> ScoreMatrix:
    """Small in-memory constructor; ``None`` marks an absent cell."""
    case_ids, vals = [], []
    for cid, row in rows:
        case_ids.append(cid)
        vals.append([math.nan if v is None else float(v) for v in row])
    return ScoreMatrix(list(agent_ids), case_ids, np.array(vals, dtype=float).reshape(len(case_ids), len(agent_ids)),
                       scoring_fn_id)

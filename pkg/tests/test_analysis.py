import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from agielo.analysis import (
    OracleSpec,
    binned_errors,
    binned_errors_matrix,
    competency_gap,
    consistency_report,
    gap_report,
    gap_report_from_ratings,
    hard_set,
    histogram,
    oracle_rating,
    percentile_curve,
    predict_metric,
    spearman,
)
from agielo.engine import MatchRecord, RunConfig, ScoreMatrix, run_ratings
from agielo.exceptions import ArgumentError, DomainError
from agielo.scoring import affine


class TestPrediction:
    def test_table_rows(self):
        assert predict_metric(2035.0, 2389.7) == pytest.approx(0.115, abs=1e-3)
        assert predict_metric(2040.5, 2273.0) == pytest.approx(0.208, abs=1e-3)
        assert predict_metric(1800, 1800) == 0.5

    def test_affine_inverse(self):
        assert predict_metric(1800, 1800, affine(0.01)) == pytest.approx(50.0)


class TestHardSet:
    def test_threshold_at_equality(self):
        assert hard_set({"A": 1000, "B": 2500}, 2035, 0.5) == {"B"}

    def test_zero_threshold(self):
        assert hard_set({"A": 1000, "B": 9000}, 1500, 0.0) == set()

    def test_brute_force(self):
        cases = {str(r): r for r in (1900, 2000, 2100, 2200)}
        expected = {k for k, r in cases.items() if oracles.expected(2000, r) < 0.36}
        # 2100 predicts 0.359935 < 0.36, so it is in the set
        assert expected == {"2100", "2200"}
        assert hard_set(cases, 2000, 0.36) == expected

    @settings(max_examples=300)
    @given(st.dictionaries(st.text(min_size=1, max_size=4), st.floats(0, 3000), max_size=30),
           st.floats(0, 3000), st.floats(0, 1), st.floats(0, 1), st.floats(0, 500))
    def test_monotone(self, cases, r_a, m1, m2, bump):
        lo, hi = sorted((m1, m2))
        assert hard_set(cases, r_a, lo) <= hard_set(cases, r_a, hi)
        assert hard_set(cases, r_a + bump, lo) <= hard_set(cases, r_a, lo)
        for cid in cases:
            assert (cid in hard_set(cases, r_a, hi)) == (predict_metric(r_a, cases[cid]) < hi)


class TestOracle:
    @pytest.mark.parametrize("s", [0.5, 0.9, 0.99, 0.75, 0.01])
    def test_against_reference(self, s):
        assert oracle_rating(2389.7, s) == pytest.approx(float(oracles.oracle(2389.7, s)), abs=1e-9)

    def test_table_values(self):
        assert oracle_rating(2389.7, 0.5) == 2389.7
        assert oracle_rating(2389.7, 0.9) == pytest.approx(2771.4, abs=0.05)
        assert oracle_rating(2389.7, 0.99) == pytest.approx(3187.9, abs=0.1)

    @settings(max_examples=500)
    @given(st.floats(-5000, 5000))
    def test_offset_depends_only_on_confidence(self, r):
        assert oracle_rating(r, 0.9) - r == pytest.approx(float(oracles.oracle(0, 0.9)), abs=1e-9)
        assert oracle_rating(r, 0.99) - r == pytest.approx(float(oracles.oracle(0, 0.99)), abs=1e-9)

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, s):
        with pytest.raises(DomainError):
            oracle_rating(2000, s)
        with pytest.raises(DomainError):
            OracleSpec.from_confidence(s)

    def test_oracle_spec(self):
        assert OracleSpec.from_confidence(0.9, affine(0.01)).m_theta == pytest.approx(90.0)

    def test_competency_gap(self):
        assert competency_gap(2389.7, 2035.0) == pytest.approx(354.7)
        assert competency_gap(2273.0, 2040.5) == pytest.approx(232.5)
        assert competency_gap(1234.5, 1234.5) == 0

    def test_gap_report(self):
        rep = gap_report(2389.7, 2035.0)
        assert rep.gaps[0.5] == rep.r_t_max - rep.r_a_max
        assert list(rep.gaps.values()) == sorted(rep.gaps.values())
        d = rep.to_dict()
        assert set(d["gaps"]) == {"50%", "90%", "99%"}

    def test_gap_report_from_ratings(self):
        rep = gap_report_from_ratings({"x": 1700.0, "y": 2035.0}, {"c1": 2389.7, "c2": 100.0})
        assert (rep.best_agent, rep.hardest_case) == ("y", "c1")
        assert rep.gaps[0.5] == pytest.approx(354.7)


class TestPercentile:
    def test_counting(self):
        f = percentile_curve([1000, 1500, 2000])
        assert f(1500) == pytest.approx(2 / 3)
        assert f(999) == 0
        assert f(2000) == 1

    def test_empty(self):
        with pytest.raises(ArgumentError):
            percentile_curve([])

    @given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=50), st.lists(st.floats(-2e4, 2e4), min_size=2))
    def test_non_decreasing(self, ratings, queries):
        f = percentile_curve(ratings)
        vals = [f(q) for q in sorted(queries)]
        assert all(0 <= v <= 1 for v in vals)
        assert vals == sorted(vals)

    def test_points(self):
        assert percentile_curve([3, 1, 1]).points() == [(1.0, 2 / 3), (3.0, 1.0)]

    def test_histogram(self):
        rows = histogram({"c1": 1010, "c2": 1020, "c3": 1060}, {"a": 1030}, 25)
        assert [(r["bin_lo"], r["case_count"], r["agent_ids_in_bin"]) for r in rows] == [
            (1000, 2, []), (1025, 0, ["a"]), (1050, 1, [])]


class TestSpearman:
    def test_fixtures(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-9)
        assert spearman([1, 2, 3], [0.9, 0.5, 0.1]) == pytest.approx(-1.0, abs=1e-9)
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-9)
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(
            float(oracles.spearman_closed_form([1, 2, 3, 4], [1, 3, 2, 4])), abs=1e-9)

    def test_errors(self):
        with pytest.raises(ArgumentError):
            spearman([1], [2])
        with pytest.raises(ArgumentError):
            spearman([1, 2], [1, 2, 3])

    @pytest.mark.filterwarnings("ignore::scipy.stats.ConstantInputWarning")
    @settings(max_examples=300)
    @given(st.lists(st.tuples(st.integers(-5, 5), st.floats(-100, 100)), min_size=3, max_size=40))
    def test_matches_scipy_with_ties(self, pairs):
        x, y = map(list, zip(*pairs))
        ours = spearman(x, y)
        ref = stats.spearmanr(x, y).statistic
        if math.isnan(ref):
            assert math.isnan(ours)
        else:
            assert ours == pytest.approx(ref, abs=1e-9)

    @settings(max_examples=300)
    @given(st.lists(st.integers(-50, 50), min_size=3, max_size=30, unique=True), st.randoms())
    def test_invariant_under_increasing_transform(self, x, rnd):
        y = x[:]
        rnd.shuffle(y)
        base = spearman(x, y)
        assert spearman([math.exp(v / 10) for v in x], [v**3 for v in y]) == pytest.approx(base, abs=1e-12)


def _records(rows):
    return [MatchRecord(a, c, m, m) for a, c, m in rows]


class TestBinnedErrors:
    AGENTS = {"A": 1500.0, "B": 1700.0}
    CASES = {"c1": 1510.0, "c2": 1590.0, "c3": 1620.0}

    def test_hand_fixture(self):
        rows = [("A", "c1", 1.0), ("A", "c2", 0.0), ("A", "c3", 1.0), ("B", "c1", 1.0), ("B", "c3", 0.0)]
        out = binned_errors(_records(rows), self.AGENTS, self.CASES, bin_width=100)
        # brute force over the four (agent, bin) cells; bin centres 1550 and 1650
        cells = [(0.5, oracles.expected(1500, 1550)), (1.0, oracles.expected(1500, 1650)),
                 (1.0, oracles.expected(1700, 1550)), (0.0, oracles.expected(1700, 1650))]
        errs = [float(emp - pred) for emp, pred in cells]
        assert out.mae == pytest.approx(sum(map(abs, errs)) / 4, abs=1e-12)
        assert out.mse == pytest.approx(sum(e * e for e in errs) / 4, abs=1e-12)
        assert len(out.table) == 4

    def test_exact_predictions(self):
        width = 25.0
        rows = []
        for a, r_a in self.AGENTS.items():
            for c, r_t in self.CASES.items():
                center = (math.floor(r_t / width) + 0.5) * width
                rows.append((a, c, predict_metric(r_a, center)))
        out = binned_errors(_records(rows), self.AGENTS, self.CASES, bin_width=width)
        assert out.mae == pytest.approx(0, abs=1e-15) and out.mse == pytest.approx(0, abs=1e-15)
        shifted = [(a, c, m + 0.01) for a, c, m in rows]
        out = binned_errors(_records(shifted), self.AGENTS, self.CASES, bin_width=width)
        assert out.mae == pytest.approx(0.01, abs=1e-12)
        assert out.mse == pytest.approx(1e-4, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ArgumentError):
            binned_errors([], self.AGENTS, self.CASES)
        with pytest.raises(DomainError):
            binned_errors(_records([("A", "c1", 1.0)]), self.AGENTS, self.CASES, bin_width=0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(5, 200))
    def test_jensen_and_vectorised_agree(self, seed, width):
        rng = np.random.default_rng(seed)
        values = rng.random((30, 3))
        values[rng.random(values.shape) < 0.3] = np.nan
        values[0, 0] = 0.5
        m = ScoreMatrix(["a0", "a1", "a2"], [f"c{i}" for i in range(30)], values)
        agents = dict(zip(m.agent_ids, rng.normal(1500, 300, 3)))
        cases = dict(zip(m.case_ids, rng.normal(1500, 300, 30)))
        out = binned_errors(m.records(), agents, cases, bin_width=width)
        assert out.mae**2 <= out.mse + 1e-15
        mae, mse = binned_errors_matrix(m, np.array(list(agents.values())), np.array(list(cases.values())), width)
        assert (mae, mse) == pytest.approx((out.mae, out.mse), abs=1e-12)


class TestConsistency:
    def test_too_small(self):
        m = ScoreMatrix(["a"], ["c1", "c2"], [[1.0], [0.0]])
        with pytest.raises(ArgumentError):
            consistency_report(m, ({"a": 1500}, {"c1": 1, "c2": 2}))

    def test_sign_convention(self):
        # harder cases (lower mean performance) carry higher ratings
        m = ScoreMatrix(["a", "b"], ["easy", "mid", "hard"], [[1, 1], [1, 0], [0, 0]])
        r = run_ratings(m, RunConfig(seed=0, passes=3))
        rep = consistency_report(m, r)
        assert rep.rho_t < 0 < rep.rho_a
        assert len(rep.series) == 10
        assert rep.mae**2 <= rep.mse

    @pytest.mark.slow
    def test_duplicate_agents_stay_close(self):
        rng = np.random.default_rng(3)
        diff = rng.normal(1500, 350, 5000)
        p = 1 / (1 + 10 ** ((diff - 1600) / 400))
        row = (rng.random(5000) < p).astype(float)
        other = (rng.random(5000) < 1 / (1 + 10 ** ((diff - 1300) / 400))).astype(float)
        m = ScoreMatrix(["twin1", "twin2", "other"], [f"c{i}" for i in range(5000)],
                        np.column_stack([row, row, other]))
        r = run_ratings(m, RunConfig(seed=4))
        assert abs(r.agents[0].rating.mu - r.agents[1].rating.mu) < 25

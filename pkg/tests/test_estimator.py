import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from agielo import AgiEloRater
from agielo.engine import load_score_matrix


@pytest.fixture
def grid():
    rng = np.random.default_rng(0)
    skill = np.array([1300.0, 1500.0, 1800.0])
    diff = rng.normal(1500, 300, 200)
    p = 1 / (1 + 10 ** ((diff[:, None] - skill[None, :]) / 400))
    values = (rng.random(p.shape) < p).astype(float)
    values[5, 1] = np.nan
    return values


def test_params_roundtrip():
    est = AgiEloRater(seed=4, variant="unscaled")
    assert est.get_params()["seed"] == 4
    twin = clone(est).set_params(passes=3)
    assert twin.passes == 3 and twin.variant == "unscaled"


def test_fit_attributes(grid):
    est = AgiEloRater(seed=1).fit(grid)
    assert est.agent_mu_.shape == (3,) and est.case_mu_.shape == (200,)
    assert est.n_features_in_ == 3
    assert list(np.argsort(est.agent_mu_)) == [0, 1, 2]
    assert est.run_.n_matches == 599


def test_predict_and_transform(grid):
    est = AgiEloRater().fit(grid)
    pred = est.predict(grid)
    assert pred.shape == grid.shape
    assert np.all((pred > 0) & (pred < 1))
    i, j = 7, 2
    assert pred[i, j] == pytest.approx(1 / (1 + 10 ** ((est.case_mu_[i] - est.agent_mu_[j]) / 400)))
    assert est.transform().shape == (200, 2)
    with pytest.raises(ValueError):
        est.predict(grid[:, :2])


def test_not_fitted():
    with pytest.raises(NotFittedError):
        AgiEloRater().predict()


def test_input_validation():
    with pytest.raises(ValueError):
        AgiEloRater().fit([[1.0, np.inf]])
    with pytest.raises(ValueError):
        AgiEloRater().fit([[np.nan]])


def test_same_result_as_engine(small_csv):
    m = load_score_matrix(small_csv)
    est = AgiEloRater(seed=3).fit(m)
    assert est.agent_ids_ == ["alpha", "beta"]
    via_array = AgiEloRater(seed=3).fit(m.values)
    np.testing.assert_array_equal(est.case_mu_, via_array.case_mu_)


def test_reports(grid):
    est = AgiEloRater(seed=2).fit(grid)
    rep = est.gap_report()
    assert rep.gaps[0.5] == pytest.approx(est.case_mu_.max() - est.agent_mu_.max())
    strongest = est.agent_ids_[int(np.argmax(est.agent_mu_))]
    hard = est.hard_set(strongest, 0.5)
    assert hard == {c for c, r in zip(est.case_ids_, est.case_mu_) if r > est.agent_mu_.max()}
    assert est.score() == pytest.approx(1.0)
    assert est.reliability().rho_t < 0

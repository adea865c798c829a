import numpy as np
import pytest
from scipy import stats

from goalskit import evalrank
from goalskit.dataset import Dataset, standardize
from goalskit.utils import DataError


SCORES = np.array([0.9, 0.1, 0.8, 0.7, 0.2, 0.05])
CAUSAL = [0, 1]


def test_rank_features():
    np.testing.assert_array_equal(evalrank.rank_features(SCORES), [0, 2, 3, 4, 1, 5])
    np.testing.assert_array_equal(evalrank.rank_features(np.array([-3.0, 1.0, 2.0])), [0, 2, 1])
    np.testing.assert_array_equal(evalrank.rank_features(np.array([-3.0, 1.0, 2.0]), 'signed'), [2, 1, 0])
    np.testing.assert_array_equal(evalrank.rank_features(np.array([1.0, 2.0, 1.0, 2.0])), [1, 3, 0, 2])

    with pytest.raises(ValueError, match="descending_by must be 'abs' or 'signed'"):
        evalrank.rank_features(SCORES, 'rank')


def test_roc_from_scores():
    curve = evalrank.roc_from_scores(SCORES, CAUSAL)

    assert curve.auc == pytest.approx(0.625)
    assert (curve.n_causal, curve.n_null) == (2, 4)
    np.testing.assert_allclose(curve.fpr, [0, 0, 0.25, 0.5, 0.75, 0.75, 1])
    np.testing.assert_allclose(curve.tpr, [0, 0.5, 0.5, 0.5, 0.5, 1, 1])
    assert evalrank.mann_whitney_auc(SCORES, CAUSAL) == pytest.approx(curve.auc)


def test_roc_invariant_to_monotone_transforms():
    curve = evalrank.roc_from_scores(SCORES, CAUSAL, descending_by='signed')
    for transformed in (np.exp(SCORES), SCORES**3, np.log(SCORES) - 7.0):
        other = evalrank.roc_from_scores(transformed, CAUSAL, descending_by='signed')
        np.testing.assert_array_equal(other.fpr, curve.fpr)
        np.testing.assert_array_equal(other.tpr, curve.tpr)
        assert other.auc == curve.auc
        assert evalrank.mann_whitney_auc(transformed, CAUSAL, 'signed') == pytest.approx(curve.auc)


def test_roc_extremes():
    assert evalrank.roc_from_scores(np.array([3.0, 2.0, 1.0, 0.5]), [0, 1]).auc == 1.0
    assert evalrank.roc_from_scores(np.array([3.0, 2.0, 1.0, 0.5]), [2, 3]).auc == 0.0


def test_roc_validation():
    with pytest.raises(ValueError, match='at least one causal and one null'):
        evalrank.roc_from_scores(SCORES, [])
    with pytest.raises(ValueError, match='at least one causal and one null'):
        evalrank.roc_from_scores(SCORES[:2], [0, 1])
    with pytest.raises(IndexError, match='Causal index 6 out of range'):
        evalrank.roc_from_scores(SCORES, [6])


def test_mann_whitney_ties():
    scores = np.array([1.0, 1.0, 0.0])
    assert evalrank.mann_whitney_auc(scores, [0]) == pytest.approx(0.75)


def test_ranking_scores():
    values = np.array([-2.0, 0.5, 1.0])
    np.testing.assert_array_equal(evalrank.ranking_scores('goals', values), [2.0, 0.5, 1.0])
    np.testing.assert_array_equal(evalrank.ranking_scores('nn-goals', values), [2.0, 0.5, 1.0])
    np.testing.assert_array_equal(evalrank.ranking_scores('rate', values), values)
    np.testing.assert_array_equal(evalrank.ranking_scores('scanone', np.array([0.01, 0.5])), [-0.01, -0.5])

    with pytest.raises(ValueError, match='No ranking convention'):
        evalrank.ranking_scores('lasso', values)


def test_auc_summary():
    curve = evalrank.roc_from_scores(SCORES, CAUSAL)
    perfect = evalrank.roc_from_scores(np.array([0.9, 0.8, 0.1, 0.2, 0.3, 0.05]), CAUSAL)
    mean_curve, mean_auc = evalrank.auc_summary([curve, perfect])

    assert mean_curve.points.shape == (evalrank.GRID_POINTS, 2)
    assert mean_curve.fpr[0] == 0.0
    assert mean_curve.fpr[-1] == 1.0
    assert mean_curve.tpr[0] == 0.0
    assert mean_curve.tpr[-1] == 1.0
    assert np.all(np.diff(mean_curve.tpr) >= 0)
    assert mean_auc == pytest.approx((0.625 + 1.0) / 2)
    assert mean_curve.auc == pytest.approx(mean_auc, abs=2e-3)

    with pytest.raises(ValueError, match='at least one ROC curve'):
        evalrank.auc_summary([])


def test_step_tpr():
    curve = evalrank.roc_from_scores(SCORES, CAUSAL)
    grid = np.array([0.0, 0.2, 0.25, 0.8, 1.0])
    np.testing.assert_allclose(evalrank.step_tpr(curve, grid), [0.5, 0.5, 0.5, 1.0, 1.0])


def test_scanone_matches_linregress():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3))
    y = 0.8 * x[:, 0] + rng.standard_normal(50)
    d = standardize(Dataset(x=x, y=y, feature_names=('a', 'b', 'c')))

    p = evalrank.scanone(d)
    t, _ = evalrank.scanone_statistics(d)
    for j in range(3):
        fit = stats.linregress(d.x[:, j], d.y)
        assert p[j] == pytest.approx(fit.pvalue, rel=1e-8)
        assert t[j] == pytest.approx(fit.slope / fit.stderr, rel=1e-8)
    assert p[0] < 1e-4


def test_scanone_perfect_fit():
    x = np.column_stack([np.arange(5.0), np.array([1.0, 0.0, 1.0, 0.0, 1.0])])
    d = standardize(Dataset(x=x, y=2 * np.arange(5.0), feature_names=('a', 'b')))
    t, p = evalrank.scanone_statistics(d)
    assert t[0] > 1e6
    assert p[0] < 1e-12
    assert np.all(np.isfinite(p))


def test_scanone_guards():
    rng = np.random.default_rng(1)
    raw = Dataset(x=rng.standard_normal((5, 2)), y=rng.standard_normal(5), feature_names=('a', 'b'))
    with pytest.raises(DataError, match='expects a standardized Dataset'):
        evalrank.scanone(raw)

    tiny = standardize(Dataset(x=np.array([[0.0], [1.0]]), y=np.array([0.0, 1.0]), feature_names=('a',)))
    with pytest.raises(DataError, match='at least 3 samples'):
        evalrank.scanone(tiny)

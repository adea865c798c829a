import logging

import numpy as np
import pytest

from goalskit import rate


@pytest.fixture
def esa():
    rng = np.random.default_rng(4)
    root = rng.standard_normal((5, 5))
    cov = root @ root.T + 0.5 * np.eye(5)
    return rate.EsaPosterior(mean=rng.standard_normal(5), cov=cov, feature_names=tuple('abcde'))


def _closed_form_kld(mean, cov, j):
    precision = np.linalg.inv(cov)
    q = 1 - 1 / (cov[j, j] * precision[j, j])
    ratio = q / (1 - q)
    return 0.5 * (ratio + mean[j] ** 2 / cov[j, j] * ratio + np.log(1 - q))


def test_pseudoinverse():
    x = np.random.default_rng(0).standard_normal((20, 6))
    np.testing.assert_allclose(rate.pseudoinverse(x), np.linalg.pinv(x), atol=1e-12)

    # duplicated columns split the weight evenly
    rank_deficient = np.column_stack([x[:, :3], x[:, :3]])
    half = np.linalg.pinv(x[:, :3]) / 2
    np.testing.assert_allclose(rate.pseudoinverse(rank_deficient), np.vstack([half, half]), atol=1e-10)


def test_effect_size_analog(linear_fit, small_data):
    e = rate.effect_size_analog(linear_fit, small_data)
    projection = np.linalg.pinv(small_data.x)

    np.testing.assert_allclose(e.mean, projection @ linear_fit.f_hat, atol=1e-10)
    assert e.cov.shape == (small_data.j, small_data.j)
    np.testing.assert_array_equal(e.cov, e.cov.T)
    assert e.feature_names == small_data.feature_names


@pytest.mark.parametrize('method', ['generic', 'precision'])
def test_rate_scores_closed_form(esa, method):
    report = rate.rate_scores(esa, method=method, n_jobs=2)
    expected = [_closed_form_kld(esa.mean, esa.cov, j) for j in range(5)]

    np.testing.assert_allclose(report.kld, expected, rtol=1e-5)
    assert report.rate.sum() == pytest.approx(1.0)
    assert np.all(report.rate >= 0)
    np.testing.assert_array_equal(report.global_scores, report.rate)
    assert report.feature_names == tuple('abcde')
    assert report.metadata['rate_method'] == method


def _two_feature_kld(mean, cov, j):
    other = 1 - j
    conditional_var = cov[other, other] - cov[0, 1] ** 2 / cov[j, j]
    shift = cov[0, 1] * mean[j] / cov[j, j]
    ratio = cov[other, other] / conditional_var
    return 0.5 * (ratio + shift**2 / conditional_var - 1 - np.log(ratio))


@pytest.mark.parametrize('method', ['generic', 'precision'])
def test_two_features_match_scalar_closed_form(method):
    e = rate.EsaPosterior(mean=np.array([0.8, -1.2]), cov=np.array([[1.5, 0.6], [0.6, 2.0]]))
    report = rate.rate_scores(e, method=method, jitter_scale=0.0)

    expected = [_two_feature_kld(e.mean, e.cov, j) for j in range(2)]
    np.testing.assert_allclose(report.kld, expected, rtol=1e-10, atol=1e-12)
    assert report.metadata['jitter'] == 0.0


def test_rate_is_permutation_equivariant(esa):
    order = np.array([3, 0, 4, 1, 2])
    permuted = rate.EsaPosterior(mean=esa.mean[order], cov=esa.cov[np.ix_(order, order)])

    report = rate.rate_scores(esa, method='generic')
    shuffled = rate.rate_scores(permuted, method='generic')
    np.testing.assert_allclose(shuffled.kld, report.kld[order], rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(shuffled.rate, report.rate[order], rtol=1e-10, atol=1e-14)


def test_auto_method(esa, monkeypatch):
    assert rate.rate_scores(esa).metadata['rate_method'] == 'generic'
    monkeypatch.setattr(rate, 'GENERIC_MAX_FEATURES', 3)
    assert rate.rate_scores(esa).metadata['rate_method'] == 'precision'


def test_uncorrelated_posterior_is_uniform(caplog):
    e = rate.EsaPosterior(mean=np.array([1.0, -2.0, 0.5]), cov=np.diag([1.0, 2.0, 3.0]))
    with caplog.at_level(logging.WARNING):
        report = rate.rate_scores(e, method='generic')

    np.testing.assert_array_equal(report.kld, 0.0)
    np.testing.assert_allclose(report.rate, 1 / 3)
    assert 'uniform' in caplog.text
    assert report.feature_names == ('x1', 'x2', 'x3')


def test_degenerate_coordinate(esa, caplog):
    cov = np.array(esa.cov, copy=True)
    cov[2, :] = 0.0
    cov[:, 2] = 0.0
    e = rate.EsaPosterior(mean=esa.mean, cov=cov)
    with caplog.at_level(logging.WARNING):
        report = rate.rate_scores(e)

    assert report.kld[2] == 0.0
    assert 'feature 2 has variance' in caplog.text
    assert report.rate.sum() == pytest.approx(1.0)


def test_rate_validation(esa):
    with pytest.raises(ValueError, match='Unknown RATE method'):
        rate.rate_scores(esa, method='fast')
    with pytest.raises(ValueError, match='at least 2 features'):
        rate.rate_scores(rate.EsaPosterior(mean=np.ones(1), cov=np.eye(1)))


def test_rate_on_fitted_model(rbf_fit, small_data):
    report = rate.rate_scores(rate.effect_size_analog(rbf_fit, small_data))
    assert report.kld.shape == (small_data.j,)
    assert np.all(report.kld >= 0)
    assert report.rate.sum() == pytest.approx(1.0)

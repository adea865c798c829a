import numpy as np
import pytest
from conftest import direct_cross_gram, direct_pair_gram

from goalskit import kernel


@pytest.fixture
def x():
    return np.random.default_rng(5).standard_normal((12, 3))


def test_median_bandwidth():
    x = np.array([[0.0], [1.0], [3.0]])
    # pairwise distances 1, 2, 3 -> median 2
    assert kernel.median_bandwidth(x) == pytest.approx(1 / 8)

    with pytest.raises(ValueError, match='at least 2 rows'):
        kernel.median_bandwidth(x[:1])

    with pytest.raises(ValueError, match='Median pairwise distance is zero'):
        kernel.median_bandwidth(np.ones((4, 2)))


def test_median_bandwidth_subsample(monkeypatch):
    monkeypatch.setattr(kernel, 'MEDIAN_SUBSAMPLE', 50)
    x = np.random.default_rng(0).standard_normal((200, 2))
    assert kernel.median_bandwidth(x) == kernel.median_bandwidth(x)
    assert kernel.median_bandwidth(x) != kernel.median_bandwidth(x[:50])


def test_kernel_config():
    with pytest.raises(ValueError, match='Unknown kernel'):
        kernel.KernelConfig(kind='matern')
    with pytest.raises(ValueError, match='must be positive and finite'):
        kernel.KernelConfig(kind='rbf', theta=0.0)
    with pytest.raises(ValueError, match='must be positive and finite'):
        kernel.KernelConfig(kind='rbf')

    assert kernel.KernelConfig(kind='linear', theta=3.0).describe() == {'kind': 'linear', 'theta': None}


def test_gram_matrix(x):
    cfg = kernel.rbf_config(x)
    k = kernel.gram_matrix(cfg, x)
    np.testing.assert_array_equal(np.diag(k), 1.0)
    np.testing.assert_array_equal(k, k.T)
    np.testing.assert_allclose(k, direct_cross_gram(cfg, x, 0, 0.0), rtol=0, atol=1e-14)

    linear = kernel.gram_matrix(kernel.KernelConfig(kind='linear'), x)
    np.testing.assert_array_equal(linear, linear.T)
    np.testing.assert_allclose(linear, x @ x.T, atol=1e-14)

    with pytest.raises(ValueError, match='precomputed kernel has no gram rule'):
        kernel.gram_matrix(kernel.KernelConfig(kind='precomputed'), x)

    bad = np.array(x, copy=True)
    bad[0, 0] = np.inf
    with pytest.raises(ValueError, match='non-finite'):
        kernel.gram_matrix(cfg, bad)


@pytest.mark.parametrize('kind', ['rbf', 'linear'])
def test_perturbed_cross_gram(x, kind):
    cfg = kernel.rbf_config(x) if kind == 'rbf' else kernel.KernelConfig(kind='linear')
    k = kernel.gram_matrix(cfg, x)
    for j, xi in [(0, 0.5), (2, -1.5)]:
        b = kernel.perturbed_cross_gram(cfg, x, k, j, xi)
        np.testing.assert_allclose(b, direct_cross_gram(cfg, x, j, xi), rtol=1e-12, atol=1e-12)

    per_row = np.linspace(-1, 1, x.shape[0])
    b = kernel.perturbed_cross_gram(cfg, x, k, 1, per_row)
    np.testing.assert_allclose(b, direct_cross_gram(cfg, x, 1, per_row), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize('kind', ['rbf', 'linear'])
def test_perturbed_pair_gram(x, kind):
    cfg = kernel.rbf_config(x) if kind == 'rbf' else kernel.KernelConfig(kind='linear')
    k = kernel.gram_matrix(cfg, x)
    per_row = np.linspace(-1, 1, x.shape[0])
    for j, l, xi in [(0, 1, 0.7), (1, 1, 0.7), (2, 0, per_row), (2, 2, per_row)]:  # noqa: E741
        d = kernel.perturbed_pair_gram(cfg, x, k, j, l, xi)
        np.testing.assert_allclose(d, direct_pair_gram(cfg, x, j, l, xi), rtol=1e-12, atol=1e-12)


def test_same_feature_pair_gram_is_k(x):
    cfg = kernel.rbf_config(x)
    k = kernel.gram_matrix(cfg, x)
    np.testing.assert_array_equal(kernel.perturbed_pair_gram(cfg, x, k, 1, 1, 2.0), k)


def test_zero_shift(x):
    cfg = kernel.rbf_config(x)
    k = kernel.gram_matrix(cfg, x)
    b = kernel.perturbed_cross_gram(cfg, x, k, 0, 0.0)
    np.testing.assert_array_equal(b, k)
    assert b is not k
    assert kernel.is_zero_shift(np.zeros(4))
    assert not kernel.is_zero_shift(np.array([0.0, 1e-300]))


def test_shift_validation(x):
    cfg = kernel.rbf_config(x)
    k = kernel.gram_matrix(cfg, x)
    with pytest.raises(IndexError, match='Feature index 3 out of range'):
        kernel.perturbed_cross_gram(cfg, x, k, 3, 1.0)
    with pytest.raises(ValueError, match='Shift must be finite'):
        kernel.perturbed_cross_gram(cfg, x, k, 0, np.nan)
    with pytest.raises(ValueError, match='per-row shift must have length 12'):
        kernel.perturbed_cross_gram(cfg, x, k, 0, np.ones(5))
    with pytest.raises(ValueError, match='no perturbation rule'):
        kernel.perturbed_cross_gram(kernel.KernelConfig(kind='precomputed'), x, k, 0, 1.0)

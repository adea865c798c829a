import numpy as np
import pytest

from goalskit.dataset import Dataset, standardize
from goalskit.gp import fit
from goalskit.kernel import KernelConfig, rbf_config


def make_dataset(n=40, j=4, seed=0, signal=(0, 1)):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, j))
    y = np.zeros(n)
    for index in signal:
        y += np.sin(x[:, index]) * (index + 1)
    if len(signal) > 1:
        y += x[:, signal[0]] * x[:, signal[1]]
    y += 0.3 * rng.standard_normal(n)
    return standardize(Dataset(x=x, y=y, feature_names=tuple(f'x{i + 1}' for i in range(j))))


@pytest.fixture
def small_data():
    return make_dataset()


@pytest.fixture
def rbf_fit(small_data):
    return fit(small_data, rbf_config(small_data.x), sigma2=0.1)


@pytest.fixture
def linear_fit(small_data):
    return fit(small_data, KernelConfig(kind='linear'), sigma2=0.5)


def shifted_design(x, j, xi):
    shifted = np.array(x, copy=True)
    shifted[:, j] += xi
    return shifted


def direct_cross_gram(cfg, x, j, xi):
    """Cross covariances k(x_i, x_i' + xi e_j) by direct kernel evaluation."""
    shifted = shifted_design(x, j, xi)
    if cfg.kind == 'linear':
        return x @ shifted.T
    sq = ((x[:, np.newaxis, :] - shifted[np.newaxis, :, :]) ** 2).sum(axis=2)
    return np.exp(-cfg.theta * sq)


def direct_pair_gram(cfg, x, j, l, xi):  # noqa: E741
    left = shifted_design(x, j, xi)
    right = shifted_design(x, l, xi)
    if cfg.kind == 'linear':
        return left @ right.T
    sq = ((left[:, np.newaxis, :] - right[np.newaxis, :, :]) ** 2).sum(axis=2)
    return np.exp(-cfg.theta * sq)


def conditioned_delta(g, d, xi, features=None):
    """Posterior mean and covariance of the stacked (delta^(j)) by dense Gaussian conditioning.

    Builds the joint prior of (y, f, g^(1), ..., g^(J)) from direct kernel
    evaluations and conditions on y.
    """
    features = range(d.j) if features is None else features
    x = d.x
    blocks = [x] + [shifted_design(x, j, xi) for j in features]

    def kern(a, b):
        if g.cfg.kind == 'linear':
            return a @ b.T
        sq = ((a[:, np.newaxis, :] - b[np.newaxis, :, :]) ** 2).sum(axis=2)
        return np.exp(-g.cfg.theta * sq)

    prior = np.block([[kern(a, b) for b in blocks] for a in blocks])
    n = d.n
    k = prior[:n, :n]
    a = k + g.sigma2 * np.eye(n)
    cross = prior[:, :n]
    mean = cross @ np.linalg.solve(a, d.y)
    cov = prior - cross @ np.linalg.solve(a, cross.T)

    n_blocks = len(blocks) - 1
    transform = np.zeros((n * n_blocks, n * (n_blocks + 1)))
    for b in range(n_blocks):
        transform[b * n : (b + 1) * n, :n] = np.eye(n)
        transform[b * n : (b + 1) * n, (b + 1) * n : (b + 2) * n] = -np.eye(n)
    return transform @ mean, transform @ cov @ transform.T


"""RATE: relative centrality of effect size analogs.

The effect size analog projects the fitted function onto the column space of
the design, beta = X^+ f. For each feature j, KLD(j) measures how much
conditioning beta_j = 0 moves the Gaussian posterior of the remaining
coordinates, and RATE normalizes the KLDs to sum to one.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from goalskit.dataset import Dataset
from goalskit.gp import FittedGP, posterior_f


log = logging.getLogger(__name__)

PINV_RTOL = 1e-10
JITTER_SCALE = 1e-8
GENERIC_MAX_FEATURES = 200
METHODS = ('auto', 'generic', 'precision')


@dataclass(frozen=True, eq=False)
class EsaPosterior:
    mean: np.ndarray
    cov: np.ndarray
    feature_names: tuple[str, ...] = ()


@dataclass(eq=False)
class RateReport:
    kld: np.ndarray
    rate: np.ndarray
    feature_names: tuple[str, ...]
    method: str = 'rate'
    metadata: dict = field(default_factory=dict)

    @property
    def global_scores(self) -> np.ndarray:
        return self.rate


def pseudoinverse(x: np.ndarray) -> np.ndarray:
    """Moore-Penrose inverse by SVD, dropping singular values below 1e-10 * the largest."""
    u, s, vt = linalg.svd(x, full_matrices=False)
    keep = s > PINV_RTOL * s[0]
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def effect_size_analog(g: FittedGP, d: Dataset) -> EsaPosterior:
    """Gaussian posterior of beta = X^+ f implied by the posterior of f.

    Args:
        g: Model fitted on d
        d: The standardized Dataset

    Returns:
        Mean (J) and covariance (J x J) of the effect size analog
    """
    projection = pseudoinverse(d.x)
    f_mean, f_cov = posterior_f(g, d.y)
    cov = projection @ f_cov @ projection.T
    return EsaPosterior(mean=projection @ f_mean, cov=(cov + cov.T) / 2, feature_names=d.feature_names)


def _gaussian_kl(mean_p, cov_p, mean_q, cov_q) -> float:
    """KL(N(mean_p, cov_p) || N(mean_q, cov_q)) through Cholesky factors."""
    chol_q = linalg.cho_factor(cov_q, lower=True)
    chol_p = linalg.cholesky(cov_p, lower=True)
    diff = mean_q - mean_p
    trace = np.trace(linalg.cho_solve(chol_q, cov_p))
    mahalanobis = diff @ linalg.cho_solve(chol_q, diff)
    log_det_q = 2 * np.sum(np.log(np.diag(chol_q[0])))
    log_det_p = 2 * np.sum(np.log(np.diag(chol_p)))
    return 0.5 * float(trace + mahalanobis - diff.size + log_det_q - log_det_p)


def _generic_kld(mean: np.ndarray, cov: np.ndarray, j: int, jitter: float) -> float:
    rest = np.delete(np.arange(mean.size), j)
    coupling = cov[rest, j]
    if not np.any(coupling):
        return 0.0

    variance = cov[j, j]
    cov_rest = cov[np.ix_(rest, rest)]
    eye = jitter * np.eye(rest.size)
    conditional_mean = mean[rest] - coupling * mean[j] / variance
    conditional_cov = cov_rest - np.outer(coupling, coupling) / variance
    return _gaussian_kl(mean[rest], cov_rest + eye, conditional_mean, conditional_cov + eye)


def _precision_kld(mean: np.ndarray, cov: np.ndarray, precision_diag: np.ndarray, j: int) -> float:
    # 1 - q = 1 / (sigma_jj Lambda_jj) by the Schur complement
    variance = cov[j, j]
    retained = 1.0 / (variance * precision_diag[j])
    q = min(max(1.0 - retained, 0.0), 1.0 - 1e-15)
    ratio = q / (1.0 - q)
    return 0.5 * float(ratio + mean[j] ** 2 / variance * ratio + np.log1p(-q))


def rate_scores(
    e: EsaPosterior, method: str = 'auto', jitter_scale: float = JITTER_SCALE, n_jobs: int = 1
) -> RateReport:
    """KLD and RATE for every coordinate of an effect size analog posterior.

    Args:
        e: Effect size analog posterior
        method: 'generic' evaluates the two-Gaussian KL per feature; 'precision' uses one
            inversion of the jittered covariance; 'auto' picks generic up to 200 features
        jitter_scale: Jitter added to the covariances, relative to tr(cov) / J
        n_jobs: Number of worker threads over features

    Returns:
        A RateReport
    """
    if method not in METHODS:
        raise ValueError(f'Unknown RATE method {method!r}; choose from {METHODS}')
    mean, cov = np.asarray(e.mean), np.asarray(e.cov)
    n_features = mean.size
    if n_features < 2:
        raise ValueError(f'RATE needs at least 2 features, got {n_features}')
    if method == 'auto':
        method = 'generic' if n_features <= GENERIC_MAX_FEATURES else 'precision'

    jitter = jitter_scale * float(np.trace(cov)) / n_features
    floor = max(jitter, np.finfo(float).tiny)
    degenerate = np.diag(cov) <= floor
    for j in np.flatnonzero(degenerate):
        log.warning(f'Effect size analog of feature {j} has variance {cov[j, j]:.3g}; its KLD is set to 0')
    scored = [j for j in range(n_features) if not degenerate[j]]

    if method == 'generic':
        with Parallel(n_jobs=n_jobs, prefer='threads') as parallel:
            values = parallel(delayed(_generic_kld)(mean, cov, j, jitter) for j in scored)
    else:
        jittered = cov + jitter * np.eye(n_features)
        precision = linalg.cho_solve(linalg.cho_factor(jittered, lower=True), np.eye(n_features))
        values = [_precision_kld(mean, jittered, np.diag(precision), j) for j in scored]

    kld = np.zeros(n_features)
    kld[scored] = values
    kld = np.clip(kld, 0.0, None)

    total = kld.sum()
    if total > 0:
        rate = kld / total
    else:
        log.warning('Every KLD is zero; RATE falls back to the uniform 1/J')
        rate = np.full(n_features, 1.0 / n_features)

    names = e.feature_names or tuple(f'x{j + 1}' for j in range(n_features))
    return RateReport(kld=kld, rate=rate, feature_names=names, metadata={'rate_method': method, 'jitter': jitter})

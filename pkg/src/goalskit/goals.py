"""GOALS local and global variable importance for a fitted GP.

For feature j, g^(j) is the fitted function evaluated with feature j shifted
by xi in every sample, and the importance of j is the posterior of
delta^(j) = f - g^(j). Its posterior mean is [K - B^(j)'] A^-1 y, one matvec
per feature given the weights alpha = A^-1 y of the fitted model.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import linalg

from goalskit.dataset import Dataset
from goalskit.gp import FittedGP
from goalskit.kernel import is_zero_shift, perturbed_cross_gram, perturbed_pair_gram


log = logging.getLogger(__name__)

XI_GRID = (0.05, 0.25, 0.5, 1.0, 1.5, 2.0)
DEFAULT_XI = 1.0
SAMPLE_SIZE_GUARD = 2000
# exp(+-2 theta xi x) factors stay well inside double range below this exponent
SEPARABLE_LIMIT = 3.0
COV_FORMULAS = ('derived', 'reduced')
PATHS = ('auto', 'rank-one', 'generic')


@dataclass(eq=False)
class GoalsReport:
    """Local (N x F) and global (F) GOALS scores for the features in `features`."""

    xi: float | np.ndarray
    local_scores: np.ndarray
    global_scores: np.ndarray
    features: tuple[int, ...]
    feature_names: tuple[str, ...]
    method: str = 'goals'
    metadata: dict = field(default_factory=dict)
    local_sd: np.ndarray | None = None
    global_cov: np.ndarray | None = None

    @property
    def mean_abs(self) -> np.ndarray:
        """Mean absolute local score per feature; nonzero for features that act only through interactions."""
        return np.abs(self.local_scores).mean(axis=0)


def validate_shift(d: Dataset, xi) -> float | np.ndarray:
    xi_array = np.asarray(xi, dtype=np.float64)
    if not np.all(np.isfinite(xi_array)):
        raise ValueError(f'Shift must be finite, got {xi}')
    if xi_array.ndim == 0:
        return float(xi_array)
    if xi_array.shape != (d.n,):
        raise ValueError(f'A per-row shift must have length {d.n}, got shape {xi_array.shape}')
    return xi_array


def validate_features(d: Dataset, features) -> tuple[int, ...]:
    if features is None:
        return tuple(range(d.j))
    features = tuple(int(j) for j in features)
    for j in features:
        if not 0 <= j < d.j:
            raise IndexError(f'Feature index {j} out of range for {d.j} features')
    return features


def _separable_shift(g: FittedGP, column: np.ndarray, xi: float) -> np.ndarray | None:
    """B^(j)' alpha without forming B^(j), for the RBF kernel and a scalar shift.

    b_ii' factors into exp(-theta xi^2) exp(2 theta xi x_ij) k_ii' exp(-2 theta xi x_i'j),
    so B' alpha = exp(-theta xi^2) e^- * (K (e^+ * alpha)). Returns None when the
    factors would lose precision.
    """
    theta = g.cfg.theta
    center = (column.max() + column.min()) / 2
    centered = column - center
    if 2 * theta * abs(xi) * np.max(np.abs(centered)) > SEPARABLE_LIMIT:
        return None
    rise = np.exp(2 * theta * xi * centered)
    return np.exp(-theta * xi**2) * (g.k @ (rise * g.alpha)) / rise


def shift_effect(g: FittedGP, d: Dataset, j: int, xi, path: str = 'auto') -> np.ndarray:
    """Posterior mean of delta^(j) for one feature.

    Args:
        g: Model fitted on d
        d: The standardized Dataset
        j: Feature index (0-based)
        xi: Scalar shift or per-row shifts
        path: 'generic' materializes B^(j); 'rank-one' uses the kernel's low-rank update;
            'auto' uses the rank-one update where it applies

    Returns:
        Length-N vector of local scores
    """
    if path not in PATHS:
        raise ValueError(f'Unknown evaluation path {path!r}; choose from {PATHS}')
    if is_zero_shift(xi):
        return np.zeros(d.n)

    column = d.x[:, j]
    if path != 'generic':
        if g.cfg.kind == 'linear':
            return -np.asarray(xi) * (column @ g.alpha) * np.ones(d.n)
        if g.cfg.kind == 'rbf' and np.ndim(xi) == 0:
            shifted = _separable_shift(g, column, xi)
            if shifted is not None:
                return g.f_hat - shifted
            log.debug(f'Feature {j}: shift too large for the separable update, using the full matrix')
        if path == 'rank-one' and g.cfg.kind != 'rbf':
            raise ValueError(f'No rank-one update for a {g.cfg.kind} kernel')

    b = perturbed_cross_gram(g.cfg, d.x, g.k, j, xi)
    return g.f_hat - b.T @ g.alpha


def goals_local(
    g: FittedGP,
    d: Dataset,
    xi=DEFAULT_XI,
    features=None,
    path: str = 'auto',
    local_sd: bool = False,
    global_cov: bool = False,
    n_jobs: int = 1,
) -> GoalsReport:
    """GOALS local scores delta^(j)_i and global scores (their sample means).

    Args:
        g: Model fitted on d
        d: The standardized Dataset
        xi: Scalar shift or length-N per-row shifts
        features: Feature indices to score; all features by default
        path: Evaluation path for the posterior means, see shift_effect
        local_sd: Also compute posterior standard deviations (one N x N covariance per feature)
        global_cov: Also compute the posterior covariance of the global scores
        n_jobs: Number of worker threads over features

    Returns:
        A GoalsReport
    """
    xi = validate_shift(d, xi)
    features = validate_features(d, features)

    if is_zero_shift(xi):
        log.warning('A zero shift leaves the function unchanged; every GOALS score is exactly 0')
        local = np.zeros((d.n, len(features)))
    else:
        with Parallel(n_jobs=n_jobs, prefer='threads') as parallel:
            columns = parallel(delayed(shift_effect)(g, d, j, xi, path) for j in features)
        local = np.column_stack(columns)

    sd = None
    if local_sd:
        with Parallel(n_jobs=n_jobs, prefer='threads') as parallel:
            variances = parallel(delayed(_local_variance)(g, d, xi, j) for j in features)
        sd = np.sqrt(np.clip(np.column_stack(variances), 0.0, None))

    cov = None
    if global_cov:
        _, moments = goals_global_moments(g, d, xi, n_jobs=n_jobs)
        cov = moments[np.ix_(features, features)]

    return GoalsReport(
        xi=xi,
        local_scores=local,
        global_scores=local.mean(axis=0),
        features=features,
        feature_names=tuple(d.feature_names[j] for j in features),
        metadata=_describe(g, xi, path),
        local_sd=sd,
        global_cov=cov,
    )


def _describe(g: FittedGP, xi, path: str) -> dict:
    return {
        'kernel': g.cfg.kind,
        'theta': g.cfg.theta,
        'sigma2': g.sigma2,
        'xi': xi if np.ndim(xi) == 0 else 'per-row',
        'path': path,
    }


def _local_variance(g: FittedGP, d: Dataset, xi, j: int) -> np.ndarray:
    return np.diag(goals_local_cov(g, d, xi, j))


def goals_local_cov(
    g: FittedGP,
    d: Dataset,
    xi,
    j: int,
    l: int | None = None,  # noqa: E741
    formula: str = 'derived',
) -> np.ndarray:
    """Posterior covariance of delta^(j), or cross-covariance of delta^(j) and delta^(l).

    The cross-covariance is
        (K - KA^-1K) - (B_l - KA^-1B_l) - (B_j' - B_j'A^-1K) + (D_jl - B_j'A^-1B_l)
    and the marginal is its l = j case, where D_jj = K for a shift-invariant
    kernel with a constant shift. formula='reduced' evaluates the alternative
    marginal KA^-1K - B_j'A^-1B_j - [B_j' - B_j'A^-1K + B_j - KA^-1B_j], which
    is off by 2K - 2KA^-1K.

    Args:
        g: Model fitted on d
        d: The standardized Dataset
        xi: Scalar shift or per-row shifts
        j: First feature index
        l: Second feature index; the marginal of j when omitted
        formula: 'derived' or 'reduced' (marginal only)

    Returns:
        N x N covariance matrix
    """
    if formula not in COV_FORMULAS:
        raise ValueError(f'Unknown covariance formula {formula!r}; choose from {COV_FORMULAS}')
    xi = validate_shift(d, xi)
    marginal = l is None
    l = j if marginal else l  # noqa: E741
    validate_features(d, (j, l))

    if is_zero_shift(xi):
        return np.zeros((d.n, d.n))

    k = g.k
    b_j = perturbed_cross_gram(g.cfg, d.x, k, j, xi)
    b_l = b_j if l == j else perturbed_cross_gram(g.cfg, d.x, k, l, xi)
    solved_k = g.solve(k)
    solved_b_l = g.solve(b_l)

    if formula == 'reduced':
        if not marginal:
            raise ValueError('The reduced formula only covers the marginal covariance')
        cov = k @ solved_k - b_j.T @ solved_b_l - (b_j.T - b_j.T @ solved_k + b_j - k @ solved_b_l)
    else:
        d_jl = perturbed_pair_gram(g.cfg, d.x, k, j, l, xi)
        cov = (k - k @ solved_k) - (b_l - k @ solved_b_l) - (b_j.T - b_j.T @ solved_k) + (d_jl - b_j.T @ solved_b_l)

    if marginal:
        cov = (cov + cov.T) / 2
    return cov


def goals_global_moments(g: FittedGP, d: Dataset, xi, n_jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and covariance of the global scores (delta-bar^(1), ..., delta-bar^(J)).

    With 1 the ones vector and r_j = B_j 1:
        lambda = 1'K1 - 1'KA^-1K1
        psi_j = 1'r_j - 1'KA^-1 r_j
        alpha_jl = 1'D_jl 1 - r_j'A^-1 r_l
        Cov(delta-bar^(j), delta-bar^(l)) = (lambda + alpha_jl - psi_j - psi_l) / N^2

    Args:
        g: Model fitted on d
        d: The standardized Dataset
        xi: Scalar shift or per-row shifts
        n_jobs: Number of worker threads

    Returns:
        Length-J mean and symmetric J x J covariance
    """
    xi = validate_shift(d, xi)
    n, n_features = d.n, d.j
    if is_zero_shift(xi):
        return np.zeros(n_features), np.zeros((n_features, n_features))

    ones = np.ones(n)
    k_ones = g.k @ ones
    solved_k_ones = g.solve(k_ones)
    lam = k_ones.sum() - k_ones @ solved_k_ones

    def row_sums(j):
        b = perturbed_cross_gram(g.cfg, d.x, g.k, j, xi)
        return b @ ones, b.T @ g.alpha

    with Parallel(n_jobs=n_jobs, prefer='threads') as parallel:
        results = parallel(delayed(row_sums)(j) for j in range(n_features))
    r = np.column_stack([sums for sums, _ in results])
    mean = np.array([(g.f_hat - shifted).mean() for _, shifted in results])

    solved_r = g.solve(r)
    psi = r.sum(axis=0) - solved_k_ones @ r
    cross = r.T @ solved_r

    def pair_total(j, l):  # noqa: E741
        return perturbed_pair_gram(g.cfg, d.x, g.k, j, l, xi).sum()

    pairs = [(j, l) for j in range(n_features) for l in range(j, n_features)]
    with Parallel(n_jobs=n_jobs, prefer='threads') as parallel:
        totals = parallel(delayed(pair_total)(j, l) for j, l in pairs)
    d_sums = np.zeros((n_features, n_features))
    for (j, l), total in zip(pairs, totals):
        d_sums[j, l] = d_sums[l, j] = total

    alpha = d_sums - cross
    cov = (lam + alpha - psi[:, np.newaxis] - psi[np.newaxis, :]) / n**2
    cov = (cov + cov.T) / 2

    smallest = float(linalg.eigvalsh(cov)[0])
    if smallest < -1e-8 * n_features:
        log.warning(f'Global score covariance has eigenvalue {smallest:.3g} below the PSD tolerance')
    return mean, cov


def goals_joint_cov(g: FittedGP, d: Dataset, xi) -> np.ndarray:
    """Covariance of the stacked vector (delta^(1); ...; delta^(J)), feature-major blocks."""
    n, n_features = d.n, d.j
    cov = np.zeros((n * n_features, n * n_features))
    for j in range(n_features):
        for l in range(j, n_features):  # noqa: E741
            block = goals_local_cov(g, d, xi, j) if l == j else goals_local_cov(g, d, xi, j, l)
            cov[j * n : (j + 1) * n, l * n : (l + 1) * n] = block
            cov[l * n : (l + 1) * n, j * n : (j + 1) * n] = block.T
    return (cov + cov.T) / 2


def goals_sample(g: FittedGP, d: Dataset, xi, n_draws: int, seed: int) -> np.ndarray:
    """Exact joint posterior draws of (delta^(1), ..., delta^(J)).

    Args:
        g: Model fitted on d
        d: The standardized Dataset
        xi: Scalar shift or per-row shifts
        n_draws: Number of draws
        seed: Seed of the numpy Generator

    Returns:
        Array of shape (n_draws, N, J)
    """
    xi = validate_shift(d, xi)
    if d.n * d.j > SAMPLE_SIZE_GUARD:
        raise ValueError(f'N*J = {d.n * d.j} exceeds the dense sampling limit of {SAMPLE_SIZE_GUARD}')
    if n_draws < 1:
        raise ValueError(f'Number of draws must be positive, got {n_draws}')
    if is_zero_shift(xi):
        return np.zeros((n_draws, d.n, d.j))

    mean = goals_local(g, d, xi).local_scores.T.reshape(-1)
    eigenvalues, eigenvectors = linalg.eigh(goals_joint_cov(g, d, xi))
    root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))

    rng = np.random.default_rng(seed)
    draws = mean + rng.standard_normal((n_draws, mean.size)) @ root.T
    return draws.reshape(n_draws, d.j, d.n).transpose(0, 2, 1)


def shap_shift(d: Dataset, j: int) -> np.ndarray:
    """Per-row shift xi_i = -x_ij, which moves feature j of every sample to zero."""
    if not 0 <= j < d.j:
        raise IndexError(f'Feature index {j} out of range for {d.j} features')
    return -np.array(d.x[:, j])


def aggregate_by_group(report: GoalsReport, groups) -> pd.DataFrame:
    """Mean local score per group (rows) and feature (columns)."""
    groups = np.asarray(groups)
    if groups.shape != (report.local_scores.shape[0],):
        raise ValueError(f'Need one group label per sample ({report.local_scores.shape[0]}), got {groups.shape}')
    frame = pd.DataFrame(report.local_scores, columns=list(report.feature_names))
    return frame.groupby(groups, sort=True).mean()

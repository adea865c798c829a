"""Gram matrices and their feature-shift perturbations.

The RBF kernel k(x, x') = exp(-theta * ||x - x'||^2) is shift invariant, so
shifting feature j of the second argument by xi only multiplies every gram
entry by exp(-theta * [xi^2 - 2 xi (x_ij - x_i'j)]). The perturbed matrices
are therefore element-wise updates of K rather than fresh kernel
evaluations. The linear kernel K = XX' gets an additive rank-one update
instead.

Shifts may be a scalar or a per-row vector; entry i of the vector is the shift
applied to sample i.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform


log = logging.getLogger(__name__)

KERNEL_KINDS = ('rbf', 'linear', 'precomputed')
MEDIAN_SUBSAMPLE = 5000
MEDIAN_SUBSAMPLE_SEED = 20240101


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family and bandwidth.

    `precomputed` is a hook for callers that supply the gram matrix directly
    (e.g. the random feature model); it has no perturbation rule.
    """

    kind: str = 'rbf'
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f'Unknown kernel {self.kind!r}; choose from {KERNEL_KINDS}')
        if self.kind == 'rbf':
            if self.theta is None or not np.isfinite(self.theta) or self.theta <= 0:
                raise ValueError(f'RBF bandwidth theta must be positive and finite, got {self.theta}')

    def describe(self) -> dict:
        return {'kind': self.kind, 'theta': self.theta if self.kind == 'rbf' else None}


def median_bandwidth(x: np.ndarray) -> float:
    """Median criterion: theta = 1 / (2 m^2), m the median pairwise Euclidean distance.

    For more than 5000 rows the median comes from a seeded subsample of 5000 rows.

    Args:
        x: N x J design matrix

    Returns:
        The bandwidth theta
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError('The median criterion needs at least 2 rows')

    if x.shape[0] > MEDIAN_SUBSAMPLE:
        rng = np.random.default_rng(MEDIAN_SUBSAMPLE_SEED)
        rows = np.sort(rng.choice(x.shape[0], size=MEDIAN_SUBSAMPLE, replace=False))
        x = x[rows]

    m = float(np.median(pdist(x, metric='euclidean')))
    if m == 0:
        raise ValueError('Median pairwise distance is zero; the rows are (mostly) identical')
    return 1.0 / (2.0 * m**2)


def rbf_config(x: np.ndarray) -> KernelConfig:
    return KernelConfig(kind='rbf', theta=median_bandwidth(x))


def gram_matrix(cfg: KernelConfig, x: np.ndarray) -> np.ndarray:
    """Symmetric N x N gram matrix of the rows of x."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError('Cannot build a gram matrix from non-finite input')

    if cfg.kind == 'rbf':
        # squareform leaves an exact zero diagonal, so k_ii is exactly 1
        return np.exp(-cfg.theta * squareform(pdist(x, metric='sqeuclidean')))
    if cfg.kind == 'linear':
        k = x @ x.T
        return (k + k.T) / 2
    raise ValueError('A precomputed kernel has no gram rule; pass the gram matrix explicitly')


def _check_shift(x: np.ndarray, j: int, xi) -> np.ndarray | float:
    if not 0 <= j < x.shape[1]:
        raise IndexError(f'Feature index {j} out of range for {x.shape[1]} features')
    xi_array = np.asarray(xi, dtype=np.float64)
    if not np.all(np.isfinite(xi_array)):
        raise ValueError(f'Shift must be finite, got {xi}')
    if xi_array.ndim == 0:
        return float(xi_array)
    if xi_array.shape != (x.shape[0],):
        raise ValueError(f'A per-row shift must have length {x.shape[0]}, got shape {xi_array.shape}')
    return xi_array


def is_zero_shift(xi) -> bool:
    return bool(np.all(np.asarray(xi) == 0))


def perturbed_cross_gram(cfg: KernelConfig, x: np.ndarray, k: np.ndarray, j: int, xi) -> np.ndarray:
    """B^(j) with b_ii' = k(x_i, x_i' + xi_i' e_j), the covariance of f and its shifted copy.

    B^(j) is not symmetric and is never symmetrized.

    Args:
        cfg: Kernel used to build k
        x: N x J design matrix
        k: gram_matrix(cfg, x)
        j: Feature index (0-based)
        xi: Scalar shift or length-N per-row shifts

    Returns:
        The N x N matrix B^(j)
    """
    xi = _check_shift(x, j, xi)
    if is_zero_shift(xi):
        return k.copy()

    column = x[:, j]
    if cfg.kind == 'rbf':
        shift = np.broadcast_to(xi, column.shape)[np.newaxis, :]
        diff = column[:, np.newaxis] - column[np.newaxis, :]
        return k * np.exp(-cfg.theta * (shift**2 - 2.0 * shift * diff))
    if cfg.kind == 'linear':
        return k + np.outer(column, np.broadcast_to(xi, column.shape))
    raise ValueError('A precomputed kernel has no perturbation rule')


def perturbed_pair_gram(cfg: KernelConfig, x: np.ndarray, k: np.ndarray, j: int, l: int, xi) -> np.ndarray:  # noqa
    """D^(j,l) with d_ii' = k(x_i + xi_i e_j, x_i' + xi_i' e_l), the covariance of two shifted copies.

    Args:
        cfg: Kernel used to build k
        x: N x J design matrix
        k: gram_matrix(cfg, x)
        j: Feature shifted in the first argument
        l: Feature shifted in the second argument
        xi: Scalar shift or length-N per-row shifts

    Returns:
        The N x N matrix D^(j,l)
    """
    xi = _check_shift(x, j, xi)
    _check_shift(x, l, xi)
    if is_zero_shift(xi):
        return k.copy()

    n = x.shape[0]
    shift = np.broadcast_to(xi, (n,))
    if cfg.kind == 'rbf':
        if j == l and np.ndim(xi) == 0:
            return k.copy()
        diff_j = x[:, j][:, np.newaxis] - x[:, j][np.newaxis, :]
        diff_l = x[:, l][:, np.newaxis] - x[:, l][np.newaxis, :]
        row_shift = shift[:, np.newaxis]
        col_shift = shift[np.newaxis, :]
        if j == l:
            offset = (row_shift - col_shift) ** 2
        else:
            offset = row_shift**2 + col_shift**2
        exponent = 2.0 * row_shift * diff_j - 2.0 * col_shift * diff_l + offset
        return k * np.exp(-cfg.theta * exponent)
    if cfg.kind == 'linear':
        d = k + np.outer(x[:, l], shift) + np.outer(shift, x[:, j])
        if j == l:
            d = d + np.outer(shift, shift)
        return d
    raise ValueError('A precomputed kernel has no perturbation rule')

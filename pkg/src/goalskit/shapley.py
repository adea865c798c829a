"""Exact Shapley attributions by refitting the GP on every feature subset"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np
from joblib import Parallel, delayed

from goalskit.dataset import Dataset
from goalskit.gp import fit
from goalskit.kernel import KernelConfig, median_bandwidth


log = logging.getLogger(__name__)

MAX_FEATURES = 15


@dataclass(eq=False)
class ShapReport:
    local_scores: np.ndarray
    global_scores: np.ndarray
    subset_count: int
    n_fits: int
    feature_names: tuple[str, ...]
    method: str = 'shap'
    metadata: dict = field(default_factory=dict)


def shapley_weights(n_features: int) -> list[Fraction]:
    """Exact weights |S|! (J - |S| - 1)! / J! for coalition sizes 0..J-1."""
    if n_features < 1:
        raise ValueError(f'Need at least 1 feature, got {n_features}')
    total = factorial(n_features)
    return [Fraction(factorial(s) * factorial(n_features - s - 1), total) for s in range(n_features)]


def _columns(mask: int, n_features: int) -> list[int]:
    return [j for j in range(n_features) if mask >> j & 1]


def subset_fitted_values(d: Dataset, cfg: KernelConfig, sigma2: float, mask: int) -> np.ndarray:
    """Fitted values of a GP refit on the feature subset encoded by the bitmask.

    The empty subset is the zero function. RBF bandwidths are recomputed on the
    subset; the noise variance is shared.
    """
    if mask == 0:
        return np.zeros(d.n)

    subset = d.subset_columns(_columns(mask, d.j))
    if cfg.kind == 'rbf':
        try:
            subset_cfg = KernelConfig(kind='rbf', theta=median_bandwidth(subset.x))
        except ValueError:
            log.warning(f'Subset {subset.feature_names} has no spread between rows; using the zero function')
            return np.zeros(d.n)
    else:
        subset_cfg = cfg
    return np.array(fit(subset, subset_cfg, sigma2).f_hat)


def exact_shap(d: Dataset, cfg: KernelConfig, sigma2: float, n_jobs: int = 1) -> ShapReport:
    """Per-sample Shapley values of the fitted GP function.

    Every one of the 2^J subsets is evaluated exactly once; feature j then
    collects w(|S|) (f_{S+j} - f_S) over the 2^(J-1) subsets S without j.

    Args:
        d: A standardized Dataset with at most 15 features
        cfg: Kernel of the full model; RBF bandwidths are recomputed per subset
        sigma2: Noise variance shared across all subset fits
        n_jobs: Number of worker threads over subsets

    Returns:
        A ShapReport
    """
    n_features = d.j
    if n_features > MAX_FEATURES:
        raise ValueError(f'Exact Shapley values are capped at {MAX_FEATURES} features, got {n_features}')
    if cfg.kind == 'precomputed':
        raise ValueError('Subset refits need a kernel rule; a precomputed kernel cannot be restricted to a subset')

    masks = range(1 << n_features)
    with Parallel(n_jobs=n_jobs, prefer='threads') as parallel:
        values = parallel(delayed(subset_fitted_values)(d, cfg, sigma2, mask) for mask in masks)
    subset_values = dict(zip(masks, values))

    weights = [float(w) for w in shapley_weights(n_features)]
    local = np.zeros((d.n, n_features))
    for j in range(n_features):
        bit = 1 << j
        for mask in masks:
            if mask & bit:
                continue
            size = mask.bit_count()
            local[:, j] += weights[size] * (subset_values[mask | bit] - subset_values[mask])

    log.info(f'Evaluated {len(subset_values)} feature subsets for {n_features} Shapley values')
    return ShapReport(
        local_scores=local,
        global_scores=local.mean(axis=0),
        subset_count=1 << (n_features - 1),
        n_fits=len(subset_values),
        feature_names=d.feature_names,
        metadata={'kernel': cfg.kind, 'sigma2': sigma2},
    )

"""Rank features by importance and score rankings against a known causal set"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats
from sklearn.metrics import auc, roc_auc_score

from goalskit.dataset import Dataset
from goalskit.utils import DataError


log = logging.getLogger(__name__)

GRID_POINTS = 1001
ABSOLUTE_METHODS = ('goals', 'shap', 'nn-goals')


@dataclass(frozen=True, eq=False)
class RocCurve:
    """(fpr, tpr) rows from (0, 0) to (1, 1), and the area under them."""

    points: np.ndarray
    auc: float
    n_causal: int
    n_null: int

    @property
    def fpr(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def tpr(self) -> np.ndarray:
        return self.points[:, 1]


def _causal_mask(n_features: int, causal) -> np.ndarray:
    mask = np.zeros(n_features, dtype=bool)
    for index in causal:
        if not 0 <= index < n_features:
            raise IndexError(f'Causal index {index} out of range for {n_features} features')
        mask[index] = True
    if not 0 < mask.sum() < n_features:
        raise ValueError(f'Need at least one causal and one null feature, got {int(mask.sum())} of {n_features} causal')
    return mask


def rank_features(scores: np.ndarray, descending_by: str = 'abs') -> np.ndarray:
    """Feature indices from most to least important; ties go to the lower index."""
    if descending_by not in ('abs', 'signed'):
        raise ValueError(f"descending_by must be 'abs' or 'signed', got {descending_by!r}")
    scores = np.asarray(scores, dtype=np.float64)
    key = np.abs(scores) if descending_by == 'abs' else scores
    return np.lexsort((np.arange(scores.size), -key))


def roc_from_scores(scores: np.ndarray, causal, descending_by: str = 'abs') -> RocCurve:
    """ROC curve of a sliding threshold that declares the top-k ranked features positive.

    Args:
        scores: One importance score per feature
        causal: Indices of the truly causal features
        descending_by: Rank by 'abs' value or by 'signed' value

    Returns:
        RocCurve with J + 1 points and its trapezoidal AUC
    """
    scores = np.asarray(scores, dtype=np.float64)
    is_causal = _causal_mask(scores.size, causal)
    hits = is_causal[rank_features(scores, descending_by)]

    n_causal = int(is_causal.sum())
    n_null = scores.size - n_causal
    tpr = np.concatenate([[0.0], np.cumsum(hits) / n_causal])
    fpr = np.concatenate([[0.0], np.cumsum(~hits) / n_null])
    return RocCurve(points=np.column_stack([fpr, tpr]), auc=float(auc(fpr, tpr)), n_causal=n_causal, n_null=n_null)


def mann_whitney_auc(scores: np.ndarray, causal, descending_by: str = 'abs') -> float:
    """Probability that a random causal feature outranks a random null feature (ties count one half)."""
    scores = np.asarray(scores, dtype=np.float64)
    is_causal = _causal_mask(scores.size, causal)
    key = np.abs(scores) if descending_by == 'abs' else scores
    return float(roc_auc_score(is_causal, key))


def scanone_statistics(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Slope t-statistics and two-sided p-values of y ~ 1 + x_j for every feature j."""
    n = d.n
    if n < 3:
        raise DataError(f'SCANONE needs at least 3 samples for a slope test, got {n}')
    x = d.x - d.x.mean(axis=0)
    y = d.y - d.y.mean()
    r = (x.T @ y) / np.sqrt((x**2).sum(axis=0) * (y**2).sum())
    r2 = np.clip(r**2, 0.0, 1.0)

    t = np.copysign(np.inf, r)
    exact = r2 >= 1.0
    t[~exact] = r[~exact] * np.sqrt((n - 2) / (1.0 - r2[~exact]))
    p = 2 * stats.t.sf(np.abs(t), df=n - 2)
    return t, p


def scanone(d: Dataset) -> np.ndarray:
    """Per-feature p-values of the one-feature-at-a-time OLS association scan."""
    if not d.standardized:
        raise DataError('SCANONE expects a standardized Dataset')
    return scanone_statistics(d)[1]


def ranking_scores(method: str, global_scores: np.ndarray) -> np.ndarray:
    """Scores whose descending signed order is the method's evidence order.

    GOALS, SHAP and the random feature model rank by magnitude; RATE by value;
    SCANONE by ascending p-value.
    """
    global_scores = np.asarray(global_scores, dtype=np.float64)
    if method in ABSOLUTE_METHODS:
        return np.abs(global_scores)
    if method == 'rate':
        return global_scores
    if method == 'scanone':
        return -global_scores
    raise ValueError(f'No ranking convention for method {method!r}')


def step_tpr(curve: RocCurve, grid: np.ndarray) -> np.ndarray:
    """Right-continuous step interpolation: the best TPR reached at FPR <= each grid value."""
    positions = np.searchsorted(curve.fpr, grid, side='right') - 1
    best = np.maximum.accumulate(curve.tpr)
    return best[positions]


def auc_summary(replicates: list[RocCurve]) -> tuple[RocCurve, float]:
    """Pointwise mean TPR on a 1001-point FPR grid and the mean of the replicate AUCs.

    Args:
        replicates: ROC curves of the replicate datasets

    Returns:
        The mean curve and the mean AUC
    """
    if not replicates:
        raise ValueError('Need at least one ROC curve to summarize')

    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    mean_tpr = np.mean([step_tpr(curve, grid) for curve in replicates], axis=0)
    mean_tpr[0] = 0.0
    mean_curve = RocCurve(
        points=np.column_stack([grid, mean_tpr]),
        auc=float(auc(grid, mean_tpr)),
        n_causal=replicates[0].n_causal,
        n_null=replicates[0].n_null,
    )
    return mean_curve, float(np.mean([curve.auc for curve in replicates]))

"""GOALS for a last-layer Bayesian network on fixed random features.

The hidden layer h(X theta) is drawn once and kept fixed; the output weights
w ~ N(0, V) induce the Gaussian process f ~ N(0, H V H'). Shifting feature j
only moves the pre-activations by xi * theta[j], so the perturbed activations
reuse the cached X theta.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from goalskit import gp
from goalskit.dataset import Dataset
from goalskit.goals import GoalsReport, validate_features, validate_shift
from goalskit.kernel import KernelConfig, is_zero_shift
from goalskit.utils import DataError


log = logging.getLogger(__name__)

ACTIVATIONS = {
    'relu': lambda z: np.maximum(z, 0.0),
    'tanh': np.tanh,
    'identity': lambda z: z,
}
MEMORY_GUARD = 50_000_000
SCALE_GRID = np.linspace(np.log(1e-3), np.log(1e3), 61)


@dataclass(frozen=True, eq=False)
class RandomFeatureModel:
    inner_weights: np.ndarray
    activation: str
    v_diag: np.ndarray
    sigma2: float
    h: np.ndarray
    preact: np.ndarray
    log_marginal: float

    @property
    def width(self) -> int:
        return self.inner_weights.shape[1]

    def gram(self) -> np.ndarray:
        return (self.h * self.v_diag) @ self.h.T

    def shifted_activations(self, j: int, xi) -> np.ndarray:
        """h((X + xi e_j) theta) from the cached pre-activations."""
        shift = np.asarray(xi, dtype=np.float64)
        if shift.ndim == 1:
            shift = shift[:, np.newaxis]
        return ACTIVATIONS[self.activation](self.preact + shift * self.inner_weights[j])


def _spectral_log_marginal(eigenvalues, projected, v: float, sigma2: float) -> float:
    spectrum = v * eigenvalues + sigma2
    return float(-0.5 * (np.sum(projected / spectrum) + np.sum(np.log(spectrum)) + spectrum.size * np.log(2 * np.pi)))


def _best_sigma2(eigenvalues, projected, v: float, variance: float) -> tuple[float, float]:
    low, high = (np.log(bound * variance) for bound in gp.SIGMA2_BOUNDS)
    result = minimize_scalar(
        lambda s: -_spectral_log_marginal(eigenvalues, projected, v, np.exp(s)),
        bounds=(low, high),
        method='bounded',
        options={'xatol': gp.SIGMA2_XATOL},
    )
    return float(np.exp(result.x)), -float(result.fun)


def fit_random_features(
    d: Dataset,
    width: int,
    activation: str = 'relu',
    seed: int = 0,
    inner_weights: np.ndarray | None = None,
) -> RandomFeatureModel:
    """Draw the hidden layer and choose an isotropic V = v I and sigma2 by marginal likelihood.

    v is searched on a log grid around the scale that gives the induced kernel
    a unit mean diagonal, with sigma2 optimized for each v, and the best grid
    cell is then refined.

    Args:
        d: A standardized Dataset
        width: Number of hidden units L
        activation: 'relu', 'tanh' or 'identity'
        seed: Seed for the inner weights
        inner_weights: Optional fixed J x L inner weights instead of random ones

    Returns:
        The fitted RandomFeatureModel
    """
    if not d.standardized:
        raise DataError('The random feature model is fit on standardized data')
    if activation not in ACTIVATIONS:
        raise ValueError(f'Unknown activation {activation!r}; choose from {tuple(ACTIVATIONS)}')
    if width < 1:
        raise ValueError(f'Width must be at least 1, got {width}')
    if d.n * width > MEMORY_GUARD:
        raise ValueError(f'N*L = {d.n * width} activations exceed the memory guard of {MEMORY_GUARD}')

    if inner_weights is None:
        rng = np.random.default_rng(seed)
        inner_weights = rng.normal(0.0, np.sqrt(1.0 / d.j), size=(d.j, width))
    else:
        inner_weights = np.array(inner_weights, dtype=np.float64)
        if inner_weights.shape != (d.j, width):
            raise ValueError(f'Inner weights must be {d.j} x {width}, got {inner_weights.shape}')

    preact = d.x @ inner_weights
    h = ACTIVATIONS[activation](preact)
    eigenvalues, eigenvectors = linalg.eigh(h @ h.T)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    projected = (eigenvectors.T @ d.y) ** 2

    mean_diag = float(np.mean(np.sum(h**2, axis=1)))
    if mean_diag == 0:
        raise DataError('Every hidden unit is inactive on this data; try another seed or activation')
    base = -np.log(mean_diag)
    variance = float(np.var(d.y, ddof=1))

    grid = [(_best_sigma2(eigenvalues, projected, np.exp(base + s), variance), s) for s in SCALE_GRID]
    best = int(np.argmax([lml for (_, lml), _ in grid]))
    step = SCALE_GRID[1] - SCALE_GRID[0]
    refined = minimize_scalar(
        lambda s: -_best_sigma2(eigenvalues, projected, np.exp(base + s), variance)[1],
        bounds=(SCALE_GRID[best] - step, SCALE_GRID[best] + step),
        method='bounded',
        options={'xatol': 1e-4},
    )
    if -refined.fun >= grid[best][0][1]:
        log_scale = float(refined.x)
    else:
        log_scale = float(SCALE_GRID[best])
    v = float(np.exp(base + log_scale))
    sigma2, log_marginal = _best_sigma2(eigenvalues, projected, v, variance)

    # posterior mean of the output weights: V H' A^-1 y
    a = v * (h @ h.T) + sigma2 * np.eye(d.n)
    w_bar = v * h.T @ linalg.solve(a, d.y, assume_a='pos')
    residual_variance = float(np.var(d.y - h @ w_bar, ddof=1))
    if not 0.5 * residual_variance <= sigma2 <= 2 * residual_variance:
        log.warning(f'sigma2={sigma2:.4g} is not within a factor of 2 of the residual variance {residual_variance:.4g}')

    log.info(f'Random feature model: L={width}, {activation}, v={v:.4g}, sigma2={sigma2:.4g}')
    return RandomFeatureModel(
        inner_weights=inner_weights,
        activation=activation,
        v_diag=np.full(width, v),
        sigma2=sigma2,
        h=h,
        preact=preact,
        log_marginal=log_marginal,
    )


def fit_induced_gp(m: RandomFeatureModel, d: Dataset) -> gp.FittedGP:
    """The GP with the induced kernel H V H', through the precomputed-gram hook."""
    return gp.fit(d, KernelConfig(kind='precomputed'), sigma2=m.sigma2, gram=m.gram())


def nn_cross_gram(m: RandomFeatureModel, j: int, xi) -> np.ndarray:
    """B^(j) = H V H^(j)' of the induced kernel."""
    return (m.h * m.v_diag) @ m.shifted_activations(j, xi).T


def nn_goals_scores(
    m: RandomFeatureModel, d: Dataset, xi=1.0, features=None, g: gp.FittedGP | None = None
) -> GoalsReport:
    """GOALS scores of the random feature model.

    Args:
        m: Model fitted on d
        d: The standardized Dataset
        xi: Scalar shift or per-row shifts
        features: Feature indices to score; all by default
        g: The induced GP, if already fitted

    Returns:
        GoalsReport with method 'nn-goals'
    """
    xi = validate_shift(d, xi)
    features = validate_features(d, features)
    if g is None:
        g = fit_induced_gp(m, d)

    if is_zero_shift(xi):
        local = np.zeros((d.n, len(features)))
    else:
        weighted = m.v_diag * (m.h.T @ g.alpha)
        local = np.column_stack([g.f_hat - m.shifted_activations(j, xi) @ weighted for j in features])

    return GoalsReport(
        xi=xi,
        local_scores=local,
        global_scores=local.mean(axis=0),
        features=features,
        feature_names=tuple(d.feature_names[j] for j in features),
        method='nn-goals',
        metadata={
            'width': m.width,
            'activation': m.activation,
            'v': float(m.v_diag[0]),
            'sigma2': m.sigma2,
            'xi': xi if np.ndim(xi) == 0 else 'per-row',
        },
    )

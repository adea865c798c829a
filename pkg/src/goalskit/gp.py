"""Weight-space Gaussian process regression with a zero mean function"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from goalskit.dataset import Dataset
from goalskit.kernel import KernelConfig, gram_matrix
from goalskit.utils import DataError, NumericalError, check_schema, hash_arrays, read_json, write_json


log = logging.getLogger(__name__)

GP_FORMAT = 'goalskit.gp.v1'
SIGMA2_BOUNDS = (1e-4, 10.0)
SIGMA2_XATOL = 1e-4
JITTER_START = 1e-10
JITTER_STOP = 1e-4


@dataclass(frozen=True, eq=False)
class FittedGP:
    """A GP conditioned on one Dataset.

    `chol` is the lower Cholesky factor of A = K + (sigma2 + jitter) I and
    `alpha` = A^-1 y. All solves against A go through `chol`.
    """

    cfg: KernelConfig
    k: np.ndarray
    sigma2: float
    chol: np.ndarray
    alpha: np.ndarray
    f_hat: np.ndarray
    log_marginal: float
    jitter: float = 0.0
    data_hash: str = ''
    n_features: int = 0

    @property
    def n(self) -> int:
        return self.k.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """A^-1 b for a vector or a matrix of right-hand sides."""
        return linalg.cho_solve((self.chol, True), b, check_finite=False)


def cholesky_with_jitter(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a, escalating a diagonal jitter if the plain factorization fails.

    Jitter starts at 1e-10 * mean(diag(a)) and grows by 10x up to 1e-4 * mean(diag(a)).

    Args:
        a: Symmetric matrix to factor

    Returns:
        The lower factor and the jitter that was added (0 if none)
    """
    try:
        return np.tril(linalg.cholesky(a, lower=True)), 0.0
    except linalg.LinAlgError:
        pass

    scale = float(np.mean(np.diag(a)))
    if not np.isfinite(scale) or scale <= 0:
        raise NumericalError(f'Cannot regularize a matrix with mean diagonal {scale}')

    eye = np.eye(a.shape[0])
    relative = JITTER_START
    while relative <= JITTER_STOP * (1 + 1e-9):
        jitter = relative * scale
        try:
            factor = np.tril(linalg.cholesky(a + jitter * eye, lower=True))
        except linalg.LinAlgError:
            relative *= 10
            continue
        log.warning(f'Cholesky needed jitter {jitter:.3g} ({relative:.0e} x mean diagonal)')
        return factor, jitter

    raise NumericalError(f'Cholesky failed even with jitter {JITTER_STOP:.0e} x mean diagonal; K is ill-conditioned')


def _resolve_gram(d: Dataset, cfg: KernelConfig, gram: np.ndarray | None) -> np.ndarray:
    if gram is None:
        return gram_matrix(cfg, d.x)
    gram = np.array(gram, dtype=np.float64, copy=True)
    if gram.shape != (d.n, d.n):
        raise ValueError(f'Gram matrix must be {d.n} x {d.n}, got {gram.shape}')
    return gram


def _gaussian_log_likelihood(y: np.ndarray, chol: np.ndarray) -> float:
    alpha = linalg.cho_solve((chol, True), y, check_finite=False)
    half_log_det = np.sum(np.log(np.diag(chol)))
    return float(-0.5 * y @ alpha - half_log_det - 0.5 * y.shape[0] * np.log(2 * np.pi))


def log_marginal_likelihood(d: Dataset, cfg: KernelConfig, sigma2: float, gram: np.ndarray | None = None) -> float:
    """log N(y | 0, K + sigma2 I), evaluated through a Cholesky factor.

    Args:
        d: Dataset providing x and y
        cfg: Kernel configuration
        sigma2: Noise variance
        gram: Optional precomputed gram matrix

    Returns:
        The log marginal likelihood
    """
    if sigma2 <= 0:
        raise ValueError(f'Noise variance must be positive, got {sigma2}')
    k = _resolve_gram(d, cfg, gram)
    chol, _ = cholesky_with_jitter(k + sigma2 * np.eye(d.n))
    return _gaussian_log_likelihood(d.y, chol)


def select_sigma2(y: np.ndarray, k: np.ndarray) -> float:
    """Noise variance maximizing the log marginal likelihood on [1e-4, 10] x Var(y).

    One eigendecomposition of K makes every likelihood evaluation O(N).
    """
    eigenvalues, eigenvectors = linalg.eigh(k)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    projected = (eigenvectors.T @ y) ** 2

    def negative_log_marginal(log_sigma2: float) -> float:
        spectrum = eigenvalues + np.exp(log_sigma2)
        return 0.5 * float(np.sum(projected / spectrum) + np.sum(np.log(spectrum)))

    variance = float(np.var(y, ddof=1))
    low, high = (np.log(bound * variance) for bound in SIGMA2_BOUNDS)
    result = minimize_scalar(
        negative_log_marginal, bounds=(low, high), method='bounded', options={'xatol': SIGMA2_XATOL}
    )
    sigma2 = float(np.exp(result.x))
    log.debug(f'Selected sigma2={sigma2:.6g} after {result.nfev} likelihood evaluations')
    return sigma2


def fit(d: Dataset, cfg: KernelConfig, sigma2: float | None = None, gram: np.ndarray | None = None) -> FittedGP:
    """Fit the GP regression y = f + e, f ~ N(0, K), e ~ N(0, sigma2 I).

    Args:
        d: A standardized Dataset
        cfg: Kernel configuration; use kind='precomputed' together with `gram`
        sigma2: Noise variance; selected by maximum marginal likelihood if omitted
        gram: Optional precomputed gram matrix

    Returns:
        The fitted model
    """
    if not d.standardized:
        raise DataError('The GP is fit on standardized data; call dataset.standardize first')
    if sigma2 is not None and not sigma2 > 0:
        raise ValueError(f'Noise variance must be positive, got {sigma2}')

    k = _resolve_gram(d, cfg, gram)
    if sigma2 is None:
        sigma2 = select_sigma2(d.y, k)

    chol, jitter = cholesky_with_jitter(k + sigma2 * np.eye(d.n))
    alpha = linalg.cho_solve((chol, True), d.y, check_finite=False)
    f_hat = k @ alpha

    k.setflags(write=False)
    for array in (chol, alpha, f_hat):
        array.setflags(write=False)

    log.info(f'Fit GP with {cfg.kind} kernel on N={d.n}, J={d.j}, sigma2={sigma2:.6g}')
    return FittedGP(
        cfg=cfg,
        k=k,
        sigma2=float(sigma2),
        chol=chol,
        alpha=alpha,
        f_hat=f_hat,
        log_marginal=_gaussian_log_likelihood(d.y, chol),
        jitter=jitter,
        data_hash=hash_arrays(d.x, d.y),
        n_features=d.j,
    )


def posterior_f(g: FittedGP, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior of f given y: mean K A^-1 y and covariance K - K A^-1 K.

    Args:
        g: Fitted model
        y: Response the model was fit on (or any response for linearity checks)

    Returns:
        Posterior mean vector and symmetrized covariance matrix
    """
    mean = g.k @ g.solve(np.asarray(y, dtype=np.float64))
    cov = g.k - g.k @ g.solve(g.k)
    return mean, (cov + cov.T) / 2


def save_fit(g: FittedGP, path: Path) -> Path:
    """Write a fitted model as JSON metadata plus an .npz matrix sidecar.

    Args:
        g: Fitted model
        path: JSON output path; the sidecar is written next to it

    Returns:
        Path to the JSON document
    """
    path = Path(path)
    sidecar = path.with_suffix('.npz')
    np.savez(sidecar, k=g.k, chol=g.chol, alpha=g.alpha)
    payload = {
        'format': GP_FORMAT,
        'kernel': g.cfg.describe(),
        'sigma2': g.sigma2,
        'theta': g.cfg.theta,
        'jitter': g.jitter,
        'log_marginal': g.log_marginal,
        'n': g.n,
        'J': g.n_features,
        'data_hash': g.data_hash,
        'sidecar': sidecar.name,
    }
    return write_json(payload, path)


def load_fit(path: Path, d: Dataset | None = None) -> FittedGP:
    """Read a model written by save_fit, optionally checking it against the Dataset it was fit on."""
    path = Path(path)
    payload = read_json(path)
    check_schema(payload, GP_FORMAT, path)

    sidecar = path.parent / payload['sidecar']
    if not sidecar.exists():
        raise FileNotFoundError(f'Missing matrix sidecar: {sidecar}')
    if d is not None and hash_arrays(d.x, d.y) != payload['data_hash']:
        raise DataError(f'{path} was fit on different data than the supplied Dataset')

    with np.load(sidecar) as arrays:
        k, chol, alpha = arrays['k'], arrays['chol'], arrays['alpha']

    kernel = payload['kernel']
    return FittedGP(
        cfg=KernelConfig(kind=kernel['kind'], theta=kernel['theta']),
        k=k,
        sigma2=payload['sigma2'],
        chol=chol,
        alpha=alpha,
        f_hat=k @ alpha,
        log_marginal=payload['log_marginal'],
        jitter=payload['jitter'],
        data_hash=payload['data_hash'],
        n_features=payload['J'],
    )

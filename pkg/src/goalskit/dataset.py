"""Load, validate and standardize tabular regression data"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import linalg

from goalskit.utils import DataError


log = logging.getLogger(__name__)


def _frozen(array, ndim: int) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    if out.ndim != ndim:
        raise DataError(f'Expected a {ndim}-dimensional array, got shape {out.shape}')
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """An N x J design matrix with its response.

    Arrays are copied and made read-only on construction, so a Dataset can be
    shared between threads.
    """

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    response_name: str = 'y'
    standardized: bool = False
    column_means: np.ndarray | None = None
    column_sds: np.ndarray | None = None
    y_mean: float = 0.0
    y_sd: float = 1.0

    def __post_init__(self):
        x = _frozen(self.x, 2)
        y = _frozen(self.y, 1)
        n, j = x.shape
        if n < 2:
            raise DataError(f'At least 2 samples are required, got {n}')
        if j < 1:
            raise DataError('At least 1 feature is required')
        if y.shape[0] != n:
            raise DataError(f'Response has {y.shape[0]} entries but the design matrix has {n} rows')
        if len(self.feature_names) != j:
            raise DataError(f'Got {len(self.feature_names)} feature names for {j} columns')
        if not np.all(np.isfinite(x)):
            row, col = np.argwhere(~np.isfinite(x))[0]
            raise DataError(f'Non-finite value at row {row}, column {self.feature_names[col]!r}')
        if not np.all(np.isfinite(y)):
            raise DataError(f'Non-finite response value at row {int(np.argmin(np.isfinite(y)))}')

        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'feature_names', tuple(str(name) for name in self.feature_names))
        means = np.zeros(j) if self.column_means is None else self.column_means
        sds = np.ones(j) if self.column_sds is None else self.column_sds
        object.__setattr__(self, 'column_means', _frozen(means, 1))
        object.__setattr__(self, 'column_sds', _frozen(sds, 1))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def j(self) -> int:
        return self.x.shape[1]

    def with_response(self, y: np.ndarray) -> 'Dataset':
        """Same design with a different (unstandardized) response."""
        return replace(self, y=y, standardized=False, y_mean=0.0, y_sd=1.0)

    def subset_columns(self, columns) -> 'Dataset':
        """Restrict the design matrix to the given column indices, keeping order."""
        columns = list(columns)
        return replace(
            self,
            x=self.x[:, columns],
            feature_names=tuple(self.feature_names[c] for c in columns),
            column_means=self.column_means[columns],
            column_sds=self.column_sds[columns],
        )


def load_csv(path: Path, response_column: str = 'y') -> Dataset:
    """Read a comma-separated file with a header row into a Dataset.

    Args:
        path: CSV file; every cell must be numeric
        response_column: Header name of the response column

    Returns:
        An unstandardized Dataset
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f'Missing required file: {path}')

    header = pd.read_csv(path, header=None, nrows=1, dtype=str, keep_default_na=False).iloc[0].tolist()
    repeated = sorted({name for name in header if header.count(name) > 1})
    if repeated:
        raise DataError(f'Duplicate column names {repeated} in the header of {path}')

    frame = pd.read_csv(path, float_precision='round_trip', skipinitialspace=False)
    if response_column not in frame.columns:
        raise DataError(f'Response column {response_column!r} not found in {path}; columns are {list(frame.columns)}')

    for column in frame.columns:
        values = frame[column]
        if values.isna().any():
            row = int(np.flatnonzero(values.isna().to_numpy())[0])
            raise DataError(f'Missing value at line {row + 2}, column {column!r} of {path}')
        if not pd.api.types.is_numeric_dtype(values):
            for row, cell in enumerate(values):
                try:
                    float(cell)
                except (TypeError, ValueError):
                    raise DataError(f'Non-numeric value {cell!r} at line {row + 2}, column {column!r} of {path}')

    if len(frame) < 2:
        raise DataError(f'At least 2 samples are required, {path} has {len(frame)}')

    feature_names = [column for column in frame.columns if column != response_column]
    x = frame[feature_names].to_numpy(dtype=np.float64)
    y = frame[response_column].to_numpy(dtype=np.float64)
    log.info(f'Loaded {x.shape[0]} samples with {x.shape[1]} features from {path}')
    return Dataset(x=x, y=y, feature_names=tuple(feature_names), response_name=response_column)


def write_csv(d: Dataset, path: Path, compression: str | None = None) -> Path:
    """Write the raw values of a Dataset with 17 significant digits."""
    frame = pd.DataFrame(d.x, columns=list(d.feature_names))
    frame[d.response_name] = d.y
    frame.to_csv(path, index=False, float_format='%.17g', compression=compression)
    return Path(path)


def standardize(d: Dataset) -> Dataset:
    """Center and scale every column and the response to mean 0, SD 1 (N-1 denominator).

    Args:
        d: An unstandardized Dataset

    Returns:
        A standardized Dataset that keeps the original moments for inverse transforms
    """
    if d.standardized:
        raise DataError('Dataset is already standardized; refusing to standardize twice')

    means = d.x.mean(axis=0)
    sds = d.x.std(axis=0, ddof=1)
    constant = np.flatnonzero(np.ptp(d.x, axis=0) == 0)
    if constant.size:
        raise DataError(f'Cannot standardize constant column {d.feature_names[constant[0]]!r}')

    y_mean = float(d.y.mean())
    y_sd = float(d.y.std(ddof=1))
    if np.ptp(d.y) == 0:
        raise DataError(f'Cannot standardize constant response {d.response_name!r}')

    return replace(
        d,
        x=(d.x - means) / sds,
        y=(d.y - y_mean) / y_sd,
        standardized=True,
        column_means=means,
        column_sds=sds,
        y_mean=y_mean,
        y_sd=y_sd,
    )


def standardize_columns(x: np.ndarray) -> np.ndarray:
    """Column-wise z-scores of a bare matrix (N-1 denominator)."""
    constant = np.flatnonzero(np.ptp(x, axis=0) == 0)
    if constant.size:
        raise DataError(f'Cannot standardize constant column {int(constant[0])}')
    sds = x.std(axis=0, ddof=1)
    return (x - x.mean(axis=0)) / sds


def principal_components(x: np.ndarray, k: int) -> np.ndarray:
    """Top-k principal component scores of a column-centered matrix, rescaled to unit SD.

    Components are ordered by descending eigenvalue of X'X/(N-1); the sign of
    each component makes its largest-magnitude loading positive.
    """
    n, j = x.shape
    if not 1 <= k <= min(n - 1, j):
        raise ValueError(f'Number of components must be in [1, {min(n - 1, j)}], got {k}')

    _, _, vt = linalg.svd(x, full_matrices=False)
    loadings = vt[:k].T
    largest = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[largest, np.arange(k)])
    loadings = loadings * signs

    scores = x @ loadings
    return scores / scores.std(axis=0, ddof=1)


def top_principal_components(d: Dataset, k: int) -> np.ndarray:
    """Principal component covariates (N x k) of a standardized Dataset."""
    if not d.standardized:
        raise DataError('Principal components require a standardized Dataset')
    return principal_components(d.x, k)

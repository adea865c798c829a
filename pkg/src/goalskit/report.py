"""Read and write importance reports in the goalskit.report.v1 format.

A report is a JSON document with the method, label, feature names and
metadata, next to a sample-major CSV whose rows are the samples (local
scores) followed by named summary rows such as `global`.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from goalskit.utils import DataError, check_schema, read_json, write_json


log = logging.getLogger(__name__)

REPORT_FORMAT = 'goalskit.report.v1'
REPORT_SUFFIX = '.report.json'


@dataclass(eq=False)
class ImportanceReport:
    """Method-independent view of any importance result."""

    method: str
    feature_names: tuple[str, ...]
    global_scores: np.ndarray
    local_scores: np.ndarray | None = None
    summary: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    label: str = ''
    dataset: str = ''

    @classmethod
    def from_result(cls, result, label: str = '', dataset: str = '', **metadata) -> 'ImportanceReport':
        """Wrap a GoalsReport, RateReport, ShapReport or a bare SCANONE result."""
        summary = {'global': np.asarray(result.global_scores)}
        if hasattr(result, 'kld'):
            summary['kld'] = np.asarray(result.kld)
        if hasattr(result, 'mean_abs'):
            summary['mean_abs'] = np.asarray(result.mean_abs)
        extra = dict(result.metadata)
        for name in ('subset_count', 'n_fits'):
            if hasattr(result, name):
                extra[name] = getattr(result, name)
        extra.update(metadata)
        return cls(
            method=result.method,
            feature_names=tuple(result.feature_names),
            global_scores=np.asarray(result.global_scores),
            local_scores=getattr(result, 'local_scores', None),
            summary=summary,
            metadata=extra,
            label=label or result.method,
            dataset=dataset,
        )


def report_label(method: str, xi: float | None = None) -> str:
    """File label of a report, e.g. goals-xi1 or rate."""
    if xi is None or method not in ('goals', 'nn-goals'):
        return method
    return f'{method}-xi{xi:g}'


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_report(report: ImportanceReport, output_dir: Path, compress: bool = False) -> Path:
    """Write a report's JSON document and score CSV.

    Args:
        report: The report to write
        output_dir: Directory for both files
        compress: Gzip the CSV

    Returns:
        Path to the JSON document
    """
    output_dir = Path(output_dir)
    stem = f'{report.dataset}_{report.label}' if report.dataset else report.label
    csv_name = f'{stem}.scores.csv' + ('.gz' if compress else '')

    rows = []
    labels = []
    if report.local_scores is not None:
        rows.append(np.asarray(report.local_scores))
        labels.extend(str(i) for i in range(report.local_scores.shape[0]))
    for name, values in report.summary.items():
        rows.append(np.asarray(values)[np.newaxis, :])
        labels.append(name)
    frame = pd.DataFrame(np.vstack(rows), columns=list(report.feature_names), index=pd.Index(labels, name='row'))
    frame.to_csv(output_dir / csv_name, float_format='%.17g', compression='gzip' if compress else None)

    payload = {
        'format': REPORT_FORMAT,
        'method': report.method,
        'label': report.label,
        'dataset': report.dataset,
        'feature_names': list(report.feature_names),
        'n_samples': None if report.local_scores is None else int(report.local_scores.shape[0]),
        'scores': csv_name,
        'summary_rows': list(report.summary),
        'metadata': {key: _jsonable(value) for key, value in report.metadata.items()},
    }
    path = write_json(payload, output_dir / f'{stem}{REPORT_SUFFIX}')
    log.info(f'Wrote {report.method} report to {path}')
    return path


def read_report(path: Path) -> ImportanceReport:
    path = Path(path)
    payload = read_json(path)
    check_schema(payload, REPORT_FORMAT, path)

    csv_path = path.parent / payload['scores']
    if not csv_path.exists():
        raise FileNotFoundError(f'Missing score table: {csv_path}')
    frame = pd.read_csv(csv_path, index_col='row', dtype={'row': str}, float_precision='round_trip')
    if list(frame.columns) != payload['feature_names']:
        raise DataError(f'Columns of {csv_path} do not match the feature names in {path}')

    summary = {name: frame.loc[name].to_numpy(dtype=np.float64) for name in payload['summary_rows']}
    local = None
    if payload['n_samples'] is not None:
        local = frame.iloc[: payload['n_samples']].to_numpy(dtype=np.float64)

    return ImportanceReport(
        method=payload['method'],
        feature_names=tuple(payload['feature_names']),
        global_scores=summary['global'],
        local_scores=local,
        summary=summary,
        metadata=payload['metadata'],
        label=payload['label'],
        dataset=payload['dataset'],
    )

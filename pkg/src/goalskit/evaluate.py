"""Score importance reports against simulated truths with ROC curves"""

import argparse
import glob
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np
import pandas as pd

from goalskit import utils
from goalskit.evalrank import RocCurve, auc_summary, ranking_scores, roc_from_scores
from goalskit.report import REPORT_SUFFIX, ImportanceReport, read_report
from goalskit.simgen import SimTruth, read_truth


log = logging.getLogger(__name__)

TRUTH_SUFFIX = '.truth.json'
RANK_BY = ('global', 'mean_abs')


def _expand(pattern: str) -> list[Path]:
    return [Path(path) for path in sorted(glob.glob(pattern))]


def _dataset_name(path: Path, suffix: str) -> str:
    return path.name[: -len(suffix)] if path.name.endswith(suffix) else path.stem


def pair_reports(report_paths: list[Path], truth_paths: list[Path]) -> list[tuple[ImportanceReport, SimTruth]]:
    """Match every report to the truth of the dataset it was computed on.

    Args:
        report_paths: Report JSON documents
        truth_paths: Truth JSON documents written by the simulate workflow

    Returns:
        (report, truth) pairs in report path order
    """
    if not report_paths:
        raise FileNotFoundError('No report files matched')
    if not truth_paths:
        raise FileNotFoundError('No truth files matched')

    truths = {_dataset_name(path, TRUTH_SUFFIX): path for path in truth_paths}
    reports = [read_report(path) for path in report_paths]
    used = {report.dataset for report in reports}

    unmatched = [str(path) for path, report in zip(report_paths, reports) if report.dataset not in truths]
    unmatched += [str(path) for name, path in truths.items() if name not in used]
    if unmatched:
        raise utils.DataError(f'Reports and truths do not pair up; unmatched files: {", ".join(unmatched)}')

    return [(report, read_truth(truths[report.dataset])) for report in reports]


def ranking_statistic(report: ImportanceReport, rank_by: str = 'global') -> np.ndarray:
    """The summary row a report is ranked by; reports without that row fall back to their global scores."""
    if rank_by not in RANK_BY:
        raise ValueError(f'Unknown ranking statistic {rank_by!r}; choose from {RANK_BY}')
    if rank_by != 'global' and rank_by in report.summary:
        return report.summary[rank_by]
    return report.global_scores


def replicate_curve(report: ImportanceReport, truth: SimTruth, rank_by: str = 'global') -> RocCurve:
    """ROC curve of one report, ranked by its method's evidence order."""
    names = list(report.feature_names)
    missing = [name for name in truth.causal_names if name not in names]
    if missing:
        raise utils.DataError(f'Causal features {missing} are not in report {report.dataset}_{report.label}')
    causal = [names.index(name) for name in truth.causal_names]
    scores = ranking_scores(report.method, ranking_statistic(report, rank_by))
    return roc_from_scores(scores, causal, descending_by='signed')


def evaluate(
    reports: str, truth: str, out: Path, rank_by: str = 'global', manifest: utils.RunManifest | None = None
) -> pd.DataFrame:
    """ROC curves per replicate, mean curves and an AUC table per scenario and method.

    Writes, per (scenario, label), `{scenario}_{label}_roc.csv` (the mean curve on a
    1001-point FPR grid) and `{scenario}_{label}_replicates.csv` (each replicate's
    curve and AUC), plus `auc.csv` across all of them.

    Args:
        reports: Glob of report JSON documents
        truth: Glob of truth JSON documents
        out: Output directory
        rank_by: 'global' ranks by the global scores; 'mean_abs' ranks GOALS reports by mean
            absolute local score
        manifest: Manifest that records inputs and outputs

    Returns:
        The AUC table
    """
    pairs = pair_reports(_expand(reports), _expand(truth))
    out.mkdir(parents=True, exist_ok=True)

    groups: dict[tuple[str, str, str], list[tuple[str, RocCurve]]] = defaultdict(list)
    for report, sim_truth in pairs:
        if not sim_truth.causal:
            log.warning(f'{report.dataset} has no causal features; no ROC curve for {report.label}')
            continue
        curve = replicate_curve(report, sim_truth, rank_by)
        groups[(sim_truth.scenario, report.method, report.label)].append((report.dataset, curve))
        log.debug(f'{report.dataset} {report.label}: AUC {curve.auc:.4f}')

    rows = []
    for (scenario, method, label), replicates in sorted(groups.items()):
        curves = [curve for _, curve in replicates]
        mean_curve, mean_auc = auc_summary(curves)

        roc_path = out / f'{scenario}_{label}_roc.csv'
        pd.DataFrame(mean_curve.points, columns=['fpr', 'tpr']).to_csv(roc_path, index=False, float_format='%.17g')

        per_replicate = pd.concat(
            [
                pd.DataFrame(
                    {
                        'dataset': dataset,
                        'fpr': curve.fpr,
                        'tpr': curve.tpr,
                        'auc': np.full(curve.points.shape[0], curve.auc),
                    }
                )
                for dataset, curve in replicates
            ],
            ignore_index=True,
        )
        replicate_path = out / f'{scenario}_{label}_replicates.csv'
        per_replicate.to_csv(replicate_path, index=False, float_format='%.17g')

        rows.append(
            {'scenario': scenario, 'method': method, 'label': label, 'n_replicates': len(curves), 'mean_auc': mean_auc}
        )
        if manifest is not None:
            manifest.add_output(roc_path)
            manifest.add_output(replicate_path)

    table = pd.DataFrame(rows, columns=['scenario', 'method', 'label', 'n_replicates', 'mean_auc'])
    table_path = out / 'auc.csv'
    table.to_csv(table_path, index=False, float_format='%.17g')

    if manifest is not None:
        manifest.add_output(table_path)
        for path in _expand(reports) + _expand(truth):
            manifest.add_input(path)

    print(f'Finished evaluating {len(pairs)} report(s) in {len(groups)} scenario/method group(s)')
    return table


def main():
    """Entrypoint for the evaluation workflow.

    Example command:
    python -m goalskit ++process evaluate --reports 'reports/*.report.json' --truth 'data/*.truth.json' --out roc/
    """
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument('--reports', default=f'*{REPORT_SUFFIX}', help='Glob of report JSON documents')
    parser.add_argument('--truth', default=f'*{TRUTH_SUFFIX}', help='Glob of truth JSON documents')
    parser.add_argument('--out', type=Path, default=None, help='Output directory')
    parser.add_argument('--rank-by', choices=RANK_BY, default='global', help='Summary row that ranks the features')
    utils.add_common_arguments(parser)
    args = utils.parse_workflow_args(parser)
    if args.out is None:
        parser.error('the following arguments are required: --out')

    manifest = utils.RunManifest(command='evaluate', config=utils.config_snapshot(args))
    with manifest.stage('evaluate'):
        evaluate(args.reports, args.truth, args.out, rank_by=args.rank_by, manifest=manifest)
    manifest.write(args.out)


if __name__ == '__main__':
    main()

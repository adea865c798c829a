"""Fit a model to a dataset and write its variable importance report"""

import argparse
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from goalskit import utils
from goalskit.dataset import Dataset, load_csv, standardize
from goalskit.evalrank import scanone
from goalskit.goals import DEFAULT_XI, XI_GRID, aggregate_by_group, goals_local
from goalskit.gp import fit
from goalskit.kernel import KernelConfig, rbf_config
from goalskit.nn_goals import ACTIVATIONS, fit_random_features, nn_goals_scores
from goalskit.rate import effect_size_analog, rate_scores
from goalskit.report import ImportanceReport, report_label, write_report
from goalskit.shapley import MAX_FEATURES, exact_shap


log = logging.getLogger(__name__)

METHODS = ('goals', 'rate', 'shap', 'nn-goals', 'scanone')


def kernel_for(d: Dataset, kernel: str) -> KernelConfig:
    if kernel == 'rbf':
        return rbf_config(d.x)
    return KernelConfig(kind=kernel)


def read_groups(path: Path, column: str, n: int) -> np.ndarray:
    """One group label per sample from a CSV column."""
    if not path.exists():
        raise FileNotFoundError(f'Missing required file: {path}')
    frame = pd.read_csv(path)
    if column not in frame.columns:
        raise utils.DataError(f'Group column {column!r} not found in {path}; columns are {list(frame.columns)}')
    if len(frame) != n:
        raise utils.DataError(f'{path} has {len(frame)} group labels for {n} samples')
    return frame[column].to_numpy()


def compute_scores(
    d: Dataset,
    method: str,
    xi: float = DEFAULT_XI,
    kernel: str = 'rbf',
    sigma2: float | None = None,
    local_sd: bool = False,
    global_cov: bool = False,
    width: int = 512,
    activation: str = 'relu',
    seed: int = 0,
    rate_method: str = 'auto',
    n_jobs: int = 1,
    manifest: utils.RunManifest | None = None,
):
    """Fit the model behind `method` on a standardized Dataset and score every feature.

    Returns:
        The method's result object (GoalsReport, RateReport, ShapReport) or SCANONE p-values
    """
    manifest = manifest or utils.RunManifest(command='score', config={})
    if method == 'scanone':
        with manifest.stage('score'):
            return scanone(d)

    if method == 'shap' and d.j > MAX_FEATURES:
        raise utils.DataError(f'Exact Shapley values are capped at {MAX_FEATURES} features; the data has {d.j}')

    if method == 'nn-goals':
        with manifest.stage('fit'):
            model = fit_random_features(d, width, activation=activation, seed=seed)
        with manifest.stage('score'):
            return nn_goals_scores(model, d, xi)

    with manifest.stage('fit'):
        cfg = kernel_for(d, kernel)
        g = fit(d, cfg, sigma2)
    with manifest.stage('score'):
        if method == 'goals':
            return goals_local(g, d, xi, local_sd=local_sd, global_cov=global_cov, n_jobs=n_jobs)
        if method == 'rate':
            return rate_scores(effect_size_analog(g, d), method=rate_method, n_jobs=n_jobs)
        return exact_shap(d, cfg, g.sigma2, n_jobs=n_jobs)


def score(
    data: Path,
    method: str,
    out: Path,
    xi: float = DEFAULT_XI,
    kernel: str = 'rbf',
    sigma2: float | None = None,
    local_sd: bool = False,
    global_cov: bool = False,
    width: int = 512,
    activation: str = 'relu',
    seed: int = 0,
    rate_method: str = 'auto',
    cages: Path | None = None,
    cage_column: str = 'cage',
    gzip: bool = False,
    response_column: str = 'y',
    threads: int | None = None,
    manifest: utils.RunManifest | None = None,
) -> Path:
    """Score the features of a CSV dataset with one importance method.

    Args:
        data: Dataset CSV
        method: One of goals, rate, shap, nn-goals, scanone
        out: Output directory
        xi: Shift of the GOALS methods
        kernel: 'rbf' (median bandwidth) or 'linear'
        sigma2: Noise variance; chosen by marginal likelihood if omitted
        local_sd: Also write posterior standard deviations of the local GOALS scores
        global_cov: Also write the posterior covariance of the global GOALS scores
        width: Hidden units of the random feature model
        activation: Activation of the random feature model
        seed: Seed of the random feature model
        rate_method: KLD evaluation of RATE
        cages: CSV of group labels, one row per sample, for group means of local scores
        cage_column: Group label column in `cages`
        gzip: Gzip the score tables
        response_column: Response column of the dataset
        threads: Worker threads
        manifest: Manifest that records inputs, outputs and timings

    Returns:
        Path to the report JSON
    """
    if method not in METHODS:
        raise ValueError(f'Unknown method {method!r}; choose from {METHODS}')
    manifest = manifest or utils.RunManifest(command='score', config={})
    out.mkdir(parents=True, exist_ok=True)

    with manifest.stage('load'):
        d = standardize(load_csv(data, response_column=response_column))
        manifest.add_input(data)

    if method in ('goals', 'nn-goals') and xi == 0:
        log.warning('xi=0 is degenerate: the shifted function equals the fitted one and every score is 0')

    result = compute_scores(
        d,
        method,
        xi=xi,
        kernel=kernel,
        sigma2=sigma2,
        local_sd=local_sd,
        global_cov=global_cov,
        width=width,
        activation=activation,
        seed=seed,
        rate_method=rate_method,
        n_jobs=utils.get_threads(threads),
        manifest=manifest,
    )

    label = report_label(method, xi)
    if method == 'scanone':
        report = ImportanceReport(
            method='scanone',
            feature_names=d.feature_names,
            global_scores=result,
            summary={'global': result},
            metadata={'statistic': 'p-value'},
            label=label,
            dataset=data.stem,
        )
    else:
        report = ImportanceReport.from_result(result, label=label, dataset=data.stem, kernel_choice=kernel)
        if getattr(result, 'local_sd', None) is not None:
            report.summary['mean_local_sd'] = result.local_sd.mean(axis=0)
        if getattr(result, 'global_cov', None) is not None:
            report.summary['global_sd'] = np.sqrt(np.clip(np.diag(result.global_cov), 0.0, None))

    report_path = write_report(report, out, compress=gzip)
    manifest.add_output(report_path)
    manifest.add_output(out / report_path.name.replace('.report.json', '.scores.csv' + ('.gz' if gzip else '')))

    if getattr(result, 'local_sd', None) is not None:
        sd_path = out / (f'{data.stem}_{label}.local_sd.csv' + ('.gz' if gzip else ''))
        pd.DataFrame(result.local_sd, columns=list(result.feature_names)).to_csv(
            sd_path, index_label='row', float_format='%.17g', compression='gzip' if gzip else None
        )
        manifest.add_output(sd_path)

    if getattr(result, 'global_cov', None) is not None:
        names = list(result.feature_names)
        cov_path = out / (f'{data.stem}_{label}.global_cov.csv' + ('.gz' if gzip else ''))
        pd.DataFrame(result.global_cov, index=pd.Index(names, name='feature'), columns=names).to_csv(
            cov_path, float_format='%.17g', compression='gzip' if gzip else None
        )
        manifest.add_output(cov_path)

    if cages is not None:
        if report.local_scores is None:
            raise utils.DataError(f'Method {method} has no local scores to aggregate by group')
        groups = read_groups(cages, cage_column, d.n)
        manifest.add_input(cages)
        group_path = out / f'{data.stem}_{label}.groups.csv'
        aggregate_by_group(report, groups).to_csv(group_path, index_label=cage_column, float_format='%.17g')
        manifest.add_output(group_path)

    print(f'Finished scoring {data.name} with {method}!')
    return report_path


def main():
    """Entrypoint for the scoring workflow.

    Example command:
    python -m goalskit ++process score --method goals --xi 1.0 --data data/I_rep000.csv --out reports/
    """
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument('--method', choices=METHODS, default='goals', help='Importance method')
    parser.add_argument('--data', type=Path, default=None, help='Dataset CSV')
    parser.add_argument('--out', type=Path, default=None, help='Output directory')
    parser.add_argument('--response-column', default='y', help='Name of the response column')
    parser.add_argument('--xi', type=float, default=DEFAULT_XI, help=f'GOALS shift; studied values are {XI_GRID}')
    parser.add_argument('--kernel', choices=('rbf', 'linear'), default='rbf', help='GP kernel')
    parser.add_argument(
        '--sigma2', type=utils.positive_float, default=None, help='Noise variance (marginal likelihood if omitted)'
    )
    parser.add_argument(
        '--global-cov', action='store_true', help='Also write the posterior covariance of the global GOALS scores'
    )
    parser.add_argument('--local-sd', action='store_true', help='Also write posterior SDs of the local GOALS scores')
    parser.add_argument('--width', type=int, default=512, help='Hidden units of the nn-goals random features')
    parser.add_argument('--activation', choices=tuple(ACTIVATIONS), default='relu', help='nn-goals activation')
    parser.add_argument('--seed', type=int, default=0, help='Seed of the nn-goals random features')
    parser.add_argument('--rate-method', choices=('auto', 'generic', 'precision'), default='auto', help='RATE KLD')
    parser.add_argument('--cages', type=Path, default=None, help='CSV with one group label per sample')
    parser.add_argument('--cage-column', default='cage', help='Group label column of --cages')
    parser.add_argument('--gzip', action='store_true', help='Gzip the score tables')
    utils.add_common_arguments(parser)
    args = utils.parse_workflow_args(parser)
    for required in ('data', 'out'):
        if getattr(args, required) is None:
            parser.error(f'the following arguments are required: --{required}')

    manifest = utils.RunManifest(command='score', config=utils.config_snapshot(args))
    kwargs = {key: value for key, value in vars(args).items() if key not in ('config', 'verbose')}
    score(**kwargs, manifest=manifest)
    manifest.write(args.out)


if __name__ == '__main__':
    main()

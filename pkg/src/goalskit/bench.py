"""Time post-fit importance scoring over a grid of sample sizes and feature counts"""

import argparse
import logging
import time
from pathlib import Path

import pandas as pd

from goalskit import utils
from goalskit.dataset import Dataset, standardize
from goalskit.evalrank import scanone
from goalskit.goals import DEFAULT_XI, goals_local
from goalskit.gp import fit
from goalskit.nn_goals import fit_random_features, nn_goals_scores
from goalskit.rate import effect_size_analog, rate_scores
from goalskit.score import METHODS, kernel_for
from goalskit.shapley import MAX_FEATURES, exact_shap
from goalskit.simgen import SimConfig, simulate


log = logging.getLogger(__name__)

COLUMNS = ['method', 'n', 'p', 'seconds']


def bench_dataset(n: int, p: int, seed: int = 0) -> Dataset:
    """Standardized additive dataset with the first min(3, p) features causal."""
    cfg = SimConfig(n=n, j=p, rho=1.0, additive=tuple(range(min(3, p))), seed=seed, scenario='bench')
    d, _ = simulate(cfg)
    return standardize(d)


def time_method(d: Dataset, method: str, xi: float = DEFAULT_XI, width: int = 512, n_jobs: int = 1) -> float:
    """Wall-clock seconds of one method's scoring step; model fitting is not timed."""
    if method == 'scanone':
        start = time.perf_counter()
        scanone(d)
        return time.perf_counter() - start

    if method == 'nn-goals':
        model = fit_random_features(d, width)
        start = time.perf_counter()
        nn_goals_scores(model, d, xi)
        return time.perf_counter() - start

    cfg = kernel_for(d, 'rbf')
    g = fit(d, cfg)
    start = time.perf_counter()
    if method == 'goals':
        goals_local(g, d, xi, n_jobs=n_jobs)
    elif method == 'rate':
        rate_scores(effect_size_analog(g, d), n_jobs=n_jobs)
    else:
        exact_shap(d, cfg, g.sigma2, n_jobs=n_jobs)
    return time.perf_counter() - start


def bench(
    n: list[int],
    p: list[int],
    methods: list[str],
    out: Path,
    repeats: int = 1,
    xi: float = DEFAULT_XI,
    width: int = 512,
    seed: int = 0,
    threads: int | None = None,
    manifest: utils.RunManifest | None = None,
) -> pd.DataFrame:
    """Time every (method, N, J) cell and write `bench.csv` with columns method,n,p,seconds.

    Each cell reports the fastest of `repeats` runs. Exact Shapley values are skipped
    for more than 15 features.

    Args:
        n: Sample sizes
        p: Feature counts
        methods: Methods to time
        out: Output directory
        repeats: Runs per cell
        xi: Shift of the GOALS methods
        width: Hidden units of the random feature model
        seed: Seed of the simulated data
        threads: Worker threads
        manifest: Manifest that records seeds and outputs

    Returns:
        The timing table
    """
    unknown = sorted(set(methods) - set(METHODS))
    if unknown:
        raise ValueError(f'Unknown methods {unknown}; choose from {METHODS}')
    if repeats < 1:
        raise ValueError(f'Number of repeats must be at least 1, got {repeats}')
    n_jobs = utils.get_threads(threads)

    rows = []
    for p_value in p:
        for n_value in n:
            d = bench_dataset(n_value, p_value, seed)
            for method in methods:
                if method == 'shap' and p_value > MAX_FEATURES:
                    log.info(f'Skipping shap at p={p_value}: exact Shapley values are capped at {MAX_FEATURES}')
                    continue
                seconds = min(time_method(d, method, xi, width, n_jobs) for _ in range(repeats))
                log.info(f'{method} at n={n_value}, p={p_value}: {seconds:.4f} s')
                rows.append({'method': method, 'n': n_value, 'p': p_value, 'seconds': seconds})

    out.mkdir(parents=True, exist_ok=True)
    table = pd.DataFrame(rows, columns=COLUMNS)
    table_path = out / 'bench.csv'
    table.to_csv(table_path, index=False)
    if manifest is not None:
        manifest.seeds.append(seed)
        manifest.add_output(table_path)

    print(f'Finished timing {len(rows)} cell(s); results in {table_path}')
    return table


def main():
    """Entrypoint for the timing benchmark.

    Example command:
    python -m goalskit ++process bench --n 500 1000 --p 100 500 --methods goals rate --out bench/
    """
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument('--n', type=int, nargs='+', default=[1000], help='Sample sizes')
    parser.add_argument('--p', type=int, nargs='+', default=[500], help='Feature counts')
    parser.add_argument('--methods', choices=METHODS, nargs='+', default=['goals'], help='Methods to time')
    parser.add_argument('--repeats', type=int, default=1, help='Runs per cell; the fastest is reported')
    parser.add_argument('--xi', type=float, default=DEFAULT_XI, help='Shift of the GOALS methods')
    parser.add_argument('--width', type=int, default=512, help='Hidden units of the nn-goals random features')
    parser.add_argument('--seed', type=int, default=0, help='Seed of the simulated data')
    parser.add_argument('--out', type=Path, default=None, help='Output directory')
    utils.add_common_arguments(parser)
    args = utils.parse_workflow_args(parser)
    if args.out is None:
        parser.error('the following arguments are required: --out')

    manifest = utils.RunManifest(command='bench', config=utils.config_snapshot(args))
    kwargs = {key: value for key, value in vars(args).items() if key not in ('config', 'verbose')}
    with manifest.stage('bench'):
        bench(**kwargs, manifest=manifest)
    manifest.write(args.out)


if __name__ == '__main__':
    main()

"""Simulate replicate datasets with a known causal structure"""

import argparse
import logging
from pathlib import Path

from joblib import Parallel, delayed

from goalskit import utils
from goalskit.dataset import write_csv
from goalskit.simgen import DESIGNS, SCENARIO_NAMES, SUBGROUP_SPLITS, SimConfig, make_config, simulate, write_truth


log = logging.getLogger(__name__)


def write_replicate(cfg: SimConfig, replicate: int, out: Path) -> list[Path]:
    """Simulate one replicate and write its dataset CSV and truth JSON."""
    d, truth = simulate(cfg)
    stem = f'{cfg.scenario}_rep{replicate:03d}'
    csv_path = write_csv(d, out / f'{stem}.csv')
    truth_path = write_truth(truth, out / f'{stem}.truth.json')
    log.debug(f'Wrote replicate {replicate} of scenario {cfg.scenario} (seed {cfg.seed})')
    return [csv_path, truth_path]


def simulate_replicates(
    scenario: str,
    out: Path,
    n: int = 2000,
    p: int = 25,
    v2: float | None = None,
    rho: float | None = None,
    pop_var: float | None = None,
    design: str | None = None,
    subgroup_split: str | None = None,
    seed: int = 0,
    replicates: int = 1,
    n_causal: int = 30,
    threads: int | None = None,
    manifest: utils.RunManifest | None = None,
) -> list[Path]:
    """Simulate replicate datasets of one scenario.

    Replicate r uses seed + r. Preset values of v2, rho, pop_var, design and the
    subgroup split are kept unless overridden.

    Args:
        scenario: Scenario name (I..VI, hd1..hd4)
        out: Output directory
        n: Number of samples
        p: Number of features
        v2: Signal fraction
        rho: Additive share of the signal
        pop_var: Variance share of population structure
        design: 'gaussian' or 'genotype'
        subgroup_split: Which half of the samples a subgroup effect applies to ('upper' or 'random')
        seed: Base seed
        replicates: Number of replicates
        n_causal: Causal set size of the high-dimensional scenarios
        threads: Worker threads
        manifest: Manifest that records seeds and outputs

    Returns:
        Paths of the written files
    """
    if replicates < 1:
        raise ValueError(f'Number of replicates must be at least 1, got {replicates}')
    overrides = {'v2': v2, 'rho': rho, 'pop_var': pop_var, 'design': design, 'subgroup_split': subgroup_split}
    configs = [
        make_config(scenario, n=n, j=p, seed=seed + r, n_causal=n_causal, **overrides) for r in range(replicates)
    ]

    out.mkdir(parents=True, exist_ok=True)
    with Parallel(n_jobs=utils.get_threads(threads), prefer='threads') as parallel:
        written = parallel(delayed(write_replicate)(cfg, r, out) for r, cfg in enumerate(configs))
    paths = [path for pair in written for path in pair]

    if manifest is not None:
        manifest.seeds.extend(cfg.seed for cfg in configs)
        for path in paths:
            manifest.add_output(path)
    print(f'Finished simulating {replicates} replicate(s) of scenario {scenario} in {out}')
    return paths


def main():
    """Entrypoint for the simulation workflow.

    Example command:
    python -m goalskit ++process simulate --scenario I --n 2000 --p 25 --v2 0.6 --seed 7 --out data/
    """
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument('--scenario', choices=SCENARIO_NAMES, default='I', help='Simulation scenario')
    parser.add_argument('--n', type=int, default=2000, help='Number of samples')
    parser.add_argument('--p', type=int, default=25, help='Number of features')
    parser.add_argument('--v2', type=float, default=None, help='Signal fraction (scenario preset if omitted)')
    parser.add_argument('--rho', type=float, default=None, help='Additive share of the signal (preset if omitted)')
    parser.add_argument('--pop-var', type=float, default=None, help='Population structure variance (preset if omitted)')
    parser.add_argument('--design', choices=DESIGNS, default=None, help='Design matrix type (preset if omitted)')
    parser.add_argument(
        '--subgroup-split',
        choices=SUBGROUP_SPLITS,
        default=None,
        help='Scenario VI affected half: largest values of the subgroup feature, or a random half',
    )
    parser.add_argument('--seed', type=int, default=0, help='Base seed; replicate r uses seed + r')
    parser.add_argument('--replicates', type=int, default=1, help='Number of replicate datasets')
    parser.add_argument('--n-causal', type=int, default=30, help='Causal set size of the hd scenarios')
    parser.add_argument('--out', type=Path, default=None, help='Output directory')
    utils.add_common_arguments(parser)
    args = utils.parse_workflow_args(parser)
    if args.out is None:
        parser.error('the following arguments are required: --out')

    manifest = utils.RunManifest(command='simulate', config=utils.config_snapshot(args))
    kwargs = {key: value for key, value in vars(args).items() if key not in ('config', 'verbose')}
    try:
        with manifest.stage('simulate'):
            simulate_replicates(**kwargs, manifest=manifest)
    except ValueError as e:
        if isinstance(e, utils.DataError):
            raise
        parser.error(str(e))
    manifest.write(args.out)


if __name__ == '__main__':
    main()

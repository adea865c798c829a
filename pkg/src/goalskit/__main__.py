"""Variable importance for Gaussian process regression"""

import argparse
import logging
import sys
from importlib.metadata import entry_points

from goalskit.utils import DataError, NumericalError


EXIT_DATA_ERROR = 3
EXIT_NUMERICAL_ERROR = 4


def main():
    """Main entrypoint for goalskit workflows

    Calls the workflow entrypoint specified by the `++process` argument
    """
    parser = argparse.ArgumentParser(prefix_chars='+', formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument(
        '++process',
        choices=['simulate', 'score', 'evaluate', 'bench'],
        default='score',
        help='Select the workflow to run',  # workflow entrypoints are specified in `pyproject.toml`
    )

    args, unknowns = parser.parse_known_args()
    process_entry_point = list(entry_points(group='goalskit', name=args.process))[0]

    logging.basicConfig(
        stream=sys.stdout, format='%(asctime)s - %(levelname)s - %(message)s', level=logging.INFO, force=True
    )
    log = logging.getLogger(__name__)

    sys.argv = [args.process, *unknowns]
    try:
        sys.exit(process_entry_point.load()())
    except (DataError, FileNotFoundError) as e:
        log.error(str(e))
        sys.exit(EXIT_DATA_ERROR)
    except NumericalError as e:
        log.error(str(e))
        sys.exit(EXIT_NUMERICAL_ERROR)


if __name__ == '__main__':
    main()

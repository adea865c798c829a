import argparse
import hashlib
import json
import logging
import os
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


log = logging.getLogger(__name__)

THREADS_ENV = 'GOALSKIT_THREADS'
MANIFEST_NAME = 'manifest.json'


class DataError(ValueError):
    """Input data is malformed or inconsistent with the requested operation."""


class NumericalError(ArithmeticError):
    """A factorization or solve failed even after regularization."""


def get_threads(threads: int | None = None) -> int:
    """Get the size of the worker pool.

    The GOALSKIT_THREADS environment variable takes precedence over the
    requested value; without either, all available cores are used.

    Args:
        threads: Requested number of threads (e.g. from a --threads flag)

    Returns:
        Number of worker threads to use
    """
    env_threads = os.environ.get(THREADS_ENV, None)
    if env_threads is not None:
        try:
            threads = int(env_threads)
        except ValueError:
            raise ValueError(f'{THREADS_ENV} must be an integer, got {env_threads!r}')

    if threads is None:
        threads = os.cpu_count() or 1

    if threads < 1:
        raise ValueError(f'Number of threads must be at least 1, got {threads}')
    return threads


def hash_arrays(*arrays: np.ndarray) -> str:
    """SHA-256 over the raw bytes of C-contiguous float64 copies of the arrays."""
    digest = hashlib.sha256()
    for array in arrays:
        digest.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
    return digest.hexdigest()


def hash_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(payload: dict, path: Path) -> Path:
    """Write a JSON document with sorted keys so reruns are byte-identical.

    Args:
        payload: JSON-serializable document
        path: Output file

    Returns:
        Path to the written file
    """
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def read_json(path: Path) -> dict:
    if not Path(path).exists():
        raise FileNotFoundError(f'Missing required file: {path}')
    with open(path) as f:
        return json.load(f)


def check_schema(payload: dict, expected: str, path: Path) -> None:
    found = payload.get('format')
    if found != expected:
        raise DataError(f'{path} has format {found!r}, expected {expected!r}')


@dataclass
class RunManifest:
    """Provenance record written once per output directory."""

    command: str
    config: dict[str, Any]
    seeds: list[int] = field(default_factory=list)
    input_hashes: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    version: str = ''

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Accumulate wall-clock seconds spent in a named stage."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def add_input(self, path: Path) -> None:
        self.input_hashes[Path(path).name] = hash_file(Path(path))

    def add_output(self, path: Path) -> None:
        name = Path(path).name
        if name not in self.outputs:
            self.outputs.append(name)

    def write(self, output_dir: Path) -> Path:
        if not self.version:
            from goalskit import __version__

            self.version = __version__
        payload = {'format': 'goalskit.manifest.v1', **asdict(self)}
        payload['outputs'] = sorted(self.outputs)
        return write_json(payload, Path(output_dir) / MANIFEST_NAME)


def load_config_defaults(parser, config_path: Path | None) -> None:
    """Use a JSON config file as parser defaults so explicit flags still win.

    Args:
        parser: The argparse parser of a workflow
        config_path: JSON file mapping flag destinations to values
    """
    if config_path is None:
        return

    config = read_json(config_path)
    known = {action.dest for action in parser._actions}
    unknown = sorted(set(config) - known)
    if unknown:
        parser.error(f'Unknown keys in config file {config_path}: {", ".join(unknown)}')
    parser.set_defaults(**config)


def positive_float(value: str) -> float:
    """argparse type for strictly positive, finite floats."""
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected a number, got {value!r}')
    if not (np.isfinite(number) and number > 0):
        raise argparse.ArgumentTypeError(f'must be positive and finite, got {value}')
    return number


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, default=None, help='JSON file of flag defaults; explicit flags win')
    parser.add_argument(
        '--threads', type=int, default=None, help=f'Worker threads (default: all cores; {THREADS_ENV} overrides)'
    )
    parser.add_argument('--verbose', action='store_true', help='Log at DEBUG level')


def parse_workflow_args(parser: argparse.ArgumentParser, argv: list[str] | None = None) -> argparse.Namespace:
    """Parse workflow flags on top of the defaults from an optional --config file."""
    pre_parser = argparse.ArgumentParser(add_help=False)
    pre_parser.add_argument('--config', type=Path, default=None)
    known, _ = pre_parser.parse_known_args(argv)
    load_config_defaults(parser, known.config)

    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    return args


def config_snapshot(args: argparse.Namespace) -> dict[str, Any]:
    """JSON-friendly copy of parsed arguments."""
    snapshot = {}
    for key, value in sorted(vars(args).items()):
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, list | tuple):
            value = [str(item) if isinstance(item, Path) else item for item in value]
        snapshot[key] = value
    return snapshot

"""Global and local variable importance (GOALS) for Gaussian process regression"""

from importlib.metadata import version


__version__ = version(__name__)

__all__ = [
    '__version__',
]

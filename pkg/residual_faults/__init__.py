"""
Residual fault toolkit.

Mines git histories of Python projects, labels bug-fixing commits as
pre-release or post-release, extracts product, statistical and process
metrics per fault, and trains and analyses lightweight predictors.
"""

from residual_faults.catalog import FEATURE_COLUMNS
from residual_faults.errors import InputError, ResidualFaultsError

__version__ = "0.1.0"

__all__ = ["FEATURE_COLUMNS", "InputError", "ResidualFaultsError", "__version__"]

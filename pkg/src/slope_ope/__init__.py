"""Lepski-style estimator selection for off-policy evaluation.

Subpackages
-----------
cb
    Continuous-action contextual bandits: simulator, kernel importance
    weighting and bandwidth selection.
rl
    Tabular episodic environments, partial importance weighting and
    false-horizon selection.
harness
    Config-driven experiment runner, reports and command line interface.
"""

__version__ = "0.1.0"

from .core import (
    EstimatorBundle,
    Interval,
    OracleDiagnostics,
    SelectionResult,
    build_intervals,
    enforce_monotone_cnf,
    kappa_of,
    oracle_bound,
    oracle_diagnostics,
    select,
)

"""Aggregation statistics for estimator comparisons.

Everything here works on per-replicate squared errors grouped by condition
and method. The paired t-test goes through the regularized incomplete beta
function so the module only needs :mod:`scipy.special`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import betainc


@dataclass(frozen=True)
class ConditionResult:
    """Squared errors of one method on one condition, one per replicate."""

    condition_id: str
    method: str
    sq_errors: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.sq_errors, dtype=float).reshape(-1)
        if arr.size < 1:
            raise ValueError("need at least one replicate")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("squared errors must be finite and non-negative")
        object.__setattr__(self, "sq_errors", arr)

    @property
    def mse(self) -> float:
        return float(np.mean(self.sq_errors))

    @property
    def n_replicates(self) -> int:
        return int(self.sq_errors.size)


@dataclass(frozen=True)
class PairwiseMatrix:
    """``fractions[i, j]``: share of conditions where method i significantly beats j."""

    methods: tuple
    fractions: np.ndarray
    column_means: np.ndarray

    def as_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "fractions": self.fractions.tolist(),
            "column_means": self.column_means.tolist(),
        }


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student's t.

    Uses ``P(|T| >= t) = I_{df / (df + t^2)}(df / 2, 1 / 2)``.
    """
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if np.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(0.5 * df, 0.5, x))


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided paired t-test p-value for ``mean(a - b) == 0``.

    Parameters
    ----------
    a, b : sequence of float
        Paired samples of equal length, at least two.

    Returns
    -------
    float
        The p-value. Constant non-zero differences give 0, identically zero
        differences give 1.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("paired samples must have the same length")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / np.sqrt(n))
    return t_sf_two_sided(t, n - 1)


def _group(results: Iterable[ConditionResult]) -> tuple[dict, list]:
    table: dict = {}
    methods: list = []
    for r in results:
        row = table.setdefault(r.condition_id, {})
        if r.method in row:
            raise ValueError(f"duplicate result for {r.condition_id}/{r.method}")
        row[r.method] = r
        if r.method not in methods:
            methods.append(r.method)
    if not table:
        raise ValueError("no results")
    for cid, row in table.items():
        missing = [m for m in methods if m not in row]
        if missing:
            raise ValueError(f"condition {cid} lacks methods {missing}")
    return table, methods


def normalized_mse(results: Iterable[ConditionResult]) -> dict:
    """Per-method arrays of MSE divided by the worst MSE of each condition.

    A condition where every method has zero MSE normalizes to 1 for all.
    """
    table, methods = _group(results)
    out = {m: [] for m in methods}
    for cid in sorted(table):
        row = table[cid]
        worst = max(row[m].mse for m in methods)
        for m in methods:
            out[m].append(row[m].mse / worst if worst > 0 else 1.0)
    return {m: np.asarray(v) for m, v in out.items()}


def ecdf(values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Step points of the empirical CDF: sorted distinct x and ``P(X <= x)``."""
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if v.size == 0:
        raise ValueError("ECDF of an empty sample")
    xs, counts = np.unique(v, return_counts=True)
    return xs, np.cumsum(counts) / v.size


def normalized_mse_ecdf(results: Iterable[ConditionResult]) -> dict:
    """ECDF points of the normalized MSE, keyed by method."""
    return {m: ecdf(v) for m, v in normalized_mse(results).items()}


def pairwise_matrix(results: Iterable[ConditionResult], alpha: float = 0.05) -> PairwiseMatrix:
    """Fraction of conditions where each method significantly beats each other.

    Method i beats j on a condition when the paired t-test on their replicate
    squared errors has p below ``alpha`` and i has the lower MSE. Column
    means average over the off-diagonal entries, so a lower column mean means
    the method is beaten less often.
    """
    table, methods = _group(results)
    k = len(methods)
    wins = np.zeros((k, k))
    for row in table.values():
        counts = {row[m].n_replicates for m in methods}
        if len(counts) != 1:
            raise ValueError("inconsistent replicate counts within a condition")
        for i, mi in enumerate(methods):
            for j in range(i + 1, k):
                mj = methods[j]
                ei, ej = row[mi].sq_errors, row[mj].sq_errors
                if ei.size < 2:
                    continue
                if paired_t_test(ei, ej) < alpha:
                    if ei.mean() < ej.mean():
                        wins[i, j] += 1
                    elif ej.mean() < ei.mean():
                        wins[j, i] += 1
    fractions = wins / len(table)
    if k > 1:
        col = fractions.sum(axis=0) / (k - 1)
    else:
        col = np.zeros(1)
    return PairwiseMatrix(methods=tuple(methods), fractions=fractions, column_means=col)

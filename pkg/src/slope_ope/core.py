"""Lepski-style selection over an ordered family of estimators.

Estimators are ordered so that index 0 has the smallest bias and the widest
confidence band. Each estimate is wrapped in the closed interval
``[estimate - 2 * cnf, estimate + 2 * cnf]`` and the selected index is the
last one for which the running intersection of intervals is non-empty.

Indices in this module are 0-based; ``chosen_index == M - 1`` means the
lowest-variance estimator survived.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class EstimatorBundle:
    """Ordered point estimates paired with confidence half-widths.

    Parameters
    ----------
    estimates : array-like, shape (M,)
        Point estimates, lowest-bias first.
    cnf : array-like, shape (M,)
        Non-negative deviation bounds for each estimate.
    """

    estimates: np.ndarray
    cnf: np.ndarray

    def __post_init__(self):
        est = np.asarray(self.estimates, dtype=float).reshape(-1)
        cnf = np.asarray(self.cnf, dtype=float).reshape(-1)
        if est.size == 0:
            raise ValueError("bundle needs at least one estimator")
        if est.shape != cnf.shape:
            raise ValueError("estimates and cnf must have the same length")
        if not (np.all(np.isfinite(est)) and np.all(np.isfinite(cnf))):
            raise ValueError("bundle entries must be finite")
        if np.any(cnf < 0):
            raise ValueError("cnf values must be non-negative")
        object.__setattr__(self, "estimates", est)
        object.__setattr__(self, "cnf", cnf)

    def __len__(self) -> int:
        return self.estimates.size

    def monotone(self) -> "EstimatorBundle":
        """Copy of the bundle with cnf replaced by its suffix maximum."""
        return EstimatorBundle(self.estimates, enforce_monotone_cnf(self.cnf))


@dataclass(frozen=True)
class SelectionResult:
    chosen_index: int
    chosen_estimate: float
    intervals: list[Interval]
    running_intersection: list[Interval] = field(default_factory=list)


@dataclass(frozen=True)
class OracleDiagnostics:
    kappa: float
    bias: np.ndarray
    bound: float


def build_intervals(bundle: EstimatorBundle) -> list[Interval]:
    lo = bundle.estimates - 2.0 * bundle.cnf
    hi = bundle.estimates + 2.0 * bundle.cnf
    return [Interval(float(a), float(b)) for a, b in zip(lo, hi)]


def enforce_monotone_cnf(raw: Sequence[float]) -> np.ndarray:
    """Suffix maximum of ``raw``: the smallest nonincreasing majorant.

    Inflating earlier entries keeps every value a valid deviation bound,
    which deflation would not.
    """
    raw = np.asarray(raw, dtype=float).reshape(-1)
    if raw.size == 0:
        raise ValueError("cannot enforce monotonicity on an empty sequence")
    if np.any(raw < 0):
        raise ValueError("cnf values must be non-negative")
    return np.maximum.accumulate(raw[::-1])[::-1].copy()


def select(bundle: EstimatorBundle) -> SelectionResult:
    """Pick the largest index whose prefix intersection of intervals is non-empty.

    Raises
    ------
    ValueError
        If ``bundle.cnf`` is not nonincreasing. Call
        :func:`enforce_monotone_cnf` (or ``bundle.monotone()``) first.
    """
    cnf = bundle.cnf
    if np.any(np.diff(cnf) > 0):
        raise ValueError("cnf must be nonincreasing; apply enforce_monotone_cnf first")
    intervals = build_intervals(bundle)
    lo, hi = intervals[0].lo, intervals[0].hi
    running = [Interval(lo, hi)]
    chosen = 0
    for i in range(1, len(intervals)):
        new_lo = max(lo, intervals[i].lo)
        new_hi = min(hi, intervals[i].hi)
        # closed intervals: touching endpoints still intersect
        if new_lo > new_hi:
            break
        lo, hi = new_lo, new_hi
        running.append(Interval(lo, hi))
        chosen = i
    return SelectionResult(
        chosen_index=chosen,
        chosen_estimate=float(bundle.estimates[chosen]),
        intervals=intervals,
        running_intersection=running,
    )


def kappa_of(cnf: Sequence[float]) -> float:
    """Largest kappa with ``kappa * cnf[i] <= cnf[i+1]`` for every i."""
    cnf = np.asarray(cnf, dtype=float).reshape(-1)
    if cnf.size == 0:
        raise ValueError("cnf must be nonempty")
    if np.any(cnf <= 0):
        raise ValueError("kappa is only defined for strictly positive cnf")
    if np.any(np.diff(cnf) > 0):
        raise ValueError("cnf must be nonincreasing")
    if cnf.size == 1:
        return 1.0
    return float(np.min(cnf[1:] / cnf[:-1]))


def oracle_bound(bundle: EstimatorBundle, bias: Sequence[float], kappa: float) -> float:
    """Error bound ``6 (1 + 1/kappa) min_i {bias_i + cnf_i}`` met by :func:`select`."""
    bias = np.asarray(bias, dtype=float).reshape(-1)
    if kappa <= 0 or kappa > 1:
        raise ValueError("kappa must lie in (0, 1]")
    if bias.shape != bundle.cnf.shape:
        raise ValueError("bias must have one entry per estimator")
    if np.any(bias < 0) or np.any(np.diff(bias) < 0):
        raise ValueError("bias must be non-negative and nondecreasing")
    return float(6.0 * (1.0 + 1.0 / kappa) * np.min(bias + bundle.cnf))


def oracle_diagnostics(bundle: EstimatorBundle, bias: Sequence[float]) -> OracleDiagnostics:
    kappa = kappa_of(bundle.cnf)
    bias = np.asarray(bias, dtype=float)
    return OracleDiagnostics(kappa=kappa, bias=bias, bound=oracle_bound(bundle, bias, kappa))

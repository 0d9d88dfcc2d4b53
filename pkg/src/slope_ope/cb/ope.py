"""Kernel importance weighting for continuous actions and bandwidth selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ..core import EstimatorBundle, SelectionResult, enforce_monotone_cnf, select
from .sim import CbDataset, DeterministicPolicy

CnfMode = Literal["theoretical", "empirical"]


@dataclass(frozen=True)
class Kernel:
    kind: Literal["boxcar", "epanechnikov"] = "boxcar"

    def __post_init__(self):
        if self.kind not in ("boxcar", "epanechnikov"):
            raise ValueError(f"unknown kernel {self.kind!r}")

    def __call__(self, u):
        return kernel_eval(self, u)

    def cdf(self, u):
        """Integral of the kernel over ``[-1, u]``."""
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        if self.kind == "boxcar":
            return 0.5 * (u + 1.0)
        return 0.5 + 0.75 * (u - u**3 / 3.0)


def kernel_eval(kernel: Kernel, u):
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) <= 1.0
    if kernel.kind == "boxcar":
        return np.where(inside, 0.5, 0.0)
    return np.where(inside, 0.75 * (1.0 - u**2), 0.0)


@dataclass(frozen=True)
class BandwidthGrid:
    bandwidths: np.ndarray
    gamma_ratio: float | None = None

    def __post_init__(self):
        h = np.sort(np.asarray(self.bandwidths, dtype=float).reshape(-1))
        if h.size == 0:
            raise ValueError("bandwidth grid is empty")
        if np.any(h <= 0) or np.any(h > 1):
            raise ValueError("bandwidths must lie in (0, 1]")
        if np.any(np.diff(h) <= 0):
            raise ValueError("bandwidths must be distinct")
        object.__setattr__(self, "bandwidths", h)

    @classmethod
    def geometric(cls, gamma0: float, gamma: float, M: int) -> "BandwidthGrid":
        """``{gamma0 * gamma**(M - i) : i = 1..M}``, smallest first."""
        if not 0 < gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        h = gamma0 * gamma ** (M - np.arange(1, M + 1))
        return cls(h, gamma_ratio=gamma)

    @classmethod
    def dyadic(cls, M: int = 7) -> "BandwidthGrid":
        """``{2**-i : i = 1..M}``."""
        return cls(2.0 ** -np.arange(1, M + 1), gamma_ratio=0.5)

    def __len__(self):
        return self.bandwidths.size


def _kernel_terms(data: CbDataset, pi_t: DeterministicPolicy, h: float, kernel: Kernel) -> np.ndarray:
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    if data.n == 0:
        raise ValueError("empty dataset")
    t = np.asarray(pi_t.predict(data.contexts), dtype=float)
    k = kernel_eval(kernel, np.abs(t - data.actions) / h) / h
    # renormalise the smoothing kernel to its mass inside [0, 1]
    mass = kernel.cdf((1.0 - t) / h) - kernel.cdf(-t / h)
    return k / mass * data.rewards / data.logging_density


def kernel_ips_terms(data: CbDataset, pi_t: DeterministicPolicy, h: float, kernel: Kernel) -> np.ndarray:
    """Per-sample summands of the kernel estimator (before averaging or clipping)."""
    return _kernel_terms(data, pi_t, h, kernel)


def kernel_ips(data: CbDataset, pi_t: DeterministicPolicy, h: float, kernel: Kernel) -> float:
    """Boundary-normalised kernel IPS value estimate, clipped to ``[0, 1]``."""
    return float(np.clip(_kernel_terms(data, pi_t, h, kernel).mean(), 0.0, 1.0))


def cnf_cb_theoretical(n: int, h: float, M: int, delta: float = 0.05, p_min: float = 1.0) -> float:
    """Bernstein width for the kernel estimator, capped at 1.

    Non-uniform logging enters through ``n * p_min``.
    """
    if n < 1 or h <= 0 or M < 1:
        raise ValueError("require n >= 1, h > 0 and M >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 < p_min <= 1:
        raise ValueError("p_min must lie in (0, 1]")
    log_term = np.log(2.0 * M / delta)
    eff = n * h * p_min
    return float(min(np.sqrt(2.0 * log_term / eff) + 2.0 * log_term / (3.0 * eff), 1.0))


def empirical_cnf(values: np.ndarray) -> float:
    """Twice the standard error of a sample mean (``ddof=1``)."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size < 2:
        raise ValueError("need at least two samples")
    return float(2.0 * values.std(ddof=1) / np.sqrt(values.size))


def cnf_cb_empirical(data: CbDataset, pi_t: DeterministicPolicy, h: float, kernel: Kernel) -> float:
    return empirical_cnf(_kernel_terms(data, pi_t, h, kernel))


def slope_bandwidth(
    data: CbDataset,
    pi_t: DeterministicPolicy,
    grid: BandwidthGrid | Sequence[float],
    kernel: Kernel,
    cnf_mode: CnfMode = "empirical",
    delta: float = 0.05,
    p_min: float = 1.0,
) -> tuple[float, float, SelectionResult]:
    """Select a bandwidth from ``grid`` and return ``(estimate, h, selection)``.

    The bundle runs from the smallest bandwidth (least bias) to the largest.
    """
    if not isinstance(grid, BandwidthGrid):
        grid = BandwidthGrid(grid)
    hs = grid.bandwidths
    estimates = np.empty(hs.size)
    cnf = np.empty(hs.size)
    for i, h in enumerate(hs):
        terms = _kernel_terms(data, pi_t, h, kernel)
        estimates[i] = np.clip(terms.mean(), 0.0, 1.0)
        if cnf_mode == "empirical":
            cnf[i] = empirical_cnf(terms)
        elif cnf_mode == "theoretical":
            cnf[i] = cnf_cb_theoretical(data.n, h, hs.size, delta, p_min)
        else:
            raise ValueError(f"unknown cnf mode {cnf_mode!r}")
    result = select(EstimatorBundle(estimates, enforce_monotone_cnf(cnf)))
    return result.chosen_estimate, float(hs[result.chosen_index]), result

"""Synthetic continuous-action contextual bandit.

Contexts are standard normal, the optimal action is ``sigmoid(beta_star @ x)``
and rewards decay with the distance to it. Deterministic policies are fit by
regression on a handful of noisy optimal actions; stochastic logging policies
are built from them by discretising ``[0, 1]`` into bins and softening.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from scipy.special import expit
from sklearn.tree import DecisionTreeRegressor

RewardKind = Literal["absolute_value", "quadratic"]
ModelKind = Literal["linear_sigmoid", "tree"]
SoftenKind = Literal["uniform", "friendly", "adversarial"]


@dataclass(frozen=True)
class CbWorld:
    context_dim: int = 5
    lipschitz: float = 1.0
    reward_kind: RewardKind = "absolute_value"
    seed: int = 0
    beta_star: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.context_dim < 1:
            raise ValueError("context_dim must be positive")
        if self.lipschitz < 0:
            raise ValueError("lipschitz must be non-negative")
        if self.reward_kind not in ("absolute_value", "quadratic"):
            raise ValueError(f"unknown reward kind {self.reward_kind!r}")
        if self.beta_star is None:
            beta = np.random.default_rng(self.seed).standard_normal((1, self.context_dim))
        else:
            beta = np.asarray(self.beta_star, dtype=float).reshape(1, self.context_dim)
        object.__setattr__(self, "beta_star", beta)

    def sample_contexts(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.context_dim))


def optimal_action(world: CbWorld, x: np.ndarray) -> np.ndarray:
    """``sigmoid(beta_star @ x)`` for a single context or a batch of rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != world.context_dim:
        raise ValueError(f"context has dimension {x.shape[-1]}, expected {world.context_dim}")
    return expit(x @ world.beta_star[0])


def reward(world: CbWorld, a, a_star) -> np.ndarray:
    gap = np.asarray(a, dtype=float) - np.asarray(a_star, dtype=float)
    if world.reward_kind == "absolute_value":
        loss = world.lipschitz * np.abs(gap)
    else:
        loss = world.lipschitz / 4.0 * gap**2
    return 1.0 - np.minimum(loss, 1.0)


class DeterministicPolicy:
    """Context -> action map with outputs in ``[0, 1]``."""

    model_kind: ModelKind

    def predict(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.predict(x)


@dataclass
class LinearSigmoidPolicy(DeterministicPolicy):
    weights: np.ndarray
    bias: float
    model_kind: ModelKind = "linear_sigmoid"

    def predict(self, x):
        return expit(np.asarray(x, dtype=float) @ self.weights + self.bias)


@dataclass
class TreePolicy(DeterministicPolicy):
    tree: DecisionTreeRegressor
    model_kind: ModelKind = "tree"

    def predict(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.clip(self.tree.predict(x), 0.0, 1.0)


@dataclass
class OptimalPolicy(DeterministicPolicy):
    """Plays ``a_star(x)`` exactly; handy as a reference target."""

    world: CbWorld
    model_kind: ModelKind = "optimal"

    def predict(self, x):
        return optimal_action(self.world, x)


@dataclass
class ConstantPolicy(DeterministicPolicy):
    action: float
    model_kind: ModelKind = "constant"

    def predict(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.full(x.shape[0], float(self.action))


def fit_linear_sigmoid(x, y, n_iter: int = 2000, step: float = 0.1) -> LinearSigmoidPolicy:
    """Full-batch gradient descent on squared loss of ``sigmoid(x @ w + b)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(n_iter):
        p = expit(x @ w + b)
        g = (p - y) * p * (1.0 - p) * (2.0 / n)
        w -= step * (x.T @ g)
        b -= step * g.sum()
    return LinearSigmoidPolicy(weights=w, bias=float(b))


def fit_tree(x, y, max_depth: int = 3) -> TreePolicy:
    tree = DecisionTreeRegressor(max_depth=max_depth, criterion="squared_error", random_state=0)
    tree.fit(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return TreePolicy(tree=tree)


def train_policy(
    world: CbWorld,
    model_kind: ModelKind,
    rng: np.random.Generator,
    n_samples: int = 10,
    noise_sd: float = np.sqrt(0.5),
) -> DeterministicPolicy:
    """Regress noisy optimal actions ``a_star(x) + N(0, 0.5)`` on ``n_samples`` contexts."""
    x = world.sample_contexts(n_samples, rng)
    y = optimal_action(world, x) + noise_sd * rng.standard_normal(n_samples)
    if model_kind == "linear_sigmoid":
        return fit_linear_sigmoid(x, y)
    if model_kind == "tree":
        return fit_tree(x, y)
    raise ValueError(f"unknown model kind {model_kind!r}")


@dataclass(frozen=True)
class StochasticPolicy:
    """Binned softening of a deterministic policy over ``[0, 1]``.

    With ``q = alpha + beta_soft * U`` and ``U ~ Unif[-0.5, 0.5]`` drawn per
    decision, the friendly variant keeps the base bin with probability ``q``
    and spreads the rest evenly over the other bins. The adversarial variant
    is uniform over all bins with probability ``1 - q`` and uniform over the
    non-base bins otherwise. The action is uniform inside the chosen bin.
    """

    kind: SoftenKind = "uniform"
    base: Optional[DeterministicPolicy] = None
    alpha: float = 0.9
    beta_soft: float = 0.1
    bins: int = 10
    redraw_u: bool = True

    def __post_init__(self):
        if self.kind not in ("uniform", "friendly", "adversarial"):
            raise ValueError(f"unknown softening {self.kind!r}")
        if self.kind == "uniform":
            return
        if self.base is None:
            raise ValueError("softened policies need a base policy")
        if self.bins < 2:
            raise ValueError("softening needs at least two bins")
        lo, hi = self.alpha - 0.5 * abs(self.beta_soft), self.alpha + 0.5 * abs(self.beta_soft)
        if lo < 0 or hi > 1 or not 0 <= self.alpha <= 1:
            raise ValueError("alpha + beta_soft * U must stay in [0, 1] for U in [-0.5, 0.5]")

    def base_bin(self, x) -> np.ndarray:
        a = self.base.predict(x)
        return np.clip(np.floor(a * self.bins).astype(int), 0, self.bins - 1)

    def _bin_probs(self, q: np.ndarray, is_base: np.ndarray) -> np.ndarray:
        m = self.bins
        if self.kind == "friendly":
            return np.where(is_base, q, (1.0 - q) / (m - 1))
        return np.where(is_base, (1.0 - q) / m, (1.0 - q) / m + q / (m - 1))

    def density(self, x, a, u=None) -> np.ndarray:
        """Density of action ``a`` at context ``x``.

        ``u`` is the softening draw; ``None`` gives the density marginalised
        over U, which equals the density at ``U = 0`` because it is affine in U.
        """
        a = np.asarray(a, dtype=float)
        if self.kind == "uniform":
            return np.ones_like(a)
        u = 0.0 if u is None else np.asarray(u, dtype=float)
        q = self.alpha + self.beta_soft * u
        a_bin = np.clip(np.floor(a * self.bins).astype(int), 0, self.bins - 1)
        is_base = a_bin == self.base_bin(x)
        return self.bins * self._bin_probs(q, is_base)

    def sample(self, x, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw one action per context row. Returns ``(actions, densities)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        if self.kind == "uniform":
            return rng.random(n), np.ones(n)
        m = self.bins
        if self.redraw_u:
            u = rng.random(n) - 0.5
        else:
            u = np.full(n, rng.random() - 0.5)
        q = self.alpha + self.beta_soft * u
        base = self.base_bin(x)
        bins = np.arange(m)
        probs = self._bin_probs(q[:, None], bins[None, :] == base[:, None])
        cdf = np.cumsum(probs, axis=1)
        cdf[:, -1] = 1.0
        chosen = (rng.random(n)[:, None] > cdf).sum(axis=1)
        actions = (chosen + rng.random(n)) / m
        densities = m * probs[np.arange(n), chosen]
        return actions, densities


def soften(
    base: Optional[DeterministicPolicy],
    kind: SoftenKind,
    alpha: float = 0.9,
    beta_soft: float = 0.1,
    m: int = 10,
) -> StochasticPolicy:
    return StochasticPolicy(kind=kind, base=base, alpha=alpha, beta_soft=beta_soft, bins=m)


@dataclass(frozen=True)
class CbDataset:
    contexts: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    logging_density: np.ndarray

    def __post_init__(self):
        n = self.actions.shape[0]
        for name in ("contexts", "rewards", "logging_density"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} length does not match actions")
        if n == 0:
            raise ValueError("empty dataset")
        if np.any(self.logging_density <= 0):
            raise ValueError("logged densities must be positive")

    @property
    def n(self) -> int:
        return self.actions.shape[0]

    def __len__(self) -> int:
        return self.n

    def repeat(self, k: int) -> "CbDataset":
        return CbDataset(*(np.repeat(arr, k, axis=0) for arr in
                           (self.contexts, self.actions, self.rewards, self.logging_density)))


def log_data(pi_l: StochasticPolicy, world: CbWorld, n: int, rng: np.random.Generator) -> CbDataset:
    if n < 1:
        raise ValueError("n must be at least 1")
    x = world.sample_contexts(n, rng)
    a, dens = pi_l.sample(x, rng)
    r = reward(world, a, optimal_action(world, x))
    return CbDataset(contexts=x, actions=a, rewards=r, logging_density=dens)


def monte_carlo_value(
    pi_t: DeterministicPolicy, world: CbWorld, N: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Mean reward of ``pi_t`` over ``N`` fresh contexts, with its standard error."""
    if N < 1:
        raise ValueError("N must be at least 1")
    x = world.sample_contexts(N, rng)
    r = reward(world, pi_t.predict(x), optimal_action(world, x))
    se = float(r.std(ddof=1) / np.sqrt(N)) if N > 1 else float("nan")
    return float(r.mean()), se

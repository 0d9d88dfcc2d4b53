"""Off-policy estimators for episodic RL and false-horizon selection.

All direct models are time-indexed tables over observations, so aliasing in a
POMDP shows up as model bias. Time steps are 1-indexed in docstrings and
0-indexed in arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..core import EstimatorBundle, SelectionResult, enforce_monotone_cnf, select
from .envs import TabularEnv, TabularPolicy, TrajectoryBatch, exact_q

CnfMode = Literal["theoretical", "empirical"]


@dataclass(frozen=True)
class DirectModel:
    """``q[t-1, o, a]`` estimates with ``v[t-1, o] = sum_a pi_T(a|o, t) q[t-1, o, a]``."""

    q: np.ndarray
    v: np.ndarray

    @classmethod
    def from_q(cls, q: np.ndarray, pi_t: TabularPolicy) -> "DirectModel":
        q = np.asarray(q, dtype=float)
        if not np.all(np.isfinite(q)):
            raise ValueError("direct model entries must be finite")
        v = (pi_t.table(q.shape[0]) * q).sum(axis=-1)
        return cls(q=q, v=v)

    @classmethod
    def zero(cls, horizon: int, num_obs: int, num_actions: int) -> "DirectModel":
        return cls(q=np.zeros((horizon, num_obs, num_actions)), v=np.zeros((horizon, num_obs)))

    @property
    def horizon(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class WeightProfile:
    p_max: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "p_max", float(self.p_max))
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.p_max < 0:
            raise ValueError("p_max must be non-negative")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")

    @property
    def v_max(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    @classmethod
    def from_policies(cls, pi_t: TabularPolicy, pi_l: TabularPolicy, gamma: float, horizon: int) -> "WeightProfile":
        return cls(p_max=p_max_of(pi_t, pi_l, horizon), gamma=gamma)


@dataclass(frozen=True)
class HorizonBundle:
    """Partial estimates ordered by false horizon ``eta = H, H-1, ..., 0``.

    ``estimates[i]`` and ``per_trajectory[i]`` belong to ``eta = H - i``.
    """

    estimates: np.ndarray
    per_trajectory: np.ndarray

    @property
    def horizon(self) -> int:
        return self.estimates.size - 1

    def eta_of(self, index: int) -> int:
        return self.horizon - index


def p_max_of(pi_t: TabularPolicy, pi_l: TabularPolicy, horizon: int) -> float:
    """Largest single-step ratio ``pi_T / pi_L`` over observations, steps and actions."""
    t = pi_t.table(horizon)
    l = pi_l.table(horizon)
    if np.any((t > 0) & (l == 0)):
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(t > 0, t / np.where(l > 0, l, 1.0), 0.0)
    return float(ratio.max())


def _check_dims(data: TrajectoryBatch, model: DirectModel):
    if model.horizon != data.horizon:
        raise ValueError("direct model horizon does not match trajectories")


def _step_ratios(data: TrajectoryBatch, pi_t: TabularPolicy, steps: int) -> np.ndarray:
    props = data.propensities[:, :steps]
    if np.any(props <= 0):
        raise ValueError("logged propensities must be positive")
    table = pi_t.table(data.horizon)
    t_idx = np.broadcast_to(np.arange(steps), props.shape)
    return table[t_idx, data.observations[:, :steps], data.actions[:, :steps]] / props


def _cumulative_weights(data: TrajectoryBatch, pi_t: TabularPolicy, steps: int | None = None) -> np.ndarray:
    """``rho[:, h] = prod_{h' <= h} p_{h'}`` for ``h <= steps``; column 0 is the empty product."""
    steps = data.horizon if steps is None else steps
    rho = np.ones((data.n, steps + 1))
    rho[:, 1:] = np.cumprod(_step_ratios(data, pi_t, steps), axis=1)
    return rho


def _discounts(gamma: float, horizon: int) -> np.ndarray:
    return gamma ** np.arange(horizon)


def ips(data: TrajectoryBatch, pi_t: TabularPolicy, gamma: float) -> float:
    """Step-wise importance-weighted return."""
    rho = _cumulative_weights(data, pi_t)
    disc = _discounts(gamma, data.horizon)
    return float(np.mean(np.sum(disc * rho[:, 1:] * data.rewards, axis=1)))


def partial_dr_values(
    data: TrajectoryBatch, pi_t: TabularPolicy, model: DirectModel, eta: int, gamma: float
) -> np.ndarray:
    """Per-trajectory doubly robust partial estimate with false horizon ``eta``.

    Importance weighting covers steps ``1..eta`` using the model as a control
    variate; the remainder is completed with ``v(x_{eta+1}, eta+1)``. The
    nested DR recursion is evaluated in its unrolled form

    ``sum_{h<=eta} g^(h-1) [rho_h (r_h - q_h) + rho_(h-1) v_h] + g^eta rho_eta v_(eta+1)``.
    """
    H = data.horizon
    _check_dims(data, model)
    if not 0 <= eta <= H:
        raise ValueError(f"eta must lie in [0, {H}]")
    if eta == 0:
        return model.v[0, data.observations[:, 0]].copy()
    rho = _cumulative_weights(data, pi_t, eta)
    disc = _discounts(gamma, eta)
    obs = data.observations[:, :eta]
    t_idx = np.broadcast_to(np.arange(eta), obs.shape)
    q = model.q[t_idx, obs, data.actions[:, :eta]]
    v = model.v[t_idx, obs]
    terms = disc * rho[:, 1:] * data.rewards[:, :eta]
    terms = terms - disc * rho[:, 1:] * q
    terms = terms + disc * rho[:, :-1] * v
    values = np.sum(terms, axis=1)
    if eta < H:
        values = values + gamma**eta * rho[:, -1] * model.v[eta, data.observations[:, eta]]
    return values


def partial_dr(
    data: TrajectoryBatch, pi_t: TabularPolicy, model: DirectModel, eta: int, gamma: float
) -> tuple[float, np.ndarray]:
    """Mean and per-trajectory values of the partial DR estimator."""
    values = partial_dr_values(data, pi_t, model, eta, gamma)
    return float(np.mean(values)), values


def direct_estimate(data: TrajectoryBatch, model: DirectModel) -> float:
    """Model-only estimate: mean of ``v(x_1, 1)`` over logged start observations."""
    return float(np.mean(model.v[0, data.observations[:, 0]]))


def wdr(data: TrajectoryBatch, pi_t: TabularPolicy, model: DirectModel, gamma: float) -> float:
    """Full-horizon doubly robust estimate with per-step self-normalised weights."""
    _check_dims(data, model)
    H = data.horizon
    rho = _cumulative_weights(data, pi_t)
    norm = rho.mean(axis=0)
    if np.any(norm <= 0):
        raise ValueError("importance weights vanish at some step; WDR is undefined")
    w = rho / norm
    disc = _discounts(gamma, H)
    t_idx = np.broadcast_to(np.arange(H), data.actions.shape)
    q = model.q[t_idx, data.observations, data.actions]
    v = model.v[t_idx, data.observations]
    terms = disc * (w[:, 1:] * (data.rewards - q) + w[:, :-1] * v)
    return float(np.mean(np.sum(terms, axis=1)))


# --------------------------------------------------------------------------
# direct models


def _cell_means(obs: np.ndarray, act: np.ndarray, y: np.ndarray, num_obs: int, num_actions: int) -> np.ndarray:
    """Mean of ``y`` per ``(obs, act)`` cell; empty cells are 0."""
    idx = obs * num_actions + act
    size = num_obs * num_actions
    counts = np.bincount(idx, minlength=size)
    sums = np.bincount(idx, weights=y, minlength=size)
    means = np.divide(sums, counts, out=np.zeros(size), where=counts > 0)
    return means.reshape(num_obs, num_actions)


def fit_fqe(
    data: TrajectoryBatch, pi_t: TabularPolicy, num_obs: int, num_actions: int, gamma: float
) -> DirectModel:
    """Tabular fitted Q evaluation by one backward pass over time steps."""
    return fit_qpi_lambda(data, pi_t, num_obs, num_actions, gamma, lam=0.0)


def fit_qpi_lambda(
    data: TrajectoryBatch,
    pi_t: TabularPolicy,
    num_obs: int,
    num_actions: int,
    gamma: float,
    lam: float = 0.9,
) -> DirectModel:
    """Tabular ``Q^pi(lambda)`` evaluation.

    Regression targets follow the off-policy return

    ``G_t = r_t + gamma * v(x_{t+1}) + gamma * lam * (G_{t+1} - q(x_{t+1}, a_{t+1}))``

    which for ``lam = 0`` is the one-step FQE target. For ``lam = 1`` on
    on-policy data it matches the Monte Carlo return in expectation, and
    exactly when the target policy is deterministic.
    """
    if not 0 <= lam <= 1:
        raise ValueError("lambda must lie in [0, 1]")
    H = data.horizon
    table = pi_t.table(H)
    q = np.zeros((H, num_obs, num_actions))
    v = np.zeros((H, num_obs))
    g_next = None
    for t in range(H - 1, -1, -1):
        o, a = data.observations[:, t], data.actions[:, t]
        target = data.rewards[:, t].astype(float)
        if t < H - 1:
            o1, a1 = data.observations[:, t + 1], data.actions[:, t + 1]
            target = target + gamma * v[t + 1, o1]
            if lam > 0:
                target = target + gamma * lam * (g_next - q[t + 1, o1, a1])
        q[t] = _cell_means(o, a, target, num_obs, num_actions)
        v[t] = (table[t] * q[t]).sum(axis=1)
        g_next = target
    return DirectModel(q=q, v=v)


def plan_in_model(
    transition: np.ndarray, reward: np.ndarray, pi_t: TabularPolicy, horizon: int, gamma: float
) -> DirectModel:
    """Exact policy evaluation of ``pi_t`` in a learned observation-level model.

    ``transition`` has shape ``(O, A, O)`` and ``reward`` shape ``(O, A)``.
    """
    table = pi_t.table(horizon)
    O, A = reward.shape
    q = np.zeros((horizon, O, A))
    v = np.zeros((horizon, O))
    v_next = np.zeros(O)
    for t in range(horizon - 1, -1, -1):
        q[t] = reward + gamma * transition @ v_next
        v[t] = (table[t] * q[t]).sum(axis=1)
        v_next = v[t]
    return DirectModel(q=q, v=v)


def mle_tables(data: TrajectoryBatch, num_obs: int, num_actions: int) -> tuple[np.ndarray, np.ndarray]:
    """Empirical observation-level transition and mean-reward tables.

    Unvisited ``(o, a)`` pairs get a uniform next-observation row and zero reward.
    """
    O, A = num_obs, num_actions
    obs, act = data.observations, data.actions
    counts = np.zeros((O, A, O))
    np.add.at(counts, (obs[:, :-1], act[:, :-1], obs[:, 1:]), 1.0)
    totals = counts.sum(axis=2, keepdims=True)
    transition = np.divide(counts, totals, out=np.full_like(counts, 1.0 / O), where=totals > 0)
    reward = _cell_means(obs.ravel(), act.ravel(), data.rewards.ravel(), O, A)
    return transition, reward


def fit_mle_model(
    data: TrajectoryBatch, pi_t: TabularPolicy, num_obs: int, num_actions: int, gamma: float
) -> DirectModel:
    """Maximum-likelihood tabular model over observations, then exact planning."""
    transition, reward = mle_tables(data, num_obs, num_actions)
    return plan_in_model(transition, reward, pi_t, data.horizon, gamma)


def exact_model(env: TabularEnv, pi_t: TabularPolicy) -> DirectModel:
    """True ``Q`` of ``pi_t`` as a direct model; needs a fully observed environment."""
    if not env.fully_observed:
        raise ValueError("exact direct model needs observations equal to states")
    return DirectModel.from_q(exact_q(env, pi_t), pi_t)


# --------------------------------------------------------------------------
# bounds and confidence widths


def bias_bound(eta: int, gamma: float, H: int) -> float:
    """``(gamma^eta - gamma^H) / (1 - gamma)``: the reward-range bias envelope."""
    if not 0 <= eta <= H:
        raise ValueError("eta must lie in [0, H]")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return (gamma**eta - gamma**H) / (1.0 - gamma)


def variance_range_bounds(eta: int, profile: WeightProfile) -> tuple[float, float]:
    if eta < 0:
        raise ValueError("eta must be non-negative")
    h = np.arange(1, eta + 1)
    g, p, vmax = profile.gamma, profile.p_max, profile.v_max
    variance = 3.0 * vmax**2 * (1.0 + np.sum(g ** (2 * (h - 1)) * p**h))
    rng = 3.0 * vmax * (1.0 + np.sum(g ** (h - 1) * p**h))
    return float(variance), float(rng)


def cnf_rl_theoretical(n: int, eta: int, profile: WeightProfile, delta: float, H: int) -> float:
    """Bernstein width for the partial DR estimator, union-bounded over ``H + 1`` horizons."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 <= eta <= H:
        raise ValueError("eta must lie in [0, H]")
    variance, rng = variance_range_bounds(eta, profile)
    log_term = np.log(2.0 * (H + 1) / delta)
    return float(np.sqrt(2.0 * variance * log_term / n) + 2.0 * rng * log_term / (3.0 * n))


def cnf_rl_empirical(per_trajectory_values) -> float:
    values = np.asarray(per_trajectory_values, dtype=float).reshape(-1)
    if values.size < 2:
        raise ValueError("need at least two trajectories")
    return float(2.0 * values.std(ddof=1) / np.sqrt(values.size))


# --------------------------------------------------------------------------
# selection


def horizon_bundle(
    data: TrajectoryBatch, pi_t: TabularPolicy, model: DirectModel, gamma: float
) -> HorizonBundle:
    H = data.horizon
    per_traj = np.stack([partial_dr_values(data, pi_t, model, eta, gamma) for eta in range(H, -1, -1)])
    return HorizonBundle(estimates=per_traj.mean(axis=1), per_trajectory=per_traj)


def slope_horizon(
    data: TrajectoryBatch,
    pi_t: TabularPolicy,
    model: DirectModel,
    gamma: float,
    cnf_mode: CnfMode = "empirical",
    delta: float = 0.05,
    profile: WeightProfile | None = None,
) -> tuple[float, int, SelectionResult]:
    """Choose the false horizon and return ``(estimate, eta, selection)``.

    The theoretical width needs ``profile`` (the largest importance ratio).
    """
    bundle = horizon_bundle(data, pi_t, model, gamma)
    H = data.horizon
    if cnf_mode == "empirical":
        cnf = np.array([cnf_rl_empirical(vals) for vals in bundle.per_trajectory])
    elif cnf_mode == "theoretical":
        if profile is None:
            raise ValueError("theoretical cnf needs a WeightProfile")
        cnf = np.array([cnf_rl_theoretical(data.n, H - i, profile, delta, H) for i in range(H + 1)])
    else:
        raise ValueError(f"unknown cnf mode {cnf_mode!r}")
    result = select(EstimatorBundle(bundle.estimates, enforce_monotone_cnf(cnf)))
    return result.chosen_estimate, bundle.eta_of(result.chosen_index), result

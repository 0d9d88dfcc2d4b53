"""Tabular episodic environments, tabular policies and an exact value oracle.

Dynamics are time-homogeneous over a finite state set; time dependence (for
example the layered Graph domain) is encoded in the states themselves.
Policies act on observations, which may alias several states.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

_ATOL = 1e-12


@dataclass(frozen=True)
class TabularEnv:
    """Finite-horizon POMDP with tabular dynamics.

    Attributes
    ----------
    transition : ndarray, shape (S, A, S)
    reward_mean : ndarray, shape (S, A, S)
        Mean reward for ``(state, action, next_state)``.
    obs_of : ndarray of int, shape (S,)
    sparse : bool
        Rewards are emitted only on the final step.
    reward_noise_sd : float
        Standard deviation of Gaussian noise added to emitted rewards.
    """

    name: str
    transition: np.ndarray
    reward_mean: np.ndarray
    init_dist: np.ndarray
    obs_of: np.ndarray
    horizon: int
    gamma: float
    sparse: bool = False
    reward_noise_sd: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        S, A, S2 = P.shape
        if S != S2:
            raise ValueError("transition must have shape (S, A, S)")
        if np.any(P < 0) or not np.allclose(P.sum(axis=2), 1.0, atol=_ATOL, rtol=0):
            raise ValueError("transition rows must be probability vectors")
        if np.shape(self.reward_mean) != P.shape:
            raise ValueError("reward_mean must have shape (S, A, S)")
        init = np.asarray(self.init_dist, dtype=float)
        if init.shape != (S,) or np.any(init < 0) or abs(init.sum() - 1.0) > _ATOL:
            raise ValueError("init_dist must be a probability vector over states")
        obs = np.asarray(self.obs_of, dtype=int)
        if obs.shape != (S,) or obs.min() < 0:
            raise ValueError("obs_of must map every state to an observation id")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward_mean", np.asarray(self.reward_mean, dtype=float))
        object.__setattr__(self, "init_dist", init)
        object.__setattr__(self, "obs_of", obs)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def num_obs(self) -> int:
        return int(self.obs_of.max()) + 1

    @property
    def fully_observed(self) -> bool:
        return self.num_obs == self.num_states and np.array_equal(self.obs_of, np.arange(self.num_states))

    def reward_at(self, t: int) -> np.ndarray:
        """Mean reward table in effect at 1-indexed step ``t``."""
        if self.sparse and t < self.horizon:
            return np.zeros_like(self.reward_mean)
        return self.reward_mean


@dataclass(frozen=True)
class TabularPolicy:
    """Action probabilities per observation, optionally per 1-indexed step.

    ``probs`` has shape ``(O, A)`` for a stationary policy or ``(H, O, A)``.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim not in (2, 3):
            raise ValueError("probs must have shape (O, A) or (H, O, A)")
        if np.any(p < 0) or not np.allclose(p.sum(axis=-1), 1.0, atol=_ATOL, rtol=0):
            raise ValueError("policy rows must be probability vectors")
        object.__setattr__(self, "probs", p)

    @property
    def num_actions(self) -> int:
        return self.probs.shape[-1]

    def at(self, t: int) -> np.ndarray:
        """``(O, A)`` probabilities at 1-indexed step ``t``."""
        if self.probs.ndim == 2:
            return self.probs
        return self.probs[t - 1]

    def table(self, horizon: int) -> np.ndarray:
        """Probabilities broadcast to shape ``(H, O, A)``."""
        if self.probs.ndim == 3:
            if self.probs.shape[0] < horizon:
                raise ValueError("policy horizon shorter than environment horizon")
            return self.probs[:horizon]
        return np.broadcast_to(self.probs, (horizon,) + self.probs.shape)


@dataclass(frozen=True)
class TrajectoryBatch:
    """``n`` logged trajectories of length ``H`` stored as ``(n, H)`` arrays.

    ``states`` holds the hidden states for diagnostics; estimators only read
    observations, actions, rewards and propensities.
    """

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    propensities: np.ndarray
    states: Optional[np.ndarray] = None

    def __post_init__(self):
        shape = np.shape(self.actions)
        if len(shape) != 2 or shape[0] == 0:
            raise ValueError("need a nonempty (n, H) batch")
        for name in ("observations", "rewards", "propensities"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must have shape {shape}")

    @property
    def n(self) -> int:
        return self.actions.shape[0]

    @property
    def horizon(self) -> int:
        return self.actions.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, idx) -> "TrajectoryBatch":
        idx = np.atleast_1d(np.arange(self.n)[idx])
        return TrajectoryBatch(
            self.observations[idx], self.actions[idx], self.rewards[idx], self.propensities[idx],
            None if self.states is None else self.states[idx],
        )

    def steps(self, i: int) -> list[tuple[int, int, float, float]]:
        """Trajectory ``i`` as ``(observation, action, reward, propensity)`` tuples."""
        return [
            (int(o), int(a), float(r), float(p))
            for o, a, r, p in zip(self.observations[i], self.actions[i], self.rewards[i], self.propensities[i])
        ]


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=-1)
    cdf[..., -1] = 1.0
    u = rng.random(probs.shape[:-1])
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_trajectories(
    env: TabularEnv, policy: TabularPolicy, n: int, rng: np.random.Generator
) -> TrajectoryBatch:
    if n < 1:
        raise ValueError("n must be at least 1")
    H = env.horizon
    states = np.empty((n, H), dtype=int)
    obs = np.empty((n, H), dtype=int)
    actions = np.empty((n, H), dtype=int)
    rewards = np.empty((n, H))
    props = np.empty((n, H))
    s = _categorical(rng, np.broadcast_to(env.init_dist, (n, env.num_states)))
    rows = np.arange(n)
    for t in range(1, H + 1):
        o = env.obs_of[s]
        pi = policy.at(t)[o]
        a = _categorical(rng, pi)
        s_next = _categorical(rng, env.transition[s, a])
        r = env.reward_at(t)[s, a, s_next]
        if env.reward_noise_sd > 0 and (not env.sparse or t == H):
            r = r + env.reward_noise_sd * rng.standard_normal(n)
        states[:, t - 1], obs[:, t - 1], actions[:, t - 1] = s, o, a
        rewards[:, t - 1] = r
        props[:, t - 1] = pi[rows, a]
        s = s_next
    return TrajectoryBatch(obs, actions, rewards, props, states)


def exact_q(env: TabularEnv, policy: TabularPolicy) -> np.ndarray:
    """State-action values ``Q[t-1, s, a]`` of ``policy`` by backward induction."""
    H, S, A = env.horizon, env.num_states, env.num_actions
    Q = np.zeros((H, S, A))
    v_next = np.zeros(S)
    for t in range(H, 0, -1):
        R = env.reward_at(t)
        Q[t - 1] = np.einsum("sax,sax->sa", env.transition, R) + env.gamma * env.transition @ v_next
        pi_states = policy.at(t)[env.obs_of]
        v_next = (pi_states * Q[t - 1]).sum(axis=1)
    return Q


def exact_value(env: TabularEnv, policy: TabularPolicy) -> float:
    """Expected discounted return ``E[sum_t gamma^(t-1) r_t]`` under ``policy``."""
    Q = exact_q(env, policy)
    v1 = (policy.at(1)[env.obs_of] * Q[0]).sum(axis=1)
    return float(env.init_dist @ v1)


def optimal_q(env: TabularEnv) -> np.ndarray:
    """Finite-horizon optimal ``Q[t-1, s, a]`` by value iteration on the true model."""
    H, S, A = env.horizon, env.num_states, env.num_actions
    Q = np.zeros((H, S, A))
    v_next = np.zeros(S)
    for t in range(H, 0, -1):
        R = env.reward_at(t)
        Q[t - 1] = np.einsum("sax,sax->sa", env.transition, R) + env.gamma * env.transition @ v_next
        v_next = Q[t - 1].max(axis=1)
    return Q


# --------------------------------------------------------------------------
# policies


def static_policy(p: float, num_obs: int) -> TabularPolicy:
    """Two-action policy playing action 0 with probability ``p`` everywhere."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return TabularPolicy(np.tile([p, 1.0 - p], (num_obs, 1)))


def epsilon_greedy_policy(env: TabularEnv, epsilon: float) -> TabularPolicy:
    """Time-indexed epsilon-greedy smoothing of the optimal finite-horizon policy.

    Requires a fully observed environment since the greedy action comes from
    value iteration over states.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if not env.fully_observed:
        raise ValueError("epsilon-greedy base policy needs a fully observed environment")
    A = env.num_actions
    greedy = optimal_q(env).argmax(axis=2)
    probs = np.full(greedy.shape + (A,), epsilon / (A - 1))
    np.put_along_axis(probs, greedy[..., None], 1.0 - epsilon, axis=2)
    return TabularPolicy(probs)


# --------------------------------------------------------------------------
# environments


def _graph_dynamics(horizon: int, slip: float):
    S = 2 * horizon + 1
    P = np.zeros((S, 2, S))
    R = np.zeros((S, 2, S))
    for s in range(S):
        t = (s + 1) // 2
        if t >= horizon:
            P[s, :, s] = 1.0
            continue
        odd, even = 2 * t + 1, 2 * t + 2
        P[s, 0, odd], P[s, 0, even] = 1.0 - slip, slip
        P[s, 1, odd], P[s, 1, even] = slip, 1.0 - slip
        R[s, :, odd] = 1.0
        R[s, :, even] = -1.0
    init = np.zeros(S)
    init[0] = 1.0
    return P, R, init


def graph_env(
    stochastic_reward: bool = False, sparse: bool = False, horizon: int = 16, gamma: float = 0.98
) -> TabularEnv:
    """Layered binary graph: action 0 reaches the odd child with probability 0.75.

    States ``2t+1`` and ``2t+2`` form layer ``t + 1``; the terminal layer is
    kept so the final transition has a next state to score.
    """
    P, R, init = _graph_dynamics(horizon, slip=0.25)
    return TabularEnv(
        name="graph",
        transition=P,
        reward_mean=R,
        init_dist=init,
        obs_of=np.arange(P.shape[0]),
        horizon=horizon,
        gamma=gamma,
        sparse=sparse,
        reward_noise_sd=1.0 if stochastic_reward else 0.0,
    )


def graph_pomdp_env(
    stochastic_reward: bool = False,
    sparse: bool = False,
    horizon: int = 16,
    gamma: float = 0.98,
    num_groups: int = 6,
) -> TabularEnv:
    """Graph dynamics observed only through ``num_groups`` contiguous state blocks."""
    base = graph_env(stochastic_reward, sparse, horizon, gamma)
    groups = np.empty(base.num_states, dtype=int)
    for g, block in enumerate(np.array_split(np.arange(base.num_states), num_groups)):
        groups[block] = g
    return TabularEnv(
        name="graph_pomdp",
        transition=base.transition,
        reward_mean=base.reward_mean,
        init_dist=base.init_dist,
        obs_of=groups,
        horizon=horizon,
        gamma=gamma,
        sparse=sparse,
        reward_noise_sd=base.reward_noise_sd,
    )


GRID_REWARDS = {"F": -0.005, "H": -0.5, "G": 1.0, "O": -0.01, "S": -0.01}
# up, down, left, right
GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


def load_grid_map(path: str | Path | None = None) -> list[str]:
    if path is None:
        text = resources.files("slope_ope.data").joinpath("gridworld_8x8.txt").read_text()
    else:
        text = Path(path).read_text()
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("grid map must be a nonempty rectangle")
    bad = set("".join(rows)) - set(GRID_REWARDS)
    if bad:
        raise ValueError(f"unknown map symbols {sorted(bad)}")
    if "".join(rows).count("G") != 1:
        raise ValueError("grid map needs exactly one goal cell")
    if "S" not in "".join(rows):
        raise ValueError("grid map needs at least one start cell")
    return rows


def gridworld_env(
    map_path: str | Path | None = None,
    horizon: int = 25,
    gamma: float = 0.99,
    slip: float = 0.0,
) -> TabularEnv:
    """Grid navigation with category rewards paid on entering a cell.

    Off-grid moves leave the agent in place. The goal is absorbing and pays
    nothing once reached. With ``slip > 0`` the intended move is replaced by a
    uniformly random one with that probability.
    """
    rows = load_grid_map(map_path)
    nr, nc = len(rows), len(rows[0])
    S, A = nr * nc, len(GRID_MOVES)
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    cell_reward = np.array([GRID_REWARDS[ch] for row in rows for ch in row])
    goal = "".join(rows).index("G")
    for s in range(S):
        r, c = divmod(s, nc)
        if s == goal:
            P[s, :, s] = 1.0
            continue
        dest = []
        for dr, dc in GRID_MOVES:
            rr, cc = r + dr, c + dc
            dest.append(rr * nc + cc if 0 <= rr < nr and 0 <= cc < nc else s)
        for a in range(A):
            for b in range(A):
                prob = (1.0 - slip) * (a == b) + slip / A
                P[s, a, dest[b]] += prob
            R[s, a, :] = cell_reward
    starts = np.array([ch == "S" for row in rows for ch in row], dtype=float)
    return TabularEnv(
        name="gridworld",
        transition=P,
        reward_mean=R,
        init_dist=starts / starts.sum(),
        obs_of=np.arange(S),
        horizon=horizon,
        gamma=gamma,
    )


# hybrid state ids
HYB_S0, HYB_FAIL_1, HYB_FAIL_2, HYB_WIN_1, HYB_WIN_2, HYB_WIN_3 = range(6)


def hybrid_env(
    win_horizon: int = 20,
    gamma: float = 0.99,
    fail_a1_reward: float = -1.0,
    fail_reward_step: int = 1,
) -> TabularEnv:
    """Two aliased ModelFail steps followed by a fully observed ModelWin chain.

    Observation 0 aliases the three ModelFail states; observations 1-3 are the
    ModelWin states. The ModelFail payoff (+1 after action 0, ``fail_a1_reward``
    after action 1) is paid when leaving the aliased branch state
    (``fail_reward_step=2``) or on the first transition (``fail_reward_step=1``,
    the default).
    """
    if fail_reward_step not in (1, 2):
        raise ValueError("fail_reward_step must be 1 or 2")
    S, A = 6, 2
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    P[HYB_S0, 0, HYB_FAIL_1] = 1.0
    P[HYB_S0, 1, HYB_FAIL_2] = 1.0
    P[HYB_FAIL_1, :, HYB_WIN_1] = 1.0
    P[HYB_FAIL_2, :, HYB_WIN_1] = 1.0
    if fail_reward_step == 1:
        R[HYB_S0, 0, HYB_FAIL_1] = 1.0
        R[HYB_S0, 1, HYB_FAIL_2] = fail_a1_reward
    else:
        R[HYB_FAIL_1, :, HYB_WIN_1] = 1.0
        R[HYB_FAIL_2, :, HYB_WIN_1] = fail_a1_reward
    P[HYB_WIN_1, 0, HYB_WIN_2], P[HYB_WIN_1, 0, HYB_WIN_3] = 0.6, 0.4
    P[HYB_WIN_1, 1, HYB_WIN_2], P[HYB_WIN_1, 1, HYB_WIN_3] = 0.4, 0.6
    R[HYB_WIN_1, :, HYB_WIN_2] = 1.0
    R[HYB_WIN_1, :, HYB_WIN_3] = -1.0
    P[HYB_WIN_2, :, HYB_WIN_1] = 1.0
    P[HYB_WIN_3, :, HYB_WIN_1] = 1.0
    init = np.zeros(S)
    init[HYB_S0] = 1.0
    return TabularEnv(
        name="hybrid",
        transition=P,
        reward_mean=R,
        init_dist=init,
        obs_of=np.array([0, 0, 0, 1, 2, 3]),
        horizon=2 + win_horizon,
        gamma=gamma,
    )


def hybrid_policies() -> tuple[TabularPolicy, TabularPolicy]:
    """``(logging, target)`` pair over the four hybrid observations."""
    logging = TabularPolicy(np.array([[0.88, 0.12], [0.73, 0.27], [0.5, 0.5], [0.5, 0.5]]))
    target = TabularPolicy(np.array([[0.12, 0.88], [0.27, 0.73], [0.5, 0.5], [0.5, 0.5]]))
    return logging, target

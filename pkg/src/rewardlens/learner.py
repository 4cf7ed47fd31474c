"""Value-based agent: epsilon-greedy tabular Q-learning plus an optional
small function-approximation backing behind the same interface.

Training is episode-batched: the agent generates one episode with its
current values, hands the transitions to any observer (this is where
influence predictors hook in), and only then applies its own value
updates over the episode in order. Everything is driven by a single
seeded generator so runs are exactly reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import env
from .env import Action, GridMap, RewardClassSet, Transition

StateKey = tuple[int, int]


class ValueFunction:
    """State-action values keyed by position. Unseen states read as zeros."""

    action_count: int

    def values(self, key: StateKey) -> np.ndarray:
        """Action-value vector for a state. Treat the result as read-only."""
        raise NotImplementedError

    def update(self, key: StateKey, action: int, target: float, alpha: float) -> None:
        """Move the (state, action) value toward target by step size alpha."""
        raise NotImplementedError

    def max_value(self, key: StateKey) -> float:
        return float(np.max(self.values(key)))

    def greedy(self, key: StateKey) -> Action:
        return Action(int(np.argmax(self.values(key))))


class TableValues(ValueFunction):
    """Dense-per-state table backing."""

    def __init__(self, action_count: int = len(Action), default: float = 0.0):
        self.action_count = action_count
        self.default = default
        self._table: dict[StateKey, np.ndarray] = {}
        self._zeros = np.full(action_count, default, dtype=np.float64)

    def values(self, key: StateKey) -> np.ndarray:
        row = self._table.get(key)
        return row if row is not None else self._zeros

    def _row(self, key: StateKey) -> np.ndarray:
        row = self._table.get(key)
        if row is None:
            row = np.full(self.action_count, self.default, dtype=np.float64)
            self._table[key] = row
        return row

    def update(self, key: StateKey, action: int, target: float, alpha: float) -> None:
        row = self._row(key)
        row[action] += alpha * (target - row[action])

    def items(self) -> list[tuple[StateKey, np.ndarray]]:
        """Entries in sorted key order, for stable serialization."""
        return sorted(self._table.items(), key=lambda kv: kv[0])

    def __len__(self) -> int:
        return len(self._table)

    def equals(self, other: "TableValues", atol: float = 0.0) -> bool:
        keys = set(self._table) | set(other._table)
        for key in keys:
            if not np.allclose(self.values(key), other.values(key), rtol=0.0, atol=atol):
                return False
        return True


class MlpValues(ValueFunction):
    """One-hidden-layer approximator with a hand-rolled gradient step.

    The feature map defaults to a one-hot over grid cells, which makes
    this a drop-in alternative to the table on the same maps.
    """

    def __init__(
        self,
        action_count: int,
        feature_dim: int,
        feature_fn: Callable[[StateKey], np.ndarray],
        hidden: int = 32,
        seed: int = 0,
        init_scale: float = 0.05,
    ):
        self.action_count = action_count
        self.feature_dim = feature_dim
        self.feature_fn = feature_fn
        rng = np.random.default_rng(seed)
        self.w1 = rng.normal(0.0, init_scale, size=(feature_dim, hidden))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.normal(0.0, init_scale, size=(hidden, action_count))
        self.b2 = np.zeros(action_count)

    @classmethod
    def for_grid(cls, grid: GridMap, **kwargs) -> "MlpValues":
        dim = grid.width * grid.height
        width = grid.width

        def one_hot(key: StateKey) -> np.ndarray:
            phi = np.zeros(dim)
            phi[key[1] * width + key[0]] = 1.0
            return phi

        return cls(len(Action), dim, one_hot, **kwargs)

    def _forward(self, key: StateKey):
        phi = self.feature_fn(key)
        h = np.tanh(phi @ self.w1 + self.b1)
        return phi, h, h @ self.w2 + self.b2

    def values(self, key: StateKey) -> np.ndarray:
        return self._forward(key)[2]

    def update(self, key: StateKey, action: int, target: float, alpha: float) -> None:
        phi, h, q = self._forward(key)
        err = q[action] - target  # d(0.5*err^2)/dq
        grad_h = err * self.w2[:, action]
        grad_pre = grad_h * (1.0 - h * h)
        self.w2[:, action] -= alpha * err * h
        self.b2[action] -= alpha * err
        self.w1 -= alpha * np.outer(phi, grad_pre)
        self.b1 -= alpha * grad_pre


@dataclass
class LearnerConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: Optional[int] = None  # default: episodes // 2
    episodes: int = 2000
    seed: int = 0
    max_steps: Optional[int] = None  # default: 4 * W * H

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        for name in ("epsilon_start", "epsilon_end"):
            eps = getattr(self, name)
            if not 0.0 <= eps <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")

    @property
    def decay_episodes(self) -> int:
        if self.epsilon_decay_episodes is not None:
            return self.epsilon_decay_episodes
        return max(1, self.episodes // 2)


@dataclass
class TransitionLog:
    """Every transition of every episode, in exact generation order."""

    episodes: list[list[Transition]] = field(default_factory=list)

    def all_transitions(self) -> list[Transition]:
        return [t for ep in self.episodes for t in ep]

    def __len__(self) -> int:
        return len(self.episodes)


def select_action(
    vf: ValueFunction,
    key: StateKey,
    epsilon: float,
    rng: Optional[np.random.Generator] = None,
) -> Action:
    """Epsilon-greedy action; exact argmax with lowest-index tie-break at 0."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("rng is required when epsilon > 0")
        if rng.random() < epsilon:
            return Action(int(rng.integers(vf.action_count)))
    return Action(int(np.argmax(vf.values(key))))


def q_update(vf: ValueFunction, t: Transition, alpha: float, gamma: float) -> None:
    """Standard one-step target on the total reward; terminal bootstrap masked."""
    bootstrap = 0.0 if t.terminal else vf.max_value(t.next_state.position)
    vf.update(t.state.position, t.action, t.reward_total + gamma * bootstrap, alpha)


def epsilon_for(cfg: LearnerConfig, episode: int) -> float:
    """Linear decay from epsilon_start to epsilon_end over decay_episodes."""
    frac = min(1.0, episode / cfg.decay_episodes)
    return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)


def play_episode(
    grid: GridMap,
    classes: RewardClassSet,
    vf: ValueFunction,
    epsilon: float,
    rng: np.random.Generator,
    max_steps: int,
    start_index: int,
) -> list[Transition]:
    state = env.reset(grid, start_index, max_steps)
    transitions: list[Transition] = []
    while not state.done:
        action = select_action(vf, state.position, epsilon, rng)
        t = env.step(state, action, grid, classes)
        transitions.append(t)
        state = t.next_state
    return transitions


EpisodeObserver = Callable[[int, list[Transition]], None]


def train(
    grid: GridMap,
    classes: RewardClassSet,
    cfg: LearnerConfig,
    episode_observer: Optional[EpisodeObserver] = None,
    value_function: Optional[ValueFunction] = None,
) -> tuple[ValueFunction, TransitionLog]:
    """Run the full training loop and return the values plus the episode log.

    The observer sees each finished episode before the agent's own update
    pass and must not touch the agent; it exists so that auxiliary models
    can consume the exact transition stream without influencing it.
    """
    rng = np.random.default_rng(cfg.seed)
    vf = value_function if value_function is not None else TableValues(len(Action))
    budget = cfg.max_steps if cfg.max_steps is not None else env.default_max_steps(grid)

    log = TransitionLog()
    n_starts = len(grid.start_positions)
    for episode in range(cfg.episodes):
        epsilon = epsilon_for(cfg, episode)
        start_index = int(rng.integers(n_starts)) if n_starts > 1 else 0
        transitions = play_episode(grid, classes, vf, epsilon, rng, budget, start_index)
        log.episodes.append(transitions)
        if episode_observer is not None:
            episode_observer(episode, transitions)
        for t in transitions:
            q_update(vf, t, cfg.alpha, cfg.gamma)
    return vf, log


def evaluate_success_rate(
    grid: GridMap,
    classes: RewardClassSet,
    vf: ValueFunction,
    episodes: int = 100,
    max_steps: Optional[int] = None,
) -> float:
    """Fraction of greedy evaluation episodes that reach a goal cell.

    Starts cycle round-robin so every start position is exercised.
    """
    if episodes <= 0:
        return 0.0
    budget = max_steps if max_steps is not None else env.default_max_steps(grid)
    n_starts = len(grid.start_positions)
    successes = 0
    for i in range(episodes):
        state = env.reset(grid, i % n_starts, budget)
        while not state.done:
            t = env.step(state, vf.greedy(state.position), grid, classes)
            state = t.next_state
            if t.terminal:
                if grid.is_goal(*state.position):
                    successes += 1
                break
    return successes / episodes

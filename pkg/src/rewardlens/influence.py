"""Per-reward-class influence predictors.

One predictor per reward class learns how strongly that class's reward
source shapes expected utility, by training on the agent's own transition
stream with every reward replaced by the magnitude (or, for mixed-sign
classes, the signed value) of that single class's component. Predictors
read the stream; they never steer it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .env import (
    NEUTRAL_CLASS_ID,
    Action,
    GridMap,
    RewardClassSet,
    SignMode,
    Transition,
    UnknownClass,
)
from .learner import (
    LearnerConfig,
    StateKey,
    TableValues,
    TransitionLog,
    ValueFunction,
    train,
)


class IpMode(str, enum.Enum):
    MAGNITUDE = "magnitude"
    SIGNED = "signed"


class UpdateSchedule(str, enum.Enum):
    # One in-order pass over each finished episode, or per-step uniform
    # minibatches drawn from the replay buffer.
    EPISODE_PASS = "episode-pass"
    MINIBATCH = "minibatch"


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform sampling (with replacement)."""

    def __init__(self, capacity: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._head = 0  # next slot to overwrite once full
        self._rng = np.random.default_rng(seed)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._head] = item
            self._head = (self._head + 1) % self.capacity

    def sample(self, k: int) -> list[Transition]:
        if not self._items:
            return []
        idx = self._rng.integers(len(self._items), size=k)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Transition]:
        """Oldest-to-newest iteration."""
        n = len(self._items)
        if n < self.capacity:
            return iter(list(self._items))
        ordered = self._items[self._head :] + self._items[: self._head]
        return iter(ordered)


def filter_reward(t: Transition, class_id: int, mode: IpMode) -> float:
    """Project a transition's reward onto one class.

    Magnitude mode returns the absolute value so that harmful rewards read
    as positive influence strength; signed mode keeps the sign for classes
    whose source can both help and hurt. Rewards of other classes are 0.
    """
    if not 0 <= class_id < len(t.reward_by_class):
        raise UnknownClass(f"transition has no reward slot for class {class_id}")
    r = t.reward_by_class[class_id]
    return abs(r) if mode is IpMode.MAGNITUDE else r


@dataclass
class InfluenceConfig:
    gamma: float = 0.5
    alpha: float = 0.2
    buffer_capacity: int = 50000
    schedule: UpdateSchedule = UpdateSchedule.EPISODE_PASS
    batch_size: int = 64
    class_gamma: dict[int, float] = field(default_factory=dict)  # per-class overrides

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    def gamma_for(self, class_id: int) -> float:
        return self.class_gamma.get(class_id, self.gamma)


class InfluencePredictor:
    """Value table for one reward class, fed from the agent's transitions."""

    def __init__(
        self,
        class_id: int,
        sign_mode: SignMode,
        gamma: float,
        alpha: float,
        buffer_capacity: int = 50000,
        schedule: UpdateSchedule = UpdateSchedule.EPISODE_PASS,
        batch_size: int = 64,
        seed: int = 0,
        mode: Optional[IpMode] = None,
        values: Optional[ValueFunction] = None,
    ):
        self.class_id = class_id
        self.sign_mode = sign_mode
        self.gamma = gamma
        self.alpha = alpha
        self.schedule = schedule
        self.batch_size = batch_size
        if mode is None:
            mode = IpMode.SIGNED if sign_mode is SignMode.MIXED else IpMode.MAGNITUDE
        self.mode = mode
        self.values = values if values is not None else TableValues(len(Action))
        self.buffer = ReplayBuffer(buffer_capacity, seed=seed)

    def filtered(self, t: Transition) -> Transition:
        """Copy of t with the reward vector projected onto this class."""
        r = filter_reward(t, self.class_id, self.mode)
        rewards = [0.0] * len(t.reward_by_class)
        rewards[self.class_id] = r
        return Transition(
            state=t.state,
            action=t.action,
            next_state=t.next_state,
            reward_total=r,
            reward_by_class=tuple(rewards),
            terminal=t.terminal,
        )

    def observe_episode(self, transitions: list[Transition]) -> None:
        """Buffer one episode's filtered transitions, then run this
        predictor's update pass for the episode."""
        filtered = [self.filtered(t) for t in transitions]
        for ft in filtered:
            self.buffer.push(ft)
        if self.schedule is UpdateSchedule.EPISODE_PASS:
            for ft in filtered:
                influence_update(self, ft, self.alpha)
        else:
            for _ in filtered:
                for sample in self.buffer.sample(self.batch_size):
                    influence_update(self, sample, self.alpha)


def influence_update(ip: InfluencePredictor, t: Transition, alpha: Optional[float] = None) -> None:
    """One-step value update toward the class-filtered target."""
    if alpha is None:
        alpha = ip.alpha
    r = filter_reward(t, ip.class_id, ip.mode)
    bootstrap = 0.0 if t.terminal else ip.values.max_value(t.next_state.position)
    ip.values.update(t.state.position, t.action, r + ip.gamma * bootstrap, alpha)


def influence_value(ip: InfluencePredictor, key: StateKey) -> float:
    """Best-case influence of this class at a state: max over actions."""
    return ip.values.max_value(key)


def build_predictors(
    classes: RewardClassSet,
    cfg: InfluenceConfig,
    seed: int = 0,
) -> list[InfluencePredictor]:
    """One predictor per reward class, each with its own sample stream."""
    ips = []
    for rc in classes:
        if rc.class_id == NEUTRAL_CLASS_ID:
            continue
        ips.append(
            InfluencePredictor(
                class_id=rc.class_id,
                sign_mode=rc.sign_mode,
                gamma=cfg.gamma_for(rc.class_id),
                alpha=cfg.alpha,
                buffer_capacity=cfg.buffer_capacity,
                schedule=cfg.schedule,
                batch_size=cfg.batch_size,
                seed=_predictor_seed(seed, rc.class_id),
            )
        )
    return ips


def _predictor_seed(seed: int, class_id: int) -> int:
    # Distinct, reproducible stream per class, disjoint from the agent's.
    return (seed * 1000003 + class_id + 1) & 0x7FFFFFFF


@dataclass
class CotrainResult:
    agent: ValueFunction
    predictors: list[InfluencePredictor]
    log: TransitionLog


def cotrain(
    grid: GridMap,
    classes: RewardClassSet,
    learner_cfg: LearnerConfig,
    ip_cfg: Optional[InfluenceConfig] = None,
) -> CotrainResult:
    """Train the agent while influence predictors shadow its stream.

    Each finished episode is class-filtered into every predictor's buffer
    and each predictor runs its update pass, after which the agent applies
    its own updates. Predictors never participate in action selection, so
    the agent's trajectory stream is identical with or without them.
    """
    if ip_cfg is None:
        ip_cfg = InfluenceConfig()
    ips = build_predictors(classes, ip_cfg, seed=learner_cfg.seed)

    def observer(_episode: int, transitions: list[Transition]) -> None:
        for ip in ips:
            ip.observe_episode(transitions)

    agent, log = train(grid, classes, learner_cfg, episode_observer=observer)
    return CotrainResult(agent=agent, predictors=ips, log=log)

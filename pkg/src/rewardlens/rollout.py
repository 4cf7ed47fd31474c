"""Forward simulation of the greedy policy.

Produces the agent's own trajectory from a state, counterfactual
trajectories that start with a forced action prefix, and local segments
(windows around one decision used for near-horizon comparisons).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

from . import env
from .env import Action, EnvState, GridMap, GridError, RewardClassSet
from .learner import ValueFunction


class IndexOutOfRange(GridError):
    pass


class TerminationKind(str, enum.Enum):
    GOAL = "goal"
    DANGER = "danger"
    TIMEOUT = "timeout"
    HORIZON_CAP = "horizon-cap"


@dataclass(frozen=True)
class Termination:
    kind: TerminationKind
    class_id: Optional[int] = None  # set for DANGER


@dataclass(frozen=True)
class TrajectoryStep:
    state: EnvState
    action: Action
    reward_by_class: tuple[float, ...]


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[TrajectoryStep, ...]
    final_state: EnvState
    origin: str  # "agent" | "counterfactual"
    forced_actions: tuple[Action, ...]
    terminated: Termination

    @property
    def states(self) -> list[EnvState]:
        """All visited states, decision point through final state."""
        return [s.state for s in self.steps] + [self.final_state]

    @property
    def positions(self) -> list[tuple[int, int]]:
        return [s.position for s in self.states]

    @property
    def actions(self) -> list[Action]:
        return [s.action for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Segment:
    """Window of a trajectory: one designated action plus a few extra steps."""

    parent: Trajectory
    start: int
    end: int  # exclusive step index, end <= len(parent)

    @property
    def steps(self) -> tuple[TrajectoryStep, ...]:
        return self.parent.steps[self.start : self.end]

    @property
    def states(self) -> list[EnvState]:
        """Source states of the covered steps."""
        return [s.state for s in self.steps]

    def __len__(self) -> int:
        return self.end - self.start


def _classify_termination(grid: GridMap, state: EnvState, terminal: bool) -> Optional[Termination]:
    if terminal:
        x, y = state.position
        if grid.is_goal(x, y):
            return Termination(TerminationKind.GOAL)
        obj = grid.object_at(x, y)
        return Termination(TerminationKind.DANGER, obj.class_id if obj else None)
    if state.done:
        return Termination(TerminationKind.TIMEOUT)
    return None


def _run(
    grid: GridMap,
    classes: RewardClassSet,
    policy: ValueFunction,
    s0: EnvState,
    forced: Sequence[Action],
    horizon: int,
) -> tuple[tuple[TrajectoryStep, ...], EnvState, Termination]:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    state = s0
    steps: list[TrajectoryStep] = []
    termination: Optional[Termination] = None
    for i in range(horizon):
        if state.done:
            break
        action = forced[i] if i < len(forced) else policy.greedy(state.position)
        t = env.step(state, action, grid, classes)
        steps.append(TrajectoryStep(state, action, t.reward_by_class))
        state = t.next_state
        termination = _classify_termination(grid, state, t.terminal)
        if termination is not None:
            break
    if termination is None:
        termination = Termination(TerminationKind.HORIZON_CAP)
    return tuple(steps), state, termination


def rollout_greedy(
    grid: GridMap,
    classes: RewardClassSet,
    policy: ValueFunction,
    s0: EnvState,
    horizon: Optional[int] = None,
) -> Trajectory:
    """Deterministic greedy rollout from s0 until terminal, timeout, or horizon."""
    cap = horizon if horizon is not None else s0.max_steps
    steps, final, term = _run(grid, classes, policy, s0, (), cap)
    return Trajectory(steps, final, "agent", (), term)


def rollout_counterfactual(
    grid: GridMap,
    classes: RewardClassSet,
    policy: ValueFunction,
    s0: EnvState,
    forced: Sequence[Action],
    horizon: Optional[int] = None,
) -> Trajectory:
    """Rollout that executes the forced actions verbatim, then turns greedy.

    Forced moves blocked by walls still count as executed steps. If a
    forced action ends the episode, the rest of the prefix is discarded.
    """
    if len(forced) < 1:
        raise ValueError("at least one forced action is required")
    cap = horizon if horizon is not None else s0.max_steps
    steps, final, term = _run(grid, classes, policy, s0, tuple(forced), cap)
    return Trajectory(steps, final, "counterfactual", tuple(forced), term)


def make_segment(traj: Trajectory, action_index: int, extra_steps: int = 5) -> Segment:
    """Window starting at the designated action, extended by extra steps."""
    if not 0 <= action_index < len(traj):
        raise IndexOutOfRange(
            f"action index {action_index} out of range for trajectory of length {len(traj)}"
        )
    if extra_steps < 0:
        raise ValueError("extra_steps must be non-negative")
    end = min(action_index + 1 + extra_steps, len(traj))
    return Segment(traj, action_index, end)

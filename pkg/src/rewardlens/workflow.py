"""Composition helpers shared by the CLI and the HTTP service."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import env
from .env import Action, EnvState, GridMap, RewardClassSet
from .explain import (
    ExplanationStructure,
    Lexicon,
    aggregated_explanation,
    local_explanation,
    render,
)
from .faithfulness import FaithfulnessReport, build_report
from .influence import InfluencePredictor, cotrain, filter_reward
from .learner import ValueFunction, evaluate_success_rate
from .persistence import Checkpoint, ExperimentConfig, map_digest
from .rollout import Trajectory, make_segment, rollout_counterfactual, rollout_greedy


@dataclass
class TrainedArtifacts:
    agent: ValueFunction
    ips: list[InfluencePredictor]
    episodes_run: int
    success_rate: float


def load_grid(cfg: ExperimentConfig) -> GridMap:
    return env.load_map(cfg.map_text, cfg.classes)


def train_experiment(
    cfg: ExperimentConfig,
    grid: Optional[GridMap] = None,
    episodes: Optional[int] = None,
    seed: Optional[int] = None,
) -> TrainedArtifacts:
    """Co-train agent and predictors per config, then score the greedy policy."""
    if grid is None:
        grid = load_grid(cfg)
    learner_cfg = cfg.learner
    if episodes is not None or seed is not None:
        learner_cfg = replace(
            learner_cfg,
            episodes=learner_cfg.episodes if episodes is None else episodes,
            seed=learner_cfg.seed if seed is None else seed,
        )
    result = cotrain(grid, cfg.classes, learner_cfg, cfg.influence)
    success = (
        evaluate_success_rate(grid, cfg.classes, result.agent, episodes=100)
        if learner_cfg.episodes > 0
        else 0.0
    )
    return TrainedArtifacts(
        agent=result.agent,
        ips=result.predictors,
        episodes_run=learner_cfg.episodes,
        success_rate=success,
    )


def checkpoint_for(cfg: ExperimentConfig, artifacts: TrainedArtifacts) -> Checkpoint:
    return Checkpoint(
        map_text=cfg.map_text,
        map_hash=map_digest(cfg.map_text),
        classes=cfg.classes,
        agent=artifacts.agent,
        ips=artifacts.ips,
        learner_cfg=cfg.learner,
        ip_cfg=cfg.influence,
        seed=cfg.learner.seed,
        episodes_run=artifacts.episodes_run,
    )


@dataclass
class ExplanationResult:
    structure: ExplanationStructure
    text: str
    traj_agent: Trajectory
    traj_user: Trajectory
    action_agent: Action
    action_user: Action


def explain_query(
    grid: GridMap,
    classes: RewardClassSet,
    lexicon: Lexicon,
    agent: ValueFunction,
    ips: Sequence[InfluencePredictor],
    position: tuple[int, int],
    counterfactual: Sequence[Action],
    mode: str = "aggregated",
    exclusion_ratio: float = 0.05,
    floor: float = 1e-6,
    extra_steps: int = 5,
    agent_action: Optional[Action] = None,
    horizon: Optional[int] = None,
) -> ExplanationResult:
    """Answer one "why not" query from a decision point.

    The agent trajectory is the greedy rollout (optionally pinned to a
    recorded first action); the user trajectory forces the proposed
    actions and then follows the same greedy policy.
    """
    if grid.is_wall(*position):
        raise ValueError(f"position {position} is a wall cell")
    if not counterfactual:
        raise ValueError("at least one counterfactual action is required")
    s0 = EnvState(position, 0, False, env.default_max_steps(grid))

    if agent_action is None:
        traj_a = rollout_greedy(grid, classes, agent, s0, horizon)
    else:
        traj_a = rollout_counterfactual(grid, classes, agent, s0, [agent_action], horizon)
    traj_u = rollout_counterfactual(grid, classes, agent, s0, list(counterfactual), horizon)

    if mode == "aggregated":
        structure = aggregated_explanation(traj_a, traj_u, ips, exclusion_ratio, floor)
    elif mode == "local":
        seg_a = make_segment(traj_a, 0, extra_steps)
        seg_u = make_segment(traj_u, 0, extra_steps)
        structure = local_explanation(seg_a, seg_u, ips)
    else:
        raise ValueError(f"unknown explanation mode {mode!r}")

    act_a = traj_a.steps[0].action
    act_u = traj_u.steps[0].action
    text = render(structure, lexicon, act_a, act_u)
    return ExplanationResult(structure, text, traj_a, traj_u, act_a, act_u)


def heatmap_grid(grid: GridMap, vf: ValueFunction) -> list[list[Optional[float]]]:
    """Per-cell max action value; walls are None."""
    rows: list[list[Optional[float]]] = []
    for y in range(grid.height):
        row: list[Optional[float]] = []
        for x in range(grid.width):
            row.append(None if grid.is_wall(x, y) else float(vf.max_value((x, y))))
        rows.append(row)
    return rows


def faithfulness_report(
    cfg: ExperimentConfig,
    grid: GridMap,
    artifacts: TrainedArtifacts,
) -> FaithfulnessReport:
    return build_report(
        grid,
        cfg.classes,
        artifacts.agent,
        artifacts.ips,
        thresholds=cfg.faithfulness.thresholds,
        k=cfg.faithfulness.k,
        near_zero=cfg.faithfulness.near_zero,
    )


def predictor_residual(
    grid: GridMap,
    classes: RewardClassSet,
    ip: InfluencePredictor,
) -> float:
    """Sup-norm one-step Bellman residual of a predictor over visited states.

    Uses the environment's own step function on a fresh large budget, so a
    converged table reports a residual near zero.
    """
    residual = 0.0
    budget = 10**9
    table = getattr(ip.values, "_table", None)
    keys = list(table.keys()) if table is not None else grid.open_cells()
    for key in keys:
        if grid.is_wall(*key):
            continue
        state = EnvState(key, 0, False, budget)
        for action in Action:
            t = env.step(state, action, grid, classes)
            r = filter_reward(t, ip.class_id, ip.mode)
            bootstrap = 0.0 if t.terminal else ip.values.max_value(t.next_state.position)
            target = r + ip.gamma * bootstrap
            residual = max(residual, abs(target - float(ip.values.values(key)[action])))
    return residual

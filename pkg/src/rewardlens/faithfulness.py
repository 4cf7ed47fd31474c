"""How well do the influence predictors reconstruct the agent's policy?

The combined-decision rule scores each action by the sum of positive
influence values minus the sum of negative ones and takes the argmax.
Agreement with the agent's greedy policy is measured over all non-wall
states, over critical states above an influence threshold, and through a
leave-one-out k-nearest-neighbor probe that predicts the agent's action
from influence features alone. Trajectory-level reconstruction is scored
by root-mean-squared percentage error between the cumulative influence
curve and the agent's own value curve.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import env
from .env import Action, GridMap, RewardClassSet, SignMode
from .influence import InfluencePredictor, influence_value
from .learner import StateKey, ValueFunction
from .rollout import Trajectory, rollout_greedy

DEFAULT_THRESHOLDS = (0.0, 0.05, 0.1, 0.2)
DEFAULT_KNN_K = 5
DEFAULT_NEAR_ZERO = 1e-3


class FaithfulnessError(Exception):
    pass


class NoStatesAboveThreshold(FaithfulnessError):
    pass


class TooFewSamples(FaithfulnessError):
    pass


class AllExcluded(FaithfulnessError):
    pass


def _partition(ips: Sequence[InfluencePredictor]):
    """Positive side takes POSITIVE and MIXED predictors (signed values),
    negative side takes NEGATIVE ones (magnitudes)."""
    positive = [ip for ip in ips if ip.sign_mode in (SignMode.POSITIVE, SignMode.MIXED)]
    negative = [ip for ip in ips if ip.sign_mode is SignMode.NEGATIVE]
    return positive, negative


def aggregate_scores(key: StateKey, ips: Sequence[InfluencePredictor]) -> np.ndarray:
    positive, negative = _partition(ips)
    scores = np.zeros(len(Action))
    for ip in positive:
        scores = scores + ip.values.values(key)
    for ip in negative:
        scores = scores - ip.values.values(key)
    return scores


def aggregate_action(key: StateKey, ips: Sequence[InfluencePredictor]) -> Action:
    """Combined decision of all predictors; lowest index wins ties."""
    return Action(int(np.argmax(aggregate_scores(key, ips))))


def agreement(
    policy: ValueFunction,
    ips: Sequence[InfluencePredictor],
    states: Sequence[StateKey],
    threshold: float = 0.0,
) -> tuple[float, float]:
    """Agreement between the combined decision and the greedy policy over
    states whose strongest influence reaches the threshold.

    Returns (agreement fraction, coverage fraction). Raises
    NoStatesAboveThreshold when the restriction empties the state set.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if not states:
        raise ValueError("states must be non-empty")
    eligible = [
        s for s in states if max(influence_value(ip, s) for ip in ips) >= threshold
    ]
    if not eligible:
        raise NoStatesAboveThreshold(f"no state reaches influence {threshold}")
    matches = sum(
        1 for s in eligible if aggregate_action(s, ips) == policy.greedy(s)
    )
    return matches / len(eligible), len(eligible) / len(states)


def knn_probe(features: np.ndarray, labels: Sequence[int], k: int = DEFAULT_KNN_K) -> float:
    """Leave-one-out k-NN accuracy of predicting labels from features.

    Deterministic: neighbors are ordered by (distance, index) and vote
    ties go to the lowest label.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if features.shape[0] != n:
        raise ValueError("features and labels must align")
    if k < 1:
        raise ValueError("k must be positive")
    if n < k + 1:
        raise TooFewSamples(f"need at least {k + 1} samples for leave-one-out {k}-NN")

    diffs = features[:, None, :] - features[None, :, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=2))
    np.fill_diagonal(dists, np.inf)

    n_labels = int(labels.max()) + 1
    correct = 0
    order_tiebreak = np.arange(n)
    for i in range(n):
        order = np.lexsort((order_tiebreak, dists[i]))[:k]
        votes = np.bincount(labels[order], minlength=n_labels)
        if labels[i] == int(np.argmax(votes)):
            correct += 1
    return correct / n


def cumulative_ip_curve(
    traj: Trajectory, ips: Sequence[InfluencePredictor]
) -> list[float]:
    """Per-step combined influence along a trajectory, at the action taken."""
    positive, negative = _partition(ips)
    curve = []
    for step in traj.steps:
        key = step.state.position
        value = sum(float(ip.values.values(key)[step.action]) for ip in positive)
        value -= sum(float(ip.values.values(key)[step.action]) for ip in negative)
        curve.append(value)
    return curve


def agent_value_curve(traj: Trajectory, policy: ValueFunction) -> list[float]:
    """The agent's own value at each step's (state, action)."""
    return [
        float(policy.values(step.state.position)[step.action]) for step in traj.steps
    ]


def rmspe(
    predicted: Sequence[float],
    actual: Sequence[float],
    near_zero: float = DEFAULT_NEAR_ZERO,
) -> tuple[float, int]:
    """Root-mean-squared percentage error, in percent.

    Indices whose actual value is within near_zero of 0 are excluded from
    the mean (their count is returned); with nothing left, AllExcluded.
    """
    if len(predicted) != len(actual) or len(actual) == 0:
        raise ValueError("series must be non-empty and of equal length")
    ratios = []
    excluded = 0
    for p, a in zip(predicted, actual):
        if abs(a) < near_zero:
            excluded += 1
            continue
        ratios.append(((p - a) / a) ** 2)
    if not ratios:
        raise AllExcluded("every index fell below the near-zero guard")
    return 100.0 * float(np.sqrt(np.mean(ratios))), excluded


@dataclass(frozen=True)
class ThresholdPoint:
    threshold: float
    agreement: Optional[float]  # None when no state qualified
    coverage: float


@dataclass
class FaithfulnessReport:
    direct_agreement: float
    probe_accuracy: float
    threshold_curve: list[ThresholdPoint]
    positive_only_curve: list[ThresholdPoint]
    rmspe_per_run: list[float]
    states_evaluated: int
    excluded_near_zero: int
    probe_kind: str = "leave-one-out-knn"
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def points(curve):
            return [
                {"threshold": p.threshold, "agreement": p.agreement, "coverage": p.coverage}
                for p in curve
            ]

        return {
            "direct_agreement": self.direct_agreement,
            "probe_accuracy": self.probe_accuracy,
            "probe_kind": self.probe_kind,
            "threshold_curve": points(self.threshold_curve),
            "positive_only_curve": points(self.positive_only_curve),
            "rmspe_per_run": self.rmspe_per_run,
            "mean_rmspe": (
                float(np.mean(self.rmspe_per_run)) if self.rmspe_per_run else None
            ),
            "states_evaluated": self.states_evaluated,
            "excluded_near_zero": self.excluded_near_zero,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def threshold_curve_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["threshold", "agreement", "coverage"])
        for p in self.threshold_curve:
            writer.writerow(
                [p.threshold, "" if p.agreement is None else p.agreement, p.coverage]
            )
        return out.getvalue()


def _curve(
    policy: ValueFunction,
    ips: Sequence[InfluencePredictor],
    states: Sequence[StateKey],
    thresholds: Sequence[float],
) -> list[ThresholdPoint]:
    curve = []
    for threshold in thresholds:
        try:
            agree, coverage = agreement(policy, ips, states, threshold)
            curve.append(ThresholdPoint(threshold, agree, coverage))
        except NoStatesAboveThreshold:
            curve.append(ThresholdPoint(threshold, None, 0.0))
    return curve


def probe_features(
    states: Sequence[StateKey], ips: Sequence[InfluencePredictor]
) -> np.ndarray:
    """Per-state feature vector: every predictor's action values, concatenated."""
    rows = []
    for s in states:
        parts = [np.asarray(ip.values.values(s), dtype=np.float64) for ip in ips]
        rows.append(np.concatenate(parts))
    return np.asarray(rows)


def build_report(
    grid: GridMap,
    classes: RewardClassSet,
    policy: ValueFunction,
    ips: Sequence[InfluencePredictor],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    k: int = DEFAULT_KNN_K,
    near_zero: float = DEFAULT_NEAR_ZERO,
    eval_runs: int = 9,
) -> FaithfulnessReport:
    """Full faithfulness evaluation of a trained agent/predictor pair."""
    states = grid.open_cells()
    direct, _ = agreement(policy, ips, states, 0.0)
    curve = _curve(policy, ips, states, thresholds)
    positive = [ip for ip in ips if ip.sign_mode in (SignMode.POSITIVE, SignMode.MIXED)]
    positive_curve = (
        _curve(policy, positive, states, thresholds) if positive else []
    )

    labels = [int(policy.greedy(s)) for s in states]
    probe = knn_probe(probe_features(states, ips), labels, k)

    rmspe_runs: list[float] = []
    excluded = 0
    # Distinct starts only; a deterministic policy would just repeat runs.
    n_runs = min(eval_runs, len(grid.start_positions))
    for i in range(n_runs):
        s0 = env.reset(grid, i)
        traj = rollout_greedy(grid, classes, policy, s0)
        if not traj.steps:
            continue
        try:
            value, skipped = rmspe(
                cumulative_ip_curve(traj, ips), agent_value_curve(traj, policy), near_zero
            )
        except AllExcluded:
            excluded += len(traj.steps)
            continue
        rmspe_runs.append(value)
        excluded += skipped

    return FaithfulnessReport(
        direct_agreement=direct,
        probe_accuracy=probe,
        threshold_curve=curve,
        positive_only_curve=positive_curve,
        rmspe_per_run=rmspe_runs,
        states_evaluated=len(states),
        excluded_near_zero=excluded,
        notes={"aggregation": "sum(positive) - sum(negative), argmax over actions"},
    )

import numpy as np
import pytest

from maps import GOAL_ONLY6, one_class
from test_explainer import ip_from_table, synthetic_trajectory

from rewardlens import env
from rewardlens.env import Action, SignMode
from rewardlens.faithfulness import (
    AllExcluded,
    NoStatesAboveThreshold,
    TooFewSamples,
    aggregate_action,
    agreement,
    build_report,
    cumulative_ip_curve,
    knn_probe,
    rmspe,
)
from rewardlens.influence import InfluenceConfig, cotrain
from rewardlens.learner import LearnerConfig, TableValues


class TestAggregateAction:
    def test_single_positive_reduces_to_its_greedy(self):
        ip = ip_from_table(0, SignMode.POSITIVE, {(1, 1): [0.1, 0.9, 0.2, 0.0]})
        assert aggregate_action((1, 1), [ip]) == Action.DOWN
        assert aggregate_action((1, 1), [ip]) == ip.values.greedy((1, 1))

    def test_all_zero_ties_to_first_action(self):
        ips = [
            ip_from_table(0, SignMode.POSITIVE, {}),
            ip_from_table(1, SignMode.NEGATIVE, {}),
        ]
        assert aggregate_action((3, 3), ips) == Action.UP

    def test_negative_values_subtract(self):
        goal = ip_from_table(0, SignMode.POSITIVE, {(0, 0): [0.5, 0.6, 0.0, 0.0]})
        danger = ip_from_table(1, SignMode.NEGATIVE, {(0, 0): [0.0, 0.5, 0.0, 0.0]})
        assert aggregate_action((0, 0), [goal, danger]) == Action.UP

    def test_mixed_sign_contributes_signed_values_positively(self):
        health = ip_from_table(1, SignMode.MIXED, {(0, 0): [-0.5, 0.2, 0.0, 0.0]})
        assert aggregate_action((0, 0), [health]) == Action.DOWN


class TestAgreement:
    def _setup(self):
        policy = TableValues(4)
        policy._row((0, 0))[:] = [1.0, 0.0, 0.0, 0.0]
        policy._row((1, 0))[:] = [0.0, 1.0, 0.0, 0.0]
        goal = ip_from_table(
            0, SignMode.POSITIVE, {(0, 0): [0.9, 0, 0, 0], (1, 0): [0.05, 0, 0, 0]}
        )
        return policy, [goal]

    def test_threshold_zero_covers_all_states(self):
        policy, ips = self._setup()
        agree, coverage = agreement(policy, ips, [(0, 0), (1, 0)], 0.0)
        assert coverage == 1.0
        assert agree == 0.5  # (1,0) disagrees: aggregate picks UP, policy DOWN

    def test_threshold_restricts_and_reports_coverage(self):
        policy, ips = self._setup()
        agree, coverage = agreement(policy, ips, [(0, 0), (1, 0)], 0.5)
        assert coverage == 0.5
        assert agree == 1.0

    def test_threshold_above_max_raises(self):
        policy, ips = self._setup()
        with pytest.raises(NoStatesAboveThreshold):
            agreement(policy, ips, [(0, 0), (1, 0)], 5.0)


class TestKnnProbe:
    def test_perfectly_separable_k1(self):
        features = np.array([[0.0], [0.1], [10.0], [10.1]])
        labels = [0, 0, 1, 1]
        assert knn_probe(features, labels, k=1) == 1.0

    def test_duplicated_pairs_k1(self):
        base = np.random.default_rng(0).normal(size=(20, 3))
        features = np.vstack([base, base])
        labels = list(range(4)) * 5 + list(range(4)) * 5
        assert knn_probe(features, labels, k=1) == 1.0

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            knn_probe(np.zeros((3, 2)), [0, 1, 2], k=3)

    def test_random_labels_near_chance(self):
        # Uninformative features, labels drawn uniformly over 4 actions:
        # the mean leave-one-out accuracy sits at chance level.
        rng = np.random.default_rng(11)
        features = rng.normal(size=(40, 4))
        total = 0.0
        draws = 10_000
        for _ in range(draws):
            labels = rng.integers(0, 4, size=40)
            total += knn_probe(features, labels, k=5)
        assert total / draws == pytest.approx(0.25, abs=0.03)


class TestCumulativeCurve:
    def test_single_positive_matches_its_values(self):
        ip = ip_from_table(
            0, SignMode.POSITIVE, {(0, 0): [0.0, 0.0, 0.0, 0.4], (1, 0): [0.0, 0.0, 0.0, 0.6]}
        )
        traj = synthetic_trajectory([(0, 0), (1, 0), (2, 0)], action=Action.RIGHT)
        assert cumulative_ip_curve(traj, [ip]) == [0.4, 0.6]

    def test_all_zero_ips_give_zero_series(self):
        ips = [ip_from_table(0, SignMode.POSITIVE, {}), ip_from_table(1, SignMode.NEGATIVE, {})]
        traj = synthetic_trajectory([(0, 0), (1, 0), (2, 0)])
        assert cumulative_ip_curve(traj, ips) == [0.0, 0.0]

    def test_negatives_subtract_at_taken_action(self):
        goal = ip_from_table(0, SignMode.POSITIVE, {(0, 0): [0.0, 0.0, 0.0, 0.9]})
        danger = ip_from_table(1, SignMode.NEGATIVE, {(0, 0): [0.0, 0.0, 0.0, 0.2]})
        traj = synthetic_trajectory([(0, 0), (1, 0)], action=Action.RIGHT)
        assert cumulative_ip_curve(traj, [goal, danger]) == [pytest.approx(0.7)]


class TestRmspe:
    def test_identity_is_zero(self):
        value, excluded = rmspe([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert value == 0.0 and excluded == 0

    def test_hand_computed_ten_percent(self):
        value, excluded = rmspe([1.1, 0.9], [1.0, 1.0])
        assert value == pytest.approx(10.0)
        assert excluded == 0

    def test_near_zero_exclusion_counted(self):
        value, excluded = rmspe([1.1, 5.0], [1.0, 0.0], near_zero=1e-3)
        assert excluded == 1
        assert value == pytest.approx(10.0)

    def test_all_excluded(self):
        with pytest.raises(AllExcluded):
            rmspe([1.0], [0.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rmspe([1.0], [1.0, 2.0])


class TestReport:
    def test_report_fields_and_serialization(self, fig3_setup):
        grid, classes, cfg, result = fig3_setup
        report = build_report(grid, classes, result.agent, result.predictors)
        assert 0.0 <= report.direct_agreement <= 1.0
        assert 0.0 <= report.probe_accuracy <= 1.0
        assert len(report.threshold_curve) == 4
        coverages = [p.coverage for p in report.threshold_curve]
        assert coverages == sorted(coverages, reverse=True)
        assert report.states_evaluated == len(grid.open_cells())

        doc = report.to_dict()
        assert set(doc) >= {
            "direct_agreement",
            "probe_accuracy",
            "threshold_curve",
            "positive_only_curve",
            "rmspe_per_run",
            "states_evaluated",
            "excluded_near_zero",
        }
        csv_text = report.threshold_curve_csv()
        assert csv_text.splitlines()[0] == "threshold,agreement,coverage"
        assert len(csv_text.splitlines()) == 5

    def test_positive_only_curve_uses_positive_predictors(self, fig3_setup):
        grid, classes, cfg, result = fig3_setup
        report = build_report(grid, classes, result.agent, result.predictors)
        positive = [p for p in result.predictors if p.sign_mode is SignMode.POSITIVE]
        states = grid.open_cells()
        expected, _ = agreement(result.agent, positive, states, 0.0)
        assert report.positive_only_curve[0].agreement == pytest.approx(expected)

    def test_single_class_report_runs(self):
        classes = one_class()
        grid = env.load_map(GOAL_ONLY6, classes)
        cfg = LearnerConfig(alpha=0.2, gamma=0.9, episodes=400, seed=5)
        result = cotrain(grid, classes, cfg, InfluenceConfig(alpha=0.2, gamma=0.9))
        report = build_report(grid, classes, result.agent, result.predictors)
        assert report.rmspe_per_run
        assert report.probe_accuracy > 0.0

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from maps import FIG1, FIG3, THREECLASS, three_classes, two_classes

from rewardlens import env
from rewardlens.influence import InfluenceConfig, cotrain
from rewardlens.learner import LearnerConfig

# Canonical training setups; session-scoped because co-training takes a
# couple of seconds each and many tests share the artifacts.


@pytest.fixture(scope="session")
def fig1_setup():
    classes = two_classes()
    grid = env.load_map(FIG1, classes)
    cfg = LearnerConfig(
        alpha=0.2, gamma=0.9, epsilon_start=1.0, epsilon_end=0.15, episodes=3000, seed=11
    )
    result = cotrain(grid, classes, cfg, InfluenceConfig(alpha=1.0, gamma=0.5))
    return grid, classes, cfg, result


@pytest.fixture(scope="session")
def fig3_setup():
    classes = two_classes()
    grid = env.load_map(FIG3, classes)
    cfg = LearnerConfig(
        alpha=0.2, gamma=0.9, epsilon_start=1.0, epsilon_end=0.15, episodes=3000, seed=11
    )
    result = cotrain(
        grid, classes, cfg, InfluenceConfig(alpha=1.0, gamma=0.5, class_gamma={0: 0.75})
    )
    return grid, classes, cfg, result


@pytest.fixture(scope="session")
def threeclass_setup():
    classes = three_classes()
    grid = env.load_map(THREECLASS, classes)
    cfg = LearnerConfig(
        alpha=0.2, gamma=0.9, epsilon_start=1.0, epsilon_end=0.15, episodes=4000, seed=23
    )
    result = cotrain(
        grid, classes, cfg, InfluenceConfig(alpha=0.2, gamma=0.5, class_gamma={0: 0.9})
    )
    return grid, classes, cfg, result

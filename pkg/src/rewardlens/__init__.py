"""Influence-aware gridworld agents with counterfactual route explanations."""

from .env import (
    Action,
    EnvState,
    GridMap,
    RewardClass,
    RewardClassSet,
    SignMode,
    Transition,
    load_map,
    reset,
    step,
)
from .explain import (
    ExplanationStructure,
    Lexicon,
    aggregated_explanation,
    lexicon_for,
    local_explanation,
    render,
    trajectory_class_mean,
)
from .faithfulness import (
    FaithfulnessReport,
    aggregate_action,
    agreement,
    build_report,
    cumulative_ip_curve,
    knn_probe,
    rmspe,
)
from .influence import (
    InfluenceConfig,
    InfluencePredictor,
    ReplayBuffer,
    cotrain,
    filter_reward,
    influence_update,
    influence_value,
)
from .learner import (
    LearnerConfig,
    MlpValues,
    TableValues,
    TransitionLog,
    ValueFunction,
    q_update,
    select_action,
    train,
)
from .persistence import (
    Checkpoint,
    ExperimentConfig,
    load_checkpoint,
    parse_config,
    save_checkpoint,
)
from .rollout import (
    Segment,
    Trajectory,
    make_segment,
    rollout_counterfactual,
    rollout_greedy,
)

__version__ = "0.1.0"

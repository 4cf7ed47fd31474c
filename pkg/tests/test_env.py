import numpy as np
import pytest

from maps import FIG3, SMALL6, two_classes

from rewardlens import env
from rewardlens.env import (
    Action,
    EnvState,
    MalformedLegend,
    MalformedMap,
    NoGoal,
    NoStart,
    RewardClass,
    RewardClassSet,
    SignMode,
    StartOutOfRange,
    SteppedWhenDone,
    UnknownClass,
)

MINIMAL = """GRID 5 5
#####
#S.b#
#...#
#..G#
#####

b object 1 1
"""


@pytest.fixture
def classes():
    return two_classes()


class TestLoadMap:
    def test_minimal_map(self, classes):
        grid = env.load_map(MINIMAL, classes)
        assert grid.width == 5 and grid.height == 5
        assert len(grid.objects) == 1
        assert grid.objects[0].class_id == 1
        assert grid.objects[0].terminal
        assert grid.start_positions == ((1, 1),)
        assert grid.goal_cells == frozenset({(3, 3)})

    def test_unbound_glyph_raises(self, classes):
        with pytest.raises(MalformedLegend):
            env.load_map(MINIMAL.replace("#...#", "#.z.#"), classes)

    def test_fig3_layout(self, classes):
        grid = env.load_map(FIG3, classes)
        dangers = [o for o in grid.objects if o.class_id == 1]
        neutral = [o for o in grid.objects if o.class_id == env.NEUTRAL_CLASS_ID]
        assert len(dangers) == 2
        assert len(neutral) == 1
        assert all(o.terminal for o in dangers)
        assert (7, 1) in grid.goal_cells

    def test_unknown_class_in_legend(self, classes):
        with pytest.raises(UnknownClass):
            env.load_map(MINIMAL.replace("b object 1 1", "b object 7 1"), classes)

    def test_goal_class_object_rejected(self, classes):
        with pytest.raises(MalformedLegend):
            env.load_map(MINIMAL.replace("b object 1 1", "b object 0 1"), classes)

    def test_no_goal(self, classes):
        with pytest.raises(NoGoal):
            env.load_map(MINIMAL.replace("#..G#", "#...#"), classes)

    def test_no_start(self, classes):
        with pytest.raises(NoStart):
            env.load_map(MINIMAL.replace("S", "."), classes)

    def test_too_small(self, classes):
        with pytest.raises(MalformedMap):
            env.load_map("GRID 2 2\n##\n##\n", classes)

    def test_bad_row_width(self, classes):
        with pytest.raises(MalformedMap):
            env.load_map(MINIMAL.replace("#...#", "#..#"), classes)

    def test_comments_are_skipped(self, classes):
        commented = "; a comment\n" + MINIMAL.replace(
            "b object 1 1", "; legend next\nb object 1 1"
        )
        grid = env.load_map(commented, classes)
        assert len(grid.objects) == 1

    def test_reserved_glyph_cannot_be_rebound(self, classes):
        with pytest.raises(MalformedLegend):
            env.load_map(MINIMAL + "G object 1 1\n", classes)

    def test_legendless_map(self):
        only_goal = RewardClassSet(
            [RewardClass(0, "goal", SignMode.POSITIVE, "goal", "arrive")]
        )
        grid = env.load_map("GRID 4 3\n####\n#SG#\n####\n", only_goal)
        assert grid.objects == ()


class TestApplyCellEdits:
    def test_replaces_glyphs(self, classes):
        edited = env.apply_cell_edits(MINIMAL, [(2, 2, "#")])
        grid = env.load_map(edited, classes)
        assert grid.is_wall(2, 2)

    def test_out_of_bounds(self):
        with pytest.raises(MalformedMap):
            env.apply_cell_edits(MINIMAL, [(9, 9, "#")])


class TestReset:
    def test_first_start_default(self, classes):
        grid = env.load_map(MINIMAL, classes)
        state = env.reset(grid, 0, 100)
        assert state.position == (1, 1)
        assert state.step_count == 0
        assert not state.done

    def test_out_of_range(self, classes):
        grid = env.load_map(MINIMAL, classes)
        with pytest.raises(StartOutOfRange):
            env.reset(grid, 7, 100)

    def test_default_budget_is_4wh(self, classes):
        grid = env.load_map(MINIMAL, classes)
        state = env.reset(grid)
        assert state.max_steps == 4 * grid.width * grid.height
        assert not state.done


class TestStep:
    def test_goal_reward_formula(self, classes):
        grid = env.load_map(MINIMAL, classes)
        state = EnvState(position=(3, 2), step_count=9, done=False, max_steps=100)
        t = env.step(state, Action.DOWN, grid, classes)
        assert t.terminal
        assert t.reward_by_class[0] == pytest.approx(0.9)
        assert t.reward_by_class[1] == 0.0
        assert t.next_state.done

    def test_danger_reward(self, classes):
        grid = env.load_map(MINIMAL, classes)
        state = EnvState(position=(2, 1), step_count=0, done=False, max_steps=100)
        t = env.step(state, Action.RIGHT, grid, classes)
        assert t.terminal
        assert t.reward_by_class == (0.0, -1.0)
        assert t.reward_total == -1.0

    def test_wall_is_noop_with_step_cost(self, classes):
        grid = env.load_map(MINIMAL, classes)
        state = env.reset(grid, 0, 100)
        t = env.step(state, Action.UP, grid, classes)
        assert t.next_state.position == state.position
        assert t.reward_total == 0.0
        assert t.next_state.step_count == 1
        assert not t.terminal

    def test_step_when_done(self, classes):
        grid = env.load_map(MINIMAL, classes)
        state = EnvState(position=(1, 1), step_count=5, done=True, max_steps=5)
        with pytest.raises(SteppedWhenDone):
            env.step(state, Action.DOWN, grid, classes)

    def test_budget_exhaustion_sets_done_without_reward(self, classes):
        grid = env.load_map(MINIMAL, classes)
        state = EnvState(position=(1, 1), step_count=4, done=False, max_steps=5)
        t = env.step(state, Action.DOWN, grid, classes)
        assert t.next_state.done
        assert not t.terminal
        assert t.reward_total == 0.0

    def test_neutral_object_is_walkable_and_silent(self, classes):
        grid = env.load_map(FIG3, classes)
        neutral = next(o for o in grid.objects if o.class_id == env.NEUTRAL_CLASS_ID)
        state = EnvState((neutral.x - 1, neutral.y), 0, False, 100)
        t = env.step(state, Action.RIGHT, grid, classes)
        assert t.next_state.position == (neutral.x, neutral.y)
        assert t.reward_total == 0.0
        assert not t.terminal


class TestInvariants:
    def test_determinism(self, classes):
        grid = env.load_map(SMALL6, classes)
        state = env.reset(grid, 0, 50)
        first = env.step(state, Action.DOWN, grid, classes)
        second = env.step(state, Action.DOWN, grid, classes)
        assert first == second

    def test_random_walk_invariants(self, classes):
        # Sparsity, reward routing, and step monotonicity over 10^4 steps.
        grid = env.load_map(FIG3, classes)
        rng = np.random.default_rng(5)
        state = env.reset(grid, 0, 10**6)
        for _ in range(10_000):
            action = Action(int(rng.integers(4)))
            t = env.step(state, action, grid, classes)
            nonzero = sum(1 for r in t.reward_by_class if r != 0.0)
            assert nonzero <= 1
            assert t.reward_total == pytest.approx(sum(t.reward_by_class))
            assert t.next_state.step_count == t.state.step_count + 1
            assert not grid.is_wall(*t.next_state.position)
            state = t.next_state if not t.next_state.done else env.reset(grid, 0, 10**6)

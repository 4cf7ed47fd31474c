"""Deterministic grid environment with multiple reward classes.

The world is a bounded grid of walls, floor, one or more goal cells, and
placed objects. Each object is bound to a reward class; entering a goal
cell or a harmful object emits a reward routed to exactly one class, so
every transition carries a sparse per-class reward vector alongside the
scalar total.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

# Reserved glyphs in map files.
WALL_GLYPH = "#"
FLOOR_GLYPH = "."
START_GLYPH = "S"
GOAL_GLYPH = "G"
RESERVED_GLYPHS = {WALL_GLYPH, FLOOR_GLYPH, START_GLYPH, GOAL_GLYPH}

# Objects bound to this pseudo-class are inert scenery: walkable, never
# rewarded, and excluded from the dense class-id range.
NEUTRAL_CLASS_ID = -1

# Step budget when the caller does not supply one: 4 * width * height.
DEFAULT_MAX_STEPS_FACTOR = 4


class GridError(Exception):
    """Base for map and environment errors."""


class MalformedMap(GridError):
    pass


class MalformedLegend(GridError):
    pass


class UnknownClass(GridError):
    pass


class NoGoal(GridError):
    pass


class NoStart(GridError):
    pass


class StartOutOfRange(GridError):
    pass


class SteppedWhenDone(GridError):
    pass


class Action(enum.IntEnum):
    """4-connected moves. Integer order is the argmax tie-break order."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3

    @classmethod
    def from_name(cls, name: str) -> "Action":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown action name: {name!r}") from None


ACTION_DELTAS = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
}

ACTION_NAMES = {a: a.name.lower() for a in Action}


class SignMode(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    MIXED = "mixed"


@dataclass(frozen=True)
class RewardClass:
    """One distinct source of reward in the environment."""

    class_id: int
    name: str
    sign_mode: SignMode
    display_name: str
    consequence: str


class RewardClassSet:
    """Dense, validated collection of reward classes.

    Ids run 0..n-1 and exactly one class is POSITIVE; that class is the
    one bound to goal cells. The reserved neutral id is accepted by
    membership checks but holds no entry.
    """

    def __init__(self, classes: Iterable[RewardClass]):
        ordered = sorted(classes, key=lambda c: c.class_id)
        if not ordered:
            raise ValueError("at least one reward class is required")
        ids = [c.class_id for c in ordered]
        if ids != list(range(len(ordered))):
            raise ValueError(f"class ids must be dense 0..n-1, got {ids}")
        names = [c.name for c in ordered]
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        positives = [c for c in ordered if c.sign_mode is SignMode.POSITIVE]
        if len(positives) != 1:
            raise ValueError("exactly one class must have positive sign mode")
        self._classes = tuple(ordered)
        self._goal = positives[0]

    @property
    def goal_class(self) -> RewardClass:
        return self._goal

    def by_id(self, class_id: int) -> RewardClass:
        if not 0 <= class_id < len(self._classes):
            raise UnknownClass(f"no reward class with id {class_id}")
        return self._classes[class_id]

    def has(self, class_id: int) -> bool:
        return class_id == NEUTRAL_CLASS_ID or 0 <= class_id < len(self._classes)

    def __len__(self) -> int:
        return len(self._classes)

    def __iter__(self) -> Iterator[RewardClass]:
        return iter(self._classes)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RewardClassSet) and self._classes == other._classes


@dataclass(frozen=True)
class PlacedObject:
    """One object instance on the grid; ids count placements, not glyphs."""

    object_id: int
    glyph: str
    class_id: int
    terminal: bool
    x: int
    y: int


@dataclass(frozen=True)
class GridMap:
    """Immutable parsed map. Out-of-bounds counts as wall."""

    width: int
    height: int
    rows: tuple[str, ...]
    objects: tuple[PlacedObject, ...]
    start_positions: tuple[tuple[int, int], ...]
    goal_cells: frozenset
    walls: frozenset
    legend_source: str
    source_text: str

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_wall(self, x: int, y: int) -> bool:
        return not self.in_bounds(x, y) or (x, y) in self.walls

    def is_goal(self, x: int, y: int) -> bool:
        return (x, y) in self.goal_cells

    def object_at(self, x: int, y: int) -> Optional[PlacedObject]:
        for obj in self.objects:
            if obj.x == x and obj.y == y:
                return obj
        return None

    def glyph_at(self, x: int, y: int) -> str:
        return self.rows[y][x]

    def open_cells(self) -> list[tuple[int, int]]:
        """All non-wall cells in row-major order."""
        return [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if not self.is_wall(x, y)
        ]


def _layout(text: str):
    """Split map text into header, body rows, and legend lines."""
    lines = text.splitlines()
    cursor = 0

    def skip_noise(allow_blank: bool):
        nonlocal cursor
        while cursor < len(lines):
            stripped = lines[cursor].strip()
            if stripped.startswith(";") or (allow_blank and not stripped):
                cursor += 1
            else:
                break

    skip_noise(allow_blank=True)
    if cursor >= len(lines):
        raise MalformedMap("empty map text")
    header = lines[cursor].split()
    if len(header) != 3 or header[0] != "GRID":
        raise MalformedMap(f"expected 'GRID W H' header, got {lines[cursor]!r}")
    try:
        width, height = int(header[1]), int(header[2])
    except ValueError:
        raise MalformedMap(f"non-integer grid size in header {lines[cursor]!r}") from None
    if width < 3 or height < 3:
        raise MalformedMap(f"grid must be at least 3x3, got {width}x{height}")
    cursor += 1

    body: list[tuple[int, str]] = []
    while len(body) < height:
        skip_noise(allow_blank=False)
        if cursor >= len(lines) or not lines[cursor].strip():
            raise MalformedMap(f"expected {height} body rows, found {len(body)}")
        row = lines[cursor]
        if len(row) != width:
            raise MalformedMap(f"row {len(body)} has width {len(row)}, expected {width}")
        body.append((cursor, row))
        cursor += 1

    # The legend section is optional; when present it is separated from the
    # body by a blank line.
    if cursor < len(lines) and lines[cursor].strip():
        raise MalformedMap("expected a blank line between body and legend")

    legend: list[tuple[int, str]] = []
    while cursor < len(lines):
        stripped = lines[cursor].strip()
        if stripped and not stripped.startswith(";"):
            legend.append((cursor, stripped))
        cursor += 1
    return width, height, body, legend, lines


def load_map(text: str, classes: RewardClassSet) -> GridMap:
    """Parse and validate a map file, binding object glyphs to reward classes."""
    width, height, body, legend, _ = _layout(text)

    kinds = {"wall": WALL_GLYPH, "floor": FLOOR_GLYPH, "goal": GOAL_GLYPH}
    glyph_defs: dict[str, tuple[str, int, bool]] = {}  # glyph -> (kind, class_id, terminal)
    for _, line in legend:
        parts = line.split()
        if len(parts) < 2 or len(parts[0]) != 1:
            raise MalformedLegend(f"bad legend line: {line!r}")
        glyph, kind = parts[0], parts[1].lower()
        if glyph in RESERVED_GLYPHS:
            raise MalformedLegend(f"glyph {glyph!r} is reserved and cannot be redefined")
        if glyph in glyph_defs:
            raise MalformedLegend(f"glyph {glyph!r} bound twice in legend")
        if kind in kinds:
            glyph_defs[glyph] = (kind, NEUTRAL_CLASS_ID, False)
        elif kind == "object":
            if len(parts) < 3:
                raise MalformedLegend(f"object glyph {glyph!r} needs a class id")
            try:
                class_id = int(parts[2])
            except ValueError:
                raise MalformedLegend(f"non-integer class id in legend line {line!r}") from None
            if not classes.has(class_id):
                raise UnknownClass(f"legend binds {glyph!r} to unknown class {class_id}")
            if class_id != NEUTRAL_CLASS_ID and classes.by_id(class_id).sign_mode is SignMode.POSITIVE:
                raise MalformedLegend(
                    f"glyph {glyph!r} bound to the goal class; positive reward is carried by goal cells"
                )
            terminal = False
            if len(parts) >= 4:
                if parts[3] not in ("0", "1"):
                    raise MalformedLegend(f"terminal flag must be 0 or 1 in {line!r}")
                terminal = parts[3] == "1"
            glyph_defs[glyph] = ("object", class_id, terminal)
        else:
            raise MalformedLegend(f"unknown cell kind {parts[1]!r} in legend line {line!r}")

    walls = set()
    goal_cells = set()
    starts = []
    objects: list[PlacedObject] = []
    for y, (_, row) in enumerate(body):
        for x, glyph in enumerate(row):
            if glyph == WALL_GLYPH:
                walls.add((x, y))
            elif glyph == FLOOR_GLYPH:
                pass
            elif glyph == START_GLYPH:
                starts.append((x, y))
            elif glyph == GOAL_GLYPH:
                goal_cells.add((x, y))
            elif glyph in glyph_defs:
                kind, class_id, terminal = glyph_defs[glyph]
                if kind == "wall":
                    walls.add((x, y))
                elif kind == "goal":
                    goal_cells.add((x, y))
                elif kind == "object":
                    objects.append(
                        PlacedObject(len(objects), glyph, class_id, terminal, x, y)
                    )
            else:
                raise MalformedLegend(f"glyph {glyph!r} at ({x},{y}) has no legend binding")

    if not goal_cells:
        raise NoGoal("map has no goal cell")
    if not starts:
        raise NoStart("map has no start cell")

    legend_text = "\n".join(line for _, line in legend)
    return GridMap(
        width=width,
        height=height,
        rows=tuple(row for _, row in body),
        objects=tuple(objects),
        start_positions=tuple(starts),
        goal_cells=frozenset(goal_cells),
        walls=frozenset(walls),
        legend_source=legend_text,
        source_text=text,
    )


def apply_cell_edits(text: str, edits: Iterable[tuple[int, int, str]]) -> str:
    """Return map text with body glyphs replaced at the given coordinates.

    Pure text transform; the result still has to pass load_map.
    """
    width, height, body, _, lines = _layout(text)
    new_lines = list(lines)
    row_line_index = {y: idx for y, (idx, _) in enumerate(body)}
    for x, y, glyph in edits:
        if len(glyph) != 1:
            raise MalformedMap(f"cell glyph must be a single character, got {glyph!r}")
        if not (0 <= x < width and 0 <= y < height):
            raise MalformedMap(f"edit at ({x},{y}) is outside the {width}x{height} grid")
        idx = row_line_index[y]
        row = new_lines[idx]
        new_lines[idx] = row[:x] + glyph + row[x + 1 :]
    return "\n".join(new_lines) + ("\n" if text.endswith("\n") else "")


@dataclass(frozen=True)
class EnvState:
    """Agent-visible state: position plus episode bookkeeping."""

    position: tuple[int, int]
    step_count: int
    done: bool
    max_steps: int


@dataclass(frozen=True)
class Transition:
    state: EnvState
    action: Action
    next_state: EnvState
    reward_total: float
    reward_by_class: tuple[float, ...]
    terminal: bool


def default_max_steps(grid: GridMap) -> int:
    return DEFAULT_MAX_STEPS_FACTOR * grid.width * grid.height


def reset(
    grid: GridMap,
    start_index: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> EnvState:
    """Fresh episode state at the chosen start (first start when omitted)."""
    if start_index is None:
        start_index = 0
    if not 0 <= start_index < len(grid.start_positions):
        raise StartOutOfRange(
            f"start index {start_index} out of range; map has {len(grid.start_positions)} starts"
        )
    budget = default_max_steps(grid) if max_steps is None else max_steps
    if budget < 1:
        raise ValueError("max_steps must be positive")
    return EnvState(grid.start_positions[start_index], 0, False, budget)


def step(state: EnvState, action: Action, grid: GridMap, classes: RewardClassSet) -> Transition:
    """One deterministic environment step.

    Moving into a wall is a no-op that still consumes a step. Entering a
    goal cell pays (1 - steps/budget) to the goal class and terminates;
    entering a harmful object pays -1 to its class and terminates when the
    object is terminal. Exhausting the budget ends the episode rewardless.
    """
    if state.done:
        raise SteppedWhenDone("cannot step a finished episode")

    x, y = state.position
    dx, dy = ACTION_DELTAS[action]
    tx, ty = x + dx, y + dy
    moved = not grid.is_wall(tx, ty)
    next_pos = (tx, ty) if moved else (x, y)

    count = state.step_count + 1
    rewards = [0.0] * len(classes)
    terminal = False
    if moved:
        if grid.is_goal(tx, ty):
            rewards[classes.goal_class.class_id] = 1.0 - count / state.max_steps
            terminal = True
        else:
            obj = grid.object_at(tx, ty)
            if obj is not None:
                if obj.class_id != NEUTRAL_CLASS_ID:
                    rewards[obj.class_id] = -1.0
                terminal = obj.terminal

    done = terminal or count >= state.max_steps
    next_state = EnvState(next_pos, count, done, state.max_steps)
    return Transition(
        state=state,
        action=action,
        next_state=next_state,
        reward_total=sum(rewards),
        reward_by_class=tuple(rewards),
        terminal=terminal,
    )

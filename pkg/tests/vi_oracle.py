"""Independent value-iteration oracle used to cross-check learned tables.

Everything here is re-derived from the raw map text: movement rules,
reward routing, and terminal handling are implemented from scratch so the
oracle never shares code with the package under test. Rewards are taken
in the large-step-budget limit, so entering a goal pays exactly 1.
"""

from __future__ import annotations

import numpy as np

DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0))  # up, down, left, right
N_ACTIONS = 4
GOAL_CLASS = 0


class OracleModel:
    def __init__(self, map_text: str, goal_reward: float = 1.0):
        lines = [l for l in map_text.splitlines() if not l.strip().startswith(";")]
        while lines and not lines[0].strip():
            lines.pop(0)
        header = lines[0].split()
        self.width, self.height = int(header[1]), int(header[2])
        self.rows = lines[1 : 1 + self.height]
        self.goal_reward = goal_reward
        self.legend: dict[str, tuple[int, bool]] = {}
        for line in lines[1 + self.height :]:
            parts = line.split()
            if len(parts) >= 3 and parts[1] == "object":
                terminal = len(parts) > 3 and parts[3] == "1"
                self.legend[parts[0]] = (int(parts[2]), terminal)
        self.cells = [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if not self.is_wall(x, y)
        ]
        self.n_classes = 1 + max(
            (cid for cid, _ in self.legend.values() if cid >= 0), default=0
        )

    def is_wall(self, x: int, y: int) -> bool:
        if not (0 <= x < self.width and 0 <= y < self.height):
            return True
        return self.rows[y][x] == "#"

    def is_terminal_cell(self, x: int, y: int) -> bool:
        glyph = self.rows[y][x]
        if glyph == "G":
            return True
        if glyph in self.legend:
            return self.legend[glyph][1]
        return False

    def transition(self, x: int, y: int, action: int):
        """-> (next_cell, class_id or None, reward, terminal)."""
        dx, dy = DELTAS[action]
        tx, ty = x + dx, y + dy
        if self.is_wall(tx, ty):
            return (x, y), None, 0.0, False
        glyph = self.rows[ty][tx]
        if glyph == "G":
            return (tx, ty), GOAL_CLASS, self.goal_reward, True
        if glyph in self.legend:
            cid, terminal = self.legend[glyph]
            if cid >= 0:
                return (tx, ty), cid, -1.0, terminal
            return (tx, ty), None, 0.0, terminal
        return (tx, ty), None, 0.0, False

    def _iterate(self, reward_fn, gamma: float, sweeps: int = 5000, tol: float = 1e-13):
        q = {(c, a): 0.0 for c in self.cells for a in range(N_ACTIONS)}
        for _ in range(sweeps):
            delta = 0.0
            for c in self.cells:
                for a in range(N_ACTIONS):
                    nxt, cid, r, terminal = self.transition(*c, a)
                    bootstrap = (
                        0.0 if terminal else max(q[(nxt, b)] for b in range(N_ACTIONS))
                    )
                    value = reward_fn(cid, r) + gamma * bootstrap
                    delta = max(delta, abs(value - q[(c, a)]))
                    q[(c, a)] = value
            if delta < tol:
                break
        return q

    def q_total(self, gamma: float):
        """Optimal action values on the full signed reward."""
        return self._iterate(lambda cid, r: r, gamma)

    def u_class(self, class_id: int, gamma: float, signed: bool = False):
        """Optimal action values on one class's reward magnitude (or signed)."""

        def reward(cid, r):
            if cid != class_id:
                return 0.0
            return r if signed else abs(r)

        return self._iterate(reward, gamma)

    def greedy_actions(self, q, cell, atol: float = 1e-9) -> list[int]:
        row = [q[(cell, a)] for a in range(N_ACTIONS)]
        top = max(row)
        return [a for a in range(N_ACTIONS) if abs(row[a] - top) <= atol]

    def reachable_from_starts(self) -> set:
        starts = [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if self.rows[y][x] == "S"
        ]
        seen = set(starts)
        frontier = list(starts)
        while frontier:
            x, y = frontier.pop()
            if self.is_terminal_cell(x, y):
                continue  # episodes end here; nothing beyond is visited
            for dx, dy in DELTAS:
                nxt = (x + dx, y + dy)
                if not self.is_wall(*nxt) and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def source_cells(self) -> list:
        """Cells that can appear as update sources: reachable, non-terminal."""
        return [
            c for c in self.reachable_from_starts() if not self.is_terminal_cell(*c)
        ]


def max_norm_vs_table(model: OracleModel, q_oracle, table_values) -> float:
    """Largest |oracle - learned| over source cells and all actions."""
    worst = 0.0
    for c in model.source_cells():
        learned = np.asarray(table_values.values(c), dtype=float)
        for a in range(N_ACTIONS):
            worst = max(worst, abs(q_oracle[(c, a)] - float(learned[a])))
    return worst

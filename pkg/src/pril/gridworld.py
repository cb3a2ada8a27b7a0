"""FrozenLake-style tile maps and the dense tabular MDPs built from them.

Map text is a block of equal-length rows over ``S F H A G Y``:

    S  safe            F  frozen          H  hole
    A  high reward     G  goal            Y  start (a safe tile)

States are numbered row-major from the top-left cell.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from pril.errors import (
    BadChar,
    MapFormatError,
    MissingGoal,
    MissingStart,
    MultipleGoals,
    MultipleStarts,
    RaggedRows,
)

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTION_NAMES = ("up", "down", "left", "right")
N_ACTIONS = 4

_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
_PERPENDICULAR = {UP: (LEFT, RIGHT), DOWN: (LEFT, RIGHT), LEFT: (UP, DOWN), RIGHT: (UP, DOWN)}


class TileKind(enum.Enum):
    SAFE = "S"
    FROZEN = "F"
    HOLE = "H"
    HIGH_REWARD = "A"
    GOAL = "G"


START_CHAR = "Y"
_CHAR_TO_TILE = {t.value: t for t in TileKind}


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    tiles: tuple[TileKind, ...]
    start_index: int

    def __post_init__(self):
        object.__setattr__(self, "tiles", tuple(self.tiles))
        if self.width < 1 or self.height < 1:
            raise MapFormatError("map dimensions must be positive")
        if self.width * self.height != len(self.tiles):
            raise MapFormatError(
                f"{self.width}x{self.height} map needs {self.width * self.height} tiles, got {len(self.tiles)}"
            )
        goals = sum(t is TileKind.GOAL for t in self.tiles)
        if goals == 0:
            raise MissingGoal("map has no goal tile")
        if goals > 1:
            raise MultipleGoals(f"map has {goals} goal tiles")
        if not 0 <= self.start_index < len(self.tiles):
            raise MissingStart("start index outside the grid")
        if self.tiles[self.start_index] is not TileKind.SAFE:
            raise MapFormatError("start cell must be a safe tile")

    @property
    def n_states(self) -> int:
        return len(self.tiles)

    @property
    def goal_index(self) -> int:
        return self.tiles.index(TileKind.GOAL)

    @property
    def grid_size(self) -> str:
        return f"{self.height}x{self.width}"

    def coords(self, state: int) -> tuple[int, int]:
        return divmod(state, self.width)


def parse_map(text: str) -> GridMap:
    """Parse map text into a :class:`GridMap`.

    Errors name 1-based row/column positions, e.g. ``"YG\\nSQ"`` raises
    :class:`BadChar` at row 2, col 2.
    """
    rows = text.replace("\r\n", "\n").rstrip("\n").split("\n")
    if rows == [""]:
        raise MapFormatError("empty map")
    width = len(rows[0])
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise RaggedRows(f"row {r} has length {len(row)}, expected {width}")

    tiles, starts = [], []
    for r, row in enumerate(rows, start=1):
        for c, ch in enumerate(row, start=1):
            if ch == START_CHAR:
                starts.append(len(tiles))
                tiles.append(TileKind.SAFE)
            elif ch in _CHAR_TO_TILE:
                tiles.append(_CHAR_TO_TILE[ch])
            else:
                raise BadChar(ch, r, c)

    goals = tiles.count(TileKind.GOAL)
    if goals == 0:
        raise MissingGoal("map has no goal tile")
    if goals > 1:
        raise MultipleGoals(f"map has {goals} goal tiles")
    if not starts:
        raise MissingStart("map has no start cell 'Y'")
    if len(starts) > 1:
        raise MultipleStarts(f"map has {len(starts)} start cells")
    return GridMap(width=width, height=len(rows), tiles=tuple(tiles), start_index=starts[0])


def serialize_map(grid: GridMap) -> str:
    chars = [START_CHAR if i == grid.start_index else t.value for i, t in enumerate(grid.tiles)]
    rows = ("".join(chars[r * grid.width:(r + 1) * grid.width]) for r in range(grid.height))
    return "\n".join(rows) + "\n"


def load_map(path) -> GridMap:
    with open(path, encoding="utf-8") as fh:
        return parse_map(fh.read())


def bundled_map_ids(size: str | None = None) -> list[str]:
    """Ids of the shipped maps (``"5x5_01"`` ...), optionally for one grid size."""
    names = sorted(
        p.name[:-4] for p in resources.files("pril.maps").iterdir() if p.name.endswith(".txt")
    )
    if size is not None:
        names = [n for n in names if n.startswith(size + "_")]
    return names


def bundled_map(map_id: str) -> GridMap:
    return parse_map(resources.files("pril.maps").joinpath(map_id + ".txt").read_text("utf-8"))


@dataclass(frozen=True)
class RewardTable:
    """Per-tile rewards. The defaults carry both signs so sign-change counts are meaningful."""

    goal: float = 1.0
    high_reward: float = 0.5
    safe: float = 0.0
    frozen: float = -0.1
    hole: float = -1.0

    def __post_init__(self):
        for name in ("goal", "high_reward", "safe", "frozen", "hole"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"reward for {name} must be finite")

    def value(self, kind: TileKind) -> float:
        return {
            TileKind.GOAL: self.goal,
            TileKind.HIGH_REWARD: self.high_reward,
            TileKind.SAFE: self.safe,
            TileKind.FROZEN: self.frozen,
            TileKind.HOLE: self.hole,
        }[kind]


def _frozen_array(a) -> np.ndarray:
    a = np.array(a, dtype=a.dtype if isinstance(a, np.ndarray) else None)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TabularMDP:
    """Dense MDP: ``P[s, a, s']``, state reward ``R[s]``, discount, start distribution.

    ``terminal`` marks absorbing states whose value is pinned to their reward.
    """

    P: np.ndarray
    R: np.ndarray
    gamma: float
    start_dist: np.ndarray
    terminal: np.ndarray = field(default=None)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        R = np.asarray(self.R, dtype=np.float64)
        start = np.asarray(self.start_dist, dtype=np.float64)
        n = P.shape[0]
        terminal = np.zeros(n, dtype=bool) if self.terminal is None else np.asarray(self.terminal, dtype=bool)
        if P.ndim != 3 or P.shape[2] != n:
            raise ValueError(f"P must have shape (S, A, S), got {P.shape}")
        if R.shape != (n,) or start.shape != (n,) or terminal.shape != (n,):
            raise ValueError("R, start_dist and terminal must have one entry per state")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("every P[s, a, :] must be a probability vector")
        if np.any(start < 0) or abs(start.sum() - 1.0) > 1e-12:
            raise ValueError("start_dist must be a probability vector")
        if not np.all(np.isfinite(R)):
            raise ValueError("rewards must be finite")
        object.__setattr__(self, "P", _frozen_array(P))
        object.__setattr__(self, "R", _frozen_array(R))
        object.__setattr__(self, "start_dist", _frozen_array(start))
        object.__setattr__(self, "terminal", _frozen_array(terminal))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]

    def with_rewards(self, R) -> "TabularMDP":
        return TabularMDP(self.P, R, self.gamma, self.start_dist, self.terminal)

    @cached_property
    def successors(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded sparse view ``(idx[s, a, k], prob[s, a, k])`` of the nonzero entries of ``P``.

        Entries are listed in ascending next-state order; padding uses
        probability 0 and points back at ``s``.
        """
        S, A, _ = self.P.shape
        nnz = (self.P > 0).sum(axis=2)
        K = max(int(nnz.max()), 1)
        idx = np.empty((S, A, K), dtype=np.int64)
        prob = np.zeros((S, A, K), dtype=np.float64)
        for s in range(S):
            for a in range(A):
                nz = np.flatnonzero(self.P[s, a])
                idx[s, a, :] = s
                idx[s, a, :len(nz)] = nz
                prob[s, a, :len(nz)] = self.P[s, a, nz]
        return idx, prob

    @cached_property
    def indistinct_states(self) -> np.ndarray:
        """Mask of states where every action has the same transition row."""
        return np.all(self.P == self.P[:, :1, :], axis=(1, 2))


def build_mdp(grid: GridMap, wind: float = 0.0001, rewards: RewardTable | None = None,
              gamma: float = 0.99) -> TabularMDP:
    """Slippery grid dynamics.

    The intended move gets ``1 - wind`` and each perpendicular move ``wind / 2``;
    moves off the grid leave the agent in place. Holes send the agent back to
    the start, the goal is absorbing.
    """
    if not 0.0 <= wind < 1.0:
        raise ValueError(f"wind must lie in [0, 1), got {wind}")
    rewards = rewards or RewardTable()
    n = grid.n_states
    P = np.zeros((n, N_ACTIONS, n))

    def target(s, a):
        r, c = grid.coords(s)
        dr, dc = _MOVES[a]
        r2, c2 = r + dr, c + dc
        if 0 <= r2 < grid.height and 0 <= c2 < grid.width:
            return r2 * grid.width + c2
        return s

    for s, tile in enumerate(grid.tiles):
        for a in range(N_ACTIONS):
            if tile is TileKind.GOAL:
                P[s, a, s] = 1.0
            elif tile is TileKind.HOLE:
                P[s, a, grid.start_index] = 1.0
            else:
                P[s, a, target(s, a)] += 1.0 - wind
                for side in _PERPENDICULAR[a]:
                    P[s, a, target(s, side)] += wind / 2.0

    R = np.array([rewards.value(t) for t in grid.tiles])
    start = np.zeros(n)
    start[grid.start_index] = 1.0
    terminal = np.array([t is TileKind.GOAL for t in grid.tiles])
    return TabularMDP(P=P, R=R, gamma=gamma, start_dist=start, terminal=terminal)


def neighboring_reward(R, rng: np.random.Generator, direction=None, scale=None) -> np.ndarray:
    """Sample a reward vector adjacent to ``R`` (L2 distance at most 1).

    A random unit direction is scaled by ``u ~ Uniform(0, 1]``; either piece can
    be pinned for deterministic checks.
    """
    R = np.asarray(R, dtype=np.float64)
    if direction is None:
        direction = rng.standard_normal(R.shape)
    direction = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(direction)
    if norm == 0:
        return R.copy()
    if scale is None:
        scale = 1.0 - rng.random()
    step = direction * (scale / norm)
    out = R + step
    # rounding can push the realized distance a few ulps past the bound
    while np.linalg.norm(out - R) > scale:
        step *= 1.0 - 1e-15
        out = R + step
    return out

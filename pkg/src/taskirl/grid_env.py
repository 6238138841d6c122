"""Object-grid navigation environment.

A grid is a rectangle of object kinds. The agent occupies one cell and moves
one step up/down/left/right per action; moves off the edge leave it in place.
Cells whose full 3x3 neighborhood is dominated by one landmark kind (more
than six of the nine cells) are labeled with a region type, and a label is
emitted every time the agent enters such a cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

# Object kinds, in file-code order.
BUILDING, GRASS, TREE, STONE, BARREL, TILE = range(6)
NUM_KINDS = 6
KIND_CODES = "BGTSLF"
KIND_NAMES = ("building", "grass", "tree", "stone", "barrel", "tile")

# Region type index -> defining object kind.
REGION_KINDS = (BUILDING, TREE, BARREL, STONE)
NUM_REGION_TYPES = 4
REGION_NAMES = ("buildings", "trees", "barrels", "stones")

UP, DOWN, LEFT, RIGHT = range(4)
ACTIONS = (UP, DOWN, LEFT, RIGHT)
ACTION_CODES = "UDLR"
# (dx, dy) per action; y grows downward (file row order).
MOVES = ((0, -1), (0, 1), (-1, 0), (1, 0))

Cell = tuple[int, int]


class GridError(ValueError):
    """Malformed grid data or out-of-contract argument."""


class PlacementError(RuntimeError):
    """Random generation could not place the requested regions."""


@dataclass
class GridMap:
    """A rectangular object grid.

    cells is indexed [y][x]. start is the designated initial cell, or None;
    uniform_start switches the initial distribution to uniform over unlabeled
    cells. slip is the probability that an action is replaced by a uniformly
    random direction.
    """

    cells: np.ndarray
    start: Optional[Cell] = None
    slip: float = 0.0
    uniform_start: bool = False
    _labels: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int8)
        if self.cells.ndim != 2:
            raise GridError("cells must be a 2-d array")
        h, w = self.cells.shape
        if w < 3 or h < 3:
            raise GridError(f"grid must be at least 3x3, got {w}x{h}")
        if self.cells.min() < 0 or self.cells.max() >= NUM_KINDS:
            raise GridError("unknown object kind in cells")
        if not 0.0 <= self.slip <= 1.0:
            raise GridError(f"slip must be in [0, 1], got {self.slip}")
        if self.start is not None:
            if not self.in_bounds(self.start):
                raise GridError(f"start {self.start} out of bounds")
            self.start = (int(self.start[0]), int(self.start[1]))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def kind_at(self, cell: Cell) -> int:
        return int(self.cells[cell[1], cell[0]])

    def label_table(self) -> np.ndarray:
        """(H, W) int8 table of region types, -1 where unlabeled."""
        if self._labels is None:
            h, w = self.cells.shape
            table = np.full((h, w), -1, dtype=np.int8)
            for y in range(1, h - 1):
                for x in range(1, w - 1):
                    block = self.cells[y - 1 : y + 2, x - 1 : x + 2]
                    for region, kind in enumerate(REGION_KINDS):
                        if int((block == kind).sum()) > 6:
                            table[y, x] = region
                            break
            self._labels = table
        return self._labels


def region_label(grid: GridMap, cell: Cell) -> Optional[int]:
    """Region type of a cell, or None.

    A cell is labeled iff its full 3x3 neighborhood lies inside the grid and
    more than six of the nine cells are one landmark kind. Counts above six
    for two kinds cannot coexist, so the type is unique.
    """
    if not grid.in_bounds(cell):
        raise GridError(f"cell {cell} out of bounds")
    lab = int(grid.label_table()[cell[1], cell[0]])
    return None if lab < 0 else lab


def move_result(grid: GridMap, cell: Cell, action: int) -> Cell:
    """Destination of a deterministic move; off-grid moves stay put."""
    dx, dy = MOVES[action]
    nx, ny = cell[0] + dx, cell[1] + dy
    if 0 <= nx < grid.width and 0 <= ny < grid.height:
        return (nx, ny)
    return cell


def step_distribution(grid: GridMap, cell: Cell, action: int) -> dict[Cell, float]:
    """Next-cell distribution for one action.

    The chosen direction is applied with probability 1 - slip; with
    probability slip a uniformly random direction is applied instead.
    Probabilities of moves that clamp to the same destination accumulate.
    """
    if action not in ACTIONS:
        raise GridError(f"unknown action {action}")
    dist: dict[Cell, float] = {}
    base = grid.slip / len(ACTIONS)
    for a in ACTIONS:
        p = base + (1.0 - grid.slip if a == action else 0.0)
        if p == 0.0:
            continue
        dest = move_result(grid, cell, a)
        dist[dest] = dist.get(dest, 0.0) + p
    return dist


def emitted_labels(grid: GridMap, cells: Iterable[Cell]) -> tuple[int, ...]:
    """Label word emitted along a cell sequence.

    A label is emitted on every entry into a labeled cell, including the
    initial cell. A step that stays in place (edge clamp) is not an entry.
    """
    word: list[int] = []
    prev = None
    for cell in cells:
        if prev is None or cell != prev:
            lab = region_label(grid, cell)
            if lab is not None:
                word.append(lab)
        prev = cell
    return tuple(word)


def initial_distribution(grid: GridMap) -> list[tuple[Cell, float]]:
    """Support of the initial-state distribution with probabilities."""
    if grid.uniform_start:
        table = grid.label_table()
        cells = [
            (x, y)
            for y in range(grid.height)
            for x in range(grid.width)
            if table[y, x] < 0
        ]
        if not cells:
            raise GridError("no unlabeled cell for uniform start")
        p = 1.0 / len(cells)
        return [(c, p) for c in cells]
    if grid.start is None:
        raise GridError("grid has no start cell")
    return [(grid.start, 1.0)]


def generate_random_env(
    width: int,
    height: int,
    regions_per_type: int,
    seed: int,
    slip: float = 0.0,
    max_tries: int = 2000,
) -> GridMap:
    """Random environment with pure 3x3 landmark blocks on grass/tile filler.

    Blocks are pairwise separated by at least one filler cell so only block
    centers are labeled. Deterministic for a given seed. Raises
    PlacementError when the blocks cannot be placed within the retry budget.
    """
    if regions_per_type < 0:
        raise GridError("regions_per_type must be >= 0")
    rng = np.random.default_rng(seed)
    n_blocks = regions_per_type * NUM_REGION_TYPES
    for _ in range(20):
        corners: list[Cell] = []
        tries = 0
        while len(corners) < n_blocks and tries < max_tries:
            tries += 1
            bx = int(rng.integers(0, width - 2))
            by = int(rng.integers(0, height - 2))
            # Chebyshev gap >= 4 between corners keeps one filler cell
            # between footprints, so no 3x3 window mixes two blocks.
            if all(max(abs(bx - cx), abs(by - cy)) >= 4 for cx, cy in corners):
                corners.append((bx, by))
        if len(corners) == n_blocks:
            break
    else:
        raise PlacementError(
            f"could not place {n_blocks} blocks on a {width}x{height} grid"
        )
    cells = rng.choice([GRASS, TILE], size=(height, width)).astype(np.int8)
    for i, (bx, by) in enumerate(corners):
        kind = REGION_KINDS[i % NUM_REGION_TYPES]
        cells[by : by + 3, bx : bx + 3] = kind
    filler = np.ones((height, width), dtype=bool)
    for bx, by in corners:
        filler[by : by + 3, bx : bx + 3] = False
    free = np.argwhere(filler)
    if len(free) == 0:
        raise PlacementError("no filler cell left for the start")
    sy, sx = free[int(rng.integers(0, len(free)))]
    return GridMap(cells=cells, start=(int(sx), int(sy)), slip=slip)


def save_env(grid: GridMap, path: str) -> None:
    """Write the text format: 'W H startX startY' then H rows of codes."""
    sx, sy = grid.start if grid.start is not None else (-1, -1)
    lines = [f"{grid.width} {grid.height} {sx} {sy}"]
    for y in range(grid.height):
        lines.append("".join(KIND_CODES[k] for k in grid.cells[y]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_env(path: str, slip: float = 0.0) -> GridMap:
    with open(path) as fh:
        raw = [line.rstrip("\n") for line in fh]
    lines = [l for l in raw if l.strip()]
    if not lines:
        raise GridError(f"{path}: empty environment file")
    head = lines[0].split()
    if len(head) != 4:
        raise GridError(f"{path}: header must be 'W H startX startY'")
    try:
        w, h, sx, sy = (int(v) for v in head)
    except ValueError as exc:
        raise GridError(f"{path}: non-integer header field") from exc
    if len(lines) != h + 1:
        raise GridError(f"{path}: expected {h} rows, found {len(lines) - 1}")
    cells = np.zeros((h, w), dtype=np.int8)
    for y, row in enumerate(lines[1:]):
        if len(row) != w:
            raise GridError(f"{path}: row {y} has length {len(row)}, expected {w}")
        for x, code in enumerate(row):
            kind = KIND_CODES.find(code)
            if kind < 0:
                raise GridError(f"{path}: unknown object code {code!r} at row {y}")
            cells[y, x] = kind
    start = None if (sx, sy) == (-1, -1) else (sx, sy)
    return GridMap(cells=cells, start=start, slip=slip)

"""Task oracle: ground-truth evaluation, execution planning, demonstrations.

Membership questions about label words are answered by trying to execute
the word in the environment: a word holds only if some trajectory from the
start emits exactly that word within the horizon, and the ground-truth
automaton accepts it. Positive words are demonstrated with shortest-path
realizations, diversified by random tie-breaking.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from . import automata, grid_env
from .automata import Dfa, StateError, Word
from .grid_env import ACTIONS, ACTION_CODES, Cell, GridMap

FIXTURE_TASKS = ("task1", "task2", "task3")


@dataclass(frozen=True)
class TaskSpec:
    """Ground-truth task: a total automaton plus an execution horizon.

    h_max bounds the number of actions a single execution may take; when
    None, a per-word default of (4 + 2 * |word|) * (W + H) is used so that
    infeasibility reflects the environment topology rather than a starved
    horizon.
    """

    dfa: Dfa
    name: str = "task"
    h_max: Optional[int] = None

    def __post_init__(self):
        if self.h_max is not None and self.h_max < 1:
            raise ValueError("h_max must be >= 1")

    def horizon(self, grid: GridMap, word: Word) -> int:
        if self.h_max is not None:
            return self.h_max
        return (4 + 2 * len(word)) * (grid.width + grid.height)


def load_fixture_task(name: str) -> TaskSpec:
    """Built-in task automaton by name (task1, task2, task3)."""
    if name not in FIXTURE_TASKS:
        raise ValueError(f"unknown fixture task {name!r}")
    ref = resources.files("taskirl.tasks").joinpath(f"{name}.dfa")
    with resources.as_file(ref) as path:
        dfa = automata.load_dfa(str(path))
    return TaskSpec(dfa=dfa, name=name)


@dataclass(frozen=True)
class Demonstration:
    """One grid trajectory: n+1 cells, n actions, and its emitted word."""

    cells: tuple[Cell, ...]
    actions: tuple[int, ...]
    word: Word
    provenance: str = ""

    def __post_init__(self):
        if len(self.cells) != len(self.actions) + 1:
            raise ValueError("need exactly one more cell than actions")

    def replay(self, grid: GridMap) -> None:
        """Check the trajectory against deterministic moves and emissions."""
        for i, a in enumerate(self.actions):
            if grid_env.move_result(grid, self.cells[i], a) != self.cells[i + 1]:
                raise StateError(f"step {i} does not follow the grid dynamics")
        if grid_env.emitted_labels(grid, self.cells) != self.word:
            raise StateError("emitted word does not match the recorded word")


def task_eval(task: TaskSpec, word: Word) -> bool:
    """Ground-truth answer: does the automaton accept the word."""
    return task.dfa.accepts(word)


def plan_execution(
    grid: GridMap,
    start: Cell,
    word: Word,
    h_max: int,
    rng: Optional[np.random.Generator] = None,
) -> Optional[Demonstration]:
    """Shortest trajectory from start emitting exactly word, or None.

    Search runs over (cell, progress) pairs: entering the next cell of the
    word advances progress, entering any other labeled cell is forbidden,
    and unlabeled cells are free. With an rng, ties between equal-length
    paths are broken at random; otherwise the scan order (U, D, L, R) makes
    the result canonical.
    """
    if not grid.in_bounds(start):
        raise StateError(f"start {start} out of bounds")
    labels = grid.label_table()
    w, h = grid.width, grid.height
    n_layers = len(word) + 1

    lab0 = int(labels[start[1], start[0]])
    if lab0 < 0:
        layer0 = 0
    elif word and lab0 == word[0]:
        layer0 = 1
    else:
        return None

    dist = np.full((n_layers, h, w), -1, dtype=np.int32)
    dist[layer0, start[1], start[0]] = 0
    frontier = [(start[0], start[1], layer0)]
    depth = 0
    while frontier and depth < h_max:
        if dist[len(word)].max() >= 0:
            break
        nxt: list[tuple[int, int, int]] = []
        for x, y, l in frontier:
            for a in ACTIONS:
                dx, dy = grid_env.MOVES[a]
                nx, ny = x + dx, y + dy
                if not (0 <= nx < w and 0 <= ny < h):
                    continue
                lab = int(labels[ny, nx])
                if lab < 0:
                    nl = l
                elif l < len(word) and lab == word[l]:
                    nl = l + 1
                else:
                    continue
                if dist[nl, ny, nx] < 0:
                    dist[nl, ny, nx] = depth + 1
                    nxt.append((nx, ny, nl))
        frontier = nxt
        depth += 1

    goal_layer = dist[len(word)]
    if goal_layer.max() < 0:
        return None
    best = int(goal_layer[goal_layer >= 0].min())
    goals = [
        (int(x), int(y)) for y, x in np.argwhere(goal_layer == best)
    ]
    if rng is not None and len(goals) > 1:
        goal = goals[int(rng.integers(0, len(goals)))]
    else:
        goal = goals[0]

    # Walk backward through the layered distances, sampling predecessors.
    cells = [goal]
    actions: list[int] = []
    x, y = goal
    l = len(word)
    d = best
    while d > 0:
        cands: list[tuple[int, int, int, int]] = []
        for a in ACTIONS:
            dx, dy = grid_env.MOVES[a]
            px, py = x - dx, y - dy
            if not (0 <= px < w and 0 <= py < h):
                continue
            lab = int(labels[y, x])
            pl = l if lab < 0 else l - 1
            if pl < 0:
                continue
            if lab >= 0 and (pl >= len(word) or word[pl] != lab):
                continue
            if dist[pl, py, px] == d - 1:
                cands.append((px, py, pl, a))
        if rng is not None and len(cands) > 1:
            px, py, pl, a = cands[int(rng.integers(0, len(cands)))]
        else:
            px, py, pl, a = cands[0]
        cells.append((px, py))
        actions.append(a)
        x, y, l, d = px, py, pl, d - 1

    cells.reverse()
    actions.reverse()
    demo = Demonstration(
        cells=tuple(cells),
        actions=tuple(actions),
        word=word,
        provenance="planned",
    )
    return demo


def answer_membership(task: TaskSpec, grid: GridMap, word: Word) -> bool:
    """Execution-based membership: realizable from the start and accepted."""
    if grid.start is None:
        raise StateError("membership answering needs a start cell")
    demo = plan_execution(grid, grid.start, word, task.horizon(grid, word))
    if demo is None:
        return False
    return task_eval(task, word)


def demonstrate(
    task: TaskSpec,
    grid: GridMap,
    word: Word,
    n: int,
    seed: int,
) -> list[Demonstration]:
    """n shortest realizations of word, diversified by random tie-breaking.

    Starts are drawn from the initial distribution (a point mass unless the
    grid uses a uniform start). Raises StateError when the word cannot be
    executed from any feasible start.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    support = [c for c, _ in grid_env.initial_distribution(grid)]
    h_max = task.horizon(grid, word)
    demos: list[Demonstration] = []
    for i in range(n):
        if len(support) == 1:
            start = support[0]
            demo = plan_execution(grid, start, word, h_max, rng=rng)
            if demo is None:
                raise StateError(f"word {word} infeasible from {start}")
        else:
            demo = None
            order = rng.permutation(len(support))
            for j in order:
                demo = plan_execution(grid, support[int(j)], word, h_max, rng=rng)
                if demo is not None:
                    break
            if demo is None:
                raise StateError(f"word {word} infeasible from every start")
        demos.append(
            Demonstration(
                cells=demo.cells,
                actions=demo.actions,
                word=demo.word,
                provenance=f"demo:{i}",
            )
        )
    return demos


def save_demos(demos: list[Demonstration], path: str) -> None:
    """One line per trajectory: start cell, action codes, emitted word."""
    lines = []
    for demo in demos:
        sx, sy = demo.cells[0]
        acts = "".join(ACTION_CODES[a] for a in demo.actions) or "-"
        parts = [str(sx), str(sy), acts] + [str(s) for s in demo.word]
        lines.append(" ".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_demos(path: str, grid: GridMap) -> list[Demonstration]:
    """Read demonstrations and replay them against the grid."""
    demos: list[Demonstration] = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) < 3:
                raise StateError(f"{path}:{ln}: need start cell and actions")
            sx, sy = int(parts[0]), int(parts[1])
            acts_field = parts[2]
            actions = []
            if acts_field != "-":
                for code in acts_field:
                    a = ACTION_CODES.find(code)
                    if a < 0:
                        raise StateError(f"{path}:{ln}: bad action code {code!r}")
                    actions.append(a)
            word = tuple(int(v) for v in parts[3:])
            cells = [(sx, sy)]
            for a in actions:
                cells.append(grid_env.move_result(grid, cells[-1], a))
            demo = Demonstration(
                cells=tuple(cells),
                actions=tuple(actions),
                word=word,
                provenance=f"file:{ln}",
            )
            demo.replay(grid)
            demos.append(demo)
    return demos

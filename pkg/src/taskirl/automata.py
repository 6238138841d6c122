"""Deterministic finite automata over region labels, and their product
with the grid MDP.

A task automaton reads the emitted label word of a trajectory; accepting
states mean the task is complete, and states from which no accepting state
is reachable are failure traps. Automata with an empty accepting set are
used purely as state extensions (baseline memories) and define neither
completion nor failure.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import grid_env
from .grid_env import GridMap, Cell, ACTIONS

Word = tuple[int, ...]


class DfaError(ValueError):
    """Malformed automaton data."""


class StateError(RuntimeError):
    """A trajectory or query left the modeled state space."""


@dataclass(frozen=True)
class Dfa:
    """Total DFA: delta[state][symbol] -> state."""

    delta: tuple[tuple[int, ...], ...]
    init: int
    accepting: frozenset[int]

    def __post_init__(self):
        n = len(self.delta)
        if n == 0:
            raise DfaError("automaton needs at least one state")
        k = len(self.delta[0])
        for row in self.delta:
            if len(row) != k:
                raise DfaError("transition rows must have equal length")
            for q in row:
                if not 0 <= q < n:
                    raise DfaError(f"transition target {q} out of range")
        if not 0 <= self.init < n:
            raise DfaError(f"initial state {self.init} out of range")
        for q in self.accepting:
            if not 0 <= q < n:
                raise DfaError(f"accepting state {q} out of range")

    @property
    def n_states(self) -> int:
        return len(self.delta)

    @property
    def n_symbols(self) -> int:
        return len(self.delta[0])

    def step(self, q: int, symbol: int) -> int:
        return self.delta[q][symbol]

    def run(self, word: Word) -> tuple[int, ...]:
        """State sequence visited while reading word (length |word| + 1)."""
        states = [self.init]
        q = self.init
        for s in word:
            if not 0 <= s < self.n_symbols:
                raise DfaError(f"symbol {s} outside alphabet")
            q = self.delta[q][s]
            states.append(q)
        return tuple(states)

    def accepts(self, word: Word) -> bool:
        return self.run(word)[-1] in self.accepting


def dfa_run(dfa: Dfa, word: Word) -> tuple[int, ...]:
    return dfa.run(word)


def dfa_accepts(dfa: Dfa, word: Word) -> bool:
    return dfa.accepts(word)


def exact_equivalence(a: Dfa, b: Dfa) -> Optional[Word]:
    """Shortest word the two automata classify differently, None if equal.

    Breadth-first search over the pair automaton; symbols are scanned in
    ascending order, so among shortest witnesses the least one is returned.
    """
    if a.n_symbols != b.n_symbols:
        raise DfaError("alphabet sizes differ")
    start = (a.init, b.init)
    parent: dict[tuple[int, int], tuple[tuple[int, int], int]] = {}
    seen = {start}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        qa, qb = pair
        if (qa in a.accepting) != (qb in b.accepting):
            word: list[int] = []
            while pair != start:
                pair, sym = parent[pair]
                word.append(sym)
            return tuple(reversed(word))
        for sym in range(a.n_symbols):
            nxt = (a.delta[qa][sym], b.delta[qb][sym])
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = (pair, sym)
                queue.append(nxt)
    return None


def trap_states(dfa: Dfa) -> frozenset[int]:
    """States from which no accepting state is reachable."""
    rev: list[list[int]] = [[] for _ in range(dfa.n_states)]
    for q, row in enumerate(dfa.delta):
        for nxt in row:
            rev[nxt].append(q)
    alive = set(dfa.accepting)
    queue = deque(alive)
    while queue:
        q = queue.popleft()
        for p in rev[q]:
            if p not in alive:
                alive.add(p)
                queue.append(p)
    return frozenset(range(dfa.n_states)) - frozenset(alive)


def advance(dfa: Dfa, q: int, label: Optional[int]) -> int:
    """DFA step on an optional emission; unlabeled cells leave q unchanged."""
    return q if label is None else dfa.delta[q][label]


def trivial_automaton(n_symbols: int = grid_env.NUM_REGION_TYPES) -> Dfa:
    """Single state, every symbol self-loops, no acceptance."""
    return Dfa(delta=((0,) * n_symbols,), init=0, accepting=frozenset())


def info_bits_automaton(num_types: int) -> Dfa:
    """Memory of which label types have occurred, one bit per type.

    2^num_types states; reading symbol t sets bit t. No accepting states:
    the automaton only extends the state space.
    """
    if num_types < 0:
        raise DfaError("num_types must be >= 0")
    n = 1 << num_types
    delta = tuple(
        tuple(m | (1 << t) for t in range(num_types)) for m in range(n)
    )
    return Dfa(delta=delta, init=0, accepting=frozenset())


def save_dfa(dfa: Dfa, path: str) -> None:
    lines = [
        f"states {dfa.n_states}",
        f"alphabet {dfa.n_symbols}",
        f"init {dfa.init}",
        "accept " + " ".join(str(q) for q in sorted(dfa.accepting)),
    ]
    for q in range(dfa.n_states):
        for sym in range(dfa.n_symbols):
            lines.append(f"trans {q} {sym} {dfa.delta[q][sym]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines).rstrip() + "\n")


def load_dfa(path: str) -> Dfa:
    n_states = n_symbols = init = None
    accepting: frozenset[int] = frozenset()
    trans: dict[tuple[int, int], int] = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            key, args = parts[0], parts[1:]
            try:
                if key == "states":
                    n_states = int(args[0])
                elif key == "alphabet":
                    n_symbols = int(args[0])
                elif key == "init":
                    init = int(args[0])
                elif key == "accept":
                    accepting = frozenset(int(v) for v in args)
                elif key == "trans":
                    q, sym, nxt = (int(v) for v in args)
                    if (q, sym) in trans:
                        raise DfaError(f"{path}:{ln}: duplicate transition")
                    trans[(q, sym)] = nxt
                else:
                    raise DfaError(f"{path}:{ln}: unknown record {key!r}")
            except (IndexError, ValueError) as exc:
                raise DfaError(f"{path}:{ln}: malformed record") from exc
    if n_states is None or n_symbols is None or init is None:
        raise DfaError(f"{path}: missing states/alphabet/init record")
    delta = []
    for q in range(n_states):
        row = []
        for sym in range(n_symbols):
            if (q, sym) not in trans:
                raise DfaError(f"{path}: missing transition for ({q}, {sym})")
            row.append(trans[(q, sym)])
        delta.append(tuple(row))
    extra = len(trans) - n_states * n_symbols
    if extra:
        raise DfaError(f"{path}: {extra} transitions outside declared table")
    return Dfa(delta=tuple(delta), init=init, accepting=accepting)


# ---------------------------------------------------------------------------
# Product of the grid MDP with a task automaton.

MAX_SUCCESSORS = 4  # four directions; clamping only merges outcomes


@dataclass
class ProductMdp:
    """Grid x automaton MDP over the reachable joint states.

    States pair a cell with an automaton state advanced on the label of the
    cell being entered. When the automaton has accepting states, accepting
    and trap product states are sealed absorbing (every action self-loops
    with probability 1): episodes conceptually end there. Automata with no
    accepting states are pure state extensions and are left unsealed.
    """

    grid: GridMap
    dfa: Dfa
    states: list[tuple[Cell, int]]
    index: dict[tuple[Cell, int], int]
    initial: list[tuple[int, float]]
    succ_idx: np.ndarray  # (Z, A, K) int32
    succ_p: np.ndarray  # (Z, A, K) float64, rows sum to 1
    accepting_mask: np.ndarray  # (Z,) bool
    trap_mask: np.ndarray  # (Z,) bool
    # Grid products never mark terminals: sealed accepting/trap states are
    # absorbing self-loops and the discount keeps their values finite, which
    # lets parameter gradients flow through their values. The mask exists for
    # hand-built episodic MDPs (gamma = 1 trees) where a zero-value floor is
    # the only way the soft backup terminates.
    terminal_mask: np.ndarray  # (Z,) bool; episodic end with zero value
    _lookup: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(ACTIONS)

    def state_lookup(self) -> np.ndarray:
        """(n_q, H, W) int32 map from (q, y, x) to product index, -1 if absent."""
        if self._lookup is None:
            table = np.full(
                (self.dfa.n_states, self.grid.height, self.grid.width),
                -1,
                dtype=np.int32,
            )
            for i, ((x, y), q) in enumerate(self.states):
                table[q, y, x] = i
            self._lookup = table
        return self._lookup

    def index_of(self, cell: Cell, q: int) -> int:
        idx = self.index.get((cell, q))
        if idx is None:
            raise StateError(f"product state ({cell}, {q}) unreachable")
        return idx


def build_product(grid: GridMap, dfa: Dfa) -> ProductMdp:
    """Reachable closure of the joint grid/automaton dynamics.

    Initial states advance the automaton on the label of the start cell.
    An action moves the cell per the grid dynamics and advances the
    automaton on the label of the cell entered.
    """
    if dfa.n_symbols < grid_env.NUM_REGION_TYPES:
        raise DfaError(
            f"automaton alphabet {dfa.n_symbols} smaller than the "
            f"{grid_env.NUM_REGION_TYPES} region types"
        )
    sealed_kinds = bool(dfa.accepting)
    traps = trap_states(dfa) if sealed_kinds else frozenset()

    def is_sealed(q: int) -> bool:
        return sealed_kinds and (q in dfa.accepting or q in traps)

    labels = grid.label_table()

    def label_of(cell: Cell) -> Optional[int]:
        lab = int(labels[cell[1], cell[0]])
        return None if lab < 0 else lab

    states: list[tuple[Cell, int]] = []
    index: dict[tuple[Cell, int], int] = {}

    def intern(cell: Cell, q: int) -> int:
        key = (cell, q)
        if key not in index:
            index[key] = len(states)
            states.append(key)
        return index[key]

    initial: list[tuple[int, float]] = []
    for cell, p in grid_env.initial_distribution(grid):
        q0 = advance(dfa, dfa.init, label_of(cell))
        initial.append((intern(cell, q0), p))

    rows: list[list[list[tuple[int, float]]]] = []
    i = 0
    while i < len(states):
        cell, q = states[i]
        row: list[list[tuple[int, float]]] = []
        if is_sealed(q):
            row = [[(i, 1.0)] for _ in ACTIONS]
        else:
            for a in ACTIONS:
                dist: dict[int, float] = {}
                for nxt, p in grid_env.step_distribution(grid, cell, a).items():
                    nq = q if nxt == cell else advance(dfa, q, label_of(nxt))
                    j = intern(nxt, nq)
                    dist[j] = dist.get(j, 0.0) + p
                row.append(sorted(dist.items()))
        rows.append(row)
        i += 1

    n = len(states)
    n_a = len(ACTIONS)
    # K is the widest outcome list actually present (1 when slip is 0);
    # padding to the worst case would quadruple every gather downstream.
    kmax = max(len(outcomes) for row in rows for outcomes in row)
    if kmax > MAX_SUCCESSORS:
        raise DfaError(f"state with {kmax} successors; expected at most "
                       f"{MAX_SUCCESSORS}")
    succ_idx = np.zeros((n, n_a, kmax), dtype=np.int32)
    succ_p = np.zeros((n, n_a, kmax), dtype=np.float64)
    for z, row in enumerate(rows):
        for a, outcomes in enumerate(row):
            for k, (j, p) in enumerate(outcomes):
                succ_idx[z, a, k] = j
                succ_p[z, a, k] = p

    accepting_mask = np.array([q in dfa.accepting for _, q in states], dtype=bool)
    trap_mask = np.array([q in traps for _, q in states], dtype=bool)
    return ProductMdp(
        grid=grid,
        dfa=dfa,
        states=states,
        index=index,
        initial=initial,
        succ_idx=succ_idx,
        succ_p=succ_p,
        accepting_mask=accepting_mask,
        trap_mask=trap_mask,
        terminal_mask=np.zeros(len(states), dtype=bool),
    )

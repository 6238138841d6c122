import itertools

import numpy as np
import pytest

from taskirl.automata import (
    Dfa,
    DfaError,
    ProductMdp,
    StateError,
    advance,
    build_product,
    dfa_accepts,
    dfa_run,
    exact_equivalence,
    info_bits_automaton,
    load_dfa,
    save_dfa,
    trap_states,
    trivial_automaton,
)
from taskirl.grid_env import GridMap, emitted_labels, step_distribution
from taskirl.oracle import load_fixture_task

import numpy as _np


def make_grid(rows, start=None, slip=0.0, uniform_start=False):
    from taskirl.grid_env import KIND_CODES

    codes = {c: i for i, c in enumerate(KIND_CODES)}
    cells = _np.array(
        [[codes[ch] for ch in row] for row in rows], dtype=_np.int8
    )
    return GridMap(cells, start=start, slip=slip, uniform_start=uniform_start)


def all_words(n_symbols, max_len):
    for length in range(max_len + 1):
        yield from itertools.product(range(n_symbols), repeat=length)


TASK1 = load_fixture_task("task1").dfa
TASK2 = load_fixture_task("task2").dfa
TASK3 = load_fixture_task("task3").dfa

ACCEPT_ALL = Dfa(delta=((0, 0, 0, 0),), init=0, accepting=frozenset({0}))


def test_dfa_basic_accessors():
    assert TASK3.n_states == 7
    assert TASK3.n_symbols == 4
    assert dfa_run(TASK3, ()) == (TASK3.init,)
    assert len(dfa_run(TASK3, (0, 1, 2))) == 4


def test_sequencing_task_accepts_exact_order():
    assert dfa_accepts(TASK3, (0, 1, 2, 3, 0))
    assert not dfa_accepts(TASK3, (0, 1, 2, 3))
    assert not dfa_accepts(TASK3, ())


def test_wrong_symbol_enters_trap():
    traps = trap_states(TASK3)
    assert len(traps) == 1
    assert dfa_run(TASK3, (1,))[-1] in traps
    assert dfa_run(TASK3, (0, 2))[-1] in traps


def test_accepting_state_is_absorbing_here():
    word = (0, 1, 2, 3, 0)
    q = dfa_run(TASK3, word)[-1]
    for extra in range(4):
        assert TASK3.step(q, extra) == q
    assert dfa_accepts(TASK3, word + (2,))


def test_fixture_languages_by_enumeration():
    # Independent language check: enumerate every word up to length 5.
    lang3 = {w for w in all_words(4, 5) if dfa_accepts(TASK3, w)}
    assert lang3 == {(0, 1, 2, 3, 0)}
    lang1 = {w for w in all_words(4, 4) if dfa_accepts(TASK1, w)}
    assert lang1 == {(0, 2, 1), (1, 3, 0),
                     (0, 2, 1, 0), (0, 2, 1, 1), (0, 2, 1, 2), (0, 2, 1, 3),
                     (1, 3, 0, 0), (1, 3, 0, 1), (1, 3, 0, 2), (1, 3, 0, 3)}
    lang2 = {w for w in all_words(4, 4) if dfa_accepts(TASK2, w)}
    assert lang2 == {(0, 1, 2, 3)}


def test_run_rejects_bad_symbols():
    with pytest.raises(DfaError):
        dfa_run(TASK3, (4,))
    with pytest.raises(DfaError):
        dfa_run(TASK3, (-1,))


def test_equivalence_of_identical_automata_is_none():
    for dfa in (TASK1, TASK2, TASK3, ACCEPT_ALL):
        assert exact_equivalence(dfa, dfa) is None


def test_equivalence_witness_empty_word():
    reject_all = Dfa(delta=((0, 0, 0, 0),), init=0, accepting=frozenset())
    assert exact_equivalence(ACCEPT_ALL, reject_all) == ()


def test_equivalence_witness_is_shortest_and_lexicographically_least():
    # Flip acceptance of the trap state in a copy of the sequencing task.
    mutated = Dfa(
        delta=TASK3.delta,
        init=TASK3.init,
        accepting=TASK3.accepting | trap_states(TASK3),
    )
    witness = exact_equivalence(TASK3, mutated)
    # Cross-check against plain enumeration in length-then-lex order.
    expected = next(
        w
        for w in all_words(4, 6)
        if dfa_accepts(TASK3, w) != dfa_accepts(mutated, w)
    )
    assert witness == expected
    assert dfa_accepts(TASK3, witness) != dfa_accepts(mutated, witness)


def test_equivalence_alphabet_mismatch_raises():
    two = Dfa(delta=((0, 0),), init=0, accepting=frozenset({0}))
    with pytest.raises(DfaError):
        exact_equivalence(two, TASK3)


def test_trap_states_definition():
    # A trap can never reach acceptance; with no accepting states every
    # state is a trap.
    assert trap_states(trivial_automaton()) == frozenset({0})
    assert trap_states(ACCEPT_ALL) == frozenset()
    for dfa in (TASK1, TASK2, TASK3):
        traps = trap_states(dfa)
        for q in range(dfa.n_states):
            reachable = {q}
            frontier = [q]
            while frontier:
                cur = frontier.pop()
                for sym in range(dfa.n_symbols):
                    nxt = dfa.step(cur, sym)
                    if nxt not in reachable:
                        reachable.add(nxt)
                        frontier.append(nxt)
            can_accept = bool(reachable & dfa.accepting)
            assert (q in traps) == (not can_accept)


def test_advance():
    assert advance(TASK3, 0, None) == 0
    assert advance(TASK3, 0, 0) == TASK3.step(0, 0)


def test_trivial_automaton_accepts_nothing():
    dfa = trivial_automaton()
    assert dfa.n_states == 1
    assert dfa.accepting == frozenset()
    assert not dfa_accepts(dfa, ())
    assert dfa_run(dfa, (0, 1, 2, 3))[-1] == 0


def test_info_bits_automaton_tracks_visited_set():
    dfa = info_bits_automaton(4)
    assert dfa.n_states == 16
    assert dfa.accepting == frozenset()
    q = dfa.init
    assert q == 0
    q = dfa.step(q, 2)
    assert q == 1 << 2
    # Revisiting a type is idempotent.
    assert dfa.step(q, 2) == q
    q = dfa.step(q, 0)
    assert q == (1 << 2) | (1 << 0)
    # Any order of the same set of labels lands in the same state.
    for word in itertools.permutations((0, 1, 2, 3)):
        assert dfa_run(dfa, word)[-1] == 0b1111


def test_dfa_file_round_trip(tmp_path):
    for name, dfa in (("t1", TASK1), ("t2", TASK2), ("t3", TASK3)):
        path = tmp_path / f"{name}.dfa"
        save_dfa(dfa, str(path))
        loaded = load_dfa(str(path))
        assert loaded.delta == dfa.delta
        assert loaded.init == dfa.init
        assert loaded.accepting == dfa.accepting


def test_load_dfa_rejects_malformed(tmp_path):
    lines = ["states 2", "alphabet 2", "init 0", "accept 1",
             "trans 0 0 1", "trans 0 1 0", "trans 1 0 1", "trans 1 1 1"]
    cases = [
        lines[:7],                       # missing transition
        lines + ["trans 1 1 0"],         # duplicate transition
        lines[:4] + ["trans 0 0 5"] + lines[5:],  # target out of range
        ["bogus 1"] + lines[1:],         # unknown record
    ]
    for i, text in enumerate(cases):
        path = tmp_path / f"bad{i}.dfa"
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(DfaError):
            load_dfa(str(path))


def test_dfa_validation():
    with pytest.raises(DfaError):
        Dfa(delta=((0, 5),), init=0, accepting=frozenset())
    with pytest.raises(DfaError):
        Dfa(delta=((0, 0),), init=3, accepting=frozenset())
    with pytest.raises(DfaError):
        Dfa(delta=((0, 0),), init=0, accepting=frozenset({9}))


GRID_ROWS = [
    "GGGGGGG",
    "GBBBGGG",
    "GBBBGGG",
    "GBBBGGG",
    "GGGGGGG",
    "GGTTTGG",
    "GGTTTGG",
]
# Only the buildings block has a full 3x3 window; the trees block touches
# the bottom border so its center is unlabeled.


def test_product_rows_are_distributions():
    grid = make_grid(GRID_ROWS, start=(0, 0), slip=0.2)
    product = build_product(grid, TASK3)
    sums = product.succ_p.sum(axis=2)
    assert np.allclose(sums, 1.0, atol=1e-12)
    assert (product.succ_idx >= 0).all()
    assert (product.succ_idx < product.n_states).all()
    assert product.n_states <= grid.width * grid.height * TASK3.n_states


def test_product_deterministic_grid_has_single_successor():
    grid = make_grid(GRID_ROWS, start=(0, 0), slip=0.0)
    product = build_product(grid, TASK3)
    assert product.succ_idx.shape[2] == 1
    assert (product.succ_p == 1.0).all()


def test_product_initial_state():
    grid = make_grid(GRID_ROWS, start=(0, 0))
    product = build_product(grid, TASK3)
    assert product.initial == [(product.index_of((0, 0), TASK3.init), 1.0)]


def test_product_initial_advances_on_labeled_start():
    rows = ["GGGGG", "GTTTG", "GTTTG", "GTTTG", "GGGGG"]
    grid = make_grid(rows, start=(2, 2))
    product = build_product(grid, TASK3)
    q = TASK3.step(TASK3.init, 1)
    assert product.initial == [(product.index_of((2, 2), q), 1.0)]


def test_product_tracks_automaton_along_trajectories():
    # The automaton component of the product must equal running the
    # automaton over the labels emitted by the grid path, as long as no
    # sealed state has been entered. The visited-set automaton has no
    # accepting states, so nothing is sealed and the check is exact.
    grid = make_grid(GRID_ROWS, start=(0, 0), slip=0.1)
    dfa = info_bits_automaton(4)
    product = build_product(grid, dfa)
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = product.index_of(grid.start, dfa.init)
        cells = [grid.start]
        for _step in range(30):
            a = int(rng.integers(0, 4))
            ps = product.succ_p[z, a]
            k = int(rng.choice(len(ps), p=ps))
            z = int(product.succ_idx[z, a, k])
            cells.append(product.states[z][0])
            expect_q = dfa_run(dfa, emitted_labels(grid, cells))[-1]
            assert product.states[z][1] == expect_q


def test_product_seals_accepting_and_trap_states():
    grid = make_grid(GRID_ROWS, start=(0, 0), slip=0.2)
    product = build_product(grid, TASK3)
    sealed = product.accepting_mask | product.trap_mask
    assert sealed.any()
    for z in np.flatnonzero(sealed):
        live = product.succ_p[z] > 0.0
        assert (product.succ_idx[z][live] == z).all()
        assert product.succ_p[z].sum(axis=-1) == pytest.approx(1.0)


def test_product_masks_mark_automaton_components():
    grid = make_grid(GRID_ROWS, start=(0, 0))
    product = build_product(grid, TASK3)
    traps = trap_states(TASK3)
    for z, (cell, q) in enumerate(product.states):
        assert product.accepting_mask[z] == (q in TASK3.accepting)
        assert product.trap_mask[z] == (q in traps)
    assert not product.terminal_mask.any()


def test_product_with_trivial_automaton_matches_plain_grid():
    grid = make_grid(GRID_ROWS, start=(0, 0), slip=0.3)
    product = build_product(grid, trivial_automaton())
    assert product.n_states == grid.width * grid.height
    # Transition rows must match the raw grid dynamics exactly.
    for z, (cell, q) in enumerate(product.states):
        assert q == 0
        for a in range(4):
            want = step_distribution(grid, cell, a)
            got = {}
            for k in range(product.succ_idx.shape[2]):
                p = product.succ_p[z, a, k]
                if p > 0.0:
                    nxt = product.states[product.succ_idx[z, a, k]][0]
                    got[nxt] = got.get(nxt, 0.0) + float(p)
            assert set(got) == set(want)
            for c in want:
                assert got[c] == pytest.approx(want[c], abs=1e-12)


def test_product_requires_full_alphabet():
    grid = make_grid(GRID_ROWS, start=(0, 0))
    two = Dfa(delta=((0, 0), (1, 1)), init=0, accepting=frozenset({1}))
    with pytest.raises(DfaError):
        build_product(grid, two)


def test_product_index_of_unknown_state_raises():
    grid = make_grid(GRID_ROWS, start=(0, 0))
    product = build_product(grid, TASK3)
    with pytest.raises(StateError):
        product.index_of((0, 0), 5)


def test_state_lookup_inverts_index():
    grid = make_grid(GRID_ROWS, start=(0, 0))
    product = build_product(grid, TASK3)
    lookup = product.state_lookup()
    for z, ((x, y), q) in enumerate(product.states):
        assert lookup[q, y, x] == z
    assert (lookup >= -1).all()

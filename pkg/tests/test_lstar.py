import itertools
import logging

import numpy as np
import pytest

from taskirl.automata import (
    Dfa,
    StateError,
    dfa_accepts,
    exact_equivalence,
    trap_states,
)
from taskirl.lstar import (
    MembershipOracle,
    ObservationTable,
    build_hypothesis,
    close_and_make_consistent,
    learn_dfa,
    process_counterexample,
)
from taskirl.oracle import load_fixture_task

TASK1 = load_fixture_task("task1").dfa
TASK2 = load_fixture_task("task2").dfa
TASK3 = load_fixture_task("task3").dfa


def minimal_size(dfa):
    # Independent minimality oracle: partition refinement over the
    # reachable states.
    reach = {dfa.init}
    frontier = [dfa.init]
    while frontier:
        q = frontier.pop()
        for sym in range(dfa.n_symbols):
            nxt = dfa.step(q, sym)
            if nxt not in reach:
                reach.add(nxt)
                frontier.append(nxt)
    part = {q: int(q in dfa.accepting) for q in reach}
    n_classes = len(set(part.values()))
    while True:
        sig = {
            q: (part[q],)
            + tuple(part[dfa.step(q, sym)] for sym in range(dfa.n_symbols))
            for q in reach
        }
        ids: dict[tuple, int] = {}
        for q in sorted(reach):
            ids.setdefault(sig[q], len(ids))
        part = {q: ids[sig[q]] for q in reach}
        if len(ids) == n_classes:
            return n_classes
        n_classes = len(ids)


def teacher(target):
    return lambda hyp: exact_equivalence(hyp, target)


def test_membership_oracle_caches_and_logs_once():
    calls = []

    def fn(word):
        calls.append(word)
        return len(word) == 1

    oracle = MembershipOracle(fn)
    assert oracle.query((2,)) == 1
    assert oracle.query((2,)) == 1
    assert oracle.query(()) == 0
    assert calls == [(2,), ()]
    assert oracle.num_queries == 2
    assert oracle.log == [(0, (2,), 1), (1, (), 0)]
    assert oracle.positive_words() == [(2,)]


def test_oracle_log_round_trips_through_csv(tmp_path):
    oracle = MembershipOracle(lambda w: dfa_accepts(TASK1, w))
    for w in [(), (0,), (0, 2, 1)]:
        oracle.query(w)
    path = tmp_path / "queries.csv"
    oracle.save_log(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "index,word,answer"
    assert lines[1] == "0,,0"
    assert lines[3] == "2,0 2 1,1"


def test_table_starts_with_alphabet_prefixes():
    table = ObservationTable(4)
    assert table.prefixes == [(), (0,), (1,), (2,), (3,)]
    assert table.suffixes == [()]


def test_add_prefix_keeps_prefix_closure():
    table = ObservationTable(2)
    table.add_prefix((1, 0, 1))
    assert (1, 0) in table.prefixes
    assert (1, 0, 1) in table.prefixes
    before = list(table.prefixes)
    table.add_prefix((1, 0))
    assert table.prefixes == before


def test_extensions_exclude_prefixes():
    table = ObservationTable(2)
    table.add_prefix((0, 1))
    ext = table.extensions()
    assert (0, 1) not in ext
    assert (0, 0) in ext
    assert (0, 1, 0) in ext
    assert len(ext) == len(set(ext))


def test_row_distinguishes_once_suffix_added():
    oracle = MembershipOracle(lambda w: dfa_accepts(TASK1, w))
    table = ObservationTable(4)
    assert table.row((0,), oracle) == table.row((1,), oracle)
    table.add_suffix((2, 1))
    assert table.row((0,), oracle) != table.row((1,), oracle)


def test_close_reaches_distinct_rows_of_minimal_automaton():
    oracle = MembershipOracle(lambda w: dfa_accepts(TASK1, w))
    table = ObservationTable(4)
    close_and_make_consistent(table, oracle)
    hyp = build_hypothesis(table, oracle)
    ce = exact_equivalence(hyp, TASK1)
    while ce is not None:
        process_counterexample(table, ce, oracle, hypothesis=hyp)
        close_and_make_consistent(table, oracle)
        hyp = build_hypothesis(table, oracle)
        ce = exact_equivalence(hyp, TASK1)
    rows = {table.row(p, oracle) for p in table.prefixes}
    assert len(rows) == 7 == minimal_size(TASK1)


def test_close_is_idempotent():
    oracle = MembershipOracle(lambda w: dfa_accepts(TASK3, w))
    table = ObservationTable(4)
    close_and_make_consistent(table, oracle)
    queries = oracle.num_queries
    prefixes = list(table.prefixes)
    suffixes = list(table.suffixes)
    close_and_make_consistent(table, oracle)
    assert oracle.num_queries == queries
    assert table.prefixes == prefixes
    assert table.suffixes == suffixes


def test_closed_table_invariants():
    oracle = MembershipOracle(lambda w: dfa_accepts(TASK3, w))
    table = ObservationTable(4)
    close_and_make_consistent(table, oracle)
    rows_in_p = {table.row(p, oracle) for p in table.prefixes}
    for w in table.extensions():
        assert table.row(w, oracle) in rows_in_p
    for p1 in table.prefixes:
        for p2 in table.prefixes:
            if table.row(p1, oracle) != table.row(p2, oracle):
                continue
            for sym in range(4):
                assert table.row(p1 + (sym,), oracle) == table.row(
                    p2 + (sym,), oracle
                )


def test_build_hypothesis_single_state_language():
    oracle = MembershipOracle(lambda w: True)
    table = ObservationTable(4)
    close_and_make_consistent(table, oracle)
    hyp = build_hypothesis(table, oracle)
    assert hyp.n_states == 1
    assert hyp.accepting == frozenset({0})


def test_build_hypothesis_requires_closed_table():
    oracle = MembershipOracle(lambda w: dfa_accepts(TASK3, w))
    table = ObservationTable(4)
    # Row of the prefix 0 is distinct, so it represents a state; its
    # successor 01 rows as (0, 0, 1) which no prefix row matches.
    table.add_suffix((1, 2, 3, 0))
    table.add_suffix((2, 3, 0))
    table.fill(oracle)
    with pytest.raises(StateError):
        build_hypothesis(table, oracle)


def test_process_counterexample_adds_all_prefixes():
    oracle = MembershipOracle(lambda w: dfa_accepts(TASK3, w))
    table = ObservationTable(4)
    process_counterexample(table, (0, 1, 2, 3, 0), oracle)
    for end in range(6):
        assert (0, 1, 2, 3, 0)[:end] in table.prefixes


def test_non_distinguishing_counterexample_warns(caplog):
    oracle = MembershipOracle(lambda w: dfa_accepts(TASK3, w))
    table = ObservationTable(4)
    close_and_make_consistent(table, oracle)
    hyp = build_hypothesis(table, oracle)
    word = next(
        w
        for w in itertools.product(range(4), repeat=2)
        if hyp.accepts(w) == bool(oracle.query(w))
    )
    with caplog.at_level(logging.WARNING):
        process_counterexample(table, word, oracle, hypothesis=hyp)
    assert any("does not distinguish" in r.message for r in caplog.records)
    assert word in table.prefixes


def test_learn_fixture_tasks_exactly():
    for target, size in ((TASK1, 7), (TASK2, 6), (TASK3, 7)):
        oracle = MembershipOracle(lambda w, t=target: dfa_accepts(t, w))
        learned, rounds = learn_dfa(oracle, 4, teacher(target))
        assert exact_equivalence(learned, target) is None
        assert learned.n_states == minimal_size(target) == size
        assert rounds <= 3
        assert oracle.num_queries <= 2000


def test_hypothesis_sizes_strictly_increase():
    target = TASK3
    oracle = MembershipOracle(lambda w: dfa_accepts(target, w))
    table = ObservationTable(4)
    sizes = []
    while True:
        close_and_make_consistent(table, oracle)
        hyp = build_hypothesis(table, oracle)
        sizes.append(hyp.n_states)
        ce = exact_equivalence(hyp, target)
        if ce is None:
            break
        process_counterexample(table, ce, oracle, hypothesis=hyp)
    assert sizes == sorted(set(sizes))
    assert len(sizes) >= 2


def test_final_hypothesis_agrees_with_every_logged_answer():
    for target in (TASK1, TASK2, TASK3):
        oracle = MembershipOracle(lambda w, t=target: dfa_accepts(t, w))
        learned, _ = learn_dfa(oracle, 4, teacher(target))
        for _, word, ans in oracle.log:
            assert learned.accepts(word) == bool(ans)


def test_learning_is_deterministic():
    logs = []
    for _ in range(2):
        oracle = MembershipOracle(lambda w: dfa_accepts(TASK1, w))
        learned, rounds = learn_dfa(oracle, 4, teacher(TASK1))
        logs.append((oracle.log, learned.delta, learned.accepting, rounds))
    assert logs[0] == logs[1]


def test_learn_random_automata():
    rng = np.random.default_rng(7)
    for trial in range(15):
        n = int(rng.integers(2, 6))
        alphabet = int(rng.integers(2, 4))
        delta = tuple(
            tuple(int(rng.integers(0, n)) for _ in range(alphabet))
            for _ in range(n)
        )
        accepting = frozenset(
            int(q) for q in range(n) if rng.random() < 0.4
        )
        target = Dfa(delta=delta, init=0, accepting=accepting)
        oracle = MembershipOracle(lambda w, t=target: dfa_accepts(t, w))
        learned, _ = learn_dfa(oracle, alphabet, teacher(target))
        assert exact_equivalence(learned, target) is None
        assert learned.n_states == minimal_size(target)


def test_learn_dfa_round_budget():
    target = TASK3
    oracle = MembershipOracle(lambda w: dfa_accepts(target, w))
    with pytest.raises(StateError):
        learn_dfa(oracle, 4, lambda hyp: (0, 1, 2, 3, 0), max_rounds=2)

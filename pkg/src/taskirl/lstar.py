"""Active DFA inference from membership queries over an observation table.

The table holds a prefix-closed set P of access words and a suffix set X of
distinguishing words. Rows are the membership bits of p + x for x in X.
Once the table is closed and consistent it induces a hypothesis automaton;
counterexamples from an external equivalence source are folded back in by
adding all of their prefixes to P.
"""

from __future__ import annotations

import csv
import logging
from typing import Callable, Optional

from .automata import Dfa, StateError, Word

logger = logging.getLogger(__name__)

MembershipFn = Callable[[Word], bool]
EquivalenceFn = Callable[[Dfa], Optional[Word]]


class MembershipOracle:
    """Caching wrapper around a membership function.

    Repeated queries are served from the cache, so the log holds each word
    once, in first-query order. num_queries counts distinct evaluations.
    """

    def __init__(self, fn: MembershipFn):
        self._fn = fn
        self._cache: dict[Word, int] = {}
        self.log: list[tuple[int, Word, int]] = []

    def query(self, word: Word) -> int:
        hit = self._cache.get(word)
        if hit is not None:
            return hit
        answer = 1 if self._fn(word) else 0
        self._cache[word] = answer
        self.log.append((len(self.log), word, answer))
        return answer

    @property
    def num_queries(self) -> int:
        return len(self.log)

    def positive_words(self) -> list[Word]:
        return [w for _, w, ans in self.log if ans]

    def save_log(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "word", "answer"])
            for idx, word, ans in self.log:
                writer.writerow([idx, " ".join(str(s) for s in word), ans])


class ObservationTable:
    """Membership table over prefixes P (prefix-closed, contains the empty
    word) and suffixes X (contains the empty word).

    P starts out as the empty word plus every single-symbol word. Seeding the
    alphabet keeps one access word per symbol in P from the first round on,
    so the consistency check can mine distinguishing suffixes for symbols
    that a counterexample never passes through.
    """

    def __init__(self, alphabet: int):
        if alphabet < 1:
            raise ValueError("alphabet must have at least one symbol")
        self.alphabet = alphabet
        self.prefixes: list[Word] = [()] + [(sym,) for sym in range(alphabet)]
        self.suffixes: list[Word] = [()]
        self._prefix_set = set(self.prefixes)
        self._suffix_set = {()}

    def add_prefix(self, word: Word) -> None:
        """Insert word and all of its prefixes, keeping P prefix-closed."""
        for end in range(len(word) + 1):
            p = word[:end]
            if p not in self._prefix_set:
                self._prefix_set.add(p)
                self.prefixes.append(p)

    def add_suffix(self, word: Word) -> None:
        if word not in self._suffix_set:
            self._suffix_set.add(word)
            self.suffixes.append(word)

    def extensions(self) -> list[Word]:
        """P * alphabet, in scan order, without words already in P."""
        out = []
        for p in self.prefixes:
            for sym in range(self.alphabet):
                w = p + (sym,)
                if w not in self._prefix_set:
                    out.append(w)
        return out

    def fill(self, oracle: MembershipOracle) -> None:
        for p in self.prefixes + self.extensions():
            for x in self.suffixes:
                oracle.query(p + x)

    def row(self, word: Word, oracle: MembershipOracle) -> tuple[int, ...]:
        return tuple(oracle.query(word + x) for x in self.suffixes)


def close_and_make_consistent(
    table: ObservationTable, oracle: MembershipOracle
) -> None:
    """Repair the table until it is closed and consistent.

    Closedness is restored by promoting the offending extension into P;
    consistency by adding the first distinguishing suffix sym + x found in
    the deterministic scan order (prefix pairs in insertion order, symbols
    and suffixes ascending).
    """
    while True:
        table.fill(oracle)
        rows_in_p = {table.row(p, oracle) for p in table.prefixes}
        moved = False
        for w in table.extensions():
            if table.row(w, oracle) not in rows_in_p:
                table.add_prefix(w)
                moved = True
                break
        if moved:
            continue

        fixed = False
        n = len(table.prefixes)
        for i in range(n):
            for j in range(i + 1, n):
                p1, p2 = table.prefixes[i], table.prefixes[j]
                if table.row(p1, oracle) != table.row(p2, oracle):
                    continue
                for sym in range(table.alphabet):
                    for x in table.suffixes:
                        if oracle.query(p1 + (sym,) + x) != oracle.query(
                            p2 + (sym,) + x
                        ):
                            table.add_suffix((sym,) + x)
                            fixed = True
                            break
                    if fixed:
                        break
                if fixed:
                    break
            if fixed:
                break
        if not fixed:
            return


def build_hypothesis(table: ObservationTable, oracle: MembershipOracle) -> Dfa:
    """Automaton induced by a closed, consistent table.

    States are the distinct rows of P, numbered by first occurrence; the
    initial state is the row of the empty word and accepting states are
    rows whose empty-suffix bit is 1.
    """
    row_ids: dict[tuple[int, ...], int] = {}
    rep: list[Word] = []
    for p in table.prefixes:
        r = table.row(p, oracle)
        if r not in row_ids:
            row_ids[r] = len(rep)
            rep.append(p)
    empty_pos = table.suffixes.index(())
    delta = []
    accepting = set()
    for r, q in row_ids.items():
        if r[empty_pos] == 1:
            accepting.add(q)
        p = rep[q]
        row = []
        for sym in range(table.alphabet):
            target = table.row(p + (sym,), oracle)
            if target not in row_ids:
                raise StateError("table is not closed")
            row.append(row_ids[target])
        delta.append(tuple(row))
    return Dfa(delta=tuple(delta), init=row_ids[table.row((), oracle)],
               accepting=frozenset(accepting))


def process_counterexample(
    table: ObservationTable,
    counterexample: Word,
    oracle: MembershipOracle,
    hypothesis: Optional[Dfa] = None,
) -> None:
    """Fold a counterexample into the table by adding all of its prefixes.

    When the current hypothesis is supplied and already classifies the word
    like the oracle does, a warning is logged; the word is processed anyway.
    """
    if hypothesis is not None:
        if hypothesis.accepts(counterexample) == bool(oracle.query(counterexample)):
            logger.warning(
                "counterexample %s does not distinguish the hypothesis", counterexample
            )
    table.add_prefix(counterexample)
    table.fill(oracle)


def learn_dfa(
    oracle: MembershipOracle,
    alphabet: int,
    equivalence: EquivalenceFn,
    max_rounds: int = 64,
) -> tuple[Dfa, int]:
    """Run the inference loop until the equivalence source has no objection.

    Returns the final hypothesis and the number of hypotheses proposed.
    Raises StateError when max_rounds hypotheses were all rejected.
    """
    table = ObservationTable(alphabet)
    rounds = 0
    while rounds < max_rounds:
        close_and_make_consistent(table, oracle)
        hyp = build_hypothesis(table, oracle)
        rounds += 1
        ce = equivalence(hyp)
        if ce is None:
            return hyp, rounds
        process_counterexample(table, ce, oracle, hypothesis=hyp)
    raise StateError(f"no stable hypothesis after {max_rounds} rounds")

from __future__ import annotations

import random
from itertools import count

import pytest

import mlmoracle as m

# Enumeration settings used for every randomly generated grammar.
RANDOM_THRESHOLD = 0.9
RANDOM_MAX_LENGTH = 8
RANDOM_GRAMMAR_COUNT = 20


@pytest.fixture(scope="session")
def g1() -> m.Grammar:
    return m.load_bundled("g1")


@pytest.fixture(scope="session")
def g3() -> m.Grammar:
    return m.load_bundled("g3")


@pytest.fixture(scope="session")
def ginf() -> m.Grammar:
    return m.load_bundled("ginf")


def _candidate_text(seed: int) -> str:
    """One random small grammar (at most 8 rules, no unary chains)."""
    rng = random.Random(seed)
    terminals = list("abcdef")
    nonterminals = ["S", "A", "B"][: rng.randint(2, 3)]
    budget = 8
    lines = []
    for i, nt in enumerate(nonterminals):
        remaining_nts = len(nonterminals) - i - 1
        n_alts = min(rng.randint(2, 3), budget - remaining_nts * 2)
        budget -= n_alts
        alts = []
        for _ in range(n_alts):
            length = rng.randint(1, 3)
            syms = []
            for _ in range(length):
                if length >= 2 and rng.random() < 0.35:
                    syms.append(rng.choice(nonterminals))
                else:
                    syms.append(rng.choice(terminals))
            alts.append(syms)
        if all(any(s in nonterminals for s in alt) for alt in alts):
            alts[0] = [rng.choice(terminals) for _ in range(rng.randint(1, 3))]
        weights = []
        for alt in alts:
            w = rng.random() + 0.1
            if any(s in nonterminals for s in alt):
                w *= 0.5  # damp recursion so coverage stays reachable
            weights.append(w)
        total = sum(weights)
        for alt, w in zip(alts, weights):
            lines.append(f"{w / total:.17g} {nt} -> {' '.join(alt)}")
    return "\n".join(lines) + "\n"


def random_grammar_suite(
    n: int = RANDOM_GRAMMAR_COUNT,
) -> list[tuple[m.Grammar, m.SentenceTable]]:
    """Deterministic list of n enumerable random grammars with their tables."""
    suite = []
    for index in range(n):
        for attempt in count():
            try:
                grammar = m.parse_grammar(_candidate_text(index * 977 + attempt))
            except m.GrammarError:
                continue  # e.g. duplicate sampled production
            if m.validate(grammar):
                continue
            try:
                table = m.enumerate_to_coverage(grammar, RANDOM_THRESHOLD, RANDOM_MAX_LENGTH)
            except (m.CoverageError, m.UnsupportedGrammarError):
                continue
            if not 3 <= len(table) <= 300:
                continue  # non-degenerate but bounded oracle cost
            suite.append((grammar, table))
            break
    return suite


@pytest.fixture(scope="session")
def random_grammars() -> list[tuple[m.Grammar, m.SentenceTable]]:
    return random_grammar_suite()

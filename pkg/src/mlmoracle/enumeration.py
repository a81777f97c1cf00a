"""Best-first sentence enumeration and exact inside-probability scoring.

Sentences are enumerated by expanding leftmost derivations in descending
probability order (ties broken by lexicographic sentential form), which
guarantees the first completion of any derivation path carries its exact
probability and that no derivation order is counted twice.  Ambiguous
grammars are supported by summing per token string; after the coverage
threshold is crossed, the frontier is drained of the remaining
derivations of kept strings so every recorded probability equals the
full ambiguity-summed value.

Grammars whose unary rules form a cycle among nonterminals (e.g.
``A -> B`` and ``B -> A``) admit infinitely many derivations per string
and are rejected up front.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from heapq import heappop, heappush

from .grammar import Grammar

DEFAULT_MAX_LENGTH = 64

Tokens = tuple[str, ...]


class CoverageError(RuntimeError):
    """Enumeration exhausted all derivations below the coverage threshold."""

    def __init__(self, threshold: float, achieved: float):
        super().__init__(
            f"coverage unreachable: accumulated mass {achieved:.12g} "
            f"never exceeded threshold {threshold:.12g}"
        )
        self.threshold = threshold
        self.achieved = achieved


class UnsupportedGrammarError(ValueError):
    """The grammar's unary rules are cyclic; per-string sums would not converge."""


@dataclass(frozen=True)
class PartialDerivation:
    """A sentential form reached by leftmost rule applications."""

    form: Tokens
    probability: float
    leftmost_nonterminal: int | None

    @property
    def is_complete(self) -> bool:
        return self.leftmost_nonterminal is None


@dataclass(frozen=True)
class WeightedSentence:
    tokens: Tokens
    probability: float


@dataclass
class SentenceTable:
    """Enumerated sentences with exact probabilities; immutable once built."""

    sentences: dict[Tokens, float]
    covered_mass: float
    threshold: float
    length_histogram: dict[int, int]

    def __len__(self) -> int:
        return len(self.sentences)

    def probability(self, tokens) -> float:
        return self.sentences.get(tuple(tokens), 0.0)

    @property
    def max_sentence_length(self) -> int:
        return max(self.length_histogram) if self.length_histogram else 0


@dataclass
class KBestResult:
    sentences: list[WeightedSentence]
    exhausted: bool = field(default=False)


def _unary_nonterminal_order(grammar: Grammar) -> list[str]:
    """Nonterminals ordered so unary producers precede their consumers.

    Raises UnsupportedGrammarError when unary rules are cyclic.
    """
    edges: dict[str, set[str]] = {}
    for rule in grammar.rules:
        if len(rule.rhs) == 1 and not rule.rhs[0].is_terminal:
            edges.setdefault(rule.lhs.name, set()).add(rule.rhs[0].name)
    order: list[str] = []
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    def visit(node: str) -> None:
        state[node] = 1
        for nxt in sorted(edges.get(node, ())):
            if state.get(nxt) == 1:
                raise UnsupportedGrammarError(
                    f"unary rule cycle through {nxt!r}; enumeration would not terminate"
                )
            if nxt not in state:
                visit(nxt)
        state[node] = 2
        order.append(node)

    for name in sorted(grammar.nonterminal_names):
        if name not in state:
            visit(name)
    return order


class _Frontier:
    """Priority queue over sentential forms, keyed (-probability, form)."""

    def __init__(self, grammar: Grammar, max_length: int):
        if max_length < 1:
            raise ValueError("max_length must be positive")
        _unary_nonterminal_order(grammar)  # cycle guard
        self.nonterminals = grammar.nonterminal_names
        self.rules: dict[str, list[tuple[float, Tokens]]] = {
            name: [(r.probability, tuple(s.name for s in r.rhs)) for r in grammar.productions(name)]
            for name in self.nonterminals
        }
        self.max_length = max_length
        self._heap: list[tuple[float, Tokens]] = [(-1.0, (grammar.start.name,))]

    def __bool__(self) -> bool:
        return bool(self._heap)

    def pop(self) -> PartialDerivation:
        neg_p, form = heappop(self._heap)
        idx = next((i for i, name in enumerate(form) if name in self.nonterminals), None)
        return PartialDerivation(form, -neg_p, idx)

    def expand(self, item: PartialDerivation) -> None:
        """Push every one-rule leftmost expansion of a partial derivation."""
        idx = item.leftmost_nonterminal
        head, tail = item.form[:idx], item.form[idx + 1 :]
        for rule_p, rhs in self.rules[item.form[idx]]:
            new_form = head + rhs + tail
            # Every symbol yields at least one terminal, so the final
            # sentence is at least as long as the form.
            if len(new_form) > self.max_length:
                continue
            heappush(self._heap, (-item.probability * rule_p, new_form))


def _drain_stragglers(frontier: _Frontier, totals: dict[Tokens, float]) -> None:
    """Finish the remaining derivations of already-kept strings.

    With ambiguity, a kept string may still own derivations in the
    frontier when enumeration stops; this pass adds their mass so the
    recorded value equals the full per-string sum.  Partial derivations
    that cannot extend to a kept string are pruned by terminal prefix
    (everything left of the leftmost nonterminal is already terminal)
    and by minimum final length.
    """
    kept = sorted(totals)

    def viable(prefix: Tokens, min_length: int) -> bool:
        i = bisect_left(kept, prefix)
        n = len(prefix)
        while i < len(kept) and kept[i][:n] == prefix:
            if len(kept[i]) >= min_length:
                return True
            i += 1
        return False

    while frontier:
        item = frontier.pop()
        if item.is_complete:
            if item.form in totals:
                totals[item.form] += item.probability
            continue
        if viable(item.form[: item.leftmost_nonterminal], len(item.form)):
            frontier.expand(item)


def _finalize(totals: dict[Tokens, float], threshold: float) -> SentenceTable:
    ordered = dict(sorted(totals.items(), key=lambda kv: (-kv[1], kv[0])))
    return SentenceTable(
        sentences=ordered,
        covered_mass=math.fsum(ordered.values()),
        threshold=threshold,
        length_histogram=dict(sorted(Counter(len(t) for t in ordered).items())),
    )


def enumerate_to_coverage(
    grammar: Grammar, threshold: float, max_length: int = DEFAULT_MAX_LENGTH
) -> SentenceTable:
    """Enumerate sentences best-first until covered mass strictly exceeds threshold.

    Raises CoverageError (reporting the achieved mass) when every
    derivation of length <= max_length is exhausted first.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    frontier = _Frontier(grammar, max_length)
    totals: dict[Tokens, float] = {}
    mass = 0.0
    while frontier:
        item = frontier.pop()
        if item.is_complete:
            totals[item.form] = totals.get(item.form, 0.0) + item.probability
            mass += item.probability
            if mass > threshold:
                _drain_stragglers(frontier, totals)
                return _finalize(totals, threshold)
        else:
            frontier.expand(item)
    raise CoverageError(threshold, math.fsum(totals.values()))


def kbest(grammar: Grammar, k: int, max_length: int = DEFAULT_MAX_LENGTH) -> KBestResult:
    """The k most probable sentences, descending, ties lexicographic.

    Sentences are admitted in first-completion order, which for
    ambiguous grammars is a best-effort ranking by each string's highest
    single derivation; totals are still ambiguity-exact.  ``exhausted``
    is set when the derivation space within max_length holds fewer than
    k sentences.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    frontier = _Frontier(grammar, max_length)
    totals: dict[Tokens, float] = {}
    exhausted = True
    while frontier:
        item = frontier.pop()
        if item.is_complete:
            seen = item.form in totals
            totals[item.form] = totals.get(item.form, 0.0) + item.probability
            if not seen and len(totals) == k:
                _drain_stragglers(frontier, totals)
                exhausted = False
                break
        else:
            frontier.expand(item)
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return KBestResult(
        sentences=[WeightedSentence(tokens, p) for tokens, p in ranked], exhausted=exhausted
    )


def sentence_probability(grammar: Grammar, tokens) -> float:
    """Exact string probability, summed over all parses (inside algorithm).

    Returns 0.0 for underivable strings.
    """
    tokens = tuple(tokens)
    if not tokens:
        raise ValueError("tokens must be non-empty")
    unary_order = {name: i for i, name in enumerate(_unary_nonterminal_order(grammar))}
    terminal_names = grammar.terminal_names
    binary_rules = []  # every rule except unary nonterminal chains
    unary_rules = []
    for rule in grammar.rules:
        if len(rule.rhs) == 1 and not rule.rhs[0].is_terminal:
            unary_rules.append((rule.lhs.name, rule.rhs[0].name, rule.probability))
        else:
            binary_rules.append(
                (rule.lhs.name, tuple((s.name, s.is_terminal) for s in rule.rhs), rule.probability)
            )
    unary_rules.sort(key=lambda r: unary_order[r[0]])

    n = len(tokens)
    chart: dict[tuple[int, int], dict[str, float]] = {}

    def match(rhs: tuple[tuple[str, bool], ...], start: int, end: int) -> float:
        """Sum over ways rhs derives tokens[start:end)."""
        ways = {start: 1.0}
        for idx, (name, is_term) in enumerate(rhs):
            remaining = len(rhs) - idx - 1
            nxt: dict[int, float] = {}
            for pos, w in ways.items():
                if is_term:
                    if pos < end - remaining and tokens[pos] == name:
                        nxt[pos + 1] = nxt.get(pos + 1, 0.0) + w
                else:
                    for mid in range(pos + 1, end - remaining + 1):
                        val = chart.get((pos, mid), {}).get(name, 0.0)
                        if val:
                            nxt[mid] = nxt.get(mid, 0.0) + w * val
            ways = nxt
            if not ways:
                return 0.0
        return ways.get(end, 0.0)

    for span in range(1, n + 1):
        for i in range(0, n - span + 1):
            j = i + span
            cell: dict[str, float] = {}
            for lhs, rhs, p in binary_rules:
                if len(rhs) > span:
                    continue
                s = match(rhs, i, j)
                if s:
                    cell[lhs] = cell.get(lhs, 0.0) + p * s
            for lhs, rhs_name, p in unary_rules:
                val = cell.get(rhs_name, 0.0)
                if val:
                    cell[lhs] = cell.get(lhs, 0.0) + p * val
            chart[(i, j)] = cell
    return chart[(0, n)].get(grammar.start.name, 0.0)


def format_sentence_table(table: SentenceTable) -> str:
    """Tokens, tab, probability at 17 significant digits; one line per sentence."""
    return "".join(f"{' '.join(toks)}\t{p:.17g}\n" for toks, p in table.sentences.items())


def write_sentence_table(table: SentenceTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_sentence_table(table))


def read_sentence_table(path, threshold: float = 0.0) -> SentenceTable:
    totals: dict[Tokens, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            toks, prob = line.split("\t")
            totals[tuple(toks.split(" "))] = float(prob)
    return _finalize(totals, threshold)

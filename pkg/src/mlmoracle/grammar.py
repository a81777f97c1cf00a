"""Weighted context-free grammars: parsing, validation, canonical vocabulary.

Native grammar files are UTF-8 text with one production per line:

    <probability> <LHS> -> <symbol> <symbol> ...

``#`` starts a comment, blank lines are skipped, and an optional
``start: <symbol>`` header overrides the default start symbol (the
left-hand side of the first rule).  Symbol kinds are inferred once at
load time: any name that appears as a left-hand side is a nonterminal,
every other name is a terminal.  Probabilities of each left-hand side
must sum to 1 (tolerance 1e-9); groups that pass are renormalized to an
exact sum of 1 so long enumerations do not accumulate drift.

``parse_external_grammar`` additionally accepts the common
``LHS -> 'terminal' NT [p] | ... [p]`` style used by published
artificial-language releases and converts it to the same Grammar value.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources

NONTERMINAL = "nonterminal"
TERMINAL = "terminal"

PAD_TOKEN = "[PAD]"
MASK_TOKEN = "[MASK]"
RESERVED_TOKENS = (PAD_TOKEN, MASK_TOKEN)

#: Tolerance on the per-nonterminal probability sum.
PROBABILITY_TOLERANCE = 1e-9

#: Toy grammars shipped with the package (see ``load_bundled``).
BUNDLED_GRAMMARS = ("g1", "g3", "ginf", "midlang")


class GrammarError(ValueError):
    """Malformed grammar text; carries the offending line/column (1-based)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Symbol:
    """A grammar symbol; ``kind`` is fixed when the grammar is loaded."""

    name: str
    kind: str

    @property
    def is_terminal(self) -> bool:
        return self.kind == TERMINAL

    def __repr__(self) -> str:
        return f"Symbol({self.name!r}, {self.kind[0]})"


@dataclass(frozen=True)
class Rule:
    lhs: Symbol
    rhs: tuple[Symbol, ...]
    probability: float


@dataclass(frozen=True)
class Violation:
    """A failed grammar invariant; data, not an exception."""

    check: str
    nonterminal: str | None
    message: str
    measured: float | None = None


@dataclass(frozen=True)
class Grammar:
    """An immutable weighted CFG; safe to share across threads."""

    rules: tuple[Rule, ...]
    start: Symbol
    terminals: frozenset[Symbol]
    nonterminals: frozenset[Symbol]

    def __post_init__(self):
        by_lhs: dict[str, list[Rule]] = {}
        for rule in self.rules:
            by_lhs.setdefault(rule.lhs.name, []).append(rule)
        object.__setattr__(self, "_by_lhs", {k: tuple(v) for k, v in by_lhs.items()})

    def productions(self, lhs_name: str) -> tuple[Rule, ...]:
        return self._by_lhs.get(lhs_name, ())

    @property
    def terminal_names(self) -> frozenset[str]:
        return frozenset(s.name for s in self.terminals)

    @property
    def nonterminal_names(self) -> frozenset[str]:
        return frozenset(s.name for s in self.nonterminals)


_TOKEN_RE = re.compile(r"\S+")


def _tokenize(line: str) -> list[tuple[str, int]]:
    """Split a line into (token, 1-based column) pairs."""
    return [(m.group(0), m.start() + 1) for m in _TOKEN_RE.finditer(line)]


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def _parse_probability(token: str, line_no: int, column: int) -> float:
    try:
        p = float(token)
    except ValueError:
        raise GrammarError(f"expected a probability, got {token!r}", line_no, column) from None
    if not math.isfinite(p) or p <= 0.0 or p > 1.0:
        raise GrammarError(f"probability {token!r} outside (0, 1]", line_no, column)
    return p


def _build_grammar(
    raw_rules: list[tuple[float, str, tuple[str, ...], int]],
    start_name: str | None,
    start_line: int | None,
) -> Grammar:
    """Assemble a Grammar from raw (prob, lhs, rhs, line) tuples.

    Infers symbol kinds, rejects duplicate productions and reserved token
    names, and renormalizes each lhs group whose probability sum is
    within tolerance of 1.
    """
    if not raw_rules:
        raise GrammarError("no rules")
    lhs_names = {lhs for _, lhs, _, _ in raw_rules}
    seen: set[tuple[str, tuple[str, ...]]] = set()
    for _, lhs, rhs, line_no in raw_rules:
        if (lhs, rhs) in seen:
            raise GrammarError(f"duplicate rule {lhs} -> {' '.join(rhs)}", line_no)
        seen.add((lhs, rhs))
        for name in (lhs, *rhs):
            if name in RESERVED_TOKENS:
                raise GrammarError(f"symbol name {name!r} is reserved", line_no)

    if start_name is None:
        start_name = raw_rules[0][1]
    elif start_name not in lhs_names:
        raise GrammarError(f"unknown start symbol {start_name!r}", start_line)

    symbols: dict[str, Symbol] = {}
    for _, lhs, rhs, _ in raw_rules:
        for name in (lhs, *rhs):
            if name not in symbols:
                kind = NONTERMINAL if name in lhs_names else TERMINAL
                symbols[name] = Symbol(name, kind)

    sums: dict[str, float] = {}
    last_index: dict[str, int] = {}
    for i, (p, lhs, _, _) in enumerate(raw_rules):
        sums[lhs] = sums.get(lhs, 0.0) + p
        last_index[lhs] = i
    # Renormalize each lhs group that passes the sum check so the group
    # sums to exactly 1.0 in float; the last rule absorbs the residue.
    partial: dict[str, float] = {}
    rules = []
    for i, (p, lhs, rhs, _) in enumerate(raw_rules):
        if abs(sums[lhs] - 1.0) <= PROBABILITY_TOLERANCE:
            p = 1.0 - partial.get(lhs, 0.0) if i == last_index[lhs] else p / sums[lhs]
            partial[lhs] = partial.get(lhs, 0.0) + p
        rules.append(Rule(symbols[lhs], tuple(symbols[n] for n in rhs), p))

    return Grammar(
        rules=tuple(rules),
        start=symbols[start_name],
        terminals=frozenset(s for s in symbols.values() if s.is_terminal),
        nonterminals=frozenset(s for s in symbols.values() if not s.is_terminal),
    )


def parse_grammar(text: str) -> Grammar:
    """Parse native grammar text into a validated-shape Grammar value."""
    raw_rules: list[tuple[float, str, tuple[str, ...], int]] = []
    start_name: str | None = None
    start_line: int | None = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        tokens = _tokenize(_strip_comment(line))
        if not tokens:
            continue
        if tokens[0][0] == "start:":
            if start_name is not None:
                raise GrammarError("duplicate start: header", line_no, tokens[0][1])
            if len(tokens) != 2:
                raise GrammarError("start: header takes exactly one symbol", line_no, tokens[0][1])
            start_name, start_line = tokens[1][0], line_no
            continue
        if len(tokens) < 4:
            raise GrammarError(
                "expected '<probability> <LHS> -> <symbol> ...'", line_no, tokens[0][1]
            )
        prob = _parse_probability(tokens[0][0], line_no, tokens[0][1])
        lhs = tokens[1][0]
        if tokens[2][0] != "->":
            raise GrammarError(f"expected '->', got {tokens[2][0]!r}", line_no, tokens[2][1])
        rhs = tuple(tok for tok, _ in tokens[3:])
        raw_rules.append((prob, lhs, rhs, line_no))
    return _build_grammar(raw_rules, start_name, start_line)


def serialize_grammar(grammar: Grammar) -> str:
    """Render a Grammar back to native text; parse(serialize(g)) == g."""
    lines = [f"start: {grammar.start.name}"]
    for rule in grammar.rules:
        rhs = " ".join(s.name for s in rule.rhs)
        lines.append(f"{rule.probability:.17g} {rule.lhs.name} -> {rhs}")
    return "\n".join(lines) + "\n"


_EXTERNAL_PROB_RE = re.compile(r"\[([^\[\]]+)\]\s*$")


def parse_external_grammar(text: str) -> Grammar:
    """Adapter for ``LHS -> alt [p] | alt [p]`` grammar releases.

    Terminals may be quoted with single or double quotes; quotes are
    stripped.  A quoted name that also occurs as a left-hand side is
    rejected as inconsistent.  The start symbol is the first rule's lhs.
    """
    raw_rules: list[tuple[float, str, tuple[str, ...], int]] = []
    quoted_terminals: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(line).strip()
        if not line:
            continue
        if "->" not in line:
            raise GrammarError("expected 'LHS -> ...'", line_no)
        lhs_part, rhs_part = line.split("->", 1)
        lhs_tokens = lhs_part.split()
        if len(lhs_tokens) != 1:
            raise GrammarError("left-hand side must be a single symbol", line_no)
        lhs = lhs_tokens[0]
        for alt in rhs_part.split("|"):
            alt = alt.strip()
            m = _EXTERNAL_PROB_RE.search(alt)
            if m is None:
                raise GrammarError("missing [probability] on production", line_no)
            prob = _parse_probability(m.group(1).strip(), line_no, 1)
            body = alt[: m.start()].split()
            if not body:
                raise GrammarError("empty right-hand side", line_no)
            rhs = []
            for sym in body:
                if len(sym) >= 2 and sym[0] == sym[-1] and sym[0] in "'\"":
                    sym = sym[1:-1]
                    if not sym:
                        raise GrammarError("empty quoted terminal", line_no)
                    quoted_terminals.add(sym)
                rhs.append(sym)
            raw_rules.append((prob, lhs, tuple(rhs), line_no))
    grammar = _build_grammar(raw_rules, None, None)
    clash = quoted_terminals & grammar.nonterminal_names
    if clash:
        raise GrammarError(f"quoted terminal(s) also used as nonterminal: {sorted(clash)}")
    return grammar


def validate(grammar: Grammar) -> list[Violation]:
    """Check Grammar invariants; an empty list means the grammar is valid."""
    violations: list[Violation] = []
    sums: dict[str, float] = {}
    for rule in grammar.rules:
        sums[rule.lhs.name] = sums.get(rule.lhs.name, 0.0) + rule.probability
        if rule.probability <= 0.0:
            violations.append(
                Violation(
                    "rule_probability",
                    rule.lhs.name,
                    f"rule {rule.lhs.name} -> ... has probability {rule.probability}",
                    rule.probability,
                )
            )
        if not rule.rhs:
            violations.append(
                Violation("empty_rhs", rule.lhs.name, f"rule for {rule.lhs.name} has empty rhs")
            )
    for name in sorted(sums):
        if abs(sums[name] - 1.0) > PROBABILITY_TOLERANCE:
            violations.append(
                Violation(
                    "probability_sum",
                    name,
                    f"rules for {name} sum to {sums[name]:.12g}, expected 1",
                    sums[name],
                )
            )
    if grammar.start not in grammar.nonterminals:
        violations.append(
            Violation("start_symbol", grammar.start.name, "start symbol has no rules")
        )

    # Productivity fixpoint: a nonterminal is productive once some rule's
    # rhs is all terminals or already-productive nonterminals.
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for rule in grammar.rules:
            if rule.lhs.name in productive:
                continue
            if all(s.is_terminal or s.name in productive for s in rule.rhs):
                productive.add(rule.lhs.name)
                changed = True
    for name in sorted(grammar.nonterminal_names - productive):
        violations.append(
            Violation("unproductive", name, f"nonterminal {name} derives no terminal string")
        )
    return violations


def vocabulary(grammar: Grammar) -> list[str]:
    """Terminal names sorted by code point; fixes vector layout downstream."""
    return sorted(grammar.terminal_names)


def load_bundled(name: str) -> Grammar:
    """Load one of the grammars shipped with the package (``BUNDLED_GRAMMARS``)."""
    if name not in BUNDLED_GRAMMARS:
        raise KeyError(f"unknown bundled grammar {name!r}; available: {BUNDLED_GRAMMARS}")
    text = resources.files(__package__).joinpath(f"grammars/{name}.grammar").read_text("utf-8")
    return parse_grammar(text)

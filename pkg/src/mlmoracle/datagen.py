"""Corpus sampling and vocabulary emission.

Sampling is i.i.d. ancestral generation (expand the leftmost
nonterminal by rule probability); draws longer than the length cap are
rejected and redrawn, which keeps every kept draw exactly distributed.
The seed fully determines the files, byte for byte.

The vocabulary file lists ``[PAD]`` and ``[MASK]`` at indices 0 and 1
followed by the grammar terminals in canonical order; the reserved
entries never appear in corpora or reference distributions.  Corpora
are not deduplicated.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path

from .enumeration import SentenceTable
from .grammar import Grammar, RESERVED_TOKENS, vocabulary

CORPUS_FILES = ("train.txt", "valid.txt", "test.txt")

# Expansion budget per draw; unary-heavy grammars that spin without
# emitting terminals count against it and the draw is rejected.
_MAX_EXPANSIONS_FACTOR = 50


class SamplingError(RuntimeError):
    """More than 99% of draws exceeded the length cap."""


class InsufficientSampleError(ValueError):
    """Too few observations for a fitness statistic (minimum 50)."""


@dataclass(frozen=True)
class CorpusSpec:
    train_size: int
    validation_size: int
    test_size: int
    seed: int
    max_length: int = 64

    def __post_init__(self):
        if min(self.train_size, self.validation_size, self.test_size) < 0:
            raise ValueError("corpus sizes must be >= 0")
        if self.max_length < 1:
            raise ValueError("max_length must be positive")


@dataclass
class CorpusStats:
    train_size: int
    validation_size: int
    test_size: int
    vocabulary_size: int
    mean_sentence_length: float
    observed_vocabulary_size: int
    seed: int
    max_length: int
    draws: int
    rejected_draws: int

    def as_lines(self) -> str:
        pairs = [
            ("train_size", self.train_size),
            ("validation_size", self.validation_size),
            ("test_size", self.test_size),
            ("vocabulary_size", self.vocabulary_size),
            ("mean_sentence_length", f"{self.mean_sentence_length:.6f}"),
            ("observed_vocabulary_size", self.observed_vocabulary_size),
            ("seed", self.seed),
            ("max_length", self.max_length),
            ("draws", self.draws),
            ("rejected_draws", self.rejected_draws),
        ]
        return "".join(f"{key} {value}\n" for key, value in pairs)


@dataclass
class Chi2Report:
    statistic: float
    degrees_of_freedom: int
    observations: int
    covered_mass: float


class _Sampler:
    def __init__(self, grammar: Grammar, spec: CorpusSpec):
        self.rules = {
            name: [(r.probability, tuple(s.name for s in r.rhs)) for r in grammar.productions(name)]
            for name in grammar.nonterminal_names
        }
        self.nonterminals = grammar.nonterminal_names
        self.start = grammar.start.name
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.draws = 0
        self.rejected = 0

    def _choose(self, lhs: str) -> tuple[str, ...]:
        u = self.rng.random()
        acc = 0.0
        for p, rhs in self.rules[lhs]:
            acc += p
            if u < acc:
                return rhs
        return self.rules[lhs][-1][1]

    def _draw(self) -> list[str] | None:
        budget = _MAX_EXPANSIONS_FACTOR * self.spec.max_length + 1000
        out: list[str] = []
        stack = [self.start]
        while stack:
            if len(out) + len(stack) > self.spec.max_length or budget <= 0:
                return None
            budget -= 1
            sym = stack.pop()
            if sym in self.nonterminals:
                stack.extend(reversed(self._choose(sym)))
            else:
                out.append(sym)
        return out

    def sentence(self) -> list[str]:
        while True:
            self.draws += 1
            tokens = self._draw()
            if tokens is not None:
                return tokens
            self.rejected += 1
            if self.draws >= 1000 and self.rejected / self.draws > 0.99:
                raise SamplingError(
                    f"{self.rejected}/{self.draws} draws exceeded max_length="
                    f"{self.spec.max_length}"
                )


def sample_corpus(grammar: Grammar, spec: CorpusSpec, out_dir) -> CorpusStats:
    """Write train/valid/test corpora plus the vocabulary file; return stats."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sampler = _Sampler(grammar, spec)
    observed: set[str] = set()
    train_lengths: list[int] = []
    all_lengths: list[int] = []
    sizes = (spec.train_size, spec.validation_size, spec.test_size)
    for filename, size in zip(CORPUS_FILES, sizes):
        with open(out_dir / filename, "w", encoding="utf-8") as fh:
            for _ in range(size):
                tokens = sampler.sentence()
                observed.update(tokens)
                all_lengths.append(len(tokens))
                if filename == "train.txt":
                    train_lengths.append(len(tokens))
                fh.write(" ".join(tokens) + "\n")
    lengths = train_lengths or all_lengths
    emit_vocab(grammar, out_dir / "vocab.txt")
    return CorpusStats(
        train_size=spec.train_size,
        validation_size=spec.validation_size,
        test_size=spec.test_size,
        vocabulary_size=len(vocabulary(grammar)),
        mean_sentence_length=(sum(lengths) / len(lengths)) if lengths else 0.0,
        observed_vocabulary_size=len(observed),
        seed=spec.seed,
        max_length=spec.max_length,
        draws=sampler.draws,
        rejected_draws=sampler.rejected,
    )


def emit_vocab(grammar: Grammar, path) -> list[str]:
    """Vocabulary file: [PAD], [MASK], then terminals in canonical order."""
    entries = list(RESERVED_TOKENS) + vocabulary(grammar)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(tok + "\n" for tok in entries))
    return entries


def read_corpus(path) -> list[tuple[str, ...]]:
    with open(path, encoding="utf-8") as fh:
        return [tuple(line.split()) for line in fh if line.strip()]


def chi2_fitness(corpus: list[tuple[str, ...]], table: SentenceTable) -> Chi2Report:
    """Chi-squared of empirical sentence frequencies against exact probabilities.

    Covered sentences each form a cell; when the table covers less than
    the full language an extra cell absorbs uncovered draws.  Degrees of
    freedom are cells - 1.
    """
    n = len(corpus)
    if n < 50:
        raise InsufficientSampleError(f"need at least 50 observations, got {n}")
    counts: dict[tuple[str, ...], int] = {}
    for tokens in corpus:
        counts[tokens] = counts.get(tokens, 0) + 1
    statistic = 0.0
    uncovered_obs = n - sum(counts.get(toks, 0) for toks in table.sentences)
    cells = len(table.sentences)
    for tokens, p in table.sentences.items():
        expected = n * p
        statistic += (counts.get(tokens, 0) - expected) ** 2 / expected
    if table.covered_mass < 1.0 - 1e-12:
        expected = n * (1.0 - table.covered_mass)
        statistic += (uncovered_obs - expected) ** 2 / expected
        cells += 1
    elif uncovered_obs:
        statistic = math.inf
    return Chi2Report(
        statistic=statistic,
        degrees_of_freedom=cells - 1,
        observations=n,
        covered_mass=table.covered_mass,
    )

"""Vocabulary and corpus handling for the masked-prediction trainers.

All inputs are artifacts of the reference pipeline: the vocabulary file
([PAD] and [MASK] at indices 0 and 1, then the language's tokens), plain
one-sentence-per-line corpora, and tab-separated evaluation manifests.
Nothing here reads a grammar.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import torch

PAD_TOKEN = "[PAD]"
MASK_TOKEN = "[MASK]"


@dataclass
class Vocabulary:
    """Token list in file order; index 0 is [PAD], index 1 is [MASK]."""

    tokens: list[str]
    sha256: str

    def __post_init__(self):
        if self.tokens[:2] != [PAD_TOKEN, MASK_TOKEN]:
            raise ValueError("vocabulary must start with [PAD] and [MASK]")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate tokens")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        data = Path(path).read_bytes()
        tokens = data.decode("utf-8").splitlines()
        return cls(tokens=[t for t in tokens if t], sha256=hashlib.sha256(data).hexdigest())

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def mask_id(self) -> int:
        return 1

    @property
    def terminals(self) -> list[str]:
        return self.tokens[2:]

    def encode(self, tokens) -> list[int]:
        return [self.index[tok] for tok in tokens]


def read_corpus(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]


class MaskedBatches:
    """Streams fixed-size batches with exactly k positions masked per example.

    Examples shorter than k tokens are skipped at load time; sentences
    are drawn uniformly with replacement, and mask positions uniformly
    without replacement, all from one seeded generator.
    """

    def __init__(self, sentences: list[list[str]], vocab: Vocabulary, k: int, batch_size: int, seed: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.encoded = [vocab.encode(s) for s in sentences if len(s) >= k]
        if not self.encoded:
            raise ValueError(f"no corpus sentence has length >= {k}")
        self.vocab = vocab
        self.k = k
        self.batch_size = batch_size
        self.generator = torch.Generator().manual_seed(seed)

    def __iter__(self):
        return self

    def __next__(self):
        picks = torch.randint(
            len(self.encoded), (self.batch_size,), generator=self.generator
        ).tolist()
        examples = [self.encoded[i] for i in picks]
        return self.mask_batch(examples)

    def mask_batch(self, examples: list[list[int]]):
        """(input_ids, pad_mask, positions, golds) for one masked batch."""
        width = max(len(e) for e in examples)
        input_ids = torch.full((len(examples), width), self.vocab.pad_id, dtype=torch.long)
        pad_mask = torch.ones(len(examples), width, dtype=torch.bool)
        positions = torch.zeros(len(examples), self.k, dtype=torch.long)
        golds = torch.zeros(len(examples), self.k, dtype=torch.long)
        for row, ids in enumerate(examples):
            input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            pad_mask[row, : len(ids)] = False
            chosen = torch.randperm(len(ids), generator=self.generator)[: self.k]
            chosen = torch.sort(chosen).values
            positions[row] = chosen
            golds[row] = input_ids[row, chosen]
            input_ids[row, chosen] = self.vocab.mask_id
        return input_ids, pad_mask, positions, golds

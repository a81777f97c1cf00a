"""Prediction export and perplexity evaluation.

Predictions are written in the interchange format the reference
pipeline's scorer reads: one line per manifest instance, the instance id
then one probability per vocabulary entry (reserved tokens excluded) at
9 significant digits.  The mass the softmax puts on [PAD] and [MASK] is
renormalized away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .data import Vocabulary, read_corpus
from .model import MaskedTokenEncoder


class VocabularyHashError(ValueError):
    """The vocabulary file differs from the one the checkpoint trained on."""


@dataclass(frozen=True)
class ManifestInstance:
    record_id: str
    context: tuple[str, ...]
    target: int


def read_manifest(path) -> list[ManifestInstance]:
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            record_id, context, _, target, _, _ = line.split("\t")
            instances.append(
                ManifestInstance(record_id, tuple(context.split(" ")), int(target))
            )
    return instances


def check_vocabulary(model: MaskedTokenEncoder, vocab: Vocabulary) -> None:
    recorded = model.config.vocab_sha256
    if recorded and recorded != vocab.sha256:
        raise VocabularyHashError(
            f"checkpoint was trained with vocabulary {recorded[:12]}..., "
            f"got {vocab.sha256[:12]}..."
        )


@torch.inference_mode()
def terminal_distributions(
    model: MaskedTokenEncoder,
    vocab: Vocabulary,
    instances: list[ManifestInstance],
    batch_size: int = 128,
) -> list[list[float]]:
    """Softmax at each instance's target slot, renormalized over terminals."""
    model.eval()
    out: list[list[float]] = []
    for lo in range(0, len(instances), batch_size):
        chunk = instances[lo : lo + batch_size]
        width = max(len(inst.context) for inst in chunk)
        input_ids = torch.full((len(chunk), width), vocab.pad_id, dtype=torch.long)
        pad_mask = torch.ones(len(chunk), width, dtype=torch.bool)
        for row, inst in enumerate(chunk):
            ids = vocab.encode(inst.context)
            input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            pad_mask[row, : len(ids)] = False
        logits = model(input_ids, pad_mask)
        targets = torch.tensor([inst.target for inst in chunk], dtype=torch.long)
        picked = logits[torch.arange(len(chunk)), targets]
        probs = torch.softmax(picked, dim=-1)[:, 2:]  # drop [PAD], [MASK]
        probs = probs / probs.sum(dim=-1, keepdim=True)
        out.extend(probs.tolist())
    return out


def write_predictions(path, instances: list[ManifestInstance], rows: list[list[float]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst, row in zip(instances, rows):
            fh.write(f"{inst.record_id}\t{' '.join(f'{p:.9g}' for p in row)}\n")


def predict_to_file(model: MaskedTokenEncoder, vocab: Vocabulary, manifest_path, out_path) -> int:
    check_vocabulary(model, vocab)
    instances = read_manifest(manifest_path)
    rows = terminal_distributions(model, vocab, instances)
    write_predictions(out_path, instances, rows)
    return len(instances)


@torch.inference_mode()
def perplexity_eval(
    model: MaskedTokenEncoder,
    vocab: Vocabulary,
    corpus_path,
    k: int,
    seed: int = 0,
    batch_size: int = 128,
) -> float:
    """Single-gold-token perplexity with k masks per sentence (fixed seed).

    Each masked position of each sentence is one occurrence; sentences
    shorter than k tokens are skipped.  As in prediction export, the
    distribution is renormalized over the language's tokens.
    """
    from .data import MaskedBatches  # local import to avoid cycle at module load

    check_vocabulary(model, vocab)
    model.eval()
    sentences = [s for s in read_corpus(corpus_path) if len(s) >= k]
    if not sentences:
        raise ValueError(f"no validation sentence has length >= {k}")
    masker = MaskedBatches(sentences, vocab, k=k, batch_size=1, seed=seed)
    total_bits = 0.0
    count = 0
    for lo in range(0, len(sentences), batch_size):
        chunk = [masker.encoded[i] for i in range(lo, min(lo + batch_size, len(sentences)))]
        input_ids, pad_mask, positions, golds = masker.mask_batch(chunk)
        logits = model(input_ids, pad_mask)[:, :, 2:]  # drop [PAD], [MASK]
        log_probs = torch.log_softmax(logits, dim=-1)
        picked = torch.gather(
            log_probs, 1, positions.unsqueeze(-1).expand(-1, -1, log_probs.shape[-1])
        )
        gold_logp = torch.gather(picked, 2, (golds - 2).unsqueeze(-1)).squeeze(-1)
        total_bits += -gold_logp.sum().item() / math.log(2.0)
        count += golds.numel()
    return 2.0 ** (total_bits / count)

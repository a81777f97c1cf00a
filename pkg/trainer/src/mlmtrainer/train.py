"""Masked-prediction training loop and checkpoint handling."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
from torch import nn

from .data import MaskedBatches, Vocabulary, read_corpus
from .model import MaskedTokenEncoder, ModelConfig

#: Paper-scale runs use 300000 steps; this is the desk-scale default.
DEFAULT_STEPS = 20000


class TrainingDivergedError(RuntimeError):
    """The loss became non-finite."""


@dataclass
class TrainConfig:
    k: int
    steps: int = DEFAULT_STEPS
    learning_rate: float = 5e-5
    batch_size: int = 8
    weight_decay: float = 0.01
    seed: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: MaskedTokenEncoder
    final_loss: float  # mean masked cross-entropy (nats) over the last 100 steps
    steps: int


def masked_loss(model: MaskedTokenEncoder, batch) -> torch.Tensor:
    """Cross-entropy on the masked positions only."""
    input_ids, pad_mask, positions, golds = batch
    logits = model(input_ids, pad_mask)
    picked = torch.gather(
        logits, 1, positions.unsqueeze(-1).expand(-1, -1, logits.shape[-1])
    )
    return nn.functional.cross_entropy(picked.flatten(0, 1), golds.flatten())


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    corpus_path,
    vocab: Vocabulary,
    log_every: int = 0,
) -> TrainResult:
    torch.manual_seed(train_config.seed)
    model = MaskedTokenEncoder(model_config)
    model.train()
    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=train_config.learning_rate,
        weight_decay=train_config.weight_decay,
    )
    batches = MaskedBatches(
        read_corpus(corpus_path),
        vocab,
        k=train_config.k,
        batch_size=train_config.batch_size,
        seed=train_config.seed,
    )
    tail: list[float] = []
    for step in range(1, train_config.steps + 1):
        optimizer.zero_grad()
        loss = masked_loss(model, next(batches))
        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at step {step}")
        loss.backward()
        optimizer.step()
        tail.append(loss.item())
        if len(tail) > 100:
            tail.pop(0)
        if log_every and step % log_every == 0:
            print(f"step {step}: loss {sum(tail) / len(tail):.4f}")
    model.eval()
    return TrainResult(model=model, final_loss=sum(tail) / len(tail), steps=train_config.steps)


def save_checkpoint(path, result: TrainResult, model_config: ModelConfig, train_config: TrainConfig) -> None:
    torch.save(
        {
            "state_dict": result.model.state_dict(),
            "model_config": model_config.as_dict(),
            "train_config": train_config.as_dict(),
            "final_loss": result.final_loss,
        },
        path,
    )


def load_checkpoint(path) -> tuple[MaskedTokenEncoder, ModelConfig, TrainConfig, float]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model_config = ModelConfig(**payload["model_config"])
    model = MaskedTokenEncoder(model_config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    train_config = TrainConfig(**payload["train_config"])
    return model, model_config, train_config, payload["final_loss"]


def bits(nats: float) -> float:
    return nats / math.log(2.0)

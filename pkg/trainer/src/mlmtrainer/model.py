"""Two small bidirectional encoders for masked-token prediction.

The position-aware variant adds learned absolute position embeddings to
the token embeddings.  The position-free variant has no position table
at all (rather than a zeroed one), so every computation it performs is
permutation-equivariant by construction: self-attention, the pointwise
feed-forward blocks, and layer norms all commute with reordering the
input tokens.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass
class ModelConfig:
    use_positions: bool
    vocab_size: int
    layers: int = 3
    attention_heads: int = 4
    hidden_size: int = 256
    intermediate_size: int = 1024
    max_positions: int = 128
    dropout: float = 0.1
    vocab_sha256: str = ""

    def __post_init__(self):
        if self.hidden_size % self.attention_heads != 0:
            raise ValueError("hidden_size must be divisible by attention_heads")

    def as_dict(self) -> dict:
        return asdict(self)


class MaskedTokenEncoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.token_embedding = nn.Embedding(config.vocab_size, config.hidden_size)
        if config.use_positions:
            self.position_embedding = nn.Embedding(config.max_positions, config.hidden_size)
        self.embedding_norm = nn.LayerNorm(config.hidden_size)
        self.embedding_dropout = nn.Dropout(config.dropout)
        layer = nn.TransformerEncoderLayer(
            d_model=config.hidden_size,
            nhead=config.attention_heads,
            dim_feedforward=config.intermediate_size,
            dropout=config.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=config.layers, enable_nested_tensor=False)
        self.head = nn.Linear(config.hidden_size, config.vocab_size)
        self.apply(self._init_weights)

    @staticmethod
    def _init_weights(module: nn.Module) -> None:
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def forward(self, input_ids: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        """Logits over the vocabulary at every input slot, shape [B, L, V]."""
        hidden = self.token_embedding(input_ids)
        if self.config.use_positions:
            length = input_ids.shape[1]
            if length > self.config.max_positions:
                raise ValueError(f"sequence length {length} exceeds max_positions")
            hidden = hidden + self.position_embedding.weight[:length]
        hidden = self.embedding_dropout(self.embedding_norm(hidden))
        hidden = self.encoder(hidden, src_key_padding_mask=pad_mask)
        return self.head(hidden)


def build_model(config: ModelConfig) -> MaskedTokenEncoder:
    return MaskedTokenEncoder(config)

import pytest
import torch

from mlmtrainer.model import MaskedTokenEncoder, ModelConfig


def _config(use_positions, **kw):
    return ModelConfig(use_positions=use_positions, vocab_size=20, **kw)


def test_hidden_size_must_divide_heads():
    with pytest.raises(ValueError, match="divisible"):
        ModelConfig(use_positions=True, vocab_size=20, hidden_size=250)


def test_position_parameters_exist_only_with_positions():
    with_pos = MaskedTokenEncoder(_config(True))
    without = MaskedTokenEncoder(_config(False))
    assert any("position" in name for name, _ in with_pos.named_parameters())
    assert not any("position" in name for name, _ in without.named_parameters())


def test_forward_shape_and_length_limit():
    torch.manual_seed(0)
    model = MaskedTokenEncoder(_config(True, max_positions=8)).eval()
    ids = torch.randint(2, 20, (3, 6))
    assert model(ids).shape == (3, 6, 20)
    with pytest.raises(ValueError, match="max_positions"):
        model(torch.randint(2, 20, (1, 9)))


def test_position_free_variant_is_permutation_equivariant():
    torch.manual_seed(0)
    model = MaskedTokenEncoder(_config(False)).eval()
    ids = torch.randint(2, 20, (4, 6))
    ids[:, 1] = 1  # a mask slot
    perm = torch.randperm(6)
    with torch.inference_mode():
        direct = model(ids)[:, perm]
        permuted = model(ids[:, perm])
    assert (direct - permuted).abs().max().item() <= 1e-5


def test_position_variant_is_not_equivariant():
    torch.manual_seed(0)
    model = MaskedTokenEncoder(_config(True)).eval()
    ids = torch.randint(2, 20, (4, 6))
    perm = torch.tensor([5, 4, 3, 2, 1, 0])
    with torch.inference_mode():
        direct = model(ids)[:, perm]
        permuted = model(ids[:, perm])
    assert (direct - permuted).abs().max().item() > 1e-5

"""Context encoder, strategy-history encoder and pooling."""
from dataclasses import dataclass

import torch
from torch import nn

from .strategies import NUM_STRATEGIES
from .text import CLS_ID, SEP_ID


@dataclass
class EncoderConfig:
    d: int = 64
    layers: int = 2
    heads: int = 2
    vocab_size: int = 8000
    max_positions: int = 512
    emotion_dim: int = 16
    ff_dim: int = 128
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("d", "layers", "heads", "vocab_size", "max_positions", "emotion_dim", "ff_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"encoder.{name} must be positive")
        if self.d % self.heads:
            raise ValueError("encoder.d must be divisible by encoder.heads")
        if not 0 <= self.dropout < 1:
            raise ValueError("encoder.dropout must be in [0, 1)")


@dataclass
class SequenceEncoding:
    hidden: torch.Tensor  # T x d
    token_ids: list
    segment_map: list  # layout position -> utterance index, -1 for [CLS]/[SEP]


def context_layout(utterances):
    """[CLS] u1 [SEP] u2 ... [SEP] uM as (token ids, segment map)."""
    ids, seg = [CLS_ID], [-1]
    for i, u in enumerate(utterances):
        if i > 0:
            ids.append(SEP_ID)
            seg.append(-1)
        ids.extend(u)
        seg.extend([i] * len(u))
    return ids, seg


def pool_mean(rows, pad_mask=None):
    """Mean over the second-to-last axis, skipping rows where pad_mask is True."""
    if rows.shape[-2] == 0:
        raise ValueError("cannot mean-pool an empty sequence")
    if pad_mask is None:
        return rows.mean(dim=-2)
    keep = (~pad_mask).unsqueeze(-1).to(rows.dtype)
    count = keep.sum(dim=-2)
    if torch.any(count == 0):
        raise ValueError("cannot mean-pool an empty sequence")
    return (rows * keep).sum(dim=-2) / count


def _transformer(cfg):
    layer = nn.TransformerEncoderLayer(
        cfg.d, cfg.heads, cfg.ff_dim, cfg.dropout, activation="gelu", batch_first=True)
    return nn.TransformerEncoder(layer, cfg.layers, enable_nested_tensor=False)


class ContextEncoder(nn.Module):
    def __init__(self, cfg, token_embedding):
        super().__init__()
        self.cfg = cfg
        self.token_embedding = token_embedding
        self.position_embedding = nn.Embedding(cfg.max_positions, cfg.d)
        self.layers = _transformer(cfg)

    def forward(self, ids, pad_mask=None):
        T = ids.shape[1]
        if T > self.cfg.max_positions:
            raise ValueError(f"sequence of {T} positions exceeds max_positions={self.cfg.max_positions}")
        pos = torch.arange(T, device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(pos)
        return self.layers(x, src_key_padding_mask=pad_mask)


class StrategyHistoryEncoder(nn.Module):
    """Encodes the sequence of past strategy ids and mean-pools it to one vector.

    An empty history maps to a learned null vector.
    """

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        self.embedding = nn.Embedding(NUM_STRATEGIES, cfg.d)
        self.position_embedding = nn.Embedding(cfg.max_positions, cfg.d)
        self.layers = _transformer(cfg)
        self.null = nn.Parameter(torch.zeros(cfg.d).uniform_(-cfg.d ** -0.5, cfg.d ** -0.5))

    def forward(self, ids, pad_mask=None):
        B, J = ids.shape
        if J == 0:
            return self.null.expand(B, -1)
        if J > self.cfg.max_positions:
            raise ValueError("strategy history longer than max_positions")
        if torch.any((ids < 0) | (ids >= NUM_STRATEGIES)):
            raise ValueError("unknown strategy id in history")
        if pad_mask is None:
            pad_mask = torch.zeros_like(ids, dtype=torch.bool)
        empty = pad_mask.all(dim=1)
        # rows with no history would give an all-masked attention; unmask
        # one dummy position and replace the result with the null vector
        safe_mask = pad_mask.clone()
        safe_mask[empty, 0] = False
        pos = torch.arange(J, device=ids.device)
        x = self.embedding(ids) + self.position_embedding(pos)
        h = self.layers(x, src_key_padding_mask=safe_mask)
        pooled = pool_mean(h, safe_mask)
        return torch.where(empty.unsqueeze(-1), self.null.expand(B, -1), pooled)


def encode_context(utterances, model):
    """Encode a list of token-id utterances with the model's context encoder."""
    if not utterances:
        raise ValueError("need at least one utterance")
    ids, seg = context_layout(utterances)
    t = torch.tensor([ids], dtype=torch.long)
    hidden = model.context_encoder(t)[0]
    return SequenceEncoding(hidden, ids, seg)


def encode_strategy_history(strategy_ids, model):
    t = torch.tensor([list(strategy_ids)], dtype=torch.long).reshape(1, len(strategy_ids))
    return model.strategy_encoder(t)[0]

"""Response decoder and the sampling loop."""
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .text import BOS_ID, EOS_ID


@dataclass
class DecodingConfig:
    top_p: float = 0.9
    temperature: float = 0.7
    repetition_penalty: float = 1.0
    max_new_tokens: int = 40
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("decode.top_p must be in (0, 1]")
        if self.temperature <= 0:
            raise ValueError("decode.temperature must be positive")
        if self.repetition_penalty < 1.0:
            raise ValueError("decode.repetition_penalty must be >= 1")
        if self.max_new_tokens < 1:
            raise ValueError("decode.max_new_tokens must be >= 1")


class ResponseGenerator(nn.Module):
    """Causal transformer decoder cross-attending to [H'; V]."""

    def __init__(self, cfg, token_embedding):
        super().__init__()
        self.cfg = cfg
        self.token_embedding = token_embedding
        self.position_embedding = nn.Embedding(cfg.max_positions, cfg.d)
        layer = nn.TransformerDecoderLayer(
            cfg.d, cfg.heads, cfg.ff_dim, cfg.dropout, activation="gelu", batch_first=True)
        self.layers = nn.TransformerDecoder(layer, cfg.layers)
        self.lm_head = nn.Linear(cfg.d, cfg.vocab_size)

    def forward(self, prefix, memory, memory_pad_mask=None, prefix_pad_mask=None):
        """Next-token logits (B, Z, vocab) for every prefix position."""
        Z = prefix.shape[1]
        if Z > self.cfg.max_positions:
            raise ValueError(f"decoder prefix of {Z} tokens exceeds max_positions={self.cfg.max_positions}")
        pos = torch.arange(Z, device=prefix.device)
        x = self.token_embedding(prefix) + self.position_embedding(pos)
        causal = torch.triu(torch.ones(Z, Z, dtype=torch.bool, device=prefix.device), diagonal=1)
        h = self.layers(x, memory, tgt_mask=causal, tgt_key_padding_mask=prefix_pad_mask,
                        memory_key_padding_mask=memory_pad_mask)
        return self.lm_head(h)


def cross_attention_memory(H_prime, V):
    """Row-wise concatenation of the updated context and the description."""
    return torch.cat([H_prime, V], dim=-2)


@torch.no_grad()
def decode_step(prefix, H_prime, V, model):
    """Distribution over the vocabulary for the token after `prefix`."""
    memory = cross_attention_memory(H_prime, V).unsqueeze(0)
    ids = torch.tensor([[BOS_ID] + list(prefix)], dtype=torch.long)
    logits = model.generator(ids, memory)[0, -1]
    return torch.softmax(logits.double(), dim=-1)


def apply_repetition_penalty(logits, generated, penalty):
    """Divide positive and multiply negative logits of already-generated tokens."""
    if penalty == 1.0 or not len(generated):
        return logits
    out = logits.copy()
    idx = np.unique(np.asarray(generated, dtype=np.int64))
    vals = out[idx]
    out[idx] = np.where(vals > 0, vals / penalty, vals * penalty)
    return out


def softmax(logits):
    z = np.exp(logits - np.max(logits))
    return z / z.sum()


def nucleus(probs, top_p):
    """Token ids of the smallest most-probable set with mass >= top_p.

    Ties in probability are ordered by token id. The token whose mass
    crosses the threshold is included.
    """
    order = np.lexsort((np.arange(len(probs)), -probs))
    cum = np.cumsum(probs[order])
    k = int(np.searchsorted(cum, top_p, side="left")) + 1
    return order[: min(k, len(probs))]


def sample_token(logits, generated, cfg, rng):
    """One sampling step: temperature, repetition penalty, top-p, draw.

    Returns (token id, nucleus size).
    """
    scaled = np.asarray(logits, dtype=np.float64) / cfg.temperature
    scaled = apply_repetition_penalty(scaled, generated, cfg.repetition_penalty)
    probs = softmax(scaled)
    keep = nucleus(probs, cfg.top_p)
    p = probs[keep] / probs[keep].sum()
    return int(keep[rng.choice(len(keep), p=p)]), len(keep)


@torch.no_grad()
def generate(H_prime, V, cfg, model, trace=None):
    """Sample a response (token ids, without BOS/EOS).

    If `trace` is a list, the nucleus size of each step is appended to it.
    """
    rng = np.random.default_rng(cfg.seed)
    memory = cross_attention_memory(H_prime, V).unsqueeze(0)
    max_len = min(cfg.max_new_tokens, model.generator.cfg.max_positions - 1)
    out = []
    for _ in range(max_len):
        ids = torch.tensor([[BOS_ID] + out], dtype=torch.long)
        logits = model.generator(ids, memory)[0, -1].double().numpy()
        tok, size = sample_token(logits, out, cfg, rng)
        if trace is not None:
            trace.append(size)
        if tok == EOS_ID:
            break
        out.append(tok)
    return out

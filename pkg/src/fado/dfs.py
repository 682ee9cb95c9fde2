"""Strategy selector head: logits over the eight strategies from (s, c, r)."""
import numpy as np
import torch
from torch import nn

from .strategies import NUM_STRATEGIES


class StrategySelector(nn.Module):
    """o = MLP(tanh(W [s; c; r] + b)).

    `mlp_layers` = 1 is a single linear map d -> l; each extra layer adds a
    d -> d tanh layer in front of it. Weights use torch's default Linear
    init, uniform in +-1/sqrt(fan_in).
    """

    def __init__(self, d, mlp_layers=1, n_strategies=NUM_STRATEGIES):
        super().__init__()
        if mlp_layers < 1:
            raise ValueError("mlp_layers must be >= 1")
        self.d = d
        self.proj = nn.Linear(3 * d, d)
        hidden = []
        for _ in range(mlp_layers - 1):
            hidden += [nn.Linear(d, d), nn.Tanh()]
        self.mlp = nn.Sequential(*hidden, nn.Linear(d, n_strategies))

    def hidden(self, s, c, r):
        for name, v in (("s", s), ("c", c), ("r", r)):
            if v.shape[-1] != self.d:
                raise ValueError(f"{name} has width {v.shape[-1]}, expected {self.d}")
        return torch.tanh(self.proj(torch.cat([s, c, r], dim=-1)))

    def forward(self, s, c, r):
        return self.mlp(self.hidden(s, c, r))


def select_strategy(s, c, r, model):
    return model.dfs(s, c, r)


def strategy_probs(logits):
    """Softmax and argmax (lowest id wins ties) of a logit vector."""
    if isinstance(logits, torch.Tensor):
        logits = logits.detach().cpu().double().numpy()
    o = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(o)):
        raise ValueError("non-finite strategy logits")
    z = np.exp(o - o.max(axis=-1, keepdims=True))
    p = z / z.sum(axis=-1, keepdims=True)
    return p, np.argmax(o, axis=-1)

"""Double control reader: sigmoid read gates between strategy and context.

The context-to-strategy flow rescales strategy logits with a gate computed
from the pooled context; the strategy-to-context flow rescales every token
state with one gate computed from the strategy logits. Both are mixed with
the ungated input through residual weights beta and alpha.
"""
from dataclasses import dataclass

import torch
from torch import nn

from .strategies import NUM_STRATEGIES


@dataclass
class FlowConfig:
    alpha: float = 0.2  # strategy -> context
    beta: float = 0.2  # context -> strategy

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"dcr.{name} must lie in [0, 1], got {v}")


@dataclass
class GateOutputs:
    g_c: torch.Tensor  # (..., l)
    g_o: torch.Tensor  # (..., d)


class DoubleControlReader(nn.Module):
    def __init__(self, d, n_strategies=NUM_STRATEGIES):
        super().__init__()
        self.d = d
        self.n_strategies = n_strategies
        self.context_gate = nn.Linear(d, n_strategies)
        self.strategy_gate = nn.Linear(n_strategies, d)

    def forward(self, c, o):
        if c.shape[-1] != self.d or o.shape[-1] != self.n_strategies:
            raise ValueError(f"gate inputs must have widths {self.d} and {self.n_strategies}")
        return GateOutputs(torch.sigmoid(self.context_gate(c)), torch.sigmoid(self.strategy_gate(o)))


def control_gates(c, o, model):
    return model.dcr(c, o)


def apply_flows(o, H, gates, cfg):
    """o' = (1 - beta + beta g_c) o ; h'_t = (1 - alpha + alpha g_o) h_t.

    `H` is (..., T, d) and the same g_o is broadcast over all T positions.
    """
    if o.shape != gates.g_c.shape:
        raise ValueError("strategy gate and logits differ in shape")
    if H.shape[-1] != gates.g_o.shape[-1] or H.shape[:-2] != gates.g_o.shape[:-1]:
        raise ValueError("context gate and hidden states differ in shape")
    o_prime = (1 - cfg.beta + cfg.beta * gates.g_c) * o
    H_prime = (1 - cfg.alpha + cfg.alpha * gates.g_o).unsqueeze(-2) * H
    return o_prime, H_prime

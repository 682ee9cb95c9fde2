# %% [markdown]
# Strategy selection and the two read gates
#
# The selector maps (strategy history, pooled context, emotion) to eight
# logits. Two sigmoid gates then let the context rescale the logits and the
# logits rescale every context state. alpha and beta bound how much either
# side can be damped.

# %%
import torch

from fado.dcr import DoubleControlReader, FlowConfig, apply_flows
from fado.dfs import StrategySelector, strategy_probs
from fado.strategies import STRATEGY_NAMES

torch.manual_seed(0)
d, T = 16, 5
sel, dcr = StrategySelector(d), DoubleControlReader(d)
s, c, r = torch.randn(d), torch.randn(d), torch.randn(d)
H = torch.randn(T, d)

with torch.no_grad():
    o = sel(s, c, r)
    gates = dcr(c, o)
p, k = strategy_probs(o)
print("logits", o.numpy().round(3))
print("argmax", STRATEGY_NAMES[k], round(float(p[k]), 3))

# %%
# With alpha = beta = 0 nothing changes; at 1 the gates act alone.
for alpha, beta in [(0.0, 0.0), (0.2, 0.2), (1.0, 1.0)]:
    o_p, H_p = apply_flows(o, H, gates, FlowConfig(alpha, beta))
    ratio_o = (o_p / o).numpy()
    ratio_h = (H_p / H).numpy()
    print(f"alpha={alpha} beta={beta}: logit ratios in [{ratio_o.min():.3f}, {ratio_o.max():.3f}],"
          f" state ratios in [{ratio_h.min():.3f}, {ratio_h.max():.3f}]")

# %%
# The same state gate is applied to every position, so rows keep their
# relative layout.
o_p, H_p = apply_flows(o, H, gates, FlowConfig(0.2, 0.2))
print(torch.allclose(H_p[0] / H[0], H_p[3] / H[3]))

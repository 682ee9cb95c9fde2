# %% [markdown]
# Temperature, repetition penalty and top-p
#
# A single decoding step on a hand-made distribution, then an empirical
# check that the identity configuration draws from the raw distribution.

# %%
import numpy as np

from fado.generator import DecodingConfig, apply_repetition_penalty, nucleus, sample_token, softmax

probs = np.array([0.5, 0.3, 0.15, 0.05])
print("nucleus at 0.9:", nucleus(probs, 0.9))
print("nucleus at 0.5:", nucleus(probs, 0.5))

# %%
logits = np.log(probs)
for tau in (0.5, 0.7, 1.0, 1.5):
    print(f"tau={tau}:", softmax(logits / tau).round(3))

# %%
# Penalizing token 0 after it has been generated moves mass elsewhere.
print(softmax(apply_repetition_penalty(np.array([2.0, 1.0, 0.5, -1.0]), [0], 1.5)).round(3))

# %%
rng = np.random.default_rng(0)
cfg = DecodingConfig(top_p=1.0, temperature=1.0)
draws = [sample_token(logits, [], cfg, rng)[0] for _ in range(20000)]
print("empirical:", (np.bincount(draws, minlength=4) / len(draws)).round(3))

cfg = DecodingConfig()  # top_p 0.9, tau 0.7
draws = [sample_token(logits, [], cfg, rng)[0] for _ in range(20000)]
print("defaults: ", (np.bincount(draws, minlength=4) / len(draws)).round(3))

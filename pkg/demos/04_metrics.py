# %% [markdown]
# Automatic metrics on toy sentences

# %%
import numpy as np

from fado.metrics import bleu_n, corpus_rouge_l, distinct_n, strategy_distribution
from fado.text import tokenize

refs = [tokenize(s) for s in ["I am sorry to hear that.", "Have you talked to your friends?"]]
hyps = [tokenize(s) for s in ["I am so sorry to hear that.", "Have you told your friends?"]]

for n in (2, 3, 4):
    print(f"BLEU-{n}: {bleu_n(hyps, refs, n):.4f}")
print(f"ROUGE-L: {corpus_rouge_l(hyps, refs):.4f}")
print(f"Distinct-1/2: {distinct_n(hyps, 1):.3f} {distinct_n(hyps, 2):.3f}")

# %%
# Worked cases.
print(bleu_n([list("abc")], [list("abd")], 2), np.sqrt(1 / 3))
print(corpus_rouge_l([list("abcd")], [list("acd")]))

# %%
# Strategy use across six progress intervals. Early questions, later
# reassurance, in a synthetic pattern.
rng = np.random.default_rng(1)
progress = rng.random(5000)
strategies = np.where(progress < 0.3, 0, np.where(progress > 0.7, 4, rng.integers(0, 8, 5000)))
print(strategy_distribution(progress, strategies).round(2))

# %% [markdown]
# Feedback signals on the bundled sample
#
# Every supporter turn gets a scalar feedback score built from three parts:
# the change in the seeker's positive emotion, the change in their turn
# rating, and a conversation-level survey term.

# %%
from fado.corpus import load_corpus
from fado.emotion import LexiconEmotionScorer
from fado.feedback import compute_corpus_means, compute_feedback
from fado.stratdict import default_dictionary_path
from fado.strategies import STRATEGY_NAMES

sample = default_dictionary_path().parent / "sample_esconv.json"
convs = load_corpus(sample)
conv = convs[0]
for u in conv.utterances:
    tag = STRATEGY_NAMES[u.strategy] if u.strategy is not None else ""
    print(f"{u.index} {u.speaker:9s} {tag:28s} {u.text}")

# %%
# Missing survey fields fall back to training-split means.
means = compute_corpus_means(convs)
print(means)

# %%
# The lexicon scorer stands in for a pretrained emotion classifier. Its
# scores are probabilities of positive polarity, one per utterance.
scorer = LexiconEmotionScorer()
print(scorer.scores([u.tokens for u in conv.utterances if u.speaker == "seeker"]).round(3))

# %%
for u in conv.utterances:
    if u.speaker == "supporter" and u.index > 0:
        fb = compute_feedback(conv, u.index, scorer, corpus_means=means)
        sign = "+" if fb.positive else "-"
        print(f"turn {u.index}: de={fb.delta_e:+.3f} dr={fb.delta_r:+.3f} dc={fb.delta_c:+.2f} -> ds={fb.delta_s:+.3f} {sign}")

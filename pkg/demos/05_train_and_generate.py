# %% [markdown]
# Training a small model end to end
#
# A synthetic corpus where each strategy has its own cue word and reply.
# A small model should learn both the strategy and the reply in a few
# hundred steps on a CPU.

# %%
from fado.corpus import extract_examples
from fado.emotion import LexiconEmotionScorer
from fado.encoders import EncoderConfig
from fado.feedback import compute_corpus_means
from fado.generator import DecodingConfig
from fado.model import FADOModel, ModelConfig
from fado.pipeline import build_vocab
from fado.stratdict import StrategyDictionary
from fado.strategies import STRATEGY_NAMES
from fado.synthetic import separable_corpus
from fado.training import TrainConfig, train

convs = separable_corpus(20)
scorer = LexiconEmotionScorer(8)
examples = [e for c in convs for e in extract_examples(c, 64, scorer, corpus_means=compute_corpus_means(convs))]
print(examples[0].history[0].text, "->", examples[0].target.text)

# %%
dictionary = StrategyDictionary.default()
vocab = build_vocab(convs, dictionary)
enc = EncoderConfig(d=32, layers=1, heads=2, vocab_size=len(vocab), max_positions=128,
                    emotion_dim=8, ff_dim=64, dropout=0.0)
model = FADOModel(ModelConfig(encoder=enc), vocab, dictionary, scorer)
records = train(examples, model, TrainConfig(learning_rate=3e-3, warmup_steps=10, epochs=1000,
                                            batch_size=4, max_steps=200))
for rec in records[::40] + records[-1:]:
    print(f"step {rec['step']:3d} loss {rec['loss']:.3f} acc {rec['strategy_acc']:.2f} L2/token {rec['l2_per_token']:.3f}")

# %%
for ex in examples[:8]:
    strategy, tokens = model.respond([u.tokens for u in ex.history], ex.strategy_history,
                                     DecodingConfig(max_new_tokens=10))
    print(f"{ex.history[0].text:32s} {STRATEGY_NAMES[strategy]:28s} {' '.join(vocab.decode(tokens))}")

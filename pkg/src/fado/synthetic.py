"""Small synthetic corpora for overfit checks and demos.

Each conversation is one seeker turn followed by one supporter turn. The
seeker turn carries a cue word tied to the supporter's strategy, so the
strategy is recoverable from the history alone, and each strategy always
answers with the same short phrase.
"""
import random

from .corpus import Conversation, SurveyScores, Utterance
from .strategies import NUM_STRATEGIES

CUES = ["why", "said", "sad", "same", "ok", "try", "facts", "hello"]
REPLIES = [
    "what happened next ?",
    "so you lost your job .",
    "you sound very sad .",
    "i felt that too .",
    "you will be fine .",
    "maybe take a walk .",
    "sleep helps the mind .",
    "nice to meet you .",
]
FILLER = ["i", "feel", "really", "today", "my", "job", "friend", "week", "so", "just"]


def separable_corpus(n=20, seed=0):
    rng = random.Random(seed)
    convs = []
    for i in range(n):
        k = i % NUM_STRATEGIES
        words = rng.sample(FILLER, 4)
        words.insert(rng.randrange(5), CUES[k])
        utts = (
            Utterance("seeker", " ".join(words), 0),
            Utterance("supporter", REPLIES[k], 1, strategy=k),
        )
        convs.append(Conversation(f"syn{i}", utts, SurveyScores(4, 2, 4, 4)))
    return convs

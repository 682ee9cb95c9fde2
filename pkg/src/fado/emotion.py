"""Emotion scorers.

A scorer maps a list of tokenized utterances to per-token emotion features E
(laid out like the context: [CLS] u1 [SEP] u2 ... uM) and to one
positive-polarity score in [0, 1] per utterance. Any object with the same
`__call__` signature can be plugged in place of the default lexicon model,
e.g. a wrapper around a pretrained emotion recognizer.
"""
import zlib

import numpy as np
from sklearn.linear_model import LogisticRegression

POSITIVE_WORDS = (
    "better", "glad", "good", "great", "happy", "hope", "hopeful", "relief", "relieved",
    "calm", "thanks", "thank", "helpful", "helped", "love", "nice", "appreciate", "okay",
    "fine", "confident", "excited", "grateful", "encouraged", "proud", "safe", "strong",
    "support", "supported", "wonderful", "comfortable", "enjoy", "positive", "peace",
    "optimistic", "cheerful", "improve", "improved", "lucky", "awesome", "pleased",
)
NEGATIVE_WORDS = (
    "sad", "depressed", "anxious", "anxiety", "worried", "worry", "stress", "stressed",
    "afraid", "scared", "angry", "upset", "lonely", "alone", "hurt", "pain", "cry",
    "crying", "hopeless", "tired", "exhausted", "bad", "terrible", "awful", "hate",
    "lost", "fail", "failed", "fear", "nervous", "frustrated", "miserable", "unhappy",
    "sorry", "difficult", "hard", "struggle", "struggling", "overwhelmed", "panic",
)


class LexiconEmotionScorer:
    """Logistic-regression polarity model fit on a small word lexicon."""

    def __init__(self, dim=16, seed=0, n_synthetic=400):
        if dim < 2:
            raise ValueError("emotion feature dim must be >= 2")
        self.dim = dim
        self.seed = seed
        words = list(POSITIVE_WORDS) + list(NEGATIVE_WORDS)
        index = {w: i for i, w in enumerate(words)}
        rng = np.random.default_rng(seed)
        docs, labels = [], []
        for i, w in enumerate(words):
            x = np.zeros(len(words))
            x[i] = 1
            docs.append(x)
            labels.append(int(w in POSITIVE_WORDS))
        for _ in range(n_synthetic):
            picked = rng.choice(len(words), size=rng.integers(1, 5), replace=True)
            n_pos = sum(words[j] in POSITIVE_WORDS for j in picked)
            n_neg = len(picked) - n_pos
            if n_pos == n_neg:
                continue
            x = np.zeros(len(words))
            np.add.at(x, picked, 1)
            docs.append(x)
            labels.append(int(n_pos > n_neg))
        clf = LogisticRegression(C=10.0, random_state=seed, max_iter=1000)
        clf.fit(np.array(docs), np.array(labels))
        self.weights = {w: float(clf.coef_[0, index[w]]) for w in words}
        self.intercept = float(clf.intercept_[0])
        self._cache = {}

    def _logit(self, tokens):
        return self.intercept + sum(self.weights.get(t, 0.0) for t in tokens)

    def scores(self, utterances):
        logits = np.array([self._logit(toks) for toks in utterances], dtype=float)
        return 1.0 / (1.0 + np.exp(-logits))

    def token_vector(self, token):
        vec = self._cache.get(token)
        if vec is None:
            rng = np.random.default_rng(zlib.crc32(token.encode("utf-8")) ^ self.seed)
            vec = np.empty(self.dim)
            vec[:-1] = rng.standard_normal(self.dim - 1) / np.sqrt(self.dim - 1)
            vec[-1] = self.weights.get(token, 0.0)
            self._cache[token] = vec
        return vec

    def features(self, utterances):
        rows = [np.zeros(self.dim)]  # [CLS]
        for i, toks in enumerate(utterances):
            if i > 0:
                rows.append(np.zeros(self.dim))  # [SEP]
            rows.extend(self.token_vector(t) for t in toks)
        return np.stack(rows)

    def __call__(self, utterances):
        return self.features(utterances), self.scores(utterances)

    def to_dict(self):
        return {"kind": "lexicon", "dim": self.dim, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(dim=d["dim"], seed=d["seed"])
